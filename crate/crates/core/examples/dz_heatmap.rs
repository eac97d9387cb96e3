//! Darkest mode of two N = 9 rings over lattice constant and ring separation.
//! Prints a coarse character map: `a` antisymmetric, `s` symmetric, followed
//! by |m|; upper-case when Γ_min < 1e-3 Γ0.

use ringmodes::bloch::Parity;
use ringmodes::geometry::Polarization;
use ringmodes::sweeps::{dz_heatmap, AxisSpec, HeatmapSpec};

fn main() -> ringmodes::error::Result<()> {
    let mut spec = HeatmapSpec::new(9, Polarization::Transverse);
    spec.d_axis = AxisSpec::linear("d", 0.05, 1.0, 20);
    spec.z_axis = AxisSpec::linear("z", 0.05, 1.0, 20);
    let scan = dz_heatmap(&spec)?;
    let zs = spec.z_axis.values()?;
    print!("  d\\z");
    for z in &zs {
        print!(" {z:>4.2}");
    }
    println!();
    for row in scan.result.records.chunks(zs.len()) {
        print!("{:>5.2}", row[0].params[0]);
        for rec in row {
            let p = match rec.parity {
                Some(Parity::Antisymmetric) => 'a',
                _ => 's',
            };
            let p = if rec.gamma_min < 1e-3 {
                p.to_ascii_uppercase()
            } else {
                p
            };
            print!("   {p}{}", rec.m.abs());
        }
        println!();
    }
    Ok(())
}
