//! LH2 antenna: three-band structure and the uniform-scale crossing of the
//! upper two bands.

use ringmodes::bloch::{band_structure, LatticeCouplings};
use ringmodes::geometry::load_array_file;
use ringmodes::sweeps::{alpha_scan, AxisSpec};

fn main() -> ringmodes::error::Result<()> {
    let a = load_array_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/lh2.json"))?;
    let c = LatticeCouplings::new(&a)?;
    println!(
        "couplings (Γ0): B850 α-β {:.3e}, β-α next cell {:.3e}, B850-B800 {:.3e}",
        c.get(0, 0, 1).re,
        c.get(1, 1, 0).re,
        c.get(0, 0, 2).re
    );
    let bands = band_structure(&a)?;
    println!(
        "{:>3} {:>6} {:>13} {:>10}   occupations (α, β, B800)",
        "m", "band", "Ω/Γ0", "Γ/Γ0"
    );
    for r in &bands.modes {
        println!(
            "{:>3} {:>6} {:>13.5e} {:>10.3e}   {:.3} {:.3} {:.3}",
            r.m, r.branch, r.omega, r.gamma, r.occupations[0], r.occupations[1], r.occupations[2]
        );
    }
    let alphas = AxisSpec::linear("alpha", 0.3, 1.5, 241).values()?;
    let scan = alpha_scan(&a, &alphas, &[1, 4], (1, 2), false)?;
    for s in &scan.sectors {
        match &s.crossing {
            Some(c) => println!("m = {}: {}", s.m, c.describe()),
            None => println!("m = {}: no crossing in [0.3, 1.5]", s.m),
        }
    }
    Ok(())
}
