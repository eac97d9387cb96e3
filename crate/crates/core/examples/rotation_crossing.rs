//! Relative rotation of two rings: avoided crossing of the m = 4 branches and
//! the broad minimum of the darkest rate.

use ringmodes::geometry::{build_stack, EmitterArray, Polarization, RingSpec};
use ringmodes::sweeps::{default_delta_axis, delta_scan};

fn run(name: &str, base: &EmitterArray) -> ringmodes::error::Result<()> {
    let deltas = default_delta_axis(base.n_cells(), 200).values()?;
    let scan = delta_scan(base, 1, 4, &deltas, false)?;
    println!("{name}");
    for c in &scan.candidates {
        println!(
            "  gap minimum: {}{}",
            c.describe(),
            if c.swapped { "" } else { " (no swap)" }
        );
    }
    if let Some(c) = &scan.crossing {
        println!("  crossing at δ_c = {:.5}", c.critical_value);
    }
    if let Some(b) = &scan.broad_minimum {
        println!(
            "  broad minimum of Γ_min at δ = {:.5} (π/N = {:.5}), Γ = {:.2e}, η = {:.3}",
            b.param,
            std::f64::consts::PI / base.n_cells() as f64,
            b.gamma_min,
            b.eta.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn main() -> ringmodes::error::Result<()> {
    let r = 0.05;
    let ring = RingSpec::new(9, r).polarization(Polarization::Transverse);
    run("transverse rings, Z = 0.1R", &build_stack(&[ring, ring.z(0.1 * r)])?)?;
    let outer = RingSpec::new(9, r).polarization(Polarization::Tangential);
    let inner = RingSpec::new(9, 0.9 * r).polarization(Polarization::Tangential);
    run("coplanar tangential rings, R2 = 0.9R1", &build_stack(&[outer, inner])?)
}
