//! Closed-form limits: infinite chains against a large ring, and the flat-band
//! polarization angle.

use std::f64::consts::PI;

use ringmodes::analytics::{flat_band_angle, infinite_chain_curve, ring_momentum, ChainPolarization};
use ringmodes::bloch::band_structure;
use ringmodes::geometry::{build_ring, Polarization, RingSpec};

fn main() -> ringmodes::error::Result<()> {
    let (n, d) = (200, 0.27);
    for (pol, chain) in [
        (Polarization::Radial, ChainPolarization::Transverse),
        (Polarization::Tangential, ChainPolarization::Longitudinal),
    ] {
        let bands = band_structure(&build_ring(&RingSpec::with_spacing(n, d).polarization(pol))?)?;
        let ms: Vec<i64> = (0..=n as i64 / 2).step_by(10).collect();
        let ks: Vec<f64> = ms.iter().map(|&m| ring_momentum(m, n, d)).collect();
        let curve = infinite_chain_curve(d, chain, &ks)?;
        println!("{} ring (N = {n}, d = {d}λ) against the {chain:?} chain", pol.name());
        for (m, c) in ms.iter().zip(&curve) {
            let r = bands.mode(*m, 0).unwrap();
            println!(
                "  m = {m:>3}  kd/π = {:.3}  Γ ring {:>9.3e}  chain {:>9.3e}",
                c.k * d / PI,
                r.gamma,
                c.gamma
            );
        }
    }

    let width = |n: usize, pol: Polarization| -> ringmodes::error::Result<f64> {
        let bands = band_structure(&build_ring(&RingSpec::with_spacing(n, 0.02).polarization(pol))?)?;
        let (lo, hi) = bands
            .modes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.omega), hi.max(r.omega))
            });
        Ok(hi - lo)
    };
    for n in [9, 30, 100] {
        let a = flat_band_angle(n)[0];
        let flat = width(
            n,
            Polarization::Angles {
                theta: a.theta,
                phi: a.phi,
            },
        )?;
        println!(
            "N = {n:>3}, d = 0.02λ: θ = {:.4} gives band width {flat:.3e}, transverse {:.3e}",
            a.theta,
            width(n, Polarization::Transverse)?
        );
    }
    Ok(())
}
