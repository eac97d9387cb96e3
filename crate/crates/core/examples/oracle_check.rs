//! Bloch solver against dense diagonalization, including a geometry whose
//! rotational symmetry is broken by one displaced emitter.

use ringmodes::geometry::{build_ring, build_stack, EmitterArray, Polarization, RingSpec};
use ringmodes::greens::Vec3;
use ringmodes::oracle::{cross_check, CrossCheck};

fn report(name: &str, c: &CrossCheck) {
    println!(
        "{name:<28} dim {:>3}  deviation {:>10}  residual {:.1e}  exceptional {}  -> {}",
        c.dim,
        c.max_deviation.map_or("-".into(), |d| format!("{d:.2e}")),
        c.worst_residual,
        c.n_exceptional,
        c.verdict(1e-9)
    );
}

fn main() -> ringmodes::error::Result<()> {
    for pol in Polarization::CANONICAL {
        let r = RingSpec::new(9, 0.05).polarization(pol);
        report(&format!("ring {}", pol.name()), &cross_check(&build_ring(&r)?)?);
        let pair = build_stack(&[r, r.z(0.025)])?;
        report(&format!("pair {}", pol.name()), &cross_check(&pair)?);
    }
    let ring = build_ring(&RingSpec::new(12, 0.2))?;
    let mut positions = ring.positions().to_vec();
    positions[3] += Vec3::new(0.01, 0.0, 0.0);
    let broken = EmitterArray::new(12, 1, positions, ring.dipoles().to_vec(), ring.detunings().to_vec())?;
    report("ring with a displaced site", &cross_check(&broken)?);
    Ok(())
}
