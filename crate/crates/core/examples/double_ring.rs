//! Two identical stacked rings: symmetric and antisymmetric bands against the
//! isolated ring.

use ringmodes::bloch::{band_structure, split_identical_rings};
use ringmodes::geometry::{build_ring, build_stack, Polarization, RingSpec};

fn main() -> ringmodes::error::Result<()> {
    let (n, r) = (9, 0.05);
    for pol in Polarization::CANONICAL {
        let ring = RingSpec::new(n, r).polarization(pol);
        let single = band_structure(&build_ring(&ring)?)?;
        let pair = build_stack(&[ring, ring.z(0.5 * r)])?;
        println!("{}: N = {n}, R = {r}λ, Z = R/2", pol.name());
        println!(
            "{:>3} {:>11} {:>11} {:>11} {:>10} {:>10} {:>10}",
            "m", "Ω single", "Ω sym", "Ω anti", "Γ single", "Γ sym", "Γ anti"
        );
        for m in ringmodes::bloch::canonical_ms(n) {
            let s = split_identical_rings(&pair, m)?;
            let one = single.mode(m, 0).unwrap();
            println!(
                "{m:>3} {:>11.3} {:>11.3} {:>11.3} {:>10.3e} {:>10.3e} {:>10.3e}",
                one.omega,
                s.symmetric.omega,
                s.antisymmetric.omega,
                one.gamma,
                s.symmetric.gamma,
                s.antisymmetric.gamma
            );
        }
        let dark = band_structure(&pair)?;
        let d = dark.darkest();
        println!(
            "darkest pair mode: m = {}, branch {}, Γ = {:.3e}\n",
            d.m, d.branch, d.gamma
        );
    }
    Ok(())
}
