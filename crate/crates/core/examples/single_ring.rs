//! Band structure of a single ring for the three canonical polarizations,
//! next to the small-ring (Dicke) rates and the nearest-neighbour dispersion.

use ringmodes::analytics::{dicke_rates, light_line_m, nn_dispersion};
use ringmodes::bloch::band_structure;
use ringmodes::geometry::{build_ring, Polarization, RingSpec};

fn main() -> ringmodes::error::Result<()> {
    let (n, d) = (20, 0.05);
    for pol in Polarization::CANONICAL {
        let ring = build_ring(&RingSpec::with_spacing(n, d).polarization(pol))?;
        let bands = band_structure(&ring)?;
        let (theta, phi) = pol.angles();
        let dicke = dicke_rates(n, theta, phi);
        let nn = nn_dispersion(n, d, theta, phi);
        println!("{} ring, N = {n}, d = {d}λ", pol.name());
        println!(
            "{:>4} {:>12} {:>12} {:>10} {:>12}",
            "m", "Ω/Γ0", "nn Ω/Γ0", "Γ/Γ0", "Dicke Γ/Γ0"
        );
        for (r, (_, g)) in bands.modes.iter().zip(&dicke) {
            println!(
                "{:>4} {:>12.4} {:>12.4} {:>10.3e} {:>12.3}",
                r.m,
                r.omega,
                nn.at(r.m),
                r.gamma,
                g
            );
        }
        println!();
    }

    // larger ring: modes beyond the light line are guided and dark
    let (n, d) = (100, 1.0 / 3.0);
    let ring = build_ring(&RingSpec::with_spacing(n, d).polarization(Polarization::Radial))?;
    let bands = band_structure(&ring)?;
    let b = bands.brightest();
    println!(
        "radial N = {n}, d = λ/3: light line m0 = {:.1}, brightest m = {} (Γ = {:.2}), darkest Γ = {:.2e}",
        light_line_m(n, d),
        b.m,
        b.gamma,
        bands.darkest().gamma
    );
    Ok(())
}
