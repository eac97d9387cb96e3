//! Field intensity of single-ring and double-ring modes, written as CSV maps
//! into the system temp directory.

use ringmodes::bloch::{band_structure, mode_amplitudes, split_identical_rings};
use ringmodes::fields::{
    field_at, intensity, mode_field_map, write_field_map, Axis, FieldMapMeta, GridSpec, ModeSelector, Plane,
};
use ringmodes::geometry::{build_ring, build_stack, Polarization, RingSpec};
use ringmodes::greens::Vec3;

fn main() -> ringmodes::error::Result<()> {
    let spec = RingSpec::with_spacing(9, 0.1).polarization(Polarization::Tangential);
    let ring = build_ring(&spec)?;
    let stack = build_stack(&[spec, spec.z(0.2)])?;
    let r = spec.radius;
    let dir = std::env::temp_dir().join("ringmodes_field_maps");

    let bands = band_structure(&stack)?;
    for sel in ["m=1,sym=symmetric", "m=1,sym=antisymmetric", "m=4,sym=antisymmetric"] {
        let selector = ModeSelector::parse(sel)?;
        let mode = selector.resolve(&bands)?;
        let grid = GridSpec::centered(
            Plane {
                axis: Axis::Y,
                offset: 0.0,
            },
            1.0,
        )
        .with_resolution(101, 101);
        let map = mode_field_map(&stack, mode, &grid)?;
        let stem = format!("stack_{}", sel.replace([',', '='], "_"));
        let (csv, _) = write_field_map(&dir, &stem, &map, &FieldMapMeta::new(&stack, selector, mode, &map))?;
        println!(
            "{sel}: Γ = {:.3e}, max intensity {:.3e} -> {}",
            mode.gamma,
            map.max_intensity(),
            csv.display()
        );
    }

    let single = band_structure(&ring)?;
    let at =
        |m: i64, p: Vec3| intensity(&field_at(&ring, &mode_amplitudes(&ring, single.mode(m, 0).unwrap()), &p).unwrap());
    println!(
        "ring m = 1: centre {:.3e}, (3R, 0, 0) {:.3e}",
        at(1, Vec3::zeros()),
        at(1, Vec3::new(3.0 * r, 0.0, 0.0))
    );
    println!(
        "ring m = 4: (0, 0, λ) {:.3e}, (R + λ, 0, 0) {:.3e}",
        at(4, Vec3::new(0.0, 0.0, 1.0)),
        at(4, Vec3::new(r + 1.0, 0.0, 0.0))
    );

    let split = split_identical_rings(&stack, 1)?;
    let mid = Vec3::new(0.0, 0.0, 0.1);
    let i_plus = intensity(&field_at(&stack, &mode_amplitudes(&stack, &split.symmetric), &mid)?);
    let i_minus = intensity(&field_at(&stack, &mode_amplitudes(&stack, &split.antisymmetric), &mid)?);
    println!("midplane centre, m = 1: symmetric {i_plus:.3e}, antisymmetric {i_minus:.3e}");
    Ok(())
}
