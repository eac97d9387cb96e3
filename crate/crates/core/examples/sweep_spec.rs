//! Run one of the shipped sweep specs (default: the coplanar rotation scan)
//! and write its outputs into the system temp directory.

use std::path::PathBuf;

use ringmodes::sweeps::{run_sweep, write_outputs, SweepSpec};

fn main() -> ringmodes::error::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sweeps");
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| data.join("delta_coplanar.json"));
    let spec = SweepSpec::from_file(&path)?;
    let base = path.parent().unwrap_or(&data).to_path_buf();
    let outcome = run_sweep(&spec, &base, None)?;
    let spot = outcome.spot_check()?;
    let dir = std::env::temp_dir().join("ringmodes_sweeps");
    for p in write_outputs(&outcome, &spec, &dir, Some(spot))? {
        println!("wrote {}", p.display());
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.summary(Some(spot))).unwrap()
    );
    Ok(())
}
