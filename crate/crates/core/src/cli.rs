//! Command-line front end. The `ringmodes` binary is a thin wrapper around [`run`].

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bloch::{band_structure, BandStructure, ModeRecord};
use crate::error::{Error, Result};
use crate::fields::{mode_field_map, write_field_map, Axis, FieldMapMeta, GridSpec, ModeSelector, Plane};
use crate::geometry::{
    build_stack, load_array_file, read_array_file, EmitterArray, Polarization, RingSpec, FILE_SYMMETRY_TOL,
};
use crate::oracle::cross_check;
use crate::sweeps::{code_version, run_sweep, write_outputs, SweepSpec};

/// Default oracle tolerance in units of `Γ0`.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "ringmodes",
    version,
    about = "Collective eigenmodes of rings of dipole-coupled emitters"
)]
pub struct Cli {
    /// Geometry file (JSON).
    #[arg(long, global = true)]
    pub geometry: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Reserved. Every computation is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band structure as CSV plus a JSON summary.
    Spectrum {
        #[command(flatten)]
        source: Source,
        /// Output file stem.
        #[arg(long, default_value = "spectrum")]
        stem: String,
    },
    /// Compare the Bloch solver against dense diagonalization.
    OracleCheck {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = ORACLE_TOL)]
        tol: f64,
        #[arg(long, default_value = "oracle")]
        stem: String,
    },
    /// Field intensity of one mode on a plane.
    Fieldmap {
        #[command(flatten)]
        source: Source,
        /// Mode selector, e.g. `m=1,sym=symmetric` or `m=2,branch=0`.
        #[arg(long)]
        mode: String,
        /// Normal of the cut plane.
        #[arg(long, default_value = "z")]
        plane: Axis,
        /// Position of the cut plane along its normal, in wavelengths.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        offset: f64,
        /// Half-width of the square map, in wavelengths.
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        /// Samples per direction.
        #[arg(long, default_value_t = crate::fields::DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long)]
        stem: Option<String>,
    },
    /// Run a sweep spec; `--geometry` overrides the spec's template.
    Sweep { spec: PathBuf },
    /// Parse a geometry and report its symmetry.
    ValidateGeometry {
        #[command(flatten)]
        source: Source,
    },
}

/// Geometry from `--geometry` or from one or more inline `--ring` specs.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Inline ring, e.g. `N=20,R=0.16,pol=transverse`. Repeat to stack rings.
    /// Keys: N, R or d (spacing), z, delta, pol, theta, phi, detuning; lengths
    /// in wavelengths, angles in radians.
    #[arg(long = "ring")]
    pub rings: Vec<RingArg>,
}

/// Parsed `--ring` value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingArg {
    pub n_cells: usize,
    pub radius: Option<f64>,
    pub spacing: Option<f64>,
    pub z: f64,
    pub delta: f64,
    pub polarization: Polarization,
    pub detuning: f64,
}

impl RingArg {
    pub fn spec(&self) -> RingSpec {
        let base = match (self.radius, self.spacing) {
            (Some(r), _) => RingSpec::new(self.n_cells, r),
            (None, Some(d)) => RingSpec::with_spacing(self.n_cells, d),
            (None, None) => unreachable!("checked while parsing"),
        };
        base.z(self.z)
            .rotated(self.delta)
            .polarization(self.polarization)
            .detuned(self.detuning)
    }
}

impl FromStr for RingArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Validation(format!("--ring '{s}': {msg}"));
        let mut n_cells = None;
        let mut out = RingArg {
            n_cells: 0,
            radius: None,
            spacing: None,
            z: 0.0,
            delta: 0.0,
            polarization: Polarization::Transverse,
            detuning: 0.0,
        };
        let (mut theta, mut phi) = (None, None);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("'{part}' is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<f64>().map_err(|_| bad(format!("bad number '{v}' for {k}")));
            match k {
                "N" | "n" => n_cells = Some(v.parse::<usize>().map_err(|_| bad(format!("bad N '{v}'")))?),
                "R" | "r" | "radius" => out.radius = Some(num()?),
                "d" | "spacing" => out.spacing = Some(num()?),
                "z" | "Z" => out.z = num()?,
                "delta" => out.delta = num()?,
                "detuning" => out.detuning = num()?,
                "pol" | "polarization" => out.polarization = v.parse()?,
                "theta" => theta = Some(num()?),
                "phi" => phi = Some(num()?),
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        out.n_cells = n_cells.ok_or_else(|| bad("missing N".into()))?;
        match (out.radius, out.spacing) {
            (None, None) => return Err(bad("needs R or d".into())),
            (Some(_), Some(_)) => return Err(bad("give R or d, not both".into())),
            _ => {}
        }
        if theta.is_some() || phi.is_some() {
            out.polarization = Polarization::Angles {
                theta: theta.unwrap_or(0.0),
                phi: phi.unwrap_or(0.0),
            };
        }
        Ok(out)
    }
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub geometry_hash: Option<String>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    /// Seconds.
    pub wall_time: f64,
}

impl RunManifest {
    /// Write `<stem>.manifest.json` into `dir`.
    pub fn write(&mut self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let path = dir.join(format!("{stem}.manifest.json"));
        self.outputs.push(path.clone());
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

struct Loaded {
    array: EmitterArray,
    origin: Value,
}

fn load(geometry: Option<&Path>, source: &Source, require_symmetry: bool) -> Result<Loaded> {
    match (geometry, source.rings.is_empty()) {
        (Some(_), false) => Err(Error::validation("give either --geometry or --ring, not both")),
        (None, true) => Err(Error::validation("no geometry: pass --geometry FILE or --ring SPEC")),
        (Some(path), true) => {
            let array = if require_symmetry {
                load_array_file(path)?
            } else {
                read_array_file(path)?
            };
            Ok(Loaded {
                array,
                origin: json!({ "geometry_file": path }),
            })
        }
        (None, false) => {
            let specs: Vec<RingSpec> = source.rings.iter().map(RingArg::spec).collect();
            Ok(Loaded {
                array: build_stack(&specs)?,
                origin: json!({ "rings": source.rings }),
            })
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Band CSV: one row per mode, in `m` then branch order.
pub fn spectrum_csv(bands: &BandStructure) -> String {
    let mut out = String::from("m,branch,omega_over_Gamma0,gamma_over_Gamma0");
    for c in 1..=bands.n_components {
        out += &format!(",occupation_component_{c}");
    }
    out.push('\n');
    for r in &bands.modes {
        out += &format!("{},{},{},{}", r.m, r.branch, fmt(r.omega), fmt(r.gamma));
        for o in &r.occupations {
            out += &format!(",{}", fmt(*o));
        }
        out.push('\n');
    }
    out
}

fn mode_json(r: &ModeRecord) -> Value {
    json!({ "m": r.m, "branch": r.branch, "omega": r.omega, "gamma": r.gamma, "occupations": r.occupations })
}

/// Summary written next to the band CSV.
pub fn spectrum_summary(array: &EmitterArray, bands: &BandStructure) -> Value {
    let (re, im) = bands.sum_rule_residuals();
    json!({
        "geometry_hash": array.geometry_hash(),
        "n_cells": bands.n_cells,
        "n_components": bands.n_components,
        "rows": bands.modes.len(),
        "darkest": mode_json(bands.darkest()),
        "brightest": mode_json(bands.brightest()),
        "sum_rule_residuals": { "omega": re, "gamma": im },
    })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Numerical(format!("thread pool: {e}")))
}

/// Run one command. Human-readable progress goes to stdout; the manifest
/// lists every file written.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    let start = Instant::now();
    let (mut manifest, stem) = pool(cli.threads)?.install(|| dispatch(cli))?;
    manifest.wall_time = start.elapsed().as_secs_f64();
    manifest.write(&cli.out, &stem)?;
    Ok(manifest)
}

fn base_config(cli: &Cli) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("threads".into(), json!(cli.threads));
    m.insert("seed".into(), json!(cli.seed));
    m.insert("out".into(), json!(cli.out));
    m
}

fn manifest(command: &str, config: serde_json::Map<String, Value>, hash: Option<String>) -> RunManifest {
    RunManifest {
        command: command.into(),
        config: Value::Object(config),
        geometry_hash: hash,
        outputs: Vec::new(),
        version: code_version().into(),
        wall_time: 0.0,
    }
}

fn dispatch(cli: &Cli) -> Result<(RunManifest, String)> {
    let out = &cli.out;
    let geometry = cli.geometry.as_deref();
    let mut config = base_config(cli);
    match &cli.command {
        Command::Spectrum { source, stem } => {
            let g = load(geometry, source, true)?;
            let bands = band_structure(&g.array)?;
            std::fs::create_dir_all(out)?;
            let csv = out.join(format!("{stem}.csv"));
            let js = out.join(format!("{stem}.json"));
            std::fs::write(&csv, spectrum_csv(&bands))?;
            let summary = spectrum_summary(&g.array, &bands);
            write_json(&js, &summary)?;
            let d = bands.darkest();
            let b = bands.brightest();
            println!(
                "{} modes; darkest m={} branch={} gamma={:e}; brightest m={} branch={} gamma={:e}",
                bands.modes.len(),
                d.m,
                d.branch,
                d.gamma,
                b.m,
                b.branch,
                b.gamma
            );
            config.insert("source".into(), g.origin);
            let mut m = manifest("spectrum", config, Some(g.array.geometry_hash()));
            m.outputs = vec![csv, js];
            Ok((m, stem.clone()))
        }
        Command::OracleCheck { source, tol, stem } => {
            let g = load(geometry, source, false)?;
            let check = cross_check(&g.array)?;
            let verdict = check.verdict(*tol);
            match check.max_deviation {
                Some(d) => println!("max eigenvalue deviation: {d:e} (allowed {:e})", check.allowed(*tol)),
                None => {
                    let (dev, _, _) = g.array.symmetry_deviation();
                    println!("array is not rotationally symmetric (mismatch {dev:e}); Bloch path skipped");
                }
            }
            println!("worst relative residual: {:e}", check.worst_residual);
            println!("{verdict}");
            std::fs::create_dir_all(out)?;
            let js = out.join(format!("{stem}.json"));
            let mut report = serde_json::to_value(&check).map_err(|e| Error::Numerical(e.to_string()))?;
            report["verdict"] = json!(verdict);
            report["tolerance"] = json!(tol);
            report["allowed_deviation"] = json!(check.allowed(*tol));
            write_json(&js, &report)?;
            config.insert("source".into(), g.origin);
            config.insert("tol".into(), json!(tol));
            let mut m = manifest("oracle-check", config, Some(g.array.geometry_hash()));
            m.outputs = vec![js];
            if verdict == "FAIL" {
                m.write(out, stem)?;
                return Err(Error::Numerical(format!(
                    "Bloch and dense spectra differ by {:e} > {:e}",
                    check.max_deviation.unwrap_or(f64::NAN),
                    check.allowed(*tol)
                )));
            }
            Ok((m, stem.clone()))
        }
        Command::Fieldmap {
            source,
            mode,
            plane,
            offset,
            half_width,
            resolution,
            stem,
        } => {
            let g = load(geometry, source, true)?;
            let selector = ModeSelector::parse(mode)?;
            let bands = band_structure(&g.array)?;
            let record = selector.resolve(&bands)?;
            let plane = Plane {
                axis: *plane,
                offset: *offset,
            };
            let spec = GridSpec::centered(plane, *half_width).with_resolution(*resolution, *resolution);
            let grid = mode_field_map(&g.array, record, &spec)?;
            let meta = FieldMapMeta::new(&g.array, selector, record, &grid);
            let stem = stem.clone().unwrap_or_else(|| default_map_stem(&selector, &plane));
            let (csv, js) = write_field_map(out, &stem, &grid, &meta)?;
            println!(
                "mode {} (omega={:e}, gamma={:e}); max intensity {:e}",
                selector.describe(),
                record.omega,
                record.gamma,
                grid.max_intensity()
            );
            config.insert("source".into(), g.origin);
            config.insert("mode".into(), json!(selector));
            config.insert("grid".into(), json!(spec));
            let mut m = manifest("fieldmap", config, Some(g.array.geometry_hash()));
            m.outputs = vec![csv, js];
            Ok((m, stem))
        }
        Command::Sweep { spec } => {
            let parsed = SweepSpec::from_file(spec)?;
            let base_dir = spec.parent().unwrap_or_else(|| Path::new("."));
            let override_array = geometry.map(load_array_file).transpose()?;
            let outcome = run_sweep(&parsed, base_dir, override_array.as_ref())?;
            let spot = outcome.spot_check()?;
            if spot.mismatches > 0 {
                return Err(Error::Numerical(format!(
                    "{} of {} spot-checked sweep points disagree with isolated runs",
                    spot.mismatches, spot.checked
                )));
            }
            let written = write_outputs(&outcome, &parsed, out, Some(spot))?;
            let r = outcome.result();
            println!("{} sweep '{}': {} records", r.kind, parsed.stem(), r.records.len());
            config.insert("spec_file".into(), json!(spec));
            config.insert("spec".into(), json!(parsed));
            if let Some(p) = geometry {
                config.insert("geometry_override".into(), json!(p));
            }
            let mut m = manifest("sweep", config, r.provenance.geometry_hash.clone());
            m.outputs = written;
            Ok((m, parsed.stem()))
        }
        Command::ValidateGeometry { source } => {
            let g = load(geometry, source, false)?;
            let a = &g.array;
            let (dev, _, _) = a.symmetry_deviation();
            let symmetric = a.is_symmetric(FILE_SYMMETRY_TOL);
            let report = json!({
                "geometry_hash": a.geometry_hash(),
                "n_cells": a.n_cells(),
                "n_components": a.n_components(),
                "emitters": a.len(),
                "lambda_nm": a.lambda_nm(),
                "symmetry_deviation": dev,
                "symmetric": symmetric,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            config.insert("source".into(), g.origin);
            let mut m = manifest("validate-geometry", config, Some(a.geometry_hash()));
            if !symmetric {
                m.write(out, "validate")?;
                a.check_symmetry(FILE_SYMMETRY_TOL)?;
            }
            Ok((m, "validate".into()))
        }
    }
}

fn default_map_stem(sel: &ModeSelector, plane: &Plane) -> String {
    let mut s = format!("fieldmap_m{}", sel.m);
    if let Some(b) = sel.branch {
        s += &format!("_b{b}");
    }
    if let Some(p) = sel.symmetry {
        s += &format!("_{}", p.as_str());
    }
    let axis = match plane.axis {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
    };
    s + &format!("_{axis}{}", plane.offset)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
