//! Scattered field of a collective excitation.
//!
//! For amplitudes `a_i` the positive-frequency field is
//! `E(r) = Σ_i a_i G(r − r_i) · p̂_i`, in units where the dipole prefactor is
//! one. Maps are evaluated on planar cuts through the array.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{mode_amplitudes, BandStructure, ModeRecord, Parity};
use crate::error::{Error, Result};
use crate::geometry::EmitterArray;
use crate::greens::{green_tensor_with_eps, Vec3, COINCIDENT_EPS};

type C = Complex64;

/// Samples closer than this to an emitter are flagged and left out of maps.
pub const EXCLUSION_RADIUS: f64 = 0.02;

pub const DEFAULT_RESOLUTION: usize = 201;

pub type FieldVector = Vector3<C>;

pub fn intensity(e: &FieldVector) -> f64 {
    e.iter().map(|z| z.norm_sqr()).sum()
}

/// Field without any normalization of the amplitudes; linear in `amplitudes`.
pub fn scattered_field(array: &EmitterArray, amplitudes: &[C], r: &Vec3) -> Result<FieldVector> {
    if amplitudes.len() != array.len() {
        return Err(Error::validation(format!(
            "{} amplitudes for {} emitters",
            amplitudes.len(),
            array.len()
        )));
    }
    let mut e = FieldVector::from_element(C::new(0.0, 0.0));
    for ((pos, p), a) in array.positions().iter().zip(array.dipoles()).zip(amplitudes) {
        let g = green_tensor_with_eps(&(r - pos), COINCIDENT_EPS)
            .map_err(|_| Error::validation(format!("field point ({}, {}, {}) lies on an emitter", r.x, r.y, r.z)))?;
        e += (g.0 * p.map(|x| C::new(x, 0.0))) * *a;
    }
    Ok(e)
}

fn check_normalized(amplitudes: &[C]) -> Result<()> {
    let n = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("amplitudes must have unit norm, got {n}")));
    }
    Ok(())
}

/// Field of a unit-norm amplitude vector at one point.
pub fn field_at(array: &EmitterArray, amplitudes: &[C], r: &Vec3) -> Result<FieldVector> {
    check_normalized(amplitudes)?;
    scattered_field(array, amplitudes, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::validation(format!("unknown axis '{other}' (x, y or z)"))),
        }
    }
}

/// The plane `axis = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub axis: Axis,
    pub offset: f64,
}

impl Plane {
    /// Names of the two in-plane coordinates, in column order.
    pub fn coordinate_names(&self) -> (&'static str, &'static str) {
        match self.axis {
            Axis::X => ("y", "z"),
            Axis::Y => ("x", "z"),
            Axis::Z => ("x", "y"),
        }
    }

    pub fn point(&self, u: f64, v: f64) -> Vec3 {
        match self.axis {
            Axis::X => Vec3::new(self.offset, u, v),
            Axis::Y => Vec3::new(u, self.offset, v),
            Axis::Z => Vec3::new(u, v, self.offset),
        }
    }
}

/// Extent and resolution of a planar map; lengths in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub plane: Plane,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub nu: usize,
    pub nv: usize,
}

impl GridSpec {
    /// Square map of half-width `half` centred on the axis, default resolution.
    pub fn centered(plane: Plane, half: f64) -> Self {
        Self {
            plane,
            u_range: (-half, half),
            v_range: (-half, half),
            nu: DEFAULT_RESOLUTION,
            nv: DEFAULT_RESOLUTION,
        }
    }

    pub fn with_resolution(mut self, nu: usize, nv: usize) -> Self {
        self.nu = nu;
        self.nv = nv;
        self
    }

    fn validate(&self) -> Result<()> {
        let (u0, u1) = self.u_range;
        let (v0, v1) = self.v_range;
        if !(u1 > u0) || !(v1 > v0) || ![u0, u1, v0, v1, self.plane.offset].iter().all(|x| x.is_finite()) {
            return Err(Error::validation(format!(
                "map extent {:?} × {:?} has no area",
                self.u_range, self.v_range
            )));
        }
        if self.nu < 2 || self.nv < 2 {
            return Err(Error::validation("maps need at least 2 samples per direction"));
        }
        Ok(())
    }

    fn coord(range: (f64, f64), n: usize, k: usize) -> f64 {
        range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64
    }

    pub fn u(&self, i: usize) -> f64 {
        Self::coord(self.u_range, self.nu, i)
    }

    pub fn v(&self, j: usize) -> f64 {
        Self::coord(self.v_range, self.nv, j)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FieldSample {
    pub u: f64,
    pub v: f64,
    /// Zero for excluded samples.
    pub field: FieldVector,
    pub intensity: f64,
    pub excluded: bool,
}

/// A sampled map, row-major: `v` outer, `u` inner.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub samples: Vec<FieldSample>,
}

impl FieldGrid {
    pub fn sample(&self, i: usize, j: usize) -> &FieldSample {
        &self.samples[j * self.spec.nu + i]
    }

    pub fn n_excluded(&self) -> usize {
        self.samples.iter().filter(|s| s.excluded).count()
    }

    pub fn max_intensity(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| !s.excluded)
            .map(|s| s.intensity)
            .fold(0.0, f64::max)
    }

    /// Pearson correlation of the intensities of two maps on the same grid,
    /// over samples not excluded in either.
    pub fn intensity_correlation(&self, other: &FieldGrid) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::validation("maps are on different grids"));
        }
        let pairs: Vec<(f64, f64)> = self
            .samples
            .iter()
            .zip(&other.samples)
            .filter(|(a, b)| !a.excluded && !b.excluded)
            .map(|(a, b)| (a.intensity, b.intensity))
            .collect();
        let n = pairs.len() as f64;
        if n < 2.0 {
            return Err(Error::validation("too few usable samples to correlate"));
        }
        let (ma, mb) = pairs
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / n, acc.1 + p.1 / n));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (a, b) in &pairs {
            sab += (a - ma) * (b - mb);
            saa += (a - ma).powi(2);
            sbb += (b - mb).powi(2);
        }
        Ok(sab / (saa * sbb).sqrt())
    }

    /// CSV with one row per sample, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let (cu, cv) = self.spec.plane.coordinate_names();
        let mut out = String::with_capacity(self.samples.len() * 220);
        writeln!(
            out,
            "{cu},{cv},Ex_re,Ex_im,Ey_re,Ey_im,Ez_re,Ez_im,intensity,excluded_flag"
        )
        .unwrap();
        for s in &self.samples {
            write!(out, "{:.16e},{:.16e}", s.u, s.v).unwrap();
            for z in s.field.iter() {
                write!(out, ",{:.16e},{:.16e}", z.re, z.im).unwrap();
            }
            writeln!(out, ",{:.16e},{}", s.intensity, u8::from(s.excluded)).unwrap();
        }
        out
    }
}

fn min_distance(array: &EmitterArray, r: &Vec3) -> f64 {
    array
        .positions()
        .iter()
        .map(|p| (r - p).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Evaluate a unit-norm amplitude vector on a planar grid. Rows are computed
/// in parallel; the result does not depend on the number of threads.
pub fn field_map(array: &EmitterArray, amplitudes: &[C], spec: &GridSpec) -> Result<FieldGrid> {
    spec.validate()?;
    check_normalized(amplitudes)?;
    if amplitudes.len() != array.len() {
        return Err(Error::validation(format!(
            "{} amplitudes for {} emitters",
            amplitudes.len(),
            array.len()
        )));
    }
    let rows: Vec<Vec<FieldSample>> = (0..spec.nv)
        .into_par_iter()
        .map(|j| {
            let v = spec.v(j);
            (0..spec.nu)
                .map(|i| {
                    let u = spec.u(i);
                    let r = spec.plane.point(u, v);
                    if min_distance(array, &r) < EXCLUSION_RADIUS {
                        return Ok(FieldSample {
                            u,
                            v,
                            field: FieldVector::from_element(C::new(0.0, 0.0)),
                            intensity: 0.0,
                            excluded: true,
                        });
                    }
                    let field = scattered_field(array, amplitudes, &r)?;
                    Ok(FieldSample {
                        u,
                        v,
                        field,
                        intensity: intensity(&field),
                        excluded: false,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldGrid {
        spec: *spec,
        samples: rows.into_iter().flatten().collect(),
    })
}

/// Picks one Bloch mode: angular momentum plus either a branch index or,
/// for two-component arrays, a parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSelector {
    pub m: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<Parity>,
}

impl ModeSelector {
    /// Parse `m=1`, `m=1,branch=0` or `m=4,sym=anti` style selectors.
    pub fn parse(s: &str) -> Result<Self> {
        let mut sel = ModeSelector {
            m: 0,
            branch: None,
            symmetry: None,
        };
        let mut have_m = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("mode selector part '{part}' is not key=value")))?;
            match key.trim() {
                "m" => {
                    sel.m = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::validation(format!("bad m '{value}'")))?;
                    have_m = true;
                }
                "branch" | "b" => {
                    sel.branch = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| Error::validation(format!("bad branch '{value}'")))?,
                    )
                }
                "sym" | "symmetry" | "parity" => {
                    sel.symmetry = Some(match value.trim() {
                        "sym" | "symmetric" | "+" => Parity::Symmetric,
                        "anti" | "antisymmetric" | "-" => Parity::Antisymmetric,
                        other => return Err(Error::validation(format!("bad symmetry '{other}'"))),
                    })
                }
                other => return Err(Error::validation(format!("unknown mode selector key '{other}'"))),
            }
        }
        if !have_m {
            return Err(Error::validation("mode selector needs m=<angular momentum>"));
        }
        Ok(sel)
    }

    pub fn describe(&self) -> String {
        let mut s = format!("m={}", self.m);
        if let Some(b) = self.branch {
            s += &format!(",branch={b}");
        }
        if let Some(p) = self.symmetry {
            s += &format!(",sym={}", p.as_str());
        }
        s
    }

    /// Find the selected mode, or fail with the list of valid selectors.
    pub fn resolve<'a>(&self, bands: &'a BandStructure) -> Result<&'a ModeRecord> {
        let candidates: Vec<&ModeRecord> = bands.at_m(self.m).collect();
        let found = candidates.iter().copied().find(|r| {
            self.branch.is_none_or(|b| r.branch == b) && self.symmetry.is_none_or(|p| Parity::of(&r.vector) == Some(p))
        });
        let ambiguous = self.branch.is_none() && self.symmetry.is_none() && candidates.len() > 1;
        match found {
            Some(r) if !ambiguous => Ok(r),
            _ => Err(Error::validation(format!(
                "no unique mode for selector '{}'; valid selectors: {}",
                self.describe(),
                valid_selectors(bands).join(" ")
            ))),
        }
    }
}

/// All selectors that name exactly one mode.
pub fn valid_selectors(bands: &BandStructure) -> Vec<String> {
    let mut out = Vec::new();
    let mut last_m = None;
    for r in &bands.modes {
        if last_m == Some(r.m) {
            continue;
        }
        last_m = Some(r.m);
        if bands.n_components == 1 {
            out.push(format!("m={}", r.m));
            continue;
        }
        for b in 0..bands.n_components {
            out.push(format!("m={},branch={b}", r.m));
        }
        if bands.n_components == 2 {
            out.push(format!("m={},sym=symmetric", r.m));
            out.push(format!("m={},sym=antisymmetric", r.m));
        }
    }
    out
}

/// Sidecar metadata written next to a map.
#[derive(Debug, Clone, Serialize)]
pub struct FieldMapMeta {
    pub geometry_hash: String,
    pub mode: ModeSelector,
    pub omega: f64,
    pub gamma: f64,
    pub plane: Plane,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub resolution: (usize, usize),
    pub columns: Vec<String>,
    pub exclusion_radius: f64,
    pub n_excluded: usize,
    pub max_intensity: f64,
    pub units: String,
}

impl FieldMapMeta {
    pub fn new(array: &EmitterArray, selector: ModeSelector, mode: &ModeRecord, grid: &FieldGrid) -> Self {
        let (cu, cv) = grid.spec.plane.coordinate_names();
        let columns = [
            cu,
            cv,
            "Ex_re",
            "Ex_im",
            "Ey_re",
            "Ey_im",
            "Ez_re",
            "Ez_im",
            "intensity",
            "excluded_flag",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        Self {
            geometry_hash: array.geometry_hash(),
            mode: selector,
            omega: mode.omega,
            gamma: mode.gamma,
            plane: grid.spec.plane,
            u_range: grid.spec.u_range,
            v_range: grid.spec.v_range,
            resolution: (grid.spec.nu, grid.spec.nv),
            columns,
            exclusion_radius: EXCLUSION_RADIUS,
            n_excluded: grid.n_excluded(),
            max_intensity: grid.max_intensity(),
            units: "lengths in wavelengths; field with dipole prefactor set to 1; excluded samples hold zeros".into(),
        }
    }
}

/// Map of one Bloch mode.
pub fn mode_field_map(array: &EmitterArray, mode: &ModeRecord, spec: &GridSpec) -> Result<FieldGrid> {
    field_map(array, &mode_amplitudes(array, mode), spec)
}

/// Write `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
pub fn write_field_map(dir: &Path, stem: &str, grid: &FieldGrid, meta: &FieldMapMeta) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&csv, grid.to_csv())?;
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(&json, text + "\n")?;
    Ok((csv, json))
}
