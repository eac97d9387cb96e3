//! Deterministic parameter sweeps over ring geometries.
//!
//! Grid points are independent; they are evaluated on the rayon pool and
//! collected by grid index, so records never depend on the worker count.
//! Crossings are located on the coarse grid and then refined by golden-section
//! search on the frequency gap.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{band_structure, wrap_m, BandStructure, ModeRecord, Parity};
use crate::error::{Error, Result};
use crate::geometry::{
    build_ring, build_stack, load_array_file, scale_array, EmitterArray, GeometryFile, Polarization, RingSpec,
    FILE_SYMMETRY_TOL,
};

/// Rates below this are kept but flagged as censored and never fitted.
pub const CENSOR_FLOOR: f64 = 1e-30;

/// Range of `Γ_min` used in the exponential fits.
pub const FIT_WINDOW: (f64, f64) = (1e-25, 1e-2);

/// Most negative decay rate accepted before a record is treated as a failure.
pub const NEGATIVE_RATE_TOL: f64 = 1e-8;

/// Default heatmap resolution per axis.
pub const HEATMAP_RESOLUTION: usize = 60;

/// Default `d/λ` and `z/λ` range of the heatmap.
pub const HEATMAP_RANGE: (f64, f64) = (0.05, 1.0);

/// Width of the final golden-section bracket.
pub const REFINE_TOL: f64 = 1e-7;

/// One record in this many is recomputed from scratch after a run.
pub const SPOT_CHECK_STRIDE: usize = 100;

pub fn code_version() -> &'static str {
    concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"))
}

// ---------------------------------------------------------------------------
// axes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// A named parameter grid, given either by a point count or by a step.
/// With `scale: log` the step is a multiplicative factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default)]
    pub scale: Scale,
}

const MAX_AXIS_POINTS: usize = 1_000_000;

impl AxisSpec {
    pub fn linear(name: &str, start: f64, stop: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            start,
            stop,
            count: Some(count),
            step: None,
            scale: Scale::Linear,
        }
    }

    pub fn stepped(name: &str, start: f64, stop: f64, step: f64) -> Self {
        Self {
            name: name.into(),
            start,
            stop,
            count: None,
            step: Some(step),
            scale: Scale::Linear,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let bad = |msg: String| Error::validation(format!("axis '{}': {msg}", self.name));
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(bad("start and stop must be finite".into()));
        }
        if self.scale == Scale::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err(bad("log axes need positive start and stop".into()));
        }
        let values = match (self.count, self.step) {
            (Some(0), None) => return Err(bad("count must be at least 1".into())),
            (Some(n), None) if n > MAX_AXIS_POINTS => {
                return Err(bad(format!("{n} points exceeds the limit of {MAX_AXIS_POINTS}")))
            }
            (Some(1), None) => vec![self.start],
            (Some(n), None) => {
                let t = |k: usize| k as f64 / (n - 1) as f64;
                match self.scale {
                    Scale::Linear => (0..n).map(|k| self.start + (self.stop - self.start) * t(k)).collect(),
                    Scale::Log => {
                        let (a, b) = (self.start.ln(), self.stop.ln());
                        (0..n).map(|k| (a + (b - a) * t(k)).exp()).collect()
                    }
                }
            }
            (None, Some(step)) => {
                let mut out = Vec::new();
                match self.scale {
                    Scale::Linear => {
                        if !(step > 0.0) || self.stop < self.start {
                            return Err(bad("step must be positive with stop ≥ start".into()));
                        }
                        let slack = 1e-9 * step;
                        let mut k = 0usize;
                        loop {
                            let v = self.start + k as f64 * step;
                            if v > self.stop + slack {
                                break;
                            }
                            out.push(v);
                            k += 1;
                            if k > MAX_AXIS_POINTS {
                                return Err(bad("too many points".into()));
                            }
                        }
                    }
                    Scale::Log => {
                        if !(step > 1.0) || self.stop < self.start {
                            return Err(bad("log step must exceed 1 with stop ≥ start".into()));
                        }
                        let mut k = 0i32;
                        loop {
                            let v = self.start * step.powi(k);
                            if v > self.stop * (1.0 + 1e-12) {
                                break;
                            }
                            out.push(v);
                            k += 1;
                            if k as usize > MAX_AXIS_POINTS {
                                return Err(bad("too many points".into()));
                            }
                        }
                    }
                }
                out
            }
            _ => return Err(bad("give exactly one of 'count' or 'step'".into())),
        };
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

// ---------------------------------------------------------------------------
// records

/// One mode of a tracked sector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub branch: usize,
    pub omega: f64,
    pub gamma: f64,
    /// `arg(u₂/u₁)` for two-component cells.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    pub occupations: Vec<f64>,
}

impl BranchPoint {
    pub fn from_mode(r: &ModeRecord) -> Self {
        Self {
            branch: r.branch,
            omega: r.omega,
            gamma: r.gamma,
            eta: relative_phase(&r.vector),
            parity: Parity::of(&r.vector),
            occupations: r.occupations.clone(),
        }
    }

    pub fn dominant_component(&self) -> usize {
        self.occupations
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}

fn relative_phase(v: &[C]) -> Option<f64> {
    if v.len() != 2 || v[0].norm() == 0.0 {
        return None;
    }
    Some((v[1] / v[0]).arg())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub index: Vec<usize>,
    pub params: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<&'static str>,
    /// Darkest decay rate of the whole spectrum, in `Γ0`.
    pub gamma_min: f64,
    pub censored: bool,
    pub m: i64,
    pub branch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracked_m: Option<i64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<BranchPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<BandStructure>,
}

impl SweepRecord {
    fn from_bands(
        index: Vec<usize>,
        params: Vec<f64>,
        bands: BandStructure,
        tracked_m: Option<i64>,
        keep_bands: bool,
    ) -> Result<Self> {
        let dark = bands.darkest();
        if dark.gamma < -NEGATIVE_RATE_TOL {
            return Err(Error::Numerical(format!(
                "negative decay rate {:e} at parameters {params:?}",
                dark.gamma
            )));
        }
        let branches = match tracked_m {
            Some(m) => bands.at_m(m).map(BranchPoint::from_mode).collect(),
            None => Vec::new(),
        };
        Ok(Self {
            index,
            series: None,
            gamma_min: dark.gamma,
            censored: dark.gamma < CENSOR_FLOOR,
            m: dark.m,
            branch: dark.branch,
            parity: Parity::of(&dark.vector),
            tracked_m,
            branches,
            bands: keep_bands.then_some(bands),
            params,
        })
    }

    fn same_darkest(&self, other: &SweepRecord) -> bool {
        self.gamma_min.to_bits() == other.gamma_min.to_bits() && self.m == other.m && self.branch == other.branch
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub template: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry_hash: Option<String>,
    pub code_version: String,
}

impl Provenance {
    fn new(template: String, geometry_hash: Option<String>) -> Self {
        Self {
            template,
            geometry_hash,
            code_version: code_version().into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub kind: &'static str,
    pub axes: Vec<Axis>,
    pub records: Vec<SweepRecord>,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn axis(&self, name: &str) -> Option<&Axis> {
        self.axes.iter().find(|a| a.name == name)
    }

    pub fn series<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a SweepRecord> + 'a {
        self.records.iter().filter(move |r| r.series == Some(name))
    }
}

/// Outcome of recomputing a sample of records in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpotCheck {
    pub checked: usize,
    pub mismatches: usize,
}

fn spot_indices(n: usize) -> impl Iterator<Item = usize> {
    (0..n).step_by(SPOT_CHECK_STRIDE)
}

fn evaluate<P, F>(points: &[P], f: F) -> Result<Vec<SweepRecord>>
where
    P: Sync,
    F: Fn(&P) -> Result<SweepRecord> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

// ---------------------------------------------------------------------------
// fits

/// Least-squares line through `(x, log10 y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

pub fn fit_log10(points: &[(f64, f64)]) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(x, y)| (x, y.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
        x_min: pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        x_max: pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    })
}

// ---------------------------------------------------------------------------
// N scaling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingSeries {
    /// Two identical rings of `N` each.
    Double,
    /// One ring of `N`.
    SingleN,
    /// One ring of `2N` at the same spacing.
    #[serde(rename = "single_2n")]
    Single2N,
}

impl ScalingSeries {
    pub const ALL: [ScalingSeries; 3] = [Self::Double, Self::SingleN, Self::Single2N];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Double => "double",
            Self::SingleN => "single_n",
            Self::Single2N => "single_2n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSpec {
    pub n_values: Vec<usize>,
    pub spacing: f64,
    pub z: f64,
    pub polarization: Polarization,
}

impl ScalingSpec {
    pub fn build(&self, series: ScalingSeries, n: usize) -> Result<EmitterArray> {
        let ring = |n| RingSpec::with_spacing(n, self.spacing).polarization(self.polarization);
        match series {
            ScalingSeries::Double => build_stack(&[ring(n), ring(n).z(self.z)]),
            ScalingSeries::SingleN => build_ring(&ring(n)),
            ScalingSeries::Single2N => build_ring(&ring(2 * n)),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::validation("scaling scan needs at least one N"));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::validation(format!("ring size N = {n} is below 2")));
        }
        if !(self.spacing > 0.0) || !(self.z > 0.0) {
            return Err(Error::validation("spacing and z must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesFit {
    pub series: ScalingSeries,
    pub fit: Option<LinearFit>,
    pub censored: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingScan {
    pub spec: ScalingSpec,
    pub result: SweepResult,
    pub fits: Vec<SeriesFit>,
    /// Smallest `N` from which the single ring of `2N` stays darker than the
    /// double ring for the rest of the scan.
    pub crossover_n: Option<usize>,
}

impl ScalingScan {
    /// `(N, Γ_min)` of one series in scan order.
    pub fn rates(&self, series: ScalingSeries) -> Vec<(usize, f64)> {
        self.result
            .series(series.as_str())
            .map(|r| (r.params[0] as usize, r.gamma_min))
            .collect()
    }

    pub fn fit(&self, series: ScalingSeries) -> Option<&LinearFit> {
        self.fits
            .iter()
            .find(|f| f.series == series)
            .and_then(|f| f.fit.as_ref())
    }

    pub fn spot_check(&self) -> Result<SpotCheck> {
        let mut out = SpotCheck {
            checked: 0,
            mismatches: 0,
        };
        for k in spot_indices(self.result.records.len()) {
            let rec = &self.result.records[k];
            let series = ScalingSeries::ALL
                .into_iter()
                .find(|s| Some(s.as_str()) == rec.series)
                .expect("scaling record carries its series");
            let array = self.spec.build(series, rec.params[0] as usize)?;
            let again = SweepRecord::from_bands(vec![], vec![], band_structure(&array)?, None, false)?;
            out.checked += 1;
            out.mismatches += usize::from(!rec.same_darkest(&again));
        }
        Ok(out)
    }
}

/// Darkest decay rate versus `N` for a double ring and the two single-ring
/// references, with exponential fits inside [`FIT_WINDOW`].
pub fn scaling_scan(spec: &ScalingSpec) -> Result<ScalingScan> {
    spec.validate()?;
    let points: Vec<(usize, ScalingSeries)> = spec
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(k, _)| ScalingSeries::ALL.into_iter().map(move |s| (k, s)))
        .collect();
    let records = evaluate(&points, |&(k, series)| {
        let n = spec.n_values[k];
        let bands = band_structure(&spec.build(series, n)?)?;
        let mut rec = SweepRecord::from_bands(vec![k], vec![n as f64], bands, None, false)?;
        rec.series = Some(series.as_str());
        Ok(rec)
    })?;
    let result = SweepResult {
        kind: "scaling",
        axes: vec![Axis {
            name: "N".into(),
            values: spec.n_values.iter().map(|&n| n as f64).collect(),
        }],
        records,
        provenance: Provenance::new(
            format!(
                "double ring vs single rings, d = {}, Z = {}, {}",
                spec.spacing,
                spec.z,
                spec.polarization.name()
            ),
            None,
        ),
    };
    let mut scan = ScalingScan {
        spec: spec.clone(),
        result,
        fits: Vec::new(),
        crossover_n: None,
    };
    for series in ScalingSeries::ALL {
        let rates = scan.rates(series);
        let censored = rates.iter().filter(|r| r.1 < CENSOR_FLOOR).count();
        let window: Vec<(f64, f64)> = rates
            .iter()
            .filter(|r| r.1 >= FIT_WINDOW.0 && r.1 <= FIT_WINDOW.1)
            .map(|&(n, g)| (n as f64, g))
            .collect();
        scan.fits.push(SeriesFit {
            series,
            fit: fit_log10(&window),
            censored,
        });
    }
    let double = scan.rates(ScalingSeries::Double);
    let single = scan.rates(ScalingSeries::Single2N);
    let darker: Vec<bool> = double.iter().zip(&single).map(|(d, s)| s.1 < d.1).collect();
    if darker.last() == Some(&true) {
        let first = darker.iter().rposition(|&b| !b).map_or(0, |k| k + 1);
        scan.crossover_n = Some(double[first].0);
    }
    Ok(scan)
}

// ---------------------------------------------------------------------------
// d-z heatmap

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapSpec {
    pub n_cells: usize,
    pub polarization: Polarization,
    pub d_axis: AxisSpec,
    pub z_axis: AxisSpec,
}

impl HeatmapSpec {
    /// Default [`HEATMAP_RESOLUTION`]² grid over [`HEATMAP_RANGE`].
    pub fn new(n_cells: usize, polarization: Polarization) -> Self {
        let (a, b) = HEATMAP_RANGE;
        Self {
            n_cells,
            polarization,
            d_axis: AxisSpec::linear("d", a, b, HEATMAP_RESOLUTION),
            z_axis: AxisSpec::linear("z", a, b, HEATMAP_RESOLUTION),
        }
    }

    pub fn build(&self, d: f64, z: f64) -> Result<EmitterArray> {
        let ring = RingSpec::with_spacing(self.n_cells, d).polarization(self.polarization);
        build_stack(&[ring, ring.z(z)])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapScan {
    pub spec: HeatmapSpec,
    pub result: SweepResult,
}

impl HeatmapScan {
    pub fn spot_check(&self) -> Result<SpotCheck> {
        let mut out = SpotCheck {
            checked: 0,
            mismatches: 0,
        };
        for k in spot_indices(self.result.records.len()) {
            let rec = &self.result.records[k];
            let array = self.spec.build(rec.params[0], rec.params[1])?;
            let again = SweepRecord::from_bands(vec![], vec![], band_structure(&array)?, None, false)?;
            out.checked += 1;
            out.mismatches += usize::from(!rec.same_darkest(&again));
        }
        Ok(out)
    }
}

/// Darkest rate of two identical stacked rings over a `(d, z)` grid, with the
/// `(m, parity)` label of the darkest mode. Records run over `z` fastest.
pub fn dz_heatmap(spec: &HeatmapSpec) -> Result<HeatmapScan> {
    if spec.n_cells < 2 {
        return Err(Error::validation("heatmap rings need N ≥ 2"));
    }
    let ds = spec.d_axis.values()?;
    let zs = spec.z_axis.values()?;
    let points: Vec<(usize, usize)> = (0..ds.len()).flat_map(|i| (0..zs.len()).map(move |j| (i, j))).collect();
    let records = evaluate(&points, |&(i, j)| {
        let bands = band_structure(&spec.build(ds[i], zs[j])?)?;
        SweepRecord::from_bands(vec![i, j], vec![ds[i], zs[j]], bands, None, false)
    })?;
    let result = SweepResult {
        kind: "dz_heatmap",
        axes: vec![
            Axis {
                name: "d".into(),
                values: ds,
            },
            Axis {
                name: "z".into(),
                values: zs,
            },
        ],
        records,
        provenance: Provenance::new(
            format!(
                "two identical rings, N = {}, {}",
                spec.n_cells,
                spec.polarization.name()
            ),
            None,
        ),
    };
    Ok(HeatmapScan {
        spec: spec.clone(),
        result,
    })
}

// ---------------------------------------------------------------------------
// crossings

/// State of the upper tracked branch on one side of a crossing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchCharacter {
    pub param: f64,
    pub omega: f64,
    pub gamma: f64,
    /// Upper branch decays faster than the lower one.
    pub radiant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub dominant_component: usize,
    pub occupations: Vec<f64>,
}

impl BranchCharacter {
    fn new(param: f64, lower: &BranchPoint, upper: &BranchPoint) -> Self {
        Self {
            param,
            omega: upper.omega,
            gamma: upper.gamma,
            radiant: upper.gamma > lower.gamma,
            parity: upper.parity,
            eta: upper.eta,
            dominant_component: upper.dominant_component(),
            occupations: upper.occupations.clone(),
        }
    }

    pub fn label(&self) -> String {
        let r = if self.radiant { "radiant" } else { "subradiant" };
        match self.parity {
            Some(p) => format!("{r}/{}", p.as_str()),
            None => format!("{r}/component {}", self.dominant_component + 1),
        }
    }
}

/// A local minimum of the gap `Ω_upper − Ω_lower` at fixed `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport {
    pub parameter: String,
    pub m: i64,
    pub lower_branch: usize,
    pub upper_branch: usize,
    pub critical_value: f64,
    pub min_gap: f64,
    /// Gap at the coarse-grid point the refinement started from.
    pub coarse_gap: f64,
    pub before: BranchCharacter,
    pub after: BranchCharacter,
    pub swapped: bool,
}

impl CrossingReport {
    pub fn radiance_swapped(&self) -> bool {
        self.before.radiant != self.after.radiant
    }

    pub fn parity_swapped(&self) -> bool {
        self.before.parity.is_some() && self.before.parity != self.after.parity
    }

    /// Some component gains or loses more than half of the upper branch.
    pub fn occupation_swapped(&self) -> bool {
        self.before
            .occupations
            .iter()
            .zip(&self.after.occupations)
            .any(|(a, b)| (a - b).abs() > 0.5)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} = {:.6} (m = {}, gap {:.6e}): upper branch {} -> {}",
            self.parameter,
            self.critical_value,
            self.m,
            self.min_gap,
            self.before.label(),
            self.after.label()
        )
    }
}

fn golden_min<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

fn interior_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&k| values[k] < values[k - 1] && values[k] <= values[k + 1])
        .collect()
}

fn pick(branches: &[BranchPoint], b: usize) -> Result<&BranchPoint> {
    branches
        .get(b)
        .ok_or_else(|| Error::validation(format!("branch {b} does not exist")))
}

/// Locate and refine every interior local minimum of the gap between two
/// branches, then characterize the upper branch on either side.
fn find_crossings<F>(
    parameter: &str,
    m: i64,
    params: &[f64],
    tracks: &[&[BranchPoint]],
    (lower, upper): (usize, usize),
    eval: F,
) -> Result<Vec<CrossingReport>>
where
    F: Fn(f64) -> Result<Vec<BranchPoint>>,
{
    let gap_of = |b: &[BranchPoint]| -> Result<f64> { Ok(pick(b, upper)?.omega - pick(b, lower)?.omega) };
    let gaps = tracks.iter().map(|b| gap_of(b)).collect::<Result<Vec<_>>>()?;
    let candidates = interior_minima(&gaps);
    let (lo, hi) = (params[0], params[params.len() - 1]);
    let mut reports = Vec::with_capacity(candidates.len());
    for (c, &k) in candidates.iter().enumerate() {
        let (a, b) = (params[k - 1], params[k + 1]);
        let (mut pc, mut g0) = golden_min(|p| gap_of(&eval(p)?), a, b, REFINE_TOL)?;
        if g0 > gaps[k] {
            pc = params[k];
            g0 = gaps[k];
        }
        // side distance: a few widths of the hyperbola through the neighbours
        let slope = [a, b]
            .iter()
            .zip([gaps[k - 1], gaps[k + 1]])
            .map(|(p, g)| (g * g - g0 * g0).max(0.0).sqrt() / (p - pc).abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let step = 0.5 * (b - a);
        let width = if slope > 0.0 { g0 / slope } else { step };
        let mut h = (4.0 * width).max(0.25 * step);
        h = h.min(pc - lo).min(hi - pc);
        if c > 0 {
            h = h.min(0.5 * (pc - params[candidates[c - 1]]));
        }
        if c + 1 < candidates.len() {
            h = h.min(0.5 * (params[candidates[c + 1]] - pc));
        }
        let side = |p: f64| -> Result<BranchCharacter> {
            let bs = eval(p)?;
            Ok(BranchCharacter::new(p, pick(&bs, lower)?, pick(&bs, upper)?))
        };
        let before = side(pc - h)?;
        let after = side(pc + h)?;
        let mut report = CrossingReport {
            parameter: parameter.into(),
            m,
            lower_branch: lower,
            upper_branch: upper,
            critical_value: pc,
            min_gap: g0.max(0.0),
            coarse_gap: gaps[k],
            before,
            after,
            swapped: false,
        };
        report.swapped = report.radiance_swapped() || report.parity_swapped() || report.occupation_swapped();
        reports.push(report);
    }
    Ok(reports)
}

/// The candidate with a character swap and the smallest gap; near-equal gaps
/// (mirror images) resolve to the lowest parameter.
fn primary_crossing(candidates: &[CrossingReport]) -> Option<CrossingReport> {
    let swapped = candidates.iter().filter(|c| c.swapped);
    let best = swapped.clone().map(|c| c.min_gap).reduce(f64::min)?;
    swapped
        .filter(|c| c.min_gap <= best + 1e-9 * best.abs().max(1e-300))
        .min_by(|a, b| a.critical_value.total_cmp(&b.critical_value))
        .cloned()
}

/// Width of the dip around grid minimum `k`: the contiguous region whose
/// values stay below half of the lower of the two enclosing peaks.
fn basin_width(params: &[f64], values: &[f64], k: usize) -> f64 {
    let n = values.len();
    let mut l = k;
    while l > 0 && values[l - 1] >= values[l] {
        l -= 1;
    }
    let mut r = k;
    while r + 1 < n && values[r + 1] >= values[r] {
        r += 1;
    }
    let threshold = 0.5 * values[l].min(values[r]);
    let (mut a, mut b) = (k, k);
    while a > l && values[a - 1] <= threshold {
        a -= 1;
    }
    while b < r && values[b + 1] <= threshold {
        b += 1;
    }
    params[b] - params[a]
}

fn check_sorted(name: &str, values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(Error::validation(format!("axis '{name}' needs at least 3 points")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation(format!("axis '{name}' must be strictly increasing")));
    }
    Ok(())
}

fn check_canonical_m(m: i64, n_cells: usize) -> Result<()> {
    if wrap_m(m, n_cells) != m {
        return Err(Error::validation(format!(
            "m = {m} is not a canonical angular momentum for N = {n_cells}"
        )));
    }
    Ok(())
}

fn base_label(array: &EmitterArray) -> String {
    format!("{} cells x {} components", array.n_cells(), array.n_components())
}

// ---------------------------------------------------------------------------
// rotation angle

/// A local minimum of the darkest decay rate along the scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateMinimum {
    pub param: f64,
    pub gamma_min: f64,
    /// Extent of the coarse-grid region below half the lower neighbouring peak.
    pub width: f64,
    pub m: i64,
    pub branch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaScan {
    #[serde(skip)]
    pub base: EmitterArray,
    pub component: usize,
    pub m: i64,
    pub result: SweepResult,
    pub candidates: Vec<CrossingReport>,
    pub crossing: Option<CrossingReport>,
    pub rate_minima: Vec<RateMinimum>,
    /// Widest interior minimum of `Γ_min(δ)`.
    pub broad_minimum: Option<RateMinimum>,
}

impl DeltaScan {
    pub fn materialize(&self, delta: f64) -> Result<EmitterArray> {
        self.base.rotate_component(self.component, delta)
    }

    pub fn spot_check(&self) -> Result<SpotCheck> {
        let mut out = SpotCheck {
            checked: 0,
            mismatches: 0,
        };
        for k in spot_indices(self.result.records.len()) {
            let rec = &self.result.records[k];
            let again = SweepRecord::from_bands(
                vec![],
                vec![],
                band_structure(&self.materialize(rec.params[0])?)?,
                None,
                false,
            )?;
            out.checked += 1;
            out.mismatches += usize::from(!rec.same_darkest(&again));
        }
        Ok(out)
    }
}

/// Default rotation grid: `count` points over `[0, 2π/N)`.
pub fn default_delta_axis(n_cells: usize, count: usize) -> AxisSpec {
    let period = 2.0 * PI / n_cells as f64;
    AxisSpec::linear("delta", 0.0, period * (count - 1) as f64 / count as f64, count)
}

/// Rotate `component` of `base` by each `δ` and follow the two lowest
/// branches of sector `m`.
pub fn delta_scan(
    base: &EmitterArray,
    component: usize,
    m: i64,
    deltas: &[f64],
    keep_bands: bool,
) -> Result<DeltaScan> {
    let n = base.n_cells();
    check_canonical_m(m, n)?;
    check_sorted("delta", deltas)?;
    if base.n_components() < 2 || component >= base.n_components() {
        return Err(Error::validation(format!(
            "rotating component {component} needs an array with more components (has {})",
            base.n_components()
        )));
    }
    let period = 2.0 * PI / n as f64;
    if deltas[0] < 0.0 || deltas[deltas.len() - 1] >= period {
        return Err(Error::validation(format!(
            "rotation angles must lie in [0, 2π/N) = [0, {period})"
        )));
    }
    let build = |d: f64| base.rotate_component(component, d);
    let records = evaluate(&deltas.iter().enumerate().collect::<Vec<_>>(), |&(k, &d)| {
        let bands = band_structure(&build(d)?)?;
        SweepRecord::from_bands(vec![k], vec![d], bands, Some(m), keep_bands)
    })?;
    let tracks: Vec<&[BranchPoint]> = records.iter().map(|r| r.branches.as_slice()).collect();
    let eval = |d: f64| -> Result<Vec<BranchPoint>> {
        Ok(band_structure(&build(d)?)?
            .at_m(m)
            .map(BranchPoint::from_mode)
            .collect())
    };
    let candidates = find_crossings("delta", m, deltas, &tracks, (0, 1), eval)?;
    let crossing = primary_crossing(&candidates);

    let rates: Vec<f64> = records.iter().map(|r| r.gamma_min).collect();
    let mut rate_minima = Vec::new();
    for k in interior_minima(&rates) {
        let darkest = |d: f64| -> Result<RateMinimum> {
            let bands = band_structure(&build(d)?)?;
            let dark = bands.darkest();
            Ok(RateMinimum {
                param: d,
                gamma_min: dark.gamma,
                width: basin_width(deltas, &rates, k),
                m: dark.m,
                branch: dark.branch,
                eta: relative_phase(&dark.vector),
            })
        };
        let (pd, _) = golden_min(|d| Ok(darkest(d)?.gamma_min), deltas[k - 1], deltas[k + 1], REFINE_TOL)?;
        let refined = darkest(pd)?;
        rate_minima.push(if refined.gamma_min <= rates[k] {
            refined
        } else {
            darkest(deltas[k])?
        });
    }
    let broad_minimum = rate_minima
        .iter()
        .max_by(|a, b| a.width.total_cmp(&b.width).then(b.gamma_min.total_cmp(&a.gamma_min)))
        .cloned();

    let result = SweepResult {
        kind: "delta",
        axes: vec![Axis {
            name: "delta".into(),
            values: deltas.to_vec(),
        }],
        records,
        provenance: Provenance::new(
            format!("{}, component {component} rotated", base_label(base)),
            Some(base.geometry_hash()),
        ),
    };
    Ok(DeltaScan {
        base: base.clone(),
        component,
        m,
        result,
        candidates,
        crossing,
        rate_minima,
        broad_minimum,
    })
}

// ---------------------------------------------------------------------------
// uniform scaling

#[derive(Debug, Clone, Serialize)]
pub struct SectorCrossings {
    pub m: i64,
    /// Gap between the tracked bands at the grid point closest to `α = 1`.
    pub unit_gap: f64,
    pub candidates: Vec<CrossingReport>,
    pub crossing: Option<CrossingReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaScan {
    #[serde(skip)]
    pub base: EmitterArray,
    pub ms: Vec<i64>,
    pub bands: (usize, usize),
    pub result: SweepResult,
    pub sectors: Vec<SectorCrossings>,
}

impl AlphaScan {
    pub fn sector(&self, m: i64) -> Option<&SectorCrossings> {
        self.sectors.iter().find(|s| s.m == m)
    }

    pub fn spot_check(&self) -> Result<SpotCheck> {
        let mut out = SpotCheck {
            checked: 0,
            mismatches: 0,
        };
        for k in spot_indices(self.result.records.len()) {
            let rec = &self.result.records[k];
            let array = scale_array(&self.base, rec.params[0])?;
            let again = SweepRecord::from_bands(vec![], vec![], band_structure(&array)?, None, false)?;
            out.checked += 1;
            out.mismatches += usize::from(!rec.same_darkest(&again));
        }
        Ok(out)
    }
}

/// Rescale the whole array by each `α` and follow branches `bands` of every
/// sector in `ms`. Records are indexed `[α index, m index]`.
pub fn alpha_scan(
    base: &EmitterArray,
    alphas: &[f64],
    ms: &[i64],
    bands: (usize, usize),
    keep_bands: bool,
) -> Result<AlphaScan> {
    check_sorted("alpha", alphas)?;
    if ms.is_empty() {
        return Err(Error::validation("alpha scan needs at least one m"));
    }
    for &m in ms {
        check_canonical_m(m, base.n_cells())?;
    }
    let d = base.n_components();
    if !(bands.0 < bands.1 && bands.1 < d) {
        return Err(Error::validation(format!(
            "branches {bands:?} are not an ordered pair below {d}"
        )));
    }
    let points: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|k| (0..ms.len()).map(move |j| (k, j)))
        .collect();
    let records = evaluate(&points, |&(k, j)| {
        let spectrum = band_structure(&scale_array(base, alphas[k])?)?;
        SweepRecord::from_bands(
            vec![k, j],
            vec![alphas[k], ms[j] as f64],
            spectrum,
            Some(ms[j]),
            keep_bands,
        )
    })?;
    let mut sectors = Vec::with_capacity(ms.len());
    for (j, &m) in ms.iter().enumerate() {
        let tracks: Vec<&[BranchPoint]> = records
            .iter()
            .filter(|r| r.index[1] == j)
            .map(|r| r.branches.as_slice())
            .collect();
        let eval = |a: f64| -> Result<Vec<BranchPoint>> {
            Ok(band_structure(&scale_array(base, a)?)?
                .at_m(m)
                .map(BranchPoint::from_mode)
                .collect())
        };
        let candidates = find_crossings("alpha", m, alphas, &tracks, bands, eval)?;
        let unit = (0..alphas.len())
            .min_by(|&a, &b| (alphas[a] - 1.0).abs().total_cmp(&(alphas[b] - 1.0).abs()))
            .expect("non-empty axis");
        sectors.push(SectorCrossings {
            m,
            unit_gap: tracks[unit][bands.1].omega - tracks[unit][bands.0].omega,
            crossing: primary_crossing(&candidates),
            candidates,
        });
    }
    let result = SweepResult {
        kind: "alpha",
        axes: vec![
            Axis {
                name: "alpha".into(),
                values: alphas.to_vec(),
            },
            Axis {
                name: "m".into(),
                values: ms.iter().map(|&m| m as f64).collect(),
            },
        ],
        records,
        provenance: Provenance::new(
            format!("{} scaled uniformly", base_label(base)),
            Some(base.geometry_hash()),
        ),
    };
    Ok(AlphaScan {
        base: base.clone(),
        ms: ms.to_vec(),
        bands,
        result,
        sectors,
    })
}

// ---------------------------------------------------------------------------
// sweep specification files

fn default_polarization() -> Polarization {
    Polarization::Transverse
}

fn default_component() -> usize {
    1
}

fn default_bands() -> (usize, usize) {
    (1, 2)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepKind {
    Scaling {
        #[serde(default = "default_polarization")]
        polarization: Polarization,
        spacing: f64,
        z: f64,
    },
    DzHeatmap {
        n_cells: usize,
        #[serde(default = "default_polarization")]
        polarization: Polarization,
    },
    Delta {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry: Option<GeometryFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry_file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<i64>,
        #[serde(default = "default_component")]
        component: usize,
    },
    Alpha {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry: Option<GeometryFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        geometry_file: Option<PathBuf>,
        ms: Vec<i64>,
        #[serde(default = "default_bands")]
        bands: (usize, usize),
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub summary: bool,
    #[serde(default)]
    pub plot_script: bool,
    /// Also write every record, including full band structures.
    #[serde(default)]
    pub records: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv: true,
            summary: true,
            plot_script: false,
            records: false,
        }
    }
}

/// A sweep description as read from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: SweepKind,
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl SweepSpec {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: Some(e.line()),
            message: e.to_string(),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SweepKind::Scaling { .. } => "scaling",
            SweepKind::DzHeatmap { .. } => "dz_heatmap",
            SweepKind::Delta { .. } => "delta",
            SweepKind::Alpha { .. } => "alpha",
        }
    }

    pub fn stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind_name().into())
    }

    fn axis(&self, name: &str) -> Option<&AxisSpec> {
        self.axes.iter().find(|a| a.name == name)
    }

    fn require_axes(&self, allowed: &[&str]) -> Result<()> {
        if let Some(a) = self.axes.iter().find(|a| !allowed.contains(&a.name.as_str())) {
            return Err(Error::validation(format!(
                "axis '{}' is not used by a {} sweep (expected {})",
                a.name,
                self.kind_name(),
                allowed.join(", ")
            )));
        }
        Ok(())
    }
}

fn load_template(
    inline: &Option<GeometryFile>,
    file: &Option<PathBuf>,
    base_dir: &Path,
    geometry_override: Option<&EmitterArray>,
) -> Result<EmitterArray> {
    if let Some(array) = geometry_override {
        return Ok(array.clone());
    }
    match (inline, file) {
        (Some(doc), None) => {
            let array = doc.clone().into_array()?;
            array.check_symmetry(FILE_SYMMETRY_TOL)?;
            Ok(array)
        }
        (None, Some(path)) => load_array_file(base_dir.join(path)),
        _ => Err(Error::validation(
            "sweep needs exactly one of 'geometry' or 'geometry_file' (or --geometry)",
        )),
    }
}

/// Result of running a [`SweepSpec`].
#[derive(Debug, Clone)]
pub enum SweepOutcome {
    Scaling(ScalingScan),
    Heatmap(HeatmapScan),
    Delta(DeltaScan),
    Alpha(AlphaScan),
}

/// Run a sweep. Relative geometry paths resolve against `base_dir`;
/// `geometry_override` replaces the template of delta and alpha sweeps.
pub fn run_sweep(spec: &SweepSpec, base_dir: &Path, geometry_override: Option<&EmitterArray>) -> Result<SweepOutcome> {
    let keep = spec.outputs.records;
    match &spec.kind {
        SweepKind::Scaling {
            polarization,
            spacing,
            z,
        } => {
            spec.require_axes(&["N"])?;
            let axis = spec
                .axis("N")
                .ok_or_else(|| Error::validation("scaling sweep needs an axis named 'N'"))?;
            let mut n_values: Vec<usize> = Vec::new();
            for v in axis.values()? {
                let n = v.round();
                if !(n >= 1.0) {
                    return Err(Error::validation(format!("N = {v} is not a positive integer")));
                }
                if n_values.last() != Some(&(n as usize)) {
                    n_values.push(n as usize);
                }
            }
            let s = ScalingSpec {
                n_values,
                spacing: *spacing,
                z: *z,
                polarization: *polarization,
            };
            Ok(SweepOutcome::Scaling(scaling_scan(&s)?))
        }
        SweepKind::DzHeatmap { n_cells, polarization } => {
            spec.require_axes(&["d", "z"])?;
            let mut s = HeatmapSpec::new(*n_cells, *polarization);
            if let Some(a) = spec.axis("d") {
                s.d_axis = a.clone();
            }
            if let Some(a) = spec.axis("z") {
                s.z_axis = a.clone();
            }
            Ok(SweepOutcome::Heatmap(dz_heatmap(&s)?))
        }
        SweepKind::Delta {
            geometry,
            geometry_file,
            m,
            component,
        } => {
            spec.require_axes(&["delta"])?;
            let base = load_template(geometry, geometry_file, base_dir, geometry_override)?;
            let n = base.n_cells();
            let m = m.unwrap_or(n as i64 / 2);
            let deltas = match spec.axis("delta") {
                Some(a) => a.values()?,
                None => default_delta_axis(n, 200).values()?,
            };
            Ok(SweepOutcome::Delta(delta_scan(&base, *component, m, &deltas, keep)?))
        }
        SweepKind::Alpha {
            geometry,
            geometry_file,
            ms,
            bands,
        } => {
            spec.require_axes(&["alpha"])?;
            let base = load_template(geometry, geometry_file, base_dir, geometry_override)?;
            let alphas = match spec.axis("alpha") {
                Some(a) => a.values()?,
                None => AxisSpec::linear("alpha", 0.3, 1.5, 241).values()?,
            };
            Ok(SweepOutcome::Alpha(alpha_scan(&base, &alphas, ms, *bands, keep)?))
        }
    }
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn parity_str(p: Option<Parity>) -> &'static str {
    p.map_or("", |p| p.as_str())
}

fn opt_f(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

impl SweepOutcome {
    pub fn result(&self) -> &SweepResult {
        match self {
            Self::Scaling(s) => &s.result,
            Self::Heatmap(s) => &s.result,
            Self::Delta(s) => &s.result,
            Self::Alpha(s) => &s.result,
        }
    }

    pub fn spot_check(&self) -> Result<SpotCheck> {
        match self {
            Self::Scaling(s) => s.spot_check(),
            Self::Heatmap(s) => s.spot_check(),
            Self::Delta(s) => s.spot_check(),
            Self::Alpha(s) => s.spot_check(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Self::Scaling(s) => {
                out.push_str("N,series,gamma_min,censored,m,branch,parity\n");
                for r in &s.result.records {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.params[0] as usize,
                        r.series.unwrap_or(""),
                        f(r.gamma_min),
                        u8::from(r.censored),
                        r.m,
                        r.branch,
                        parity_str(r.parity)
                    );
                }
            }
            Self::Heatmap(s) => {
                out.push_str("d,z,gamma_min,censored,m,abs_m,parity\n");
                for r in &s.result.records {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        f(r.params[0]),
                        f(r.params[1]),
                        f(r.gamma_min),
                        u8::from(r.censored),
                        r.m,
                        r.m.abs(),
                        parity_str(r.parity)
                    );
                }
            }
            Self::Delta(s) => {
                out.push_str("delta,branch,omega,gamma,eta,parity,gamma_min\n");
                for r in &s.result.records {
                    for b in &r.branches {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            f(r.params[0]),
                            b.branch,
                            f(b.omega),
                            f(b.gamma),
                            opt_f(b.eta),
                            parity_str(b.parity),
                            f(r.gamma_min)
                        );
                    }
                }
            }
            Self::Alpha(s) => {
                out.push_str("alpha,m,band,omega,gamma");
                for k in 1..=s.base.n_components() {
                    let _ = write!(out, ",occupation_component_{k}");
                }
                out.push('\n');
                for r in &s.result.records {
                    for b in &r.branches {
                        let _ = write!(
                            out,
                            "{},{},{},{},{}",
                            f(r.params[0]),
                            r.params[1] as i64,
                            b.branch,
                            f(b.omega),
                            f(b.gamma)
                        );
                        for o in &b.occupations {
                            let _ = write!(out, ",{}", f(*o));
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out
    }

    /// Machine-readable summary: axes, provenance, fits and crossings.
    pub fn summary(&self, spot: Option<SpotCheck>) -> serde_json::Value {
        use serde_json::json;
        let r = self.result();
        let mut v = json!({
            "kind": r.kind,
            "axes": r.axes.iter().map(|a| json!({
                "name": a.name,
                "count": a.values.len(),
                "start": a.values.first(),
                "stop": a.values.last(),
            })).collect::<Vec<_>>(),
            "records": r.records.len(),
            "provenance": r.provenance,
        });
        let extra = match self {
            Self::Scaling(s) => json!({
                "fit_window": FIT_WINDOW,
                "censor_floor": CENSOR_FLOOR,
                "fits": s.fits,
                "crossover_n": s.crossover_n,
            }),
            Self::Heatmap(s) => {
                let mut labels = std::collections::BTreeMap::<String, usize>::new();
                for rec in &s.result.records {
                    *labels
                        .entry(format!("|m|={} {}", rec.m.abs(), parity_str(rec.parity)))
                        .or_default() += 1;
                }
                let darkest = s
                    .result
                    .records
                    .iter()
                    .min_by(|a, b| a.gamma_min.total_cmp(&b.gamma_min))
                    .map(|rec| json!({"d": rec.params[0], "z": rec.params[1], "gamma_min": rec.gamma_min}));
                json!({ "labels": labels, "darkest": darkest })
            }
            Self::Delta(s) => json!({
                "m": s.m,
                "component": s.component,
                "crossing": s.crossing,
                "crossing_found": s.crossing.is_some(),
                "candidates": s.candidates,
                "rate_minima": s.rate_minima,
                "broad_minimum": s.broad_minimum,
            }),
            Self::Alpha(s) => json!({
                "bands": s.bands,
                "sectors": s.sectors,
            }),
        };
        if let (Some(obj), Some(extra)) = (v.as_object_mut(), extra.as_object()) {
            for (k, val) in extra {
                obj.insert(k.clone(), val.clone());
            }
            if let Some(spot) = spot {
                obj.insert("spot_check".into(), json!(spot));
            }
        }
        v
    }

    /// A gnuplot script plotting the CSV written next to it.
    pub fn plot_script(&self, csv_name: &str) -> String {
        let head = format!("set datafile separator ','\nset key autotitle columnhead\ndata = '{csv_name}'\n");
        let body = match self {
            Self::Scaling(_) => "set logscale y\nset xlabel 'N'\nset ylabel 'Gamma_min / Gamma_0'\n\
plot for [s in 'double single_n single_2n'] data using 1:(strcol(2) eq s ? $3 : NaN) with linespoints title s\n"
                .to_string(),
            Self::Heatmap(_) => "set xlabel 'd / lambda'\nset ylabel 'z / lambda'\nset cblabel 'log10 Gamma_min'\n\
set view map\nsplot data using 1:2:(log10($3)) with image notitle\n"
                .to_string(),
            Self::Delta(_) => "set multiplot layout 2,1\nset xlabel 'delta'\n\
set logscale y\nset ylabel 'Gamma / Gamma_0'\n\
plot for [b=0:1] data using 1:($2 == b ? $4 : NaN) with lines title sprintf('branch %d', b)\n\
unset logscale y\nset ylabel 'Omega / Gamma_0'\n\
plot for [b=0:1] data using 1:($2 == b ? $3 : NaN) with lines title sprintf('branch %d', b)\n\
unset multiplot\n"
                .to_string(),
            Self::Alpha(s) => {
                let mut t = String::from("set xlabel 'alpha'\nset ylabel 'Omega / Gamma_0'\n");
                let _ = writeln!(t, "set multiplot layout {},1", s.ms.len());
                for m in &s.ms {
                    let _ = writeln!(
                        t,
                        "plot for [b=0:{}] data using 1:($2 == {m} && $3 == b ? $4 : NaN) with lines title sprintf('m = {m}, band %d', b + 1)",
                        s.base.n_components() - 1
                    );
                }
                t.push_str("unset multiplot\n");
                t
            }
        };
        head + &body
    }
}

/// Write the requested outputs of a sweep into `dir` and return their paths.
pub fn write_outputs(
    outcome: &SweepOutcome,
    spec: &SweepSpec,
    dir: &Path,
    spot: Option<SpotCheck>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = spec.stem();
    let mut written = Vec::new();
    let csv_name = format!("{stem}.csv");
    if spec.outputs.csv {
        let p = dir.join(&csv_name);
        std::fs::write(&p, outcome.to_csv())?;
        written.push(p);
    }
    if spec.outputs.summary {
        let p = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&outcome.summary(spot)).expect("summary serializes");
        std::fs::write(&p, text + "\n")?;
        written.push(p);
    }
    if spec.outputs.plot_script {
        let p = dir.join(format!("{stem}.gp"));
        std::fs::write(&p, outcome.plot_script(&csv_name))?;
        written.push(p);
    }
    if spec.outputs.records {
        let p = dir.join(format!("{stem}.records.json"));
        let text = serde_json::to_string(&outcome.result().records).expect("records serialize");
        std::fs::write(&p, text + "\n")?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring_pair(z: f64) -> EmitterArray {
        let r = RingSpec::new(9, 0.05);
        build_stack(&[r, r.z(z)]).unwrap()
    }

    #[test]
    fn axis_grids() {
        let a = AxisSpec::linear("x", 0.0, 1.0, 5).values().unwrap();
        assert_eq!(a, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let b = AxisSpec::stepped("N", 8.0, 12.0, 1.0).values().unwrap();
        assert_eq!(b, vec![8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = AxisSpec::stepped("x", 0.0, 0.3, 0.1).values().unwrap();
        assert_eq!(c.len(), 4);
        let mut d = AxisSpec::linear("x", 1e-3, 1e1, 5);
        d.scale = Scale::Log;
        let v = d.values().unwrap();
        for (k, x) in v.iter().enumerate() {
            assert_relative_eq!(*x, 10f64.powi(k as i32 - 3), max_relative = 1e-12);
        }
        let mut e = AxisSpec::stepped("x", 1.0, 100.0, 10.0);
        e.scale = Scale::Log;
        assert_eq!(e.values().unwrap().len(), 3);
    }

    #[test]
    fn axis_errors() {
        let mut both = AxisSpec::linear("x", 0.0, 1.0, 3);
        both.step = Some(0.1);
        assert!(both.values().is_err());
        assert!(AxisSpec::linear("x", 0.0, 1.0, 0).values().is_err());
        assert!(AxisSpec::stepped("x", 0.0, 1.0, -0.1).values().is_err());
        let mut log = AxisSpec::linear("x", 0.0, 1.0, 3);
        log.scale = Scale::Log;
        assert!(log.values().is_err());
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let pts: Vec<(f64, f64)> = (0..10).map(|n| (n as f64, 10f64.powf(-0.3 * n as f64 + 1.5))).collect();
        let fit = fit_log10(&pts).unwrap();
        assert_relative_eq!(fit.slope, -0.3, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 1.5, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit_log10(&pts[..1]).is_none());
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_min(|x| Ok((x - 0.3).powi(2)), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx < 1e-16);
    }

    #[test]
    fn minima_and_widths() {
        let v = [5.0, 4.0, 1.0, 4.0, 5.0, 4.9, 0.1, 4.9, 5.0];
        assert_eq!(interior_minima(&v), vec![2, 6]);
        let p: Vec<f64> = (0..v.len()).map(|k| k as f64).collect();
        assert_eq!(basin_width(&p, &v, 2), 0.0);
        let w = [5.0, 2.0, 1.0, 2.0, 5.0];
        assert_eq!(basin_width(&p, &w, 2), 2.0);
    }

    #[test]
    fn scaling_smoke() {
        let spec = ScalingSpec {
            n_values: (8..=20).collect(),
            spacing: 1.0 / 3.0,
            z: 0.009,
            polarization: Polarization::Transverse,
        };
        let scan = scaling_scan(&spec).unwrap();
        assert_eq!(scan.result.records.len(), 39);
        for s in ScalingSeries::ALL {
            assert_eq!(scan.rates(s).len(), 13);
            assert!(scan.rates(s).iter().all(|r| r.1 > 0.0));
            assert!(scan.fit(s).unwrap().slope.is_finite());
        }
        let spot = scan.spot_check().unwrap();
        assert_eq!(spot.mismatches, 0);
        // single ring of 2N is the same array as the single ring of N = 2N'
        let a = scan.rates(ScalingSeries::Single2N)[0].1;
        let b = band_structure(&spec.build(ScalingSeries::SingleN, 16).unwrap()).unwrap();
        assert_eq!(a, b.darkest().gamma);
    }

    #[test]
    fn records_match_isolated_runs() {
        let mut spec = HeatmapSpec::new(9, Polarization::Transverse);
        spec.d_axis = AxisSpec::linear("d", 0.1, 0.9, 4);
        spec.z_axis = AxisSpec::linear("z", 0.1, 0.9, 3);
        let scan = dz_heatmap(&spec).unwrap();
        assert_eq!(scan.result.records.len(), 12);
        for r in &scan.result.records {
            let bands = band_structure(&spec.build(r.params[0], r.params[1]).unwrap()).unwrap();
            let dark = bands.darkest();
            assert_eq!(r.gamma_min.to_bits(), dark.gamma.to_bits());
            assert_eq!((r.m, r.branch), (dark.m, dark.branch));
            assert!(r.gamma_min >= -NEGATIVE_RATE_TOL);
        }
        assert_eq!(scan.result.records[5].index, vec![1, 2]);
    }

    #[test]
    fn independent_of_worker_count() {
        let mut spec = HeatmapSpec::new(9, Polarization::Transverse);
        spec.d_axis = AxisSpec::linear("d", 0.05, 1.0, 9);
        spec.z_axis = AxisSpec::linear("z", 0.05, 1.0, 7);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| SweepOutcome::Heatmap(dz_heatmap(&spec).unwrap()).to_csv())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn refinement_never_raises_the_gap() {
        let base = ring_pair(0.005);
        let coarse = delta_scan(&base, 1, 4, &default_delta_axis(9, 40).values().unwrap(), false).unwrap();
        let fine = delta_scan(&base, 1, 4, &default_delta_axis(9, 160).values().unwrap(), false).unwrap();
        let (c, f) = (coarse.crossing.unwrap(), fine.crossing.unwrap());
        assert!(c.min_gap <= c.coarse_gap && f.min_gap <= f.coarse_gap);
        assert!(f.coarse_gap <= c.coarse_gap);
        assert_relative_eq!(c.critical_value, f.critical_value, epsilon = 1e-5);
        assert!(c.min_gap >= 0.0);
        assert!(c.critical_value > 0.0 && c.critical_value < 2.0 * PI / 9.0);
    }

    #[test]
    fn monotonic_gap_has_no_crossing() {
        let base = ring_pair(0.005);
        let deltas: Vec<f64> = (0..10).map(|k| 0.2 + 0.005 * k as f64).collect();
        let scan = delta_scan(&base, 1, 4, &deltas, false).unwrap();
        assert!(scan.candidates.is_empty());
        assert!(scan.crossing.is_none());
    }

    #[test]
    fn delta_scan_validates_its_grid() {
        let base = ring_pair(0.005);
        assert!(delta_scan(&base, 1, 4, &[0.0, 0.1, 0.7], false).is_err());
        assert!(delta_scan(&base, 1, 4, &[0.0, 0.2, 0.1], false).is_err());
        assert!(delta_scan(&base, 1, 5, &[0.0, 0.1, 0.2], false).is_err());
        assert!(delta_scan(&base, 2, 4, &[0.0, 0.1, 0.2], false).is_err());
    }

    #[test]
    fn rotation_by_zero_keeps_the_spectrum() {
        let base = ring_pair(0.02);
        let scan = delta_scan(&base, 1, 4, &[0.0, 0.01, 0.02], true).unwrap();
        let direct = band_structure(&base).unwrap();
        let rec = &scan.result.records[0];
        assert_eq!(rec.bands.as_ref().unwrap().eigenvalues(), direct.eigenvalues());
        assert_eq!(rec.branches.len(), 2);
    }

    #[test]
    fn alpha_scan_at_unit_scale_matches_static_run() {
        let base = ring_pair(0.02);
        let alphas = [0.8, 1.0, 1.2];
        let scan = alpha_scan(&base, &alphas, &[0, 4], (0, 1), false).unwrap();
        let direct = band_structure(&base).unwrap();
        for r in scan.result.records.iter().filter(|r| r.params[0] == 1.0) {
            let m = r.tracked_m.unwrap();
            for (b, d) in r.branches.iter().zip(direct.at_m(m)) {
                assert_eq!(b.occupations, d.occupations);
                assert_eq!(b.omega, d.omega);
            }
        }
        assert_eq!(scan.result.records.len(), 6);
        assert!(alpha_scan(&base, &alphas, &[0], (1, 1), false).is_err());
    }

    #[test]
    fn spec_parsing() {
        let text = r#"{
            "kind": "delta",
            "name": "rot",
            "geometry": {"n_cells": 9, "rings": [{"radius": 0.05}, {"radius": 0.05, "z": 0.005}]},
            "m": 4,
            "axes": [{"name": "delta", "start": 0.0, "stop": 0.6, "count": 30}],
            "outputs": {"plot_script": true}
        }"#;
        let spec = SweepSpec::parse(text, Path::new("inline")).unwrap();
        assert_eq!(spec.kind_name(), "delta");
        assert!(spec.outputs.csv && spec.outputs.plot_script && !spec.outputs.records);
        let out = run_sweep(&spec, Path::new("."), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&out, &spec, dir.path(), Some(out.spot_check().unwrap())).unwrap();
        assert_eq!(files.len(), 3);
        let csv = std::fs::read_to_string(&files[0]).unwrap();
        assert!(csv.starts_with("delta,branch,omega,gamma,eta,parity,gamma_min\n"));
        assert_eq!(csv.lines().count(), 1 + 60);
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(summary["crossing_found"], true);
        assert_eq!(summary["spot_check"]["mismatches"], 0);

        let bad_axis = text.replace("\"name\": \"delta\"", "\"name\": \"alpha\"");
        let spec = SweepSpec::parse(&bad_axis, Path::new("inline")).unwrap();
        assert!(run_sweep(&spec, Path::new("."), None).is_err());
        let unknown = text.replace("\"delta\",\n            \"name\"", "\"twist\",\n            \"name\"");
        assert!(SweepSpec::parse(&unknown, Path::new("inline")).is_err());
        let no_geometry = r#"{"kind": "alpha", "ms": [1]}"#;
        let spec = SweepSpec::parse(no_geometry, Path::new("inline")).unwrap();
        assert!(run_sweep(&spec, Path::new("."), None).is_err());
    }

    #[test]
    fn scaling_spec_rounds_n() {
        let text = r#"{"kind": "scaling", "spacing": 0.3333333333333333, "z": 0.009,
            "axes": [{"name": "N", "start": 8, "stop": 10, "step": 1}]}"#;
        let spec = SweepSpec::parse(text, Path::new("inline")).unwrap();
        match run_sweep(&spec, Path::new("."), None).unwrap() {
            SweepOutcome::Scaling(s) => assert_eq!(s.spec.n_values, vec![8, 9, 10]),
            _ => panic!("wrong kind"),
        }
    }
}
