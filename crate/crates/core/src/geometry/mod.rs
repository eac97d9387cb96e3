//! Emitter arrays built from declarative ring stacks.
//!
//! An [`EmitterArray`] holds `N` unit cells of `d` components each. Cell `ℓ`
//! of a stack of rings contains site `ℓ` of every ring, so the array maps onto
//! itself under a `2π/N` rotation about `ẑ` with `(ℓ, α) → (ℓ + 1, α)`.

mod file;

use std::f64::consts::PI;

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

pub use file::{load_array_file, parse_geometry, read_array_file, to_geometry_json, GeometryFile};

use crate::error::{Error, Result};
use crate::greens::{check_unit, Vec3, COINCIDENT_EPS};

/// Symmetry tolerance for arrays produced by the builders.
pub const BUILT_SYMMETRY_TOL: f64 = 1e-10;

/// Symmetry tolerance for arrays read from files.
pub const FILE_SYMMETRY_TOL: f64 = 1e-6;

/// Dipole orientation relative to the local ring frame.
///
/// `Angles { theta, phi }` gives `p̂ = sinθ cosφ ê_φ + sinθ sinφ ê_r + cosθ ê_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Transverse,
    Tangential,
    Radial,
    Angles { theta: f64, phi: f64 },
}

impl Polarization {
    pub fn angles(&self) -> (f64, f64) {
        match *self {
            Polarization::Transverse => (0.0, 0.0),
            Polarization::Tangential => (PI / 2.0, 0.0),
            Polarization::Radial => (PI / 2.0, PI / 2.0),
            Polarization::Angles { theta, phi } => (theta, phi),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Polarization::Transverse => "transverse".into(),
            Polarization::Tangential => "tangential".into(),
            Polarization::Radial => "radial".into(),
            Polarization::Angles { theta, phi } => format!("theta={theta},phi={phi}"),
        }
    }

    pub const CANONICAL: [Polarization; 3] = [Polarization::Transverse, Polarization::Radial, Polarization::Tangential];
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transverse" | "z" => Ok(Polarization::Transverse),
            "tangential" | "phi" => Ok(Polarization::Tangential),
            "radial" | "r" => Ok(Polarization::Radial),
            other => Err(Error::validation(format!(
                "unknown polarization '{other}' (expected transverse, radial or tangential)"
            ))),
        }
    }
}

/// Radial, tangential and vertical unit vectors at azimuth `angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub e_r: Vec3,
    pub e_phi: Vec3,
    pub e_z: Vec3,
}

impl LocalFrame {
    pub fn at_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            e_r: Vec3::new(c, s, 0.0),
            e_phi: Vec3::new(-s, c, 0.0),
            e_z: Vec3::z(),
        }
    }

    pub fn orientation(&self, theta: f64, phi: f64) -> Vec3 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let v = self.e_phi * (st * cp) + self.e_r * (st * sp) + self.e_z * ct;
        v.normalize()
    }
}

/// One ring of a concentric stack. Lengths in wavelengths, detuning in `Γ0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub n_cells: usize,
    pub radius: f64,
    pub z_offset: f64,
    pub rotation: f64,
    pub polar: f64,
    pub azimuth: f64,
    pub detuning: f64,
}

impl RingSpec {
    pub fn new(n_cells: usize, radius: f64) -> Self {
        Self {
            n_cells,
            radius,
            z_offset: 0.0,
            rotation: 0.0,
            polar: 0.0,
            azimuth: 0.0,
            detuning: 0.0,
        }
    }

    /// Ring of `n_cells` sites whose nearest-neighbour distance is `spacing`.
    pub fn with_spacing(n_cells: usize, spacing: f64) -> Self {
        Self::new(n_cells, radius_for_spacing(n_cells, spacing))
    }

    pub fn z(mut self, z: f64) -> Self {
        self.z_offset = z;
        self
    }

    pub fn rotated(mut self, delta: f64) -> Self {
        self.rotation = delta;
        self
    }

    pub fn polarization(mut self, pol: Polarization) -> Self {
        let (t, p) = pol.angles();
        self.polar = t;
        self.azimuth = p;
        self
    }

    pub fn detuned(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    /// Nearest-neighbour distance `2R sin(π/N)`.
    pub fn lattice_constant(&self) -> f64 {
        2.0 * self.radius * (PI / self.n_cells as f64).sin()
    }

    fn validate(&self) -> Result<()> {
        if self.n_cells < 1 {
            return Err(Error::validation("ring needs at least one emitter"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::validation(format!(
                "ring radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    fn reduced_rotation(&self) -> f64 {
        let period = 2.0 * PI / self.n_cells as f64;
        self.rotation.rem_euclid(period)
    }

    fn site(&self, cell: usize) -> (Vec3, Vec3) {
        let angle = 2.0 * PI * cell as f64 / self.n_cells as f64 + self.reduced_rotation();
        let frame = LocalFrame::at_angle(angle);
        let pos = frame.e_r * self.radius + Vec3::new(0.0, 0.0, self.z_offset);
        (pos, frame.orientation(self.polar, self.azimuth))
    }
}

pub fn radius_for_spacing(n_cells: usize, spacing: f64) -> f64 {
    spacing / (2.0 * (PI / n_cells as f64).sin())
}

/// Positions, orientations and detunings of `N·d` emitters grouped into `N`
/// unit cells. Emitter `(ℓ, α)` is stored at index `ℓ·d + α`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterArray {
    n_cells: usize,
    n_components: usize,
    positions: Vec<Vec3>,
    dipoles: Vec<Vec3>,
    detunings: Vec<f64>,
    lambda_nm: Option<f64>,
}

impl EmitterArray {
    /// Validates orientations and separations but not rotational symmetry.
    pub fn new(
        n_cells: usize,
        n_components: usize,
        positions: Vec<Vec3>,
        dipoles: Vec<Vec3>,
        detunings: Vec<f64>,
    ) -> Result<Self> {
        if n_cells == 0 || n_components == 0 {
            return Err(Error::validation("array needs at least one cell and one component"));
        }
        let n = n_cells * n_components;
        if positions.len() != n || dipoles.len() != n {
            return Err(Error::validation(format!(
                "expected {n} positions and dipoles, got {} and {}",
                positions.len(),
                dipoles.len()
            )));
        }
        if detunings.len() != n_components {
            return Err(Error::validation(format!(
                "expected {n_components} detunings, got {}",
                detunings.len()
            )));
        }
        for p in &dipoles {
            check_unit(p)?;
        }
        if let Some(bad) = positions.iter().find(|r| !(r.iter().all(|c| c.is_finite()))) {
            return Err(Error::validation(format!("non-finite position {bad:?}")));
        }
        let array = Self {
            n_cells,
            n_components,
            positions,
            dipoles,
            detunings,
            lambda_nm: None,
        };
        array.check_separations(COINCIDENT_EPS)?;
        Ok(array)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn index(&self, cell: usize, component: usize) -> usize {
        cell * self.n_components + component
    }

    pub fn position(&self, cell: usize, component: usize) -> &Vec3 {
        &self.positions[self.index(cell, component)]
    }

    pub fn dipole(&self, cell: usize, component: usize) -> &Vec3 {
        &self.dipoles[self.index(cell, component)]
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn dipoles(&self) -> &[Vec3] {
        &self.dipoles
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Detuning of the emitter at flat index `i`.
    pub fn detuning_at(&self, i: usize) -> f64 {
        self.detunings[i % self.n_components]
    }

    pub fn lambda_nm(&self) -> Option<f64> {
        self.lambda_nm
    }

    pub fn with_lambda_nm(mut self, lambda_nm: Option<f64>) -> Self {
        self.lambda_nm = lambda_nm;
        self
    }

    /// Replace per-component detunings.
    pub fn with_detunings(mut self, detunings: Vec<f64>) -> Result<Self> {
        if detunings.len() != self.n_components {
            return Err(Error::validation("detuning count must match component count"));
        }
        self.detunings = detunings;
        Ok(self)
    }

    fn check_separations(&self, eps: f64) -> Result<()> {
        for i in 0..self.positions.len() {
            for j in (i + 1)..self.positions.len() {
                let sep = (self.positions[i] - self.positions[j]).norm();
                if sep < eps {
                    return Err(Error::CoincidentEmitters {
                        first: i,
                        second: j,
                        separation: sep,
                    });
                }
            }
        }
        Ok(())
    }

    /// Largest deviation from `C_N` covariance over all cells and components,
    /// as `(deviation, cell, component)`.
    pub fn symmetry_deviation(&self) -> (f64, usize, usize) {
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), 2.0 * PI / self.n_cells as f64);
        let mut worst = (0.0, 0, 0);
        for cell in 0..self.n_cells {
            let next = (cell + 1) % self.n_cells;
            for comp in 0..self.n_components {
                let dr = (rot * self.position(cell, comp) - self.position(next, comp)).norm();
                let dp = (rot * self.dipole(cell, comp) - self.dipole(next, comp)).norm();
                let dev = dr.max(dp);
                if dev > worst.0 {
                    worst = (dev, cell, comp);
                }
            }
        }
        worst
    }

    pub fn check_symmetry(&self, tol: f64) -> Result<()> {
        let (dev, cell, component) = self.symmetry_deviation();
        if dev > tol {
            return Err(Error::Symmetry {
                n_cells: self.n_cells,
                cell,
                next_cell: (cell + 1) % self.n_cells,
                component,
                deviation: dev,
            });
        }
        Ok(())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.check_symmetry(tol).is_ok()
    }

    /// Rigid motion of the whole array (used to probe invariance of spectra).
    pub fn transformed(&self, rotation: &Rotation3<f64>, shift: &Vec3) -> Result<Self> {
        let positions = self.positions.iter().map(|r| rotation * r + shift).collect();
        let dipoles = self.dipoles.iter().map(|p| (rotation * p).normalize()).collect();
        Ok(Self::new(
            self.n_cells,
            self.n_components,
            positions,
            dipoles,
            self.detunings.clone(),
        )?
        .with_lambda_nm(self.lambda_nm))
    }

    /// Rotate every emitter of one component about `ẑ` by `angle`, leaving the
    /// other components in place.
    pub fn rotate_component(&self, component: usize, angle: f64) -> Result<Self> {
        if component >= self.n_components {
            return Err(Error::validation(format!(
                "component {component} out of range ({} components)",
                self.n_components
            )));
        }
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), angle);
        let mut out = self.clone();
        for cell in 0..self.n_cells {
            let i = self.index(cell, component);
            out.positions[i] = rot * self.positions[i];
            out.dipoles[i] = rot * self.dipoles[i];
        }
        out.check_separations(COINCIDENT_EPS)?;
        Ok(out)
    }

    /// Stable hex digest of the array contents.
    pub fn geometry_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = to_geometry_json(self);
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Single ring as a one-component array.
pub fn build_ring(spec: &RingSpec) -> Result<EmitterArray> {
    build_stack(std::slice::from_ref(spec))
}

/// Concentric stack of rings sharing one emitter number; ring `α` becomes
/// component `α` of every unit cell.
pub fn build_stack(specs: &[RingSpec]) -> Result<EmitterArray> {
    let first = specs
        .first()
        .ok_or_else(|| Error::validation("stack needs at least one ring"))?;
    for s in specs {
        s.validate()?;
        if s.n_cells != first.n_cells {
            return Err(Error::validation(format!(
                "all rings must share one emitter number, got {} and {}",
                first.n_cells, s.n_cells
            )));
        }
    }
    let n = first.n_cells;
    let d = specs.len();
    let mut positions = Vec::with_capacity(n * d);
    let mut dipoles = Vec::with_capacity(n * d);
    for cell in 0..n {
        for s in specs {
            let (r, p) = s.site(cell);
            positions.push(r);
            dipoles.push(p);
        }
    }
    let detunings = specs.iter().map(|s| s.detuning).collect();
    EmitterArray::new(n, d, positions, dipoles, detunings)
}

/// Uniform rescaling of all coordinates by `alpha`; orientations and
/// detunings are unchanged.
pub fn scale_array(array: &EmitterArray, alpha: f64) -> Result<EmitterArray> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::validation(format!("scale factor must be positive, got {alpha}")));
    }
    let mut out = array.clone();
    for r in &mut out.positions {
        *r *= alpha;
    }
    if alpha < 1.0 {
        out.check_separations(COINCIDENT_EPS)?;
    }
    Ok(out)
}
