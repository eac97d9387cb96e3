//! JSON geometry files.
//!
//! Two layouts are accepted: a list of `rings` (one entry per component, all
//! sharing `n_cells`) or an explicit list of `emitters`. Lengths are in
//! wavelengths unless `"units": "nm"` is given together with `lambda_nm`.
//! Angles are radians unless `"angle_units": "deg"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_stack, EmitterArray, Polarization, RingSpec, FILE_SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::greens::Vec3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_units: Option<String>,
    pub n_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<Vec<RingEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitters: Option<Vec<EmitterEntry>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub radius: f64,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<String>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub detuning: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterEntry {
    pub cell: usize,
    pub component: usize,
    pub position: [f64; 3],
    pub dipole: [f64; 3],
    #[serde(default)]
    pub detuning: f64,
}

/// Parse a geometry document. Symmetry is not checked here.
pub fn parse_geometry(text: &str, origin: &Path) -> Result<EmitterArray> {
    let doc: GeometryFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    doc.into_array().map_err(|e| match e {
        Error::Validation(message) => Error::Parse {
            path: origin.to_path_buf(),
            line: None,
            message,
        },
        other => other,
    })
}

/// Read a geometry file without enforcing rotational symmetry.
pub fn read_array_file(path: impl AsRef<Path>) -> Result<EmitterArray> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_geometry(&text, path)
}

/// Read a geometry file and verify `C_N` symmetry to within `1e-6`.
pub fn load_array_file(path: impl AsRef<Path>) -> Result<EmitterArray> {
    let array = read_array_file(path)?;
    array.check_symmetry(FILE_SYMMETRY_TOL)?;
    Ok(array)
}

/// Serialize an array in the explicit-emitter layout (lengths in wavelengths).
pub fn to_geometry_json(array: &EmitterArray) -> String {
    let d = array.n_components();
    let emitters = (0..array.n_cells())
        .flat_map(|cell| (0..d).map(move |comp| (cell, comp)))
        .map(|(cell, comp)| {
            let r = array.position(cell, comp);
            let p = array.dipole(cell, comp);
            EmitterEntry {
                cell,
                component: comp,
                position: [r.x, r.y, r.z],
                dipole: [p.x, p.y, p.z],
                detuning: array.detunings()[comp],
            }
        })
        .collect();
    let doc = GeometryFile {
        description: None,
        provenance: None,
        lambda_nm: array.lambda_nm(),
        units: None,
        angle_units: None,
        n_cells: array.n_cells(),
        rings: None,
        emitters: Some(emitters),
    };
    serde_json::to_string_pretty(&doc).expect("geometry serializes")
}

impl GeometryFile {
    fn length_scale(&self) -> Result<f64> {
        match self.units.as_deref() {
            None | Some("lambda") | Some("wavelength") => Ok(1.0),
            Some("nm") => match self.lambda_nm {
                Some(l) if l > 0.0 => Ok(1.0 / l),
                _ => Err(Error::validation("units \"nm\" requires a positive lambda_nm")),
            },
            Some(other) => Err(Error::validation(format!("unknown length units '{other}'"))),
        }
    }

    fn angle_scale(&self) -> Result<f64> {
        match self.angle_units.as_deref() {
            None | Some("rad") => Ok(1.0),
            Some("deg") => Ok(std::f64::consts::PI / 180.0),
            Some(other) => Err(Error::validation(format!("unknown angle units '{other}'"))),
        }
    }

    pub fn into_array(self) -> Result<EmitterArray> {
        let ls = self.length_scale()?;
        let ang = self.angle_scale()?;
        let n = self.n_cells;
        let array = match (&self.rings, &self.emitters) {
            (Some(rings), None) => {
                let specs = rings
                    .iter()
                    .map(|r| {
                        let mut s = RingSpec::new(n, r.radius * ls)
                            .z(r.z * ls)
                            .rotated(r.delta * ang)
                            .detuned(r.detuning);
                        s = match &r.polarization {
                            Some(name) => s.polarization(name.parse::<Polarization>()?),
                            None => s.polarization(Polarization::Angles {
                                theta: r.theta * ang,
                                phi: r.phi * ang,
                            }),
                        };
                        Ok(s)
                    })
                    .collect::<Result<Vec<_>>>()?;
                build_stack(&specs)?
            }
            (None, Some(emitters)) => self.explicit_array(emitters, ls)?,
            _ => {
                return Err(Error::validation(
                    "geometry must contain exactly one of 'rings' or 'emitters'",
                ))
            }
        };
        Ok(array.with_lambda_nm(self.lambda_nm))
    }

    fn explicit_array(&self, emitters: &[EmitterEntry], ls: f64) -> Result<EmitterArray> {
        let n = self.n_cells;
        if n == 0 || emitters.is_empty() || !emitters.len().is_multiple_of(n) {
            return Err(Error::validation(format!(
                "{} emitters cannot fill {n} cells evenly",
                emitters.len()
            )));
        }
        let d = emitters.len() / n;
        let mut positions = vec![None; n * d];
        let mut dipoles = vec![Vec3::zeros(); n * d];
        let mut detunings: Vec<Option<f64>> = vec![None; d];
        for (k, e) in emitters.iter().enumerate() {
            if e.cell >= n || e.component >= d {
                return Err(Error::validation(format!(
                    "emitter {k}: cell {} / component {} out of range ({n} cells, {d} components)",
                    e.cell, e.component
                )));
            }
            let idx = e.cell * d + e.component;
            if positions[idx].is_some() {
                return Err(Error::validation(format!(
                    "emitter {k}: duplicate (cell {}, component {})",
                    e.cell, e.component
                )));
            }
            positions[idx] = Some(Vec3::from(e.position) * ls);
            let p = Vec3::from(e.dipole);
            let norm = p.norm();
            if !(norm > 0.0) {
                return Err(Error::validation(format!("emitter {k}: zero dipole vector")));
            }
            dipoles[idx] = if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
                p / norm
            } else {
                p
            };
            match detunings[e.component] {
                None => detunings[e.component] = Some(e.detuning),
                Some(prev) if prev != e.detuning => {
                    return Err(Error::validation(format!(
                        "emitter {k}: detuning {} differs from {prev} for component {}",
                        e.detuning, e.component
                    )))
                }
                _ => {}
            }
        }
        let positions = positions.into_iter().map(|p| p.expect("all slots filled")).collect();
        let detunings = detunings.into_iter().map(|d| d.unwrap_or(0.0)).collect();
        EmitterArray::new(n, d, positions, dipoles, detunings)
    }
}
