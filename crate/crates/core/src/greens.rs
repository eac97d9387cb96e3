//! Free-space dyadic Green's tensor and the pairwise dipole-dipole couplings.
//!
//! All quantities use canonical units: lengths in units of the transition
//! wavelength (so `k0 = 2π`) and rates in units of the single-emitter decay
//! rate `Γ0 = 1`. In these units the complex coupling between two dipoles is
//!
//! ```text
//! Ω_ij − iΓ_ij/2 = −(3π/k0) p̂_i · G(r_i − r_j) · p̂_j
//! ```
//!
//! which is what [`PairCoupling::as_complex`] returns.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Wavenumber of the transition in canonical units (`λ = 1`).
pub const K0: f64 = 2.0 * PI;

/// Single-emitter decay rate in canonical units.
pub const GAMMA0: f64 = 1.0;

/// Default minimum separation, in wavelengths, below which two emitters are
/// treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

/// Tolerance on `|p̂| = 1` for dipole orientations.
pub const UNIT_NORM_TOL: f64 = 1e-12;

pub type Vec3 = Vector3<f64>;

/// Physical wavelength used only to label outputs; all computations are
/// carried out in units of the wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub lambda_nm: Option<f64>,
}

impl Units {
    pub fn canonical() -> Self {
        Self { lambda_nm: None }
    }

    /// Convert a length in wavelengths to nanometres, if a wavelength is declared.
    pub fn to_nm(&self, length: f64) -> Option<f64> {
        self.lambda_nm.map(|l| l * length)
    }
}

/// The 3×3 free-space Green's tensor at one displacement, in canonical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensTensor(pub Matrix3<Complex64>);

impl GreensTensor {
    pub fn entry(&self, a: usize, b: usize) -> Complex64 {
        self.0[(a, b)]
    }

    /// `u · G · v` for real vectors.
    pub fn contract(&self, u: &Vec3, v: &Vec3) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..3 {
            for b in 0..3 {
                acc += self.0[(a, b)] * (u[a] * v[b]);
            }
        }
        acc
    }

    /// `G · v` for a complex vector.
    pub fn apply(&self, v: &Vector3<Complex64>) -> Vector3<Complex64> {
        self.0 * v
    }
}

/// Coherent and dissipative coupling between two emitters, in units of `Γ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoupling {
    pub omega: f64,
    pub gamma: f64,
}

impl PairCoupling {
    /// Coupling of an emitter with itself: no shift, natural decay.
    pub const SELF: PairCoupling = PairCoupling {
        omega: 0.0,
        gamma: GAMMA0,
    };

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.omega, -0.5 * self.gamma)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self {
            omega: z.re,
            gamma: -2.0 * z.im,
        }
    }
}

/// Radial profile functions of the tensor at `x = k0 r`:
/// `G = (k0/4π) [a(x) I − b(x) r̂r̂ᵀ]` with
/// `a = e^{ix}(x² + ix − 1)/x³` and `b = e^{ix}(x² + 3ix − 3)/x³`.
///
/// The imaginary parts cancel to leading orders as `x → 0`, so below
/// `x = 0.5` they come from their Taylor series instead.
fn radial_profiles(x: f64) -> (Complex64, Complex64) {
    let (s, c) = x.sin_cos();
    let x2 = x * x;
    let x3 = x2 * x;
    let re_a = ((x2 - 1.0) * c - x * s) / x3;
    let re_b = ((x2 - 3.0) * c - 3.0 * x * s) / x3;
    let (im_a, im_b) = if x < 0.5 {
        (im_series(x, 1.0), im_series(x, 3.0))
    } else {
        (((x2 - 1.0) * s + x * c) / x3, ((x2 - 3.0) * s + 3.0 * x * c) / x3)
    };
    (Complex64::new(re_a, im_a), Complex64::new(re_b, im_b))
}

/// Series of `[(x² − c) sin x + c x cos x] / x³` around zero.
fn im_series(x: f64, c: f64) -> f64 {
    let x2 = x * x;
    // coefficient of x^{2n+1} in the numerator, n >= 1; the n = 0 term vanishes
    let mut sum = 0.0;
    let mut pow = 1.0; // x^{2n+1} / x^3 = x^{2n-2}
    let mut sign = -1.0; // (-1)^n
    for n in 1..14 {
        let f_odd_lo = factorial(2 * n - 1);
        let f_even = factorial(2 * n);
        let f_odd = factorial(2 * n + 1);
        let coeff = -sign / f_odd_lo - c * sign / f_odd + c * sign / f_even;
        sum += coeff * pow;
        pow *= x2;
        sign = -sign;
    }
    sum
}

fn factorial(n: i32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Green's tensor at displacement `r` (in wavelengths), rejecting separations
/// below [`COINCIDENT_EPS`].
pub fn green_tensor(r: &Vec3) -> Result<GreensTensor> {
    green_tensor_with_eps(r, COINCIDENT_EPS)
}

pub fn green_tensor_with_eps(r: &Vec3, eps: f64) -> Result<GreensTensor> {
    let dist = r.norm();
    if dist < eps {
        return Err(Error::CoincidentEmitters {
            first: 0,
            second: 1,
            separation: dist,
        });
    }
    let (a, b) = radial_profiles(K0 * dist);
    let pref = K0 / (4.0 * PI);
    let rhat = r / dist;
    let m = Matrix3::from_fn(|i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (a * delta - b * (rhat[i] * rhat[j])) * pref
    });
    Ok(GreensTensor(m))
}

pub(crate) fn check_unit(p: &Vec3) -> Result<()> {
    let n = p.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL || !n.is_finite() {
        return Err(Error::validation(format!(
            "dipole orientation must be a unit vector, got norm {n}"
        )));
    }
    Ok(())
}

/// Complex coupling between two distinct emitters, skipping input validation.
///
/// Returns `None` when the separation is below `eps`.
pub(crate) fn coupling_raw(r_i: &Vec3, p_i: &Vec3, r_j: &Vec3, p_j: &Vec3, eps: f64) -> Option<Complex64> {
    let sep = r_i - r_j;
    let dist = sep.norm();
    if dist < eps {
        return None;
    }
    let (a, b) = radial_profiles(K0 * dist);
    let rhat = sep / dist;
    let pp = p_i.dot(p_j);
    let pr = p_i.dot(&rhat) * p_j.dot(&rhat);
    Some((a * pp - b * pr) * (-0.75 * GAMMA0))
}

/// Coherent and dissipative coupling between two distinct emitters.
///
/// For the self term use [`PairCoupling::SELF`]; it is never obtained by a
/// limit of the tensor since the real part diverges at zero separation.
pub fn pair_coupling(r_i: &Vec3, p_i: &Vec3, r_j: &Vec3, p_j: &Vec3) -> Result<PairCoupling> {
    pair_coupling_with_eps(r_i, p_i, r_j, p_j, COINCIDENT_EPS)
}

pub fn pair_coupling_with_eps(r_i: &Vec3, p_i: &Vec3, r_j: &Vec3, p_j: &Vec3, eps: f64) -> Result<PairCoupling> {
    check_unit(p_i)?;
    check_unit(p_j)?;
    coupling_raw(r_i, p_i, r_j, p_j, eps)
        .map(PairCoupling::from_complex)
        .ok_or(Error::CoincidentEmitters {
            first: 0,
            second: 1,
            separation: (r_i - r_j).norm(),
        })
}
