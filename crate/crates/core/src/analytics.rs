//! Closed-form reference results for single rings and infinite chains.
//!
//! Angles follow the geometry convention
//! `p̂ = sinθ cosφ ê_φ + sinθ sinφ ê_r + cosθ ê_z`. Some formulas are more
//! commonly quoted with the polar angle measured from the ring plane instead,
//! `p̂ = cosϑ(cosφ ê_φ + sinφ ê_r) + sinϑ ê_z`; the two are related by
//! `ϑ = π/2 − θ` and both forms are provided where it matters.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;

use crate::bloch::canonical_ms;
use crate::error::{Error, Result};
use crate::geometry::LocalFrame;
use crate::greens::K0;

type C = Complex64;

/// Convert a polar angle measured from `ẑ` into one measured from the ring plane.
pub fn to_in_plane_theta(theta: f64) -> f64 {
    FRAC_PI_2 - theta
}

/// Inverse of [`to_in_plane_theta`].
pub fn from_in_plane_theta(vartheta: f64) -> f64 {
    FRAC_PI_2 - vartheta
}

/// Collective dipole `p̂_m = N^{-1/2} Σ_ℓ e^{i2πmℓ/N} p̂_ℓ` of one Bloch sector.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveDipole {
    pub m: i64,
    #[serde(skip)]
    pub vector: Vector3<C>,
    /// `|p̂_m|² Γ0`.
    pub gamma_eff: f64,
}

/// Effective dipoles of every sector for `N` emitters with orientation `(θ, φ)`.
pub fn effective_dipoles(n_cells: usize, theta: f64, phi: f64) -> Vec<EffectiveDipole> {
    let norm = (n_cells as f64).sqrt();
    let dipoles: Vec<_> = (0..n_cells)
        .map(|l| LocalFrame::at_angle(2.0 * PI * l as f64 / n_cells as f64).orientation(theta, phi))
        .collect();
    canonical_ms(n_cells)
        .into_iter()
        .map(|m| {
            let mut v = Vector3::from_element(C::new(0.0, 0.0));
            for (l, p) in dipoles.iter().enumerate() {
                let arg = 2.0 * PI * ((m * l as i64).rem_euclid(n_cells as i64)) as f64 / n_cells as f64;
                let ph = C::from_polar(1.0, arg) / norm;
                v += p.map(|x| ph * x);
            }
            let gamma_eff = v.iter().map(|z| z.norm_sqr()).sum();
            EffectiveDipole {
                m,
                vector: v,
                gamma_eff,
            }
        })
        .collect()
}

/// Decay rates of a deep-subwavelength ring, `(m, Γ_m/Γ0)` over the canonical
/// sectors: `N cos²θ` at `m = 0`, `(N/2) sin²θ` at `m = ±1`, zero otherwise.
///
/// Rings of one or two emitters have no separate `m = ±1` sectors; for them
/// the rates come from [`effective_dipoles`].
pub fn dicke_rates(n_cells: usize, theta: f64, phi: f64) -> Vec<(i64, f64)> {
    if n_cells < 3 {
        return effective_dipoles(n_cells, theta, phi)
            .into_iter()
            .map(|e| (e.m, e.gamma_eff))
            .collect();
    }
    let n = n_cells as f64;
    let (s, c) = theta.sin_cos();
    canonical_ms(n_cells)
        .into_iter()
        .map(|m| {
            let g = match m.abs() {
                0 => n * c * c,
                1 => 0.5 * n * s * s,
                _ => 0.0,
            };
            (m, g)
        })
        .collect()
}

/// [`dicke_rates`] with the polar angle measured from the ring plane:
/// `N sin²ϑ` at `m = 0` and `(N/2) cos²ϑ` at `m = ±1`.
pub fn dicke_rates_in_plane(n_cells: usize, vartheta: f64, phi: f64) -> Vec<(i64, f64)> {
    dicke_rates(n_cells, from_in_plane_theta(vartheta), phi)
}

/// Nearest-neighbour band `Ω_m ≈ 2 Ω_d cos(2πm/N)`.
#[derive(Debug, Clone, Serialize)]
pub struct NearestNeighborDispersion {
    pub n_cells: usize,
    pub omega_d: f64,
    /// `(m, 2 Ω_d cos(2πm/N))` over the canonical sectors.
    pub curve: Vec<(i64, f64)>,
}

impl NearestNeighborDispersion {
    pub fn at(&self, m: i64) -> f64 {
        2.0 * self.omega_d * (2.0 * PI * m as f64 / self.n_cells as f64).cos()
    }
}

/// Near-field coupling of neighbouring emitters on a ring of spacing `d`:
/// `Ω_d = −3/(4 k0³ d³) [sin²θ (3cos²φ − sin²(π/N)) − 1]`.
pub fn nn_coupling(n_cells: usize, spacing: f64, theta: f64, phi: f64) -> f64 {
    let kd = K0 * spacing;
    let s = (PI / n_cells as f64).sin();
    let geom = theta.sin().powi(2) * (3.0 * phi.cos().powi(2) - s * s) - 1.0;
    -0.75 / kd.powi(3) * geom
}

/// Same coupling with the polar angle measured from the ring plane,
/// `Ω_d = −3/(4 k0³ d³) [cos²ϑ (3cos²φ − sin²(π/N)) − 1]`.
pub fn nn_coupling_in_plane(n_cells: usize, spacing: f64, vartheta: f64, phi: f64) -> f64 {
    nn_coupling(n_cells, spacing, from_in_plane_theta(vartheta), phi)
}

pub fn nn_dispersion(n_cells: usize, spacing: f64, theta: f64, phi: f64) -> NearestNeighborDispersion {
    let omega_d = nn_coupling(n_cells, spacing, theta, phi);
    let mut out = NearestNeighborDispersion {
        n_cells,
        omega_d,
        curve: Vec::new(),
    };
    out.curve = canonical_ms(n_cells).into_iter().map(|m| (m, out.at(m))).collect();
    out
}

/// Orientation with vanishing nearest-neighbour coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatBandAngle {
    pub theta: f64,
    pub phi: f64,
    /// The same polar angle measured from the ring plane.
    pub vartheta: f64,
}

/// Orientations at azimuth `phi` where `Ω_d = 0`, i.e.
/// `sin²θ = 1/(3cos²φ − sin²(π/N))`. For large `N` this is
/// `cosϑ = 1/(√3 cosφ)`. Empty when no real solution exists.
pub fn flat_band_angles_at(n_cells: usize, phi: f64) -> Vec<FlatBandAngle> {
    let s = (PI / n_cells as f64).sin();
    let denom = 3.0 * phi.cos().powi(2) - s * s;
    if denom < 1.0 {
        return Vec::new();
    }
    let t = (1.0 / denom).sqrt().asin();
    let mut out: Vec<FlatBandAngle> = [t, PI - t]
        .into_iter()
        .map(|theta| FlatBandAngle {
            theta,
            phi,
            vartheta: to_in_plane_theta(theta),
        })
        .collect();
    out.dedup_by(|a, b| (a.theta - b.theta).abs() < 1e-15);
    out
}

/// Flat-band candidates with the dipole in the tangential-vertical plane,
/// `φ ∈ {0, π}`.
pub fn flat_band_angle(n_cells: usize) -> Vec<FlatBandAngle> {
    let mut out = Vec::new();
    for phi in [0.0, PI] {
        out.extend(flat_band_angles_at(n_cells, phi));
    }
    out
}

/// Polarization of an infinite linear chain relative to its axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainPolarization {
    Transverse,
    Longitudinal,
}

impl std::str::FromStr for ChainPolarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transverse" | "perpendicular" => Ok(Self::Transverse),
            "longitudinal" | "parallel" => Ok(Self::Longitudinal),
            other => Err(Error::validation(format!("unknown chain polarization '{other}'"))),
        }
    }
}

/// One point of the infinite-chain band.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainPoint {
    pub k: f64,
    pub omega: f64,
    pub gamma: f64,
    /// Bound on the truncation error of the lattice sums.
    pub error: f64,
}

/// Tolerance the lattice sums are converged to.
pub const CHAIN_TOL: f64 = 1e-10;

/// Largest number of explicitly summed terms per lattice sum.
const MAX_TERMS: usize = 50_000_000;

/// `Li_{−j}(z)` for `j = 0..=jmax` from Stirling numbers of the second kind,
/// `Li_{−j}(z) = Σ_k k! S(j+1, k+1) w^{k+1}`, `w = z/(1 − z)`.
fn negative_polylogs(z: C, jmax: usize) -> Vec<C> {
    let w = z / (C::new(1.0, 0.0) - z);
    let size = jmax + 2;
    let mut s = vec![vec![0.0f64; size]; size];
    s[0][0] = 1.0;
    for n in 1..size {
        for k in 1..=n {
            s[n][k] = k as f64 * s[n - 1][k] + s[n - 1][k - 1];
        }
    }
    (0..=jmax)
        .map(|j| {
            let mut acc = C::new(0.0, 0.0);
            let mut fact = 1.0;
            let mut wp = w;
            for k in 0..=j {
                if k > 0 {
                    fact *= k as f64;
                    wp *= w;
                }
                acc += wp * (fact * s[j + 1][k + 1]);
            }
            acc
        })
        .collect()
}

/// `Σ_{ℓ≥1} e^{iℓq}/ℓ^n` for `n ≥ 2`, with an error estimate.
///
/// The first `M − 1` terms are summed explicitly and the remainder
/// `e^{iMq} Σ_{k≥0} e^{ikq} f(M + k)` comes from its expansion in derivatives
/// of `f(ℓ) = ℓ^{-n}`, `Σ_j f^{(j)}(M)/j! · Li_{−j}(e^{iq})`.
fn unit_circle_polylog(n: i32, q: f64) -> Result<(C, f64)> {
    let z = C::from_polar(1.0, q);
    let gap = (C::new(1.0, 0.0) - z).norm();
    if gap < 1e-14 {
        // Li_n(1) = ζ(n)
        let zeta: f64 = match n {
            2 => PI * PI / 6.0,
            3 => 1.202_056_903_159_594_3,
            _ => (1..200_000).map(|l| (l as f64).powi(-n)).sum(),
        };
        return Ok((C::new(zeta, 0.0), 0.0));
    }
    let m = ((100.0 / gap).ceil() as usize).max(64);
    if m > MAX_TERMS {
        return Err(Error::Numerical(format!(
            "lattice sum at q = {q} too close to the light line (|1 − e^(iq)| = {gap:e})"
        )));
    }
    let mut direct = C::new(0.0, 0.0);
    for l in 1..m {
        direct += C::from_polar((l as f64).powi(-n), q * l as f64);
    }
    const J: usize = 10;
    let lis = negative_polylogs(z, J);
    let mf = m as f64;
    let mut tail = C::new(0.0, 0.0);
    let mut last = 0.0;
    // f^{(j)}(M)/j! = (−1)^j C(n+j−1, j) M^{−n−j}
    let mut coeff = mf.powi(-n);
    for (j, li) in lis.iter().enumerate() {
        let term = if j == 0 {
            C::new(coeff, 0.0) / (C::new(1.0, 0.0) - z)
        } else {
            li * coeff
        };
        tail += term;
        last = term.norm();
        coeff *= -((n as usize + j) as f64) / ((j + 1) as f64 * mf);
    }
    let total = direct + C::from_polar(1.0, q * mf) * tail;
    Ok((total, last.max(f64::EPSILON * total.norm() * m as f64)))
}

/// Bloch-mode shift and decay rate of an infinite chain with spacing
/// `spacing` (in λ) at quasi-momenta `ks` (same units as `k0 = 2π`).
///
/// Sums run over `ℓ ≠ 0` of the pair couplings times `e^{ikℓd}`; the `1/ℓ`
/// part is summed in closed form, the rest numerically to [`CHAIN_TOL`].
pub fn infinite_chain_curve(spacing: f64, pol: ChainPolarization, ks: &[f64]) -> Result<Vec<ChainPoint>> {
    if !(spacing > 0.0 && spacing < 1.0) {
        return Err(Error::validation(format!(
            "chain spacing must lie in (0, λ), got {spacing}"
        )));
    }
    let x0 = K0 * spacing;
    let i = C::new(0.0, 1.0);
    // coupling at distance ℓd is Σ_n A_n e^{iℓx0} / (x0 ℓ)^n
    let coeffs: [C; 3] = match pol {
        ChainPolarization::Transverse => [C::new(-0.75, 0.0), -0.75 * i, C::new(0.75, 0.0)],
        ChainPolarization::Longitudinal => [C::new(0.0, 0.0), 1.5 * i, C::new(-1.5, 0.0)],
    };
    ks.iter()
        .map(|&k| {
            let mut total = C::new(0.0, -0.5);
            let mut err = 0.0;
            for q in [x0 + k * spacing, x0 - k * spacing] {
                let q = q.rem_euclid(2.0 * PI);
                if coeffs[0].norm() > 0.0 {
                    let z = C::from_polar(1.0, q);
                    let one_minus = C::new(1.0, 0.0) - z;
                    if one_minus.norm() < 1e-14 {
                        return Err(Error::Numerical(format!("shift diverges on the light line (k = {k})")));
                    }
                    total += coeffs[0] / x0 * (-one_minus.ln());
                }
                for (n, a) in [(2, coeffs[1]), (3, coeffs[2])] {
                    let (li, e) = unit_circle_polylog(n, q)?;
                    total += a / x0.powi(n) * li;
                    err += a.norm() / x0.powi(n) * e;
                }
            }
            if err > CHAIN_TOL * total.norm().max(1.0) * 1e3 {
                return Err(Error::Numerical(format!(
                    "lattice sums at k = {k} converged only to {err:e}"
                )));
            }
            Ok(ChainPoint {
                k,
                omega: total.re,
                gamma: -2.0 * total.im,
                error: 2.0 * err,
            })
        })
        .collect()
}

/// Chain quasi-momentum `2πm/(N d)` matched to ring sector `m`.
pub fn ring_momentum(m: i64, n_cells: usize, spacing: f64) -> f64 {
    2.0 * PI * m as f64 / (n_cells as f64 * spacing)
}

/// The same identification as a fraction of the Brillouin zone, `m/N`.
pub fn ring_momentum_fraction(m: i64, n_cells: usize) -> f64 {
    m as f64 / n_cells as f64
}

/// Light-line angular momentum `m0 = N d/λ`.
pub fn light_line_m(n_cells: usize, spacing: f64) -> f64 {
    n_cells as f64 * spacing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::band_structure;
    use crate::geometry::{build_ring, Polarization, RingSpec};

    #[test]
    fn convention_mapping_round_trips() {
        for t in [0.0, 0.3, FRAC_PI_2, 2.0] {
            assert!((from_in_plane_theta(to_in_plane_theta(t)) - t).abs() < 1e-15);
        }
        let a = dicke_rates(20, 0.4, 0.0);
        let b = dicke_rates_in_plane(20, FRAC_PI_2 - 0.4, 0.0);
        for ((ma, ga), (mb, gb)) in a.iter().zip(&b) {
            assert_eq!(ma, mb);
            assert!((ga - gb).abs() < 1e-12);
        }
        let x = nn_coupling(20, 0.05, 0.4, 0.2);
        assert!((x - nn_coupling_in_plane(20, 0.05, FRAC_PI_2 - 0.4, 0.2)).abs() < 1e-12 * x.abs());
    }

    #[test]
    fn dicke_canonical_values() {
        let t = dicke_rates(20, 0.0, 0.0);
        for (m, g) in t {
            assert_eq!(g, if m == 0 { 20.0 } else { 0.0 });
        }
        let g = dicke_rates(20, FRAC_PI_2, 0.0);
        for (m, r) in g {
            let expect = if m.abs() == 1 { 10.0 } else { 0.0 };
            assert!((r - expect).abs() < 1e-12, "m = {m}: {r}");
        }
    }

    #[test]
    fn effective_dipoles_match_closed_form_and_parseval() {
        for n in [3, 4, 9, 20] {
            for (theta, phi) in [(0.0, 0.0), (0.7, 0.3), (FRAC_PI_2, 1.1), (2.5, -0.4)] {
                let eff = effective_dipoles(n, theta, phi);
                let total: f64 = eff.iter().map(|e| e.gamma_eff).sum();
                assert!((total - n as f64).abs() < 1e-12);
                for (e, (m, g)) in eff.iter().zip(dicke_rates(n, theta, phi)) {
                    assert_eq!(e.m, m);
                    assert!((e.gamma_eff - g).abs() < 1e-12, "N={n} m={m}: {} vs {g}", e.gamma_eff);
                }
            }
        }
    }

    #[test]
    fn solver_reaches_dicke_limit() {
        for n in [9, 20] {
            for pol in Polarization::CANONICAL {
                let (theta, phi) = pol.angles();
                let bands = band_structure(&build_ring(&RingSpec::new(n, 0.005).polarization(pol)).unwrap()).unwrap();
                for (m, g) in dicke_rates(n, theta, phi) {
                    let got = bands.mode(m, 0).unwrap().gamma;
                    if g > 1e-9 {
                        assert!((got - g).abs() / g < 0.01, "N={n} {pol:?} m={m}: {got} vs {g}");
                    } else {
                        assert!(got < 0.01 * n as f64, "N={n} {pol:?} m={m}: {got}");
                    }
                }
            }
        }
    }

    #[test]
    fn nearest_neighbour_signs_and_magnitude() {
        let tang = nn_coupling(20, 0.01, FRAC_PI_2, 0.0);
        let trans = nn_coupling(20, 0.01, 0.0, 0.0);
        assert!(tang < 0.0 && trans > 0.0);
        // head-to-tail limit: −3/(4 x³)(2 − sin²(π/N))
        let x = K0 * 0.01;
        let s = (PI / 20.0).sin();
        assert!((tang + 0.75 * (2.0 - s * s) / x.powi(3)).abs() < 1e-9 * tang.abs());
        assert!((trans - 0.75 / x.powi(3)).abs() < 1e-12 * trans);
    }

    #[test]
    fn nearest_neighbour_curve_tracks_solver() {
        for pol in Polarization::CANONICAL {
            let (theta, phi) = pol.angles();
            let nn = nn_dispersion(20, 0.01, theta, phi);
            assert_eq!(nn.curve.iter().find(|(m, _)| *m == 0).unwrap().1, nn.at(0));
            assert_eq!(nn.at(3), nn.at(-3));
            let bands =
                band_structure(&build_ring(&RingSpec::with_spacing(20, 0.01).polarization(pol)).unwrap()).unwrap();
            let worst = bands
                .modes
                .iter()
                .map(|r| (r.omega - nn.at(r.m)).abs())
                .fold(0.0, f64::max);
            // neighbours beyond the first add up to (ζ(3) − 1)·2|Ω_d| ≈ 0.2·2|Ω_d|
            assert!(worst / (2.0 * nn.omega_d.abs()) <= 0.3, "{pol:?}: {worst}");
            let lowest = bands.modes.iter().min_by(|a, b| a.omega.total_cmp(&b.omega)).unwrap();
            assert_eq!(lowest.m == 0, nn.omega_d < 0.0, "{pol:?}");
        }
    }

    #[test]
    fn flat_band_zeroes_coupling() {
        let cands = flat_band_angle(30);
        assert!(!cands.is_empty());
        for c in &cands {
            assert!(nn_coupling(30, 0.02, c.theta, c.phi).abs() < 1e-9);
        }
        // φ → −φ symmetry
        for phi in [0.1, 0.3] {
            let a = flat_band_angles_at(30, phi);
            let b = flat_band_angles_at(30, -phi);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.theta, y.theta);
            }
        }
        // large N: cosϑ → 1/√3 at φ = 0
        let big = flat_band_angles_at(100_000, 0.0);
        assert!((big[0].vartheta.cos() - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        assert!(flat_band_angles_at(30, 1.2).is_empty());
    }

    #[test]
    fn flat_band_is_flat() {
        let spread = |theta: f64, phi: f64| {
            let pol = Polarization::Angles { theta, phi };
            let b = band_structure(&build_ring(&RingSpec::with_spacing(30, 0.02).polarization(pol)).unwrap()).unwrap();
            let hi = b.modes.iter().map(|r| r.omega).fold(f64::NEG_INFINITY, f64::max);
            let lo = b.modes.iter().map(|r| r.omega).fold(f64::INFINITY, f64::min);
            hi - lo
        };
        let c = flat_band_angle(30)[0];
        assert!(spread(c.theta, c.phi) <= 0.1 * spread(0.0, 0.0));
    }

    fn gamma_oracle(pol: ChainPolarization, spacing: f64, k: f64) -> f64 {
        if k.abs() >= K0 {
            return 0.0;
        }
        let r = (k / K0).powi(2);
        match pol {
            ChainPolarization::Transverse => 3.0 * PI / (4.0 * K0 * spacing) * (1.0 + r),
            ChainPolarization::Longitudinal => 3.0 * PI / (2.0 * K0 * spacing) * (1.0 - r),
        }
    }

    #[test]
    fn chain_decay_matches_light_cone_formula() {
        for spacing in [0.2, 1.0 / 3.0, 0.45] {
            let kmax = PI / spacing;
            let ks: Vec<f64> = (0..41).map(|j| -kmax + 2.0 * kmax * j as f64 / 40.0 + 1e-3).collect();
            for pol in [ChainPolarization::Transverse, ChainPolarization::Longitudinal] {
                let curve = infinite_chain_curve(spacing, pol, &ks).unwrap();
                for p in curve {
                    let expect = gamma_oracle(pol, spacing, p.k);
                    assert!(
                        (p.gamma - expect).abs() < 1e-6,
                        "{pol:?} d={spacing} k={}: {} vs {expect}",
                        p.k,
                        p.gamma
                    );
                }
            }
        }
    }

    #[test]
    fn chain_shift_matches_brute_force_sum() {
        // absolutely convergent part only: longitudinal couplings decay as 1/ℓ²
        let spacing = 0.3;
        let k = 0.4 * K0;
        let curve = infinite_chain_curve(spacing, ChainPolarization::Longitudinal, &[k]).unwrap();
        let x0 = K0 * spacing;
        let mut sum = C::new(0.0, -0.5);
        let terms = 2_000_000;
        for l in 1..terms {
            let x = x0 * l as f64;
            let c = -1.5 * C::from_polar(1.0, x) * C::new(1.0 / x.powi(3), -1.0 / (x * x));
            sum += c * 2.0 * (k * spacing * l as f64).cos();
        }
        assert!(
            (curve[0].omega - sum.re).abs() < 1e-6,
            "{} vs {}",
            curve[0].omega,
            sum.re
        );
    }

    #[test]
    fn large_radial_ring_approaches_transverse_chain() {
        let d = 1.0 / 3.0;
        let ring =
            band_structure(&build_ring(&RingSpec::with_spacing(2000, d).polarization(Polarization::Radial)).unwrap())
                .unwrap();
        let chain = infinite_chain_curve(d, ChainPolarization::Transverse, &[0.0]).unwrap()[0];
        let g = ring.mode(0, 0).unwrap().gamma;
        assert!((g - chain.gamma).abs() / chain.gamma < 0.02, "{g} vs {}", chain.gamma);
    }

    #[test]
    fn radial_ring_tracks_chain_inside_light_cone() {
        let (n, d) = (100, 1.0 / 3.0);
        let ring =
            band_structure(&build_ring(&RingSpec::with_spacing(n, d).polarization(Polarization::Radial)).unwrap())
                .unwrap();
        // the chain's rate jumps to zero on the light line; finite rings smear it
        let m_max = 0.8 * light_line_m(n, d);
        let inside: Vec<_> = ring
            .modes
            .iter()
            .filter(|r| r.gamma > 0.1 && (r.m.abs() as f64) < m_max)
            .collect();
        let ks: Vec<f64> = inside.iter().map(|r| ring_momentum(r.m, n, d)).collect();
        let chain = infinite_chain_curve(d, ChainPolarization::Transverse, &ks).unwrap();
        for (r, c) in inside.iter().zip(&chain) {
            assert!(
                (r.gamma - c.gamma).abs() / c.gamma < 0.1,
                "m = {}: {} vs {}",
                r.m,
                r.gamma,
                c.gamma
            );
        }
    }

    #[test]
    fn light_line_is_reported() {
        let e = infinite_chain_curve(0.3, ChainPolarization::Transverse, &[K0]).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)));
        assert!(infinite_chain_curve(1.2, ChainPolarization::Transverse, &[0.0]).is_err());
    }

    #[test]
    fn polylog_at_known_points() {
        // Li_2(−1) = −π²/12, Li_3(−1) = −3ζ(3)/4
        let (l2, _) = unit_circle_polylog(2, PI).unwrap();
        assert!((l2.re + PI * PI / 12.0).abs() < 1e-12 && l2.im.abs() < 1e-12);
        let (l3, _) = unit_circle_polylog(3, PI).unwrap();
        assert!((l3.re + 0.75 * 1.202_056_903_159_594_3).abs() < 1e-12);
        // Im Li_3(e^{iq}) = (q³ − 3πq² + 2π²q)/12 on (0, 2π)
        let q = 0.01;
        let (l3, e) = unit_circle_polylog(3, q).unwrap();
        let expect = (q.powi(3) - 3.0 * PI * q * q + 2.0 * PI * PI * q) / 12.0;
        assert!((l3.im - expect).abs() < 1e-11 && e < 1e-10, "{} {expect} {e}", l3.im);
        // Re Li_2(e^{iq}) = π²/6 − q(2π − q)/4
        let (l2, _) = unit_circle_polylog(2, q).unwrap();
        assert!((l2.re - (PI * PI / 6.0 - q * (2.0 * PI - q) / 4.0)).abs() < 1e-11);
    }

    #[test]
    fn momentum_identifications() {
        assert!((ring_momentum(5, 100, 1.0 / 3.0) - 2.0 * PI * 5.0 * 3.0 / 100.0).abs() < 1e-12);
        assert_eq!(ring_momentum_fraction(25, 100), 0.25);
        assert!((light_line_m(100, 1.0 / 3.0) - 33.333_333_333_333_336).abs() < 1e-9);
    }
}
