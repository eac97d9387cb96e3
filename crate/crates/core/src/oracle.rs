//! Dense reference solver.
//!
//! Assembles the full `N·d × N·d` effective Hamiltonian with entries
//! `Ω_ij − iΓ_ij/2` and diagonalizes it without using any symmetry. This is
//! the ground truth the Bloch path is checked against, and the only path for
//! arrays that are not rotationally symmetric.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::bloch::{band_structure, canonical_ms, fix_phase, phase_index, phase_table};
use crate::error::{Error, Result};
use crate::geometry::{EmitterArray, FILE_SYMMETRY_TOL};
use crate::greens::{check_unit, coupling_raw, PairCoupling, Vec3, COINCIDENT_EPS};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Residual bound relative to `‖H‖_F` accepted by [`diagonalize`].
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Below this `|vᵀv|` a mode is flagged as a possible exceptional point.
pub const EXCEPTIONAL_TOL: f64 = 1e-6;

/// Overlap above which a mode gets a definite angular-momentum label.
pub const LABEL_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub matrix: DMatrix<C>,
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |H − Hᵀ|` over all entries.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).norm());
            }
        }
        worst
    }

    /// The real symmetric decay matrix `Γ = −2 Im H`.
    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        self.matrix.map(|z| -2.0 * z.im)
    }

    pub fn trace(&self) -> C {
        self.matrix.diagonal().iter().sum()
    }
}

/// Assemble `H` for an emitter array, entries in cell-major, component-minor order.
pub fn assemble(array: &EmitterArray) -> Result<EffectiveHamiltonian> {
    let detunings: Vec<f64> = (0..array.len()).map(|i| array.detuning_at(i)).collect();
    assemble_emitters(array.positions(), array.dipoles(), &detunings)
}

/// Assemble `H` for an arbitrary list of emitters.
pub fn assemble_emitters(positions: &[Vec3], dipoles: &[Vec3], detunings: &[f64]) -> Result<EffectiveHamiltonian> {
    let n = positions.len();
    if dipoles.len() != n || detunings.len() != n {
        return Err(Error::validation(format!(
            "{n} positions, {} dipoles and {} detunings",
            dipoles.len(),
            detunings.len()
        )));
    }
    for p in dipoles {
        check_unit(p)?;
    }
    let mut matrix = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        matrix[(i, i)] = C::new(detunings[i], 0.0) + PairCoupling::SELF.as_complex();
        for j in i + 1..n {
            let z = coupling_raw(&positions[i], &dipoles[i], &positions[j], &dipoles[j], COINCIDENT_EPS).ok_or(
                Error::CoincidentEmitters {
                    first: i,
                    second: j,
                    separation: (positions[i] - positions[j]).norm(),
                },
            )?;
            matrix[(i, j)] = z;
            matrix[(j, i)] = z;
        }
    }
    Ok(EffectiveHamiltonian { matrix })
}

/// One eigenmode of the full Hamiltonian.
#[derive(Debug, Clone, Serialize)]
pub struct FullMode {
    pub omega: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub amplitudes: Vec<C>,
    pub residual: f64,
    /// `1 / |vᵀv|` for the unit-norm eigenvector.
    pub condition: f64,
    pub exceptional: bool,
    /// Angular momentum when one sector holds more than 99% of the weight.
    pub m_label: Option<i64>,
    /// Same, with `±m` merged.
    pub abs_m_label: Option<i64>,
    /// `(m, weight)` over the canonical sectors, empty until classified.
    pub overlaps: Vec<(i64, f64)>,
    /// Two-component arrays: `(symmetric, antisymmetric)` weight summed over `m`.
    pub parity_weights: Option<(f64, f64)>,
}

impl FullMode {
    pub fn eigenvalue(&self) -> C {
        C::new(self.omega, -0.5 * self.gamma)
    }

    pub fn overlap(&self, m: i64) -> f64 {
        self.overlaps.iter().find(|(k, _)| *k == m).map_or(0.0, |(_, w)| *w)
    }

    /// Weight in the sectors `m` and `−m` together.
    pub fn abs_overlap(&self, m: i64) -> f64 {
        if m == 0 || self.overlaps.iter().all(|(k, _)| *k != -m) {
            self.overlap(m)
        } else {
            self.overlap(m) + self.overlap(-m)
        }
    }

    /// Label as printed in reports: the integer `m` or `mixed`.
    pub fn label(&self) -> String {
        self.m_label.map_or_else(|| "mixed".to_string(), |m| m.to_string())
    }
}

/// Eigenvectors of an upper-triangular matrix by back substitution.
/// Column `k` solves `(T − t_kk) x = 0` with `x_k = 1` and `x_i = 0` for `i > k`.
fn triangular_eigenvectors(t: &DMatrix<C>) -> DMatrix<C> {
    let n = t.nrows();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut x = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        let lambda = t[(k, k)];
        x[(k, k)] = C::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < small {
                den = C::new(small, 0.0);
            }
            x[(i, k)] = -s / den;
        }
        // rescale to keep the column bounded
        let m = (0..=k).map(|i| x[(i, k)].norm()).fold(0.0, f64::max);
        if m > 1.0 {
            for i in 0..=k {
                x[(i, k)] /= m;
            }
        }
    }
    x
}

fn norm2(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [C]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

fn residual(h: &DMatrix<C>, value: C, v: &[C]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = -value * v[i];
        for j in 0..n {
            s += h[(i, j)] * v[j];
        }
        acc += s.norm_sqr();
    }
    acc.sqrt()
}

fn bilinear(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn hermitian(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn orthonormalize(vectors: &mut [Vec<C>]) {
    for k in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(k);
        for u in done.iter() {
            let c = hermitian(u, &rest[0]);
            rest[0].iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        normalize(&mut vectors[k]);
    }
}

/// Re-choose the basis of a cluster of (numerically) equal eigenvalues so
/// that it is orthogonal under the bilinear form `uᵀv`, giving each vector
/// `vᵀv ≠ 0` whenever the eigenspace allows it.
fn rebase_cluster(vectors: Vec<Vec<C>>) -> Vec<Vec<C>> {
    let mut rest = vectors;
    orthonormalize(&mut rest);
    let mut out = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        // largest |wᵀw| among members and their pairwise combinations
        let mut best: Option<(f64, Vec<C>)> = None;
        let mut consider = |mut w: Vec<C>| {
            normalize(&mut w);
            let q = bilinear(&w, &w).norm();
            if best.as_ref().is_none_or(|(b, _)| q > *b + 1e-12) {
                best = Some((q, w));
            }
        };
        for a in 0..rest.len() {
            consider(rest[a].clone());
            for b in a + 1..rest.len() {
                for coeff in [C::new(1.0, 0.0), C::new(0.0, 1.0)] {
                    consider(rest[a].iter().zip(&rest[b]).map(|(x, y)| x + coeff * y).collect());
                }
            }
        }
        let (q, w) = best.expect("non-empty cluster");
        if q < 1e-12 {
            out.append(&mut rest);
            break;
        }
        let ww = bilinear(&w, &w);
        let mut proj: Vec<Vec<C>> = rest
            .iter()
            .map(|v| {
                let c = bilinear(&w, v) / ww;
                v.iter().zip(&w).map(|(a, b)| a - c * b).collect()
            })
            .collect();
        // one member is now (nearly) dependent on w
        let drop = (0..proj.len())
            .min_by(|&a, &b| norm2(&proj[a]).total_cmp(&norm2(&proj[b])))
            .unwrap();
        proj.remove(drop);
        orthonormalize(&mut proj);
        out.push(w);
        rest = proj;
    }
    out
}

/// One step of inverse iteration on the full matrix.
fn refine(h: &DMatrix<C>, value: C, v: &[C]) -> Option<(C, Vec<C>)> {
    let n = v.len();
    let shift = value + C::new(f64::EPSILON * (1.0 + value.norm()), 0.0) * 16.0;
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let rhs = nalgebra::DVector::from_column_slice(v);
    let sol = lu.solve(&rhs)?;
    let mut w: Vec<C> = sol.iter().copied().collect();
    if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    normalize(&mut w);
    // Rayleigh-type quotient with the bilinear form when it is well defined
    let hw: Vec<C> = (0..n).map(|i| (0..n).map(|j| h[(i, j)] * w[j]).sum()).collect();
    let ww = bilinear(&w, &w);
    let lambda = if ww.norm() > 1e-8 {
        bilinear(&w, &hw) / ww
    } else {
        hermitian(&w, &hw)
    };
    Some((lambda, w))
}

/// All eigenpairs of `H`, sorted by ascending `Ω`, ties by ascending `Γ`.
pub fn diagonalize(h: &EffectiveHamiltonian) -> Result<Vec<FullMode>> {
    let n = h.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(h.matrix.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical(format!("Schur decomposition of a {n}x{n} matrix did not converge")))?;
    let (q, t) = schur.unpack();
    let y = triangular_eigenvectors(&t);
    let x = &q * &y;
    let mut pairs: Vec<(C, Vec<C>)> = (0..n)
        .map(|k| {
            let mut v: Vec<C> = x.column(k).iter().copied().collect();
            normalize(&mut v);
            (t[(k, k)], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(b.0.im.total_cmp(&a.0.im)));

    // clusters of equal eigenvalues sit next to each other after sorting
    let cluster_tol = 1e-10 * hnorm;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end].0 - pairs[start].0).norm() <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let vecs = rebase_cluster(pairs[start..end].iter().map(|p| p.1.clone()).collect());
            for (p, v) in pairs[start..end].iter_mut().zip(vecs) {
                p.1 = v;
            }
        }
        start = end;
    }

    let mut modes = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for (mut value, mut v) in pairs {
        let mut res = residual(&h.matrix, value, &v);
        if res > RESIDUAL_TOL * hnorm * 1e-2 {
            if let Some((lv, w)) = refine(&h.matrix, value, &v) {
                let r2 = residual(&h.matrix, lv, &w);
                if r2 < res {
                    value = lv;
                    v = w;
                    res = r2;
                }
            }
        }
        worst = worst.max(res / hnorm);
        fix_phase(&mut v);
        let vtv = bilinear(&v, &v).norm();
        modes.push(FullMode {
            omega: value.re,
            gamma: -2.0 * value.im,
            amplitudes: v,
            residual: res,
            condition: if vtv > 0.0 { 1.0 / vtv } else { f64::INFINITY },
            exceptional: vtv < EXCEPTIONAL_TOL,
            m_label: None,
            abs_m_label: None,
            overlaps: Vec::new(),
            parity_weights: None,
        });
    }
    if !(worst <= RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "dense eigensolve: worst relative residual {worst:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.gamma.total_cmp(&b.gamma)));
    Ok(modes)
}

/// Project every mode onto the Bloch basis of a symmetric array and fill in
/// the angular-momentum overlaps and labels.
pub fn classify_modes(modes: &mut [FullMode], array: &EmitterArray) -> Result<()> {
    if !array.is_symmetric(FILE_SYMMETRY_TOL) {
        return Err(Error::NotApplicable(
            "array is not rotationally symmetric; angular momentum is not defined".into(),
        ));
    }
    let n = array.n_cells();
    let d = array.n_components();
    let phases = phase_table(n);
    let ms = canonical_ms(n);
    let norm = (n as f64).sqrt();
    for mode in modes.iter_mut() {
        if mode.amplitudes.len() != n * d {
            return Err(Error::validation(format!(
                "mode has {} amplitudes, array has {} emitters",
                mode.amplitudes.len(),
                n * d
            )));
        }
        let mut overlaps = Vec::with_capacity(ms.len());
        let mut sym = 0.0;
        let mut anti = 0.0;
        for &m in &ms {
            let mut coeff = vec![ZERO; d];
            for cell in 0..n {
                let ph = phases[phase_index(m, cell, n)].conj();
                for (a, c) in coeff.iter_mut().enumerate() {
                    *c += ph * mode.amplitudes[cell * d + a];
                }
            }
            coeff.iter_mut().for_each(|c| *c /= norm);
            if d == 2 {
                sym += 0.5 * (coeff[0] + coeff[1]).norm_sqr();
                anti += 0.5 * (coeff[0] - coeff[1]).norm_sqr();
            }
            overlaps.push((m, coeff.iter().map(|c| c.norm_sqr()).sum::<f64>()));
        }
        let (best_m, best_w) = overlaps
            .iter()
            .copied()
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        mode.m_label = (best_w > LABEL_THRESHOLD).then_some(best_m);
        mode.overlaps = overlaps;
        let (abs_m, abs_w) = ms
            .iter()
            .filter(|&&m| m >= 0)
            .map(|&m| (m, mode.abs_overlap(m)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        mode.abs_m_label = (abs_w > LABEL_THRESHOLD).then_some(abs_m);
        mode.parity_weights = (d == 2).then_some((sym, anti));
    }
    Ok(())
}

/// Largest distance between matched eigenvalues of two spectra. Each value
/// of `a` (in sorted order) is matched to the nearest unused value of `b`.
pub fn max_eigenvalue_deviation(a: &[C], b: &[C]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "spectra have {} and {} eigenvalues",
            a.len(),
            b.len()
        )));
    }
    let mut a = a.to_vec();
    a.sort_by(|x, y| x.re.total_cmp(&y.re).then(y.im.total_cmp(&x.im)));
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in &a {
        let (k, dist) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
        used[k] = true;
        worst = worst.max(dist);
    }
    Ok(worst)
}

/// Outcome of running both solvers on one array.
#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    /// `false` when the array is not symmetric and only the dense solver ran.
    pub bloch_applicable: bool,
    pub max_deviation: Option<f64>,
    /// Worst dense residual relative to `‖H‖_F`.
    pub worst_residual: f64,
    pub n_exceptional: usize,
    pub dim: usize,
    /// Largest eigenvalue magnitude of the dense spectrum.
    pub spectral_radius: f64,
}

impl CrossCheck {
    /// Deviation allowed for a tolerance `tol` in units of `Γ0`: absolute for
    /// spectra of order one, relative to the spectral radius beyond that,
    /// where double precision cannot resolve `tol` absolutely.
    pub fn allowed(&self, tol: f64) -> f64 {
        tol * self.spectral_radius.max(1.0)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation.is_none_or(|d| d <= self.allowed(tol))
    }

    pub fn verdict(&self, tol: f64) -> &'static str {
        match (self.bloch_applicable, self.passed(tol)) {
            (false, _) => "oracle-only",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        }
    }
}

/// Compare the Bloch spectrum against the dense spectrum.
pub fn cross_check(array: &EmitterArray) -> Result<CrossCheck> {
    let h = assemble(array)?;
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let modes = diagonalize(&h)?;
    let worst_residual = modes.iter().map(|m| m.residual / hnorm).fold(0.0, f64::max);
    let n_exceptional = modes.iter().filter(|m| m.exceptional).count();
    let dense: Vec<C> = modes.iter().map(FullMode::eigenvalue).collect();
    let (bloch_applicable, max_deviation) = if array.is_symmetric(FILE_SYMMETRY_TOL) {
        let bands = band_structure(array)?;
        (true, Some(max_eigenvalue_deviation(&bands.eigenvalues(), &dense)?))
    } else {
        (false, None)
    };
    Ok(CrossCheck {
        bloch_applicable,
        max_deviation,
        worst_residual,
        n_exceptional,
        dim: h.dim(),
        spectral_radius: dense.iter().map(|z| z.norm()).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::mode_amplitudes;
    use crate::geometry::{build_ring, build_stack, Polarization, RingSpec};
    use crate::greens::pair_coupling;
    use nalgebra::{Rotation3, Vector3};

    fn stacked_pair(pol: Polarization) -> EmitterArray {
        let r = RingSpec::new(9, 0.05).polarization(pol);
        build_stack(&[r, r.z(0.025)]).unwrap()
    }

    #[test]
    fn single_emitter() {
        let h = assemble_emitters(&[Vec3::zeros()], &[Vec3::z()], &[0.7]).unwrap();
        assert_eq!(h.matrix[(0, 0)], C::new(0.7, -0.5));
        let modes = diagonalize(&h).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].gamma, 1.0);
    }

    #[test]
    fn pair_matches_greens_and_closed_form() {
        let r1 = Vec3::zeros();
        let r2 = Vec3::new(0.1, 0.0, 0.0);
        let h = assemble_emitters(&[r1, r2], &[Vec3::z(), Vec3::z()], &[0.0, 0.0]).unwrap();
        let c = pair_coupling(&r1, &Vec3::z(), &r2, &Vec3::z()).unwrap();
        assert_eq!(h.matrix[(0, 1)], c.as_complex());
        assert_eq!(h.matrix[(0, 1)], h.matrix[(1, 0)]);
        let modes = diagonalize(&h).unwrap();
        let expect = [
            C::new(-c.omega, -0.5 * (1.0 - c.gamma)),
            C::new(c.omega, -0.5 * (1.0 + c.gamma)),
        ];
        let got: Vec<C> = modes.iter().map(FullMode::eigenvalue).collect();
        let dev = max_eigenvalue_deviation(&expect, &got).unwrap();
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn coincident_pair_is_named() {
        let p = [Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 0.0, 1e-12)];
        let e = assemble_emitters(&p, &[Vec3::z(); 3], &[0.0; 3]).unwrap_err();
        assert!(
            matches!(
                e,
                Error::CoincidentEmitters {
                    first: 1,
                    second: 2,
                    ..
                }
            ),
            "{e}"
        );
    }

    #[test]
    fn decoupled_limit() {
        let p: Vec<Vec3> = (0..3).map(|k| Vec3::new(1e4 * k as f64, 0.0, 0.0)).collect();
        let h = assemble_emitters(&p, &[Vec3::z(); 3], &[-1.0, 0.0, 2.0]).unwrap();
        let modes = diagonalize(&h).unwrap();
        for (k, mode) in modes.iter().enumerate() {
            assert!((mode.eigenvalue() - h.matrix[(k, k)]).norm() < 1e-3);
            assert!(mode.amplitudes[k].norm() > 0.999);
        }
    }

    #[test]
    fn stacked_pair_is_complex_symmetric_and_matches_bloch() {
        for pol in Polarization::CANONICAL {
            let a = stacked_pair(pol);
            let h = assemble(&a).unwrap();
            assert_eq!(h.dim(), 18);
            assert!(h.asymmetry() <= 1e-12);
            let check = cross_check(&a).unwrap();
            assert!(check.max_deviation.unwrap() < 1e-9, "{pol:?}: {check:?}");
            assert_eq!(check.verdict(1e-9), "PASS");
        }
    }

    #[test]
    fn gamma_matrix_is_positive_semidefinite() {
        let h = assemble(&stacked_pair(Polarization::Tangential)).unwrap();
        let g = h.gamma_matrix();
        assert!((&g - g.transpose()).abs().max() < 1e-12);
        let min = g.symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-8, "{min}");
    }

    #[test]
    fn trace_identity() {
        let a = build_stack(&[
            RingSpec::new(7, 0.2).detuned(1.5),
            RingSpec::new(7, 0.25)
                .z(0.1)
                .rotated(0.2)
                .polarization(Polarization::Radial),
        ])
        .unwrap();
        let h = assemble(&a).unwrap();
        let sum: C = diagonalize(&h).unwrap().iter().map(FullMode::eigenvalue).sum();
        let expect = C::new(7.0 * 1.5, -0.5 * 14.0);
        assert!((sum - expect).norm() / expect.norm() < 1e-9);
        assert!((h.trace() - expect).norm() < 1e-12);
    }

    #[test]
    fn bloch_modes_reexpand_to_their_own_m() {
        let a = stacked_pair(Polarization::Radial);
        let bands = band_structure(&a).unwrap();
        let mut modes: Vec<FullMode> = bands
            .modes
            .iter()
            .map(|r| FullMode {
                omega: r.omega,
                gamma: r.gamma,
                amplitudes: mode_amplitudes(&a, r),
                residual: 0.0,
                condition: 1.0,
                exceptional: false,
                m_label: None,
                abs_m_label: None,
                overlaps: Vec::new(),
                parity_weights: None,
            })
            .collect();
        classify_modes(&mut modes, &a).unwrap();
        for (mode, r) in modes.iter().zip(&bands.modes) {
            assert!((mode.overlap(r.m) - 1.0).abs() < 1e-12);
            assert_eq!(mode.m_label, Some(r.m));
        }
    }

    #[test]
    fn overlaps_sum_to_one_and_degenerate_pairs_are_regular() {
        let a = build_ring(&RingSpec::new(12, 0.3).polarization(Polarization::Tangential)).unwrap();
        let mut modes = diagonalize(&assemble(&a).unwrap()).unwrap();
        classify_modes(&mut modes, &a).unwrap();
        for mode in &modes {
            let total: f64 = mode.overlaps.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-8);
            assert!(!mode.exceptional, "{mode:?}");
            assert!(mode.abs_m_label.is_some());
        }
    }

    #[test]
    fn darkest_stacked_mode_is_antisymmetric_m4() {
        let r = RingSpec::with_spacing(9, 0.2);
        let a = build_stack(&[r, r.z(0.2)]).unwrap();
        let mut modes = diagonalize(&assemble(&a).unwrap()).unwrap();
        classify_modes(&mut modes, &a).unwrap();
        let dark = modes.iter().min_by(|x, y| x.gamma.total_cmp(&y.gamma)).unwrap();
        assert!(dark.abs_overlap(4) > 0.99);
        let (s, an) = dark.parity_weights.unwrap();
        assert!(an > 0.99 && s < 0.01, "{s} {an}");
    }

    #[test]
    fn spectrum_invariant_under_rigid_motion() {
        let a = stacked_pair(Polarization::Angles { theta: 0.4, phi: 0.9 });
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.7);
        let b = a.transformed(&rot, &Vec3::new(0.3, -2.0, 5.0)).unwrap();
        let ea: Vec<C> = diagonalize(&assemble(&a).unwrap())
            .unwrap()
            .iter()
            .map(FullMode::eigenvalue)
            .collect();
        let eb: Vec<C> = diagonalize(&assemble(&b).unwrap())
            .unwrap()
            .iter()
            .map(FullMode::eigenvalue)
            .collect();
        assert!(max_eigenvalue_deviation(&ea, &eb).unwrap() < 1e-9);
    }

    #[test]
    fn symmetry_broken_array_is_oracle_only() {
        let a = build_ring(&RingSpec::new(6, 0.2)).unwrap();
        let mut pos = a.positions().to_vec();
        pos[2].x += 0.01;
        let b = EmitterArray::new(6, 1, pos, a.dipoles().to_vec(), vec![0.0]).unwrap();
        let check = cross_check(&b).unwrap();
        assert_eq!(check.verdict(1e-9), "oracle-only");
        let mut modes = diagonalize(&assemble(&b).unwrap()).unwrap();
        assert!(matches!(classify_modes(&mut modes, &b), Err(Error::NotApplicable(_))));
    }
}
