//! Symmetry-reduced spectrum of `C_N`-symmetric arrays.
//!
//! Couplings between cells depend only on the cell offset `ℓ = j − i`, so the
//! `N·d × N·d` effective Hamiltonian splits into `N` blocks of size `d × d`,
//!
//! ```text
//! G̃_m^{αβ} = Σ_ℓ e^{i2πmℓ/N} G_ℓ^{αβ},
//! ```
//!
//! one per angular momentum `m`. Diagonalizing each block yields every
//! collective mode labelled by `(m, branch)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::eig::{eigen_small, max_abs, residual};
use crate::error::{Error, Result};
use crate::geometry::{EmitterArray, BUILT_SYMMETRY_TOL, FILE_SYMMETRY_TOL};
use crate::greens::{coupling_raw, PairCoupling, COINCIDENT_EPS};

type C = Complex64;

/// Angular momenta labelling the `N` Bloch sectors: the integers in
/// `(−N/2, N/2]`, ascending.
pub fn canonical_ms(n_cells: usize) -> Vec<i64> {
    let n = n_cells as i64;
    let lo = -((n - 1) / 2);
    let hi = n / 2;
    (lo..=hi).collect()
}

/// Map any integer onto its canonical representative modulo `N`.
pub fn wrap_m(m: i64, n_cells: usize) -> i64 {
    let n = n_cells as i64;
    let r = m.rem_euclid(n);
    if r > n / 2 {
        r - n
    } else {
        r
    }
}

fn check_m(m: i64, n_cells: usize) -> Result<()> {
    let n = n_cells as i64;
    if m < -((n - 1) / 2) || m > n / 2 {
        return Err(Error::validation(format!(
            "angular momentum {m} outside the canonical range {:?} for N = {n}",
            (-((n - 1) / 2))..=(n / 2)
        )));
    }
    Ok(())
}

/// `e^{i2πk/N}` for `k = 0..N`, indexed by `(m·ℓ) mod N`.
pub(crate) fn phase_table(n_cells: usize) -> Vec<C> {
    (0..n_cells)
        .map(|k| {
            let (s, c) = (2.0 * PI * k as f64 / n_cells as f64).sin_cos();
            C::new(c, s)
        })
        .collect()
}

pub(crate) fn phase_index(m: i64, cell: usize, n_cells: usize) -> usize {
    (m * cell as i64).rem_euclid(n_cells as i64) as usize
}

/// Couplings `G_ℓ^{αβ}` between component `α` of cell 0 and component `β` of
/// cell `ℓ`, for all `ℓ`. The `ℓ = 0, α = β` entry holds `Δ_α − iΓ0/2`.
#[derive(Debug, Clone)]
pub struct LatticeCouplings {
    n_cells: usize,
    n_components: usize,
    values: Vec<C>,
}

impl LatticeCouplings {
    pub fn new(array: &EmitterArray) -> Result<Self> {
        let n = array.n_cells();
        let d = array.n_components();
        let mut values = Vec::with_capacity(n * d * d);
        for cell in 0..n {
            for a in 0..d {
                for b in 0..d {
                    let value = if cell == 0 && a == b {
                        C::new(array.detunings()[a], 0.0) + PairCoupling::SELF.as_complex()
                    } else {
                        coupling_raw(
                            array.position(0, a),
                            array.dipole(0, a),
                            array.position(cell, b),
                            array.dipole(cell, b),
                            COINCIDENT_EPS,
                        )
                        .ok_or(Error::CoincidentEmitters {
                            first: array.index(0, a),
                            second: array.index(cell, b),
                            separation: (array.position(0, a) - array.position(cell, b)).norm(),
                        })?
                    };
                    values.push(value);
                }
            }
        }
        Ok(Self {
            n_cells: n,
            n_components: d,
            values,
        })
    }

    pub fn get(&self, cell: usize, a: usize, b: usize) -> C {
        self.values[(cell * self.n_components + a) * self.n_components + b]
    }

    /// Block for angular momentum `m`, summed in fixed order `ℓ = 0..N`.
    pub fn block(&self, m: i64) -> CouplingBlock {
        let n = self.n_cells;
        let d = self.n_components;
        let phases = phase_table(n);
        let mut matrix = DMatrix::from_element(d, d, C::new(0.0, 0.0));
        let mut dissipative = matrix.clone();
        for cell in 0..n {
            let ph = phases[phase_index(m, cell, n)];
            for a in 0..d {
                for b in 0..d {
                    let g = self.get(cell, a, b);
                    matrix[(a, b)] += ph * g;
                    dissipative[(a, b)] += ph * (-2.0 * g.im);
                }
            }
        }
        CouplingBlock { m, matrix, dissipative }
    }
}

/// The `d × d` coupling matrix of one angular-momentum sector, in units of `Γ0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub m: i64,
    pub matrix: DMatrix<C>,
    /// Hermitian `Γ̃_m`, summed from the pair rates alone so that it does not
    /// inherit rounding from the much larger coherent couplings.
    pub dissipative: DMatrix<C>,
}

/// One collective eigenmode of a symmetric array.
#[derive(Debug, Clone, Serialize)]
pub struct ModeRecord {
    pub m: i64,
    pub branch: usize,
    /// Frequency shift in units of `Γ0`.
    pub omega: f64,
    /// Decay rate in units of `Γ0`.
    pub gamma: f64,
    /// Unit-cell amplitudes, unit norm, largest component real positive.
    #[serde(serialize_with = "serialize_complex_vec")]
    pub vector: Vec<C>,
    pub occupations: Vec<f64>,
}

fn serialize_complex_vec<S: serde::Serializer>(v: &[C], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl ModeRecord {
    pub fn eigenvalue(&self) -> C {
        C::new(self.omega, -0.5 * self.gamma)
    }

    fn from_pair(m: i64, value: C, mut vector: Vec<C>) -> Self {
        fix_phase(&mut vector);
        let occupations = vector.iter().map(|z| z.norm_sqr()).collect();
        Self {
            m,
            branch: 0,
            omega: value.re,
            gamma: -2.0 * value.im,
            vector,
            occupations,
        }
    }
}

/// Rotate the global phase so the largest-magnitude component (first one on
/// ties) is real and positive.
pub(crate) fn fix_phase(v: &mut [C]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap();
    let ph = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= ph);
    v[pivot] = C::new(v[pivot].norm(), 0.0);
}

/// Coupling block for one canonical angular momentum.
pub fn coupling_block(array: &EmitterArray, m: i64) -> Result<CouplingBlock> {
    array.check_symmetry(FILE_SYMMETRY_TOL)?;
    check_m(m, array.n_cells())?;
    Ok(LatticeCouplings::new(array)?.block(m))
}

/// Diagonalize one block into `d` modes sorted by ascending `Ω`, ties by `Γ`.
pub fn block_modes(block: &CouplingBlock) -> Result<Vec<ModeRecord>> {
    let pairs = eigen_small(&block.matrix)?;
    let scale = max_abs(&block.matrix).max(f64::MIN_POSITIVE);
    let mut modes = Vec::with_capacity(pairs.len());
    for p in pairs {
        let res = residual(&block.matrix, p.value, &p.vector);
        if !(res <= 1e-9 * scale) {
            return Err(Error::Numerical(format!(
                "eigensolve of block m = {} left residual {res:e} (scale {scale:e})",
                block.m
            )));
        }
        // Γ = u†Γ̃u / u†u holds for any right eigenvector and keeps dark
        // rates accurate when |Ω| is many orders larger.
        let gamma = dissipative_quotient(&block.dissipative, &p.vector);
        let mut mode = ModeRecord::from_pair(block.m, p.value, p.vector);
        mode.gamma = gamma;
        modes.push(mode);
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.gamma.total_cmp(&b.gamma)));
    for (k, mode) in modes.iter_mut().enumerate() {
        mode.branch = k;
    }
    Ok(modes)
}

fn dissipative_quotient(g: &DMatrix<C>, u: &[C]) -> f64 {
    let d = u.len();
    let mut num = 0.0;
    for i in 0..d {
        for j in 0..d {
            num += (u[i].conj() * g[(i, j)] * u[j]).re;
        }
    }
    num / u.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// All `N·d` collective modes of a symmetric array.
#[derive(Debug, Clone, Serialize)]
pub struct BandStructure {
    pub n_cells: usize,
    pub n_components: usize,
    pub detunings: Vec<f64>,
    /// Ordered by ascending `m`, then branch.
    pub modes: Vec<ModeRecord>,
}

impl BandStructure {
    pub fn mode(&self, m: i64, branch: usize) -> Option<&ModeRecord> {
        self.modes.iter().find(|r| r.m == m && r.branch == branch)
    }

    pub fn branch(&self, branch: usize) -> impl Iterator<Item = &ModeRecord> {
        self.modes.iter().filter(move |r| r.branch == branch)
    }

    pub fn at_m(&self, m: i64) -> impl Iterator<Item = &ModeRecord> {
        self.modes.iter().filter(move |r| r.m == m)
    }

    pub fn darkest(&self) -> &ModeRecord {
        self.modes
            .iter()
            .min_by(|a, b| a.gamma.total_cmp(&b.gamma))
            .expect("non-empty spectrum")
    }

    pub fn brightest(&self) -> &ModeRecord {
        self.modes
            .iter()
            .max_by(|a, b| a.gamma.total_cmp(&b.gamma))
            .expect("non-empty spectrum")
    }

    pub fn eigenvalues(&self) -> Vec<C> {
        self.modes.iter().map(|r| r.eigenvalue()).collect()
    }

    /// Relative residuals of the trace sum rules
    /// `ΣΓ = N·d·Γ0` and `ΣΩ = N·ΣΔ_α`.
    pub fn sum_rule_residuals(&self) -> (f64, f64) {
        let n = self.n_cells as f64;
        let gamma_sum: f64 = self.modes.iter().map(|r| r.gamma).sum();
        let omega_sum: f64 = self.modes.iter().map(|r| r.omega).sum();
        let gamma_expected = n * self.n_components as f64;
        let omega_expected = n * self.detunings.iter().sum::<f64>();
        let omega_scale = self
            .modes
            .iter()
            .map(|r| r.omega.abs())
            .sum::<f64>()
            .max(omega_expected.abs())
            .max(1.0);
        (
            (gamma_sum - gamma_expected).abs() / gamma_expected,
            (omega_sum - omega_expected).abs() / omega_scale,
        )
    }
}

/// Diagonalize every Bloch sector of a symmetric array.
pub fn band_structure(array: &EmitterArray) -> Result<BandStructure> {
    array.check_symmetry(FILE_SYMMETRY_TOL)?;
    let couplings = LatticeCouplings::new(array)?;
    band_structure_from(&couplings, array)
}

pub(crate) fn band_structure_from(couplings: &LatticeCouplings, array: &EmitterArray) -> Result<BandStructure> {
    let mut modes = Vec::with_capacity(array.len());
    for m in canonical_ms(array.n_cells()) {
        modes.extend(block_modes(&couplings.block(m))?);
    }
    Ok(BandStructure {
        n_cells: array.n_cells(),
        n_components: array.n_components(),
        detunings: array.detunings().to_vec(),
        modes,
    })
}

/// Band structure of a single angular-momentum sector only.
pub fn modes_at(array: &EmitterArray, m: i64) -> Result<Vec<ModeRecord>> {
    block_modes(&coupling_block(array, m)?)
}

/// Full `N·d` amplitude vector of a Bloch mode, `e^{i2πmℓ/N} u_α / √N`, in
/// cell-major order.
pub fn mode_amplitudes(array: &EmitterArray, mode: &ModeRecord) -> Vec<C> {
    bloch_vector(array.n_cells(), mode.m, &mode.vector)
}

pub(crate) fn bloch_vector(n_cells: usize, m: i64, cell_vector: &[C]) -> Vec<C> {
    let phases = phase_table(n_cells);
    let norm = (n_cells as f64).sqrt();
    (0..n_cells)
        .flat_map(|cell| {
            let ph = phases[phase_index(m, cell, n_cells)] / norm;
            cell_vector.iter().map(move |u| ph * u)
        })
        .collect()
}

/// Mirror symmetry of a two-component mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

impl Parity {
    /// Sign of `Re(u₀* u₁)` decides between in-phase and out-of-phase.
    pub fn of(vector: &[C]) -> Option<Parity> {
        if vector.len() != 2 {
            return None;
        }
        let c = (vector[0].conj() * vector[1]).re;
        Some(if c >= 0.0 {
            Parity::Symmetric
        } else {
            Parity::Antisymmetric
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Symmetric => "symmetric",
            Parity::Antisymmetric => "antisymmetric",
        }
    }
}

/// Two identical rings: the two modes of sector `m` and the inter-ring
/// couplings `Ω^inter = Re G̃¹²`, `Γ^inter = −2 Im G̃¹²`.
#[derive(Debug, Clone, Serialize)]
pub struct RingPairSplit {
    pub symmetric: ModeRecord,
    pub antisymmetric: ModeRecord,
    pub omega_inter: f64,
    pub gamma_inter: f64,
}

fn is_identical_unrotated_pair(array: &EmitterArray) -> Result<()> {
    if array.n_components() != 2 {
        return Err(Error::validation("ring-pair split needs exactly two components"));
    }
    let scale = array.position(0, 0).xy().norm().max(1e-12);
    for cell in 0..array.n_cells() {
        let (r0, r1) = (array.position(cell, 0), array.position(cell, 1));
        let (p0, p1) = (array.dipole(cell, 0), array.dipole(cell, 1));
        if (r0.xy() - r1.xy()).norm() > 1e-12 * scale.max(1.0) || (p0 - p1).norm() > 1e-12 {
            return Err(Error::validation(
                "ring-pair split needs two identical, non-rotated rings",
            ));
        }
    }
    if array.detunings()[0] != array.detunings()[1] {
        return Err(Error::validation("ring-pair split needs equal detunings"));
    }
    Ok(())
}

/// Symmetric and antisymmetric modes of two identical stacked rings.
///
/// The eigenvalues are `G̃¹¹ ± G̃¹²` with eigenvectors `(1, ±1)/√2`; the
/// labels follow the eigenvector, not the sign in front of `Ω^inter`.
pub fn split_identical_rings(array: &EmitterArray, m: i64) -> Result<RingPairSplit> {
    is_identical_unrotated_pair(array)?;
    let block = coupling_block(array, m)?;
    let g = &block.matrix;
    let scale = max_abs(g);
    if (g[(0, 0)] - g[(1, 1)]).norm() > 1e-9 * scale || (g[(0, 1)] - g[(1, 0)]).norm() > 1e-9 * scale {
        return Err(Error::NotApplicable(format!(
            "block m = {m} is not of the form [[a, b], [b, a]]"
        )));
    }
    let a = g[(0, 0)];
    let b = g[(0, 1)];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut sym = ModeRecord::from_pair(m, a + b, vec![C::new(h, 0.0), C::new(h, 0.0)]);
    let mut anti = ModeRecord::from_pair(m, a - b, vec![C::new(h, 0.0), C::new(-h, 0.0)]);
    sym.gamma = dissipative_quotient(&block.dissipative, &sym.vector);
    anti.gamma = dissipative_quotient(&block.dissipative, &anti.vector);
    let sym_first = sym
        .omega
        .total_cmp(&anti.omega)
        .then(sym.gamma.total_cmp(&anti.gamma))
        .is_le();
    sym.branch = if sym_first { 0 } else { 1 };
    anti.branch = 1 - sym.branch;
    Ok(RingPairSplit {
        symmetric: sym,
        antisymmetric: anti,
        omega_inter: b.re,
        gamma_inter: -2.0 * b.im,
    })
}

/// Off-diagonal conjugation mismatch `|G̃¹² − (G̃²¹)*| / |G̃¹²|` of a two-component block.
pub fn conjugation_mismatch(block: &CouplingBlock) -> f64 {
    let g = &block.matrix;
    (g[(0, 1)] - g[(1, 0)].conj()).norm() / g[(0, 1)].norm().max(f64::MIN_POSITIVE)
}

/// Relative phase `η = atan(Im G̃¹² / Re G̃¹²)` of two equal rotated rings.
///
/// Requires `G̃¹² ≈ (G̃²¹)*` to within `tol` (relative) and equal-weight
/// eigenvectors; otherwise the general band structure applies instead.
pub fn rotated_pair_phase(array: &EmitterArray, m: i64, tol: f64) -> Result<f64> {
    if array.n_components() != 2 {
        return Err(Error::NotApplicable("pair phase needs two components".into()));
    }
    let block = coupling_block(array, m)?;
    let mismatch = conjugation_mismatch(&block);
    if mismatch > tol {
        return Err(Error::NotApplicable(format!(
            "off-diagonal couplings of block m = {m} are not conjugate (mismatch {mismatch:e})"
        )));
    }
    for mode in block_modes(&block)? {
        for occ in &mode.occupations {
            if (occ.sqrt() - std::f64::consts::FRAC_1_SQRT_2).abs() > tol.max(1e-6) {
                return Err(Error::NotApplicable(format!(
                    "mode (m = {m}, branch {}) does not have equal ring weights",
                    mode.branch
                )));
            }
        }
    }
    let b = block.matrix[(0, 1)];
    Ok((b.im / b.re).atan())
}

/// `η` over a grid of rotation angles together with the angles where
/// `Re G̃¹²` changes sign (the branch points of the arctangent).
#[derive(Debug, Clone, Serialize)]
pub struct EtaScan {
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    pub branch_points: Vec<f64>,
}

pub fn scan_eta<F>(deltas: &[f64], m: i64, build: F) -> Result<EtaScan>
where
    F: Fn(f64) -> Result<EmitterArray>,
{
    let mut re = Vec::with_capacity(deltas.len());
    let mut etas = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let block = coupling_block(&build(delta)?, m)?;
        let b = block.matrix[(0, 1)];
        re.push(b.re);
        etas.push((b.im / b.re).atan());
    }
    let mut branch_points = Vec::new();
    for k in 1..deltas.len() {
        if re[k - 1].signum() != re[k].signum() {
            let t = re[k - 1] / (re[k - 1] - re[k]);
            branch_points.push(deltas[k - 1] + t * (deltas[k] - deltas[k - 1]));
        }
    }
    Ok(EtaScan {
        deltas: deltas.to_vec(),
        etas,
        branch_points,
    })
}

/// Symmetry tolerance used when builder output is passed straight in.
pub const SYMMETRY_TOL: f64 = BUILT_SYMMETRY_TOL;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_ring, build_stack, Polarization, RingSpec};
    use crate::greens::pair_coupling;
    use approx::assert_relative_eq;

    #[test]
    fn canonical_sets() {
        assert_eq!(canonical_ms(1), vec![0]);
        assert_eq!(canonical_ms(4), vec![-1, 0, 1, 2]);
        assert_eq!(canonical_ms(9), (-4..=4).collect::<Vec<_>>());
        for n in 1..30 {
            assert_eq!(canonical_ms(n).len(), n);
        }
        assert_eq!(wrap_m(7, 9), -2);
        assert_eq!(wrap_m(-5, 9), 4);
    }

    #[test]
    fn out_of_range_m_rejected() {
        let a = build_ring(&RingSpec::new(9, 0.1)).unwrap();
        assert!(coupling_block(&a, 5).is_err());
        assert!(coupling_block(&a, -5).is_err());
        assert!(coupling_block(&a, 4).is_ok());
        let b = build_ring(&RingSpec::new(8, 0.1)).unwrap();
        assert!(coupling_block(&b, 4).is_ok());
        assert!(coupling_block(&b, -4).is_err());
    }

    #[test]
    fn three_site_ring_block() {
        for pol in Polarization::CANONICAL {
            let a = build_ring(&RingSpec::new(3, 0.07).polarization(pol).detuned(1.5)).unwrap();
            let nn = pair_coupling(a.position(0, 0), a.dipole(0, 0), a.position(1, 0), a.dipole(1, 0))
                .unwrap()
                .as_complex();
            let block = coupling_block(&a, 0).unwrap();
            let expected = C::new(1.5, -0.5) + nn * 2.0;
            assert!((block.matrix[(0, 0)] - expected).norm() < 1e-10 * expected.norm());
        }
    }

    #[test]
    fn single_emitter() {
        let a = build_ring(&RingSpec::new(1, 0.3).detuned(2.5)).unwrap();
        let bands = band_structure(&a).unwrap();
        assert_eq!(bands.modes.len(), 1);
        let r = &bands.modes[0];
        assert_eq!((r.m, r.omega, r.gamma), (0, 2.5, 1.0));
    }

    #[test]
    fn fourier_completeness() {
        let ring = RingSpec::new(9, 0.05).polarization(Polarization::Radial);
        let a = build_stack(&[ring, ring.z(0.025)]).unwrap();
        let lc = LatticeCouplings::new(&a).unwrap();
        let mut sum = DMatrix::from_element(2, 2, C::new(0.0, 0.0));
        for m in canonical_ms(9) {
            sum += lc.block(m).matrix;
        }
        sum /= C::new(9.0, 0.0);
        for x in 0..2 {
            for y in 0..2 {
                let g0 = lc.get(0, x, y);
                assert!((sum[(x, y)] - g0).norm() < 1e-10 * g0.norm().max(1.0));
            }
        }
    }

    #[test]
    fn mode_invariants_and_phase() {
        let ring = RingSpec::new(9, 0.05).polarization(Polarization::Tangential);
        let a = build_stack(&[ring, ring.z(0.025).rotated(0.2)]).unwrap();
        let bands = band_structure(&a).unwrap();
        assert_eq!(bands.modes.len(), 18);
        for r in &bands.modes {
            assert!(r.gamma >= -1e-8);
            assert!((r.occupations.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let big = r.vector.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = r.vector.iter().find(|z| z.norm() >= big * (1.0 - 1e-12)).unwrap();
            assert_eq!(pivot.im, 0.0);
            assert!(pivot.re > 0.0);
            let block = coupling_block(&a, r.m).unwrap();
            assert!(residual(&block.matrix, r.eigenvalue(), &r.vector) <= 1e-9 * max_abs(&block.matrix));
        }
        for m in canonical_ms(9) {
            let v: Vec<_> = bands.at_m(m).collect();
            assert!(v[0].omega <= v[1].omega);
        }
    }

    #[test]
    fn dicke_regime_single_ring() {
        let t = band_structure(&build_ring(&RingSpec::new(20, 0.05)).unwrap()).unwrap();
        let g0 = t.mode(0, 0).unwrap().gamma;
        assert!((g0 - 20.0).abs() / 20.0 < 0.15, "Γ_0 = {g0}");
        assert!(t.modes.iter().filter(|r| r.m != 0).all(|r| r.gamma < 1.0));

        let spec = RingSpec::new(20, 0.05).polarization(Polarization::Tangential);
        let g = band_structure(&build_ring(&spec).unwrap()).unwrap();
        let bright: Vec<_> = g.modes.iter().filter(|r| r.gamma > 1.0).collect();
        assert_eq!(bright.len(), 2);
        for r in bright {
            assert_eq!(r.m.abs(), 1);
            assert!((r.gamma - 10.0).abs() / 10.0 < 0.15, "Γ = {}", r.gamma);
        }
    }

    #[test]
    fn trace_sum_rules() {
        let r1 = RingSpec::new(7, 0.08)
            .polarization(Polarization::Angles { theta: 0.3, phi: 1.0 })
            .detuned(3.0);
        let r2 = RingSpec::new(7, 0.06).z(0.04).rotated(0.1).detuned(-1.0);
        let bands = band_structure(&build_stack(&[r1, r2]).unwrap()).unwrap();
        let (g, o) = bands.sum_rule_residuals();
        assert!(g < 1e-9 && o < 1e-9, "{g} {o}");
    }

    #[test]
    fn conjugate_pairs_match() {
        let ring = RingSpec::new(10, 0.1).polarization(Polarization::Radial);
        let bands = band_structure(&build_stack(&[ring, ring.z(0.05)]).unwrap()).unwrap();
        for m in 1..5 {
            for b in 0..2 {
                let p = bands.mode(m, b).unwrap().eigenvalue();
                let q = bands.mode(-m, b).unwrap().eigenvalue();
                assert!((p - q).norm() < 1e-10 * p.norm().max(1.0));
            }
        }
    }

    #[test]
    fn split_matches_general_path() {
        for pol in Polarization::CANONICAL {
            let ring = RingSpec::new(9, 0.05).polarization(pol);
            let a = build_stack(&[ring, ring.z(0.025)]).unwrap();
            let bands = band_structure(&a).unwrap();
            for m in canonical_ms(9) {
                let s = split_identical_rings(&a, m).unwrap();
                assert!(s.antisymmetric.gamma <= s.symmetric.gamma + 1e-12);
                for mode in [&s.symmetric, &s.antisymmetric] {
                    let g = bands.mode(m, mode.branch).unwrap();
                    assert!((g.eigenvalue() - mode.eigenvalue()).norm() < 1e-10 * g.eigenvalue().norm().max(1.0));
                }
                let block = coupling_block(&a, m).unwrap();
                assert_relative_eq!(s.omega_inter, block.matrix[(0, 1)].re);
            }
        }
    }

    #[test]
    fn split_rejects_rotated_pair() {
        let ring = RingSpec::new(9, 0.05);
        let a = build_stack(&[ring, ring.z(0.025).rotated(0.1)]).unwrap();
        assert!(split_identical_rings(&a, 1).is_err());
    }

    #[test]
    fn pair_phase_limits() {
        let n = 9;
        let ring = RingSpec::new(n, 0.05);
        let build = |delta: f64| build_stack(&[ring, ring.z(0.005).rotated(delta)]);
        let eta0 = rotated_pair_phase(&build(0.0).unwrap(), 4, 1e-2).unwrap();
        assert!(eta0.abs() < 1e-9);
        let eta_mid = rotated_pair_phase(&build(PI / n as f64).unwrap(), 4, 1e-2).unwrap();
        assert!((eta_mid.abs() - PI / 2.0).abs() < 0.3, "η = {eta_mid}");
    }

    #[test]
    fn bloch_vectors_are_orthonormal() {
        let u = [C::new(0.6, 0.0), C::new(0.0, 0.8)];
        for m1 in canonical_ms(6) {
            for m2 in canonical_ms(6) {
                let a = bloch_vector(6, m1, &u);
                let b = bloch_vector(6, m2, &u);
                let o: C = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
                let expect = if m1 == m2 { 1.0 } else { 0.0 };
                assert!((o - expect).norm() < 1e-12);
            }
        }
    }
}
