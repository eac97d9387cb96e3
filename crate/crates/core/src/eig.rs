//! Eigen-decomposition of the small non-Hermitian blocks produced by the
//! Bloch reduction.
//!
//! Blocks are `d × d` with `d` the number of unit-cell components (one to a
//! handful). One and two components use closed forms; larger blocks go
//! through a Hessenberg reduction, single-shift complex QR for the
//! eigenvalues and inverse iteration for the vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// One eigenpair; `vector` has unit 2-norm.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C,
    pub vector: Vec<C>,
}

/// Largest absolute entry, used as the matrix scale for tolerances.
pub fn max_abs(a: &DMatrix<C>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖A v − λ v‖₂`.
pub fn residual(a: &DMatrix<C>, value: C, vector: &[C]) -> f64 {
    let n = vector.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = -value * vector[i];
        for j in 0..n {
            s += a[(i, j)] * vector[j];
        }
        acc += s.norm_sqr();
    }
    acc.sqrt()
}

fn normalize(v: &mut [C]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

/// All eigenpairs of a small square matrix, unsorted.
pub fn eigen_small(a: &DMatrix<C>) -> Result<Vec<EigenPair>> {
    assert_eq!(a.nrows(), a.ncols(), "square matrix required");
    match a.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![EigenPair {
            value: a[(0, 0)],
            vector: vec![ONE],
        }]),
        2 => Ok(eigen_2x2(a)),
        _ => eigen_general(a),
    }
}

fn eigen_2x2(a: &DMatrix<C>) -> Vec<EigenPair> {
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let mean = (p + s) * 0.5;
    let half = (p - s) * 0.5;
    let root = (half * half + q * r).sqrt();
    let scale = [p, q, r, s]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    [mean + root, mean - root]
        .into_iter()
        .enumerate()
        .map(|(k, value)| {
            // (A − λ)v = 0: take the better conditioned of the two row-derived null vectors
            let v1 = [q, value - p];
            let v2 = [value - s, r];
            let n1 = v1[0].norm() + v1[1].norm();
            let n2 = v2[0].norm() + v2[1].norm();
            let mut vector = if n1.max(n2) <= 1e-14 * scale {
                // scalar multiple of the identity: any basis works
                if k == 0 {
                    vec![ONE, ZERO]
                } else {
                    vec![ZERO, ONE]
                }
            } else if n1 >= n2 {
                v1.to_vec()
            } else {
                v2.to_vec()
            };
            normalize(&mut vector);
            EigenPair { value, vector }
        })
        .collect()
}

/// Givens rotation `(c, s)` with `c` real such that `[c s; −s̄ c]ᴴ`-style
/// application zeroes `b` in `(a, b)`.
fn givens(a: C, b: C) -> (f64, C) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

/// Apply `G = [c s; −s̄ c]` to rows `i`, `j` on columns `cols`.
fn rot_rows(h: &mut DMatrix<C>, i: usize, j: usize, c: f64, s: C, cols: std::ops::Range<usize>) {
    for k in cols {
        let x = h[(i, k)];
        let y = h[(j, k)];
        h[(i, k)] = x * c + s * y;
        h[(j, k)] = -s.conj() * x + y * c;
    }
}

/// Apply `Gᴴ` from the right to columns `i`, `j` on rows `rows`.
fn rot_cols(h: &mut DMatrix<C>, i: usize, j: usize, c: f64, s: C, rows: std::ops::Range<usize>) {
    for k in rows {
        let x = h[(k, i)];
        let y = h[(k, j)];
        h[(k, i)] = x * c + y * s.conj();
        h[(k, j)] = -x * s + y * c;
    }
}

/// Eigenvalues via Hessenberg reduction and shifted QR sweeps.
pub fn eigenvalues_qr(a: &DMatrix<C>) -> Result<Vec<C>> {
    let n = a.nrows();
    let mut h = a.clone();
    // reduce to upper Hessenberg with Givens similarity transforms
    for col in 0..n.saturating_sub(2) {
        for row in (col + 2..n).rev() {
            let (c, s) = givens(h[(row - 1, col)], h[(row, col)]);
            rot_rows(&mut h, row - 1, row, c, s, 0..n);
            rot_cols(&mut h, row - 1, row, c, s, 0..n);
            h[(row, col)] = ZERO;
        }
    }
    let scale = max_abs(&h).max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(n);
    let mut hi = n;
    let mut iter = 0usize;
    while hi > 0 {
        if hi == 1 {
            values.push(h[(0, 0)]);
            break;
        }
        let k = hi - 1;
        let sub = h[(k, k - 1)].norm();
        let diag = h[(k, k)].norm() + h[(k - 1, k - 1)].norm();
        if sub <= f64::EPSILON * diag.max(scale * 1e-3) {
            values.push(h[(k, k)]);
            h[(k, k - 1)] = ZERO;
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 200 {
            return Err(Error::Numerical(format!(
                "QR iteration did not converge on a {n}x{n} block"
            )));
        }
        // find the start of the active unreduced block
        let mut lo = k - 1;
        while lo > 0 {
            let s = h[(lo, lo - 1)].norm();
            if s <= f64::EPSILON * (h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm()) {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        // Wilkinson shift from the trailing 2x2, with an exceptional shift now and then
        let (p, q, r, s) = (h[(k - 1, k - 1)], h[(k - 1, k)], h[(k, k - 1)], h[(k, k)]);
        let mean = (p + s) * 0.5;
        let root = (((p - s) * 0.5).powi(2) + q * r).sqrt();
        let (e1, e2) = (mean + root, mean - root);
        let mut mu = if (e1 - s).norm() < (e2 - s).norm() { e1 } else { e2 };
        if iter.is_multiple_of(11) {
            mu = s + C::new(sub, 0.0);
        }
        // one QR step on the active block lo..hi
        for i in lo..hi {
            h[(i, i)] -= mu;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for i in lo..k {
            let (c, sn) = givens(h[(i, i)], h[(i + 1, i)]);
            rot_rows(&mut h, i, i + 1, c, sn, i..n);
            h[(i + 1, i)] = ZERO;
            rots.push((c, sn));
        }
        for (off, &(c, sn)) in rots.iter().enumerate() {
            let i = lo + off;
            rot_cols(&mut h, i, i + 1, c, sn, 0..(i + 2).min(hi));
        }
        for i in lo..hi {
            h[(i, i)] += mu;
        }
    }
    Ok(values)
}

/// LU solve with partial pivoting on a copy of `m`; tiny pivots are lifted
/// so that nearly singular shifted systems still produce a direction.
fn solve_shifted(m: &DMatrix<C>, rhs: &[C], floor: f64) -> Vec<C> {
    let n = rhs.len();
    let mut a = m.clone();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[(row, col)].norm() > a[(piv, col)].norm() {
                piv = row;
            }
        }
        if piv != col {
            a.swap_rows(piv, col);
            b.swap(piv, col);
        }
        if a[(col, col)].norm() < floor {
            a[(col, col)] = C::new(floor, 0.0);
        }
        for row in col + 1..n {
            let f = a[(row, col)] / a[(col, col)];
            if f != ZERO {
                for k in col..n {
                    let t = a[(col, k)];
                    a[(row, k)] -= f * t;
                }
                let t = b[col];
                b[row] -= f * t;
            }
        }
    }
    let mut x = vec![ZERO; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[(row, k)] * x[k];
        }
        x[row] = s / a[(row, row)];
    }
    x
}

fn eigen_general(a: &DMatrix<C>) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    let values = eigenvalues_qr(a)?;
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let floor = scale * f64::EPSILON;
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    for (idx, &value) in values.iter().enumerate() {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= value;
        }
        // deterministic start vector, different per eigenvalue index
        let mut v: Vec<C> = (0..n)
            .map(|i| C::new(1.0 + 0.1 * ((i * 7 + idx * 3) % 5) as f64, 0.05 * i as f64))
            .collect();
        normalize(&mut v);
        let mut best = v.clone();
        let mut best_res = f64::INFINITY;
        for _ in 0..6 {
            // keep repeated eigenvalues from collapsing onto an earlier vector
            for prev in pairs.iter().filter(|p| (p.value - value).norm() <= 1e-10 * scale) {
                let proj: C = prev.vector.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
                v.iter_mut().zip(&prev.vector).for_each(|(x, p)| *x -= proj * p);
            }
            normalize(&mut v);
            v = solve_shifted(&shifted, &v, floor);
            normalize(&mut v);
            let res = residual(a, value, &v);
            if res < best_res {
                best_res = res;
                best = v.clone();
            }
            if res <= 1e-14 * scale {
                break;
            }
        }
        pairs.push(EigenPair { value, vector: best });
    }
    Ok(pairs)
}
