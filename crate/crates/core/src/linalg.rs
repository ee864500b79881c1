//! Small dense linear-algebra helpers on top of `faer`.

use faer::{Mat, MatRef};
use num_complex::Complex64;

pub type CMatrix = Mat<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMatrix {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

/// Largest entry modulus.
pub fn max_norm(m: MatRef<'_, Complex64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn frobenius_norm(m: MatRef<'_, Complex64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Maximum absolute column sum.
pub fn one_norm(m: MatRef<'_, Complex64>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn trace(m: MatRef<'_, Complex64>) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn adjoint(m: MatRef<'_, Complex64>) -> CMatrix {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

/// `max |A - A†|`, zero exactly when the matrix is Hermitian.
pub fn hermiticity_defect(m: MatRef<'_, Complex64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

/// Determinant in overflow-safe polar form, `det = exp(log_abs + i * phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    /// Principal argument in `(-pi, pi]`.
    pub phase: f64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.log_abs.exp(), self.phase)
    }
}

/// Determinant through partial-pivoting LU.
pub fn log_det(m: MatRef<'_, Complex64>) -> LogDet {
    assert_eq!(m.nrows(), m.ncols(), "determinant of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return LogDet { log_abs: 0.0, phase: 0.0 };
    }
    let lu = m.partial_piv_lu();
    let u = lu.U();
    let mut log_abs = 0.0;
    let mut phase = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d.norm() == 0.0 || !d.norm().is_finite() {
            // exactly singular; later pivots may be NaN
            return LogDet { log_abs: f64::NEG_INFINITY, phase: 0.0 };
        }
        log_abs += d.norm().ln();
        phase += d.arg();
    }
    let (forward, _) = lu.P().arrays();
    if permutation_is_odd(forward) {
        phase += std::f64::consts::PI;
    }
    LogDet { log_abs, phase: wrap_phase(phase) }
}

fn permutation_is_odd(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut transpositions = 0usize;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = perm[k];
            len += 1;
        }
        transpositions += len - 1;
    }
    transpositions % 2 == 1
}

/// Map an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: MatRef<'_, Complex64>) -> CMatrix {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = Complex64::new(0.5f64.powi(squarings), 0.0);
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);

    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=30 {
        term = &term * &scaled;
        let inv_k = Complex64::new(1.0 / k as f64, 0.0);
        for j in 0..n {
            for i in 0..n {
                term[(i, j)] *= inv_k;
            }
        }
        result += &term;
        if one_norm(term.as_ref()) <= f64::EPSILON * 0.01 * one_norm(result.as_ref()) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Minimum-cost perfect matching on a dense `n x n` cost matrix (row-major).
///
/// Returns `assignment[row] = column`. Shortest augmenting path with potentials,
/// `O(n^3)`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let c = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Outcome of pairing two equally sized point sets.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMatch {
    /// `pairs[i] = j` pairs `a[i]` with `b[j]`.
    pub pairs: Vec<usize>,
    pub max_distance: f64,
    pub mean_distance: f64,
}

/// Pair two multisets of complex numbers with minimum total distance.
pub fn match_spectra(
    a: &[Complex64],
    b: &[Complex64],
    distance: impl Fn(Complex64, Complex64) -> f64,
) -> SpectralMatch {
    assert_eq!(a.len(), b.len(), "matching spectra of different sizes");
    let n = a.len();
    let mut cost = Vec::with_capacity(n * n);
    for &x in a {
        for &y in b {
            cost.push(distance(x, y));
        }
    }
    let pairs = min_cost_assignment(&cost, n);
    let dists: Vec<f64> = pairs.iter().enumerate().map(|(i, &j)| cost[i * n + j]).collect();
    let max_distance = dists.iter().cloned().fold(0.0, f64::max);
    let mean_distance = if n == 0 { 0.0 } else { dists.iter().sum::<f64>() / n as f64 };
    SpectralMatch { pairs, max_distance, mean_distance }
}

/// Symmetric Hausdorff distance between two finite point sets in the plane.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let directed = |x: &[Complex64], y: &[Complex64]| {
        x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
