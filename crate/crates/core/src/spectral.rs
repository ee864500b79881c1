//! Dense non-Hermitian eigendecomposition with residual checks, and point-gap
//! geometry.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::ManyBodyMatrix;

/// Eigenvalues count as complex when `|Im E|` exceeds this times the spectral radius.
pub const DEFAULT_COMPLEX_THRESHOLD: f64 = 1e-6;

/// Relative residual bound `||H v - E v|| <= tol * ||H||_F`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Eigenvalues sorted by `(Re, Im)` with unit-norm right eigenvectors in the
/// matching columns.
#[derive(Clone, Debug)]
pub struct ComplexSpectrum {
    eigenvalues: Vec<Complex64>,
    right: CMatrix,
    residuals: Vec<f64>,
    matrix_norm: f64,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn right_eigenvectors(&self) -> MatRef<'_, Complex64> {
        self.right.as_ref()
    }

    /// Column `i` as an owned vector.
    pub fn eigenvector(&self, i: usize) -> Vec<Complex64> {
        (0..self.right.nrows()).map(|r| self.right[(r, i)]).collect()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Frobenius norm of the decomposed matrix.
    pub fn matrix_norm(&self) -> f64 {
        self.matrix_norm
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.eigenvalues)
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.im.abs()).fold(0.0, f64::max)
    }

    /// Unit-norm left eigenvectors, `w_i^† H = E_i w_i^†`, as columns.
    ///
    /// Taken from the rows of the inverse eigenvector matrix, so that
    /// `w_i^† v_j` vanishes for `i != j`.
    pub fn left_eigenvectors(&self) -> CMatrix {
        let n = self.len();
        let inv = self.right.partial_piv_lu().inverse();
        let mut left = Mat::from_fn(n, n, |r, i| inv[(i, r)].conj());
        normalize_columns(&mut left);
        left
    }
}

pub fn spectral_radius(eigenvalues: &[Complex64]) -> f64 {
    eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

fn check_finite(m: MatRef<'_, Complex64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::invalid(format!("non-finite matrix entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn solver_error(m: MatRef<'_, Complex64>, reason: impl Into<String>) -> Error {
    Error::Eigensolver { dim: m.nrows(), norm: linalg::max_norm(m), reason: reason.into() }
}

fn by_re_then_im(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn normalize_columns(m: &mut CMatrix) {
    for j in 0..m.ncols() {
        let norm = (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] /= norm;
            }
        }
    }
}

/// Full eigendecomposition of a dense square matrix.
pub fn eigendecompose_matrix(m: MatRef<'_, Complex64>) -> Result<ComplexSpectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    check_finite(m)?;
    let n = m.nrows();
    let evd = m.eigen().map_err(|e| solver_error(m, format!("{e:?}")))?;
    let values = evd.S().column_vector();
    let vectors = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| by_re_then_im(&values[a], &values[b]));
    let eigenvalues: Vec<Complex64> = order.iter().map(|&k| values[k]).collect();
    let mut right = Mat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    normalize_columns(&mut right);
    fix_phases(&mut right);

    let matrix_norm = linalg::frobenius_norm(m);
    let hv = m * &right;
    let mut residuals = Vec::with_capacity(n);
    for (j, &e) in eigenvalues.iter().enumerate() {
        let r = (0..n).map(|i| (hv[(i, j)] - e * right[(i, j)]).norm_sqr()).sum::<f64>().sqrt();
        if !r.is_finite() || r > RESIDUAL_TOLERANCE * matrix_norm.max(f64::MIN_POSITIVE) {
            return Err(solver_error(m, format!("residual {r:e} for eigenvalue {e} exceeds tolerance")));
        }
        residuals.push(r);
    }
    Ok(ComplexSpectrum { eigenvalues, right, residuals, matrix_norm })
}

/// Rotate each column so that its largest-modulus entry (first on ties) is real positive.
fn fix_phases(m: &mut CMatrix) {
    for j in 0..m.ncols() {
        let mut pivot = Complex64::new(0.0, 0.0);
        for i in 0..m.nrows() {
            if m[(i, j)].norm() > pivot.norm() * (1.0 + 1e-12) {
                pivot = m[(i, j)];
            }
        }
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for i in 0..m.nrows() {
                m[(i, j)] *= phase;
            }
        }
    }
}

pub fn eigendecompose(h: &ManyBodyMatrix) -> Result<ComplexSpectrum> {
    eigendecompose_matrix(h.matrix().as_ref())
}

/// Sorted eigenvalues only; cheaper than [`eigendecompose_matrix`].
pub fn eigenvalues(m: MatRef<'_, Complex64>) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    check_finite(m)?;
    let mut ev = m.eigenvalues().map_err(|e| solver_error(m, format!("{e:?}")))?;
    ev.sort_by(by_re_then_im);
    Ok(ev)
}

/// A base point for winding numbers and its distance to a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointGapProbe {
    pub delta: Complex64,
    pub min_distance: f64,
}

impl PointGapProbe {
    pub fn new(eigenvalues: &[Complex64], delta: Complex64) -> Self {
        let min_distance = eigenvalues.iter().map(|e| (e - delta).norm()).fold(f64::INFINITY, f64::min);
        Self { delta, min_distance }
    }

    pub fn is_valid(&self) -> bool {
        self.min_distance > 0.0
    }

    pub fn validate(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::EigenvalueCollision { at: 0.0, distance: self.min_distance })
        }
    }
}

/// Indices of eigenvalues with `|Im E| > relative_threshold * spectral radius`.
pub fn complex_sector(eigenvalues: &[Complex64], relative_threshold: f64) -> Vec<usize> {
    let cut = relative_threshold * spectral_radius(eigenvalues);
    (0..eigenvalues.len()).filter(|&i| eigenvalues[i].im.abs() > cut).collect()
}

/// Pick a point inside the point gap of the complex sector.
///
/// Candidates are the centroid of the whole complex sector and the centroids of
/// its upper and lower halves; the one farthest from every eigenvalue wins. A
/// spectrum symmetric under `E -> -E` puts the full centroid on an eigenvalue,
/// which is why the half-plane centroids are tried as well.
pub fn suggest_gap_point(eigenvalues: &[Complex64], relative_threshold: f64) -> Result<PointGapProbe> {
    if eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    let sector = complex_sector(eigenvalues, relative_threshold);
    if sector.is_empty() {
        return Err(Error::NoComplexSector { threshold: relative_threshold * spectral_radius(eigenvalues) });
    }
    let centroid = |keep: &dyn Fn(&Complex64) -> bool| {
        let picked: Vec<Complex64> = sector.iter().map(|&i| eigenvalues[i]).filter(|e| keep(e)).collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<Complex64>() / picked.len() as f64)
    };
    let candidates = [centroid(&|_| true), centroid(&|e| e.im > 0.0), centroid(&|e| e.im < 0.0)];
    let mut best: Option<PointGapProbe> = None;
    for delta in candidates.into_iter().flatten() {
        let probe = PointGapProbe::new(eigenvalues, delta);
        if best.is_none_or(|b| probe.min_distance > b.min_distance) {
            best = Some(probe);
        }
    }
    Ok(best.expect("non-empty sector has a centroid"))
}
