//! Effective two-particle model on the bound-pair subspace.
//!
//! Sublattice A holds the doublons `|2_j>`, sublattice B the adjacent pairs
//! `|1_j 1_{j+1}>`. Site `2j` of the effective chain is `A_j`, site `2j + 1` is
//! `B_j`, with couplings
//!
//! ```text
//! H[A_j, B_j] = J1    H[A_{j+1}, B_j] = J2
//! H[B_j, A_j] = J3    H[B_j, A_{j+1}] = J4
//! ```

use std::f64::consts::SQRT_2;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{BoundaryCondition, ModelParams};
use crate::spectral;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// How an open chain ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenTermination {
    /// `A_0 .. A_{L-1}` with the `L - 1` pairs in between: `2L - 1` sites, the
    /// states that exist on an open `L`-site chain.
    #[default]
    PairBasis,
    /// Every cell complete, `A_0 B_0 .. A_{L-1} B_{L-1}`: `2L` sites.
    FullCell,
}

impl OpenTermination {
    pub fn chain_length(self, cells: usize) -> usize {
        match self {
            OpenTermination::PairBasis => 2 * cells - 1,
            OpenTermination::FullCell => 2 * cells,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublonParams {
    pub j1: Complex64,
    pub j2: Complex64,
    pub j3: Complex64,
    pub j4: Complex64,
    /// Unit cells, equal to the number of lattice sites.
    pub cells: usize,
}

impl DoublonParams {
    pub fn new(j1: Complex64, j2: Complex64, j3: Complex64, j4: Complex64, cells: usize) -> Self {
        Self { j1, j2, j3, j4, cells }
    }

    /// `J1 = sqrt2(-t + i gL)`, `J2 = sqrt2(-t + i gR)`, `J3 = sqrt2(-t - i gR)`, `J4 = sqrt2(-t - i gL)`.
    pub fn from_model(params: &ModelParams) -> Self {
        let t = Complex64::new(-params.t, 0.0);
        Self {
            j1: SQRT_2 * (t + I * params.gamma_l),
            j2: SQRT_2 * (t + I * params.gamma_r),
            j3: SQRT_2 * (t - I * params.gamma_r),
            j4: SQRT_2 * (t - I * params.gamma_l),
            cells: params.sites,
        }
    }

    /// Intra-cell product `J1 J3`.
    pub fn intra_product(&self) -> Complex64 {
        self.j1 * self.j3
    }

    /// Inter-cell product `J2 J4`.
    pub fn inter_product(&self) -> Complex64 {
        self.j2 * self.j4
    }

    /// True when the couplings come from real `t`, `gamma_L`, `gamma_R`.
    pub fn has_real_gauge_couplings(&self) -> bool {
        let scale = [self.j1, self.j2, self.j3, self.j4].iter().map(|z| z.norm()).fold(1.0, f64::max);
        let tol = 1e-12 * scale;
        (self.j4 - self.j1.conj()).norm() <= tol
            && (self.j3 - self.j2.conj()).norm() <= tol
            && (self.j1.re - self.j2.re).abs() <= tol
    }

    fn validate(&self, boundary: &BoundaryCondition) -> Result<()> {
        let min = if boundary.is_periodic() { 2 } else { 1 };
        if self.cells < min {
            return Err(Error::invalid(format!("doublon chain needs at least {min} cells, got {}", self.cells)));
        }
        Ok(())
    }
}

pub fn derive_doublon_params(params: &ModelParams) -> DoublonParams {
    DoublonParams::from_model(params)
}

/// Effective-chain index of `A_j`.
pub fn a_site(j: usize) -> usize {
    2 * j
}

/// Effective-chain index of `B_j`.
pub fn b_site(j: usize) -> usize {
    2 * j + 1
}

/// Real-space matrix of the effective chain.
///
/// On a ring the pair `B_{L-1} = |1_{L-1} 1_0>` straddles the flux bond, so
/// `J3` into it and `J2` out of it pick up `e^{-i phi}`, `J1` and `J4` pick up
/// `e^{+i phi}`.
pub fn doublon_realspace(
    dp: &DoublonParams,
    boundary: BoundaryCondition,
    termination: OpenTermination,
) -> Result<CMatrix> {
    dp.validate(&boundary)?;
    let cells = dp.cells;
    let n = match boundary {
        BoundaryCondition::Periodic { .. } => 2 * cells,
        BoundaryCondition::Open => termination.chain_length(cells),
    };
    let mut h: CMatrix = Mat::zeros(n, n);
    let forward = Complex64::from_polar(1.0, -boundary.flux());
    let backward = forward.conj();
    for j in 0..cells {
        let (a, b) = (a_site(j), b_site(j));
        if b >= n {
            continue;
        }
        let crossing = boundary.is_periodic() && j == cells - 1;
        let (f, bk) = if crossing { (forward, backward) } else { (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)) };
        h[(a, b)] += dp.j1 * bk;
        h[(b, a)] += dp.j3 * f;
        let next = if j + 1 < cells {
            a_site(j + 1)
        } else if boundary.is_periodic() {
            a_site(0)
        } else {
            continue;
        };
        h[(next, b)] += dp.j2 * f;
        h[(b, next)] += dp.j4 * bk;
    }
    Ok(h)
}

/// Off-diagonal Bloch entries `(H+, H-) = (J1 + J2 e^{-ik}, J3 + J4 e^{ik})`.
pub fn bloch_off_diagonals(dp: &DoublonParams, k: f64) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, -k);
    (dp.j1 + dp.j2 * e, dp.j3 + dp.j4 * e.conj())
}

/// `[[0, H+], [H-, 0]]`.
pub fn doublon_bloch(dp: &DoublonParams, k: f64) -> CMatrix {
    let (plus, minus) = bloch_off_diagonals(dp, k);
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => plus,
        (1, 0) => minus,
        _ => ZERO,
    })
}

/// `+-sqrt(H+ H-)`, upper branch first.
pub fn bloch_eigenvalues(dp: &DoublonParams, k: f64) -> [Complex64; 2] {
    let (plus, minus) = bloch_off_diagonals(dp, k);
    let root = (plus * minus).sqrt();
    [root, -root]
}

/// Sublattice parity `diag(+1 on A, -1 on B)` for a chain of `n` sites.
pub fn sublattice_parity(n: usize) -> CMatrix {
    Mat::from_fn(n, n, |i, j| {
        if i != j {
            ZERO
        } else if i % 2 == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalReport {
    pub intra_radicand: Complex64,
    pub inter_radicand: Complex64,
    /// Both radicands real and positive, so every entry is real.
    pub entries_real: bool,
    /// Some radicand is a negative real and its root purely imaginary.
    pub branch_ambiguity: bool,
    /// A vanishing radicand leaves the rescaling undefined.
    pub similarity_defined: bool,
    /// `max |d| / min |d|` of the diagonal rescaling.
    pub condition_number: f64,
    /// Largest matched distance between the two open-chain spectra.
    pub spectral_mismatch: f64,
}

#[derive(Clone, Debug)]
pub struct TridiagonalForm {
    /// Symmetric tridiagonal matrix with alternating `sqrt(J1 J3)`, `sqrt(J2 J4)`.
    pub matrix: CMatrix,
    /// Diagonal of `D` in `D H D^{-1}`.
    pub scaling: Vec<Complex64>,
    pub report: TridiagonalReport,
}

fn is_real_positive(z: Complex64) -> bool {
    z.im.abs() <= 1e-12 * z.norm() && z.re > 0.0
}

fn is_negative_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-12 * z.norm() && z.re < 0.0
}

/// Rescale the open chain into symmetric tridiagonal form.
pub fn tridiagonalize(dp: &DoublonParams, termination: OpenTermination) -> Result<TridiagonalForm> {
    let h = doublon_realspace(dp, BoundaryCondition::Open, termination)?;
    let n = h.nrows();
    let mut scaling = vec![Complex64::new(1.0, 0.0); n];
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut similarity_defined = true;
    let mut entries_real = true;
    for i in 0..n.saturating_sub(1) {
        let (u, l) = (h[(i, i + 1)], h[(i + 1, i)]);
        entries_real &= is_real_positive(u * l);
        let s = (u * l).sqrt();
        off.push(s);
        scaling[i + 1] = if s != ZERO {
            scaling[i] * u / s
        } else {
            similarity_defined = false;
            scaling[i]
        };
    }
    let matrix = Mat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            off[i]
        } else if i == j + 1 {
            off[j]
        } else {
            ZERO
        }
    });

    let norms: Vec<f64> = scaling.iter().map(|d| d.norm()).collect();
    let condition_number =
        norms.iter().cloned().fold(0.0, f64::max) / norms.iter().cloned().fold(f64::INFINITY, f64::min);

    let a = spectral::eigenvalues(h.as_ref())?;
    let b = spectral::eigenvalues(matrix.as_ref())?;
    let spectral_mismatch = linalg::match_spectra(&a, &b, |x, y| (x - y).norm()).max_distance;

    let (intra, inter) = (dp.intra_product(), dp.inter_product());
    let report = TridiagonalReport {
        intra_radicand: intra,
        inter_radicand: inter,
        entries_real,
        branch_ambiguity: is_negative_real(intra) || is_negative_real(inter),
        similarity_defined,
        condition_number,
        spectral_mismatch,
    };
    Ok(TridiagonalForm { matrix, scaling, report })
}

/// `J1 J3` real and positive. Defined only for real gauge couplings.
pub fn reality_criterion(dp: &DoublonParams) -> Result<bool> {
    if !dp.has_real_gauge_couplings() {
        return Err(Error::invalid("the reality criterion needs real t, gamma_L and gamma_R"));
    }
    Ok(is_real_positive(dp.intra_product()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub criterion: bool,
    pub max_imag: f64,
}

impl PhasePoint {
    /// Spectrum real to `tolerance`.
    pub fn is_real(&self, tolerance: f64) -> bool {
        self.max_imag < tolerance
    }
}

/// Evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Reality criterion against the open-chain spectrum on a square grid of
/// real `(gamma_L, gamma_R)`. Row-major in `gamma_L`.
pub fn phase_diagram(t: f64, cells: usize, gammas: &[f64], termination: OpenTermination) -> Result<Vec<PhasePoint>> {
    let points: Vec<(f64, f64)> = gammas.iter().flat_map(|&gl| gammas.iter().map(move |&gr| (gl, gr))).collect();
    points
        .par_iter()
        .map(|&(gl, gr)| {
            let model = ModelParams::new(t, gl, gr, cells, 2, BoundaryCondition::Open);
            let dp = DoublonParams::from_model(&model);
            let h = doublon_realspace(&dp, BoundaryCondition::Open, termination)?;
            let ev = spectral::eigenvalues(h.as_ref())?;
            let max_imag = ev.iter().map(|e| e.im.abs()).fold(0.0, f64::max);
            Ok(PhasePoint { gamma_l: gl, gamma_r: gr, criterion: reality_criterion(&dp)?, max_imag })
        })
        .collect()
}
