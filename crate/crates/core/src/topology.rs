//! Spectral winding numbers by flux insertion and for the doublon Bloch band.
//!
//! Along a closed parameter loop the phase of `det(H(phi) - delta)` is tracked
//! twice. The first route takes the determinant from an LU factorization and
//! plots `arg det / pi`, whose jumps between `+1` and `-1` are counted with
//! sign (a drop from `+1` to `-1` adds one). The second route sums
//! `arg(E_i - delta)` over the eigenvalues, unwraps it along the loop and
//! divides the total by `2 pi`.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doublon::{bloch_eigenvalues, doublon_bloch, DoublonParams};
use crate::error::{Error, Result};
use crate::linalg::{self, wrap_phase, CMatrix};
use crate::model::{ManyBodyMatrix, ModelParams};
use crate::spectral;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingOptions {
    pub grid_size: usize,
    /// Largest grid reached by doubling when the estimators disagree.
    pub max_grid_size: usize,
    /// Traverse the loop from `2 pi` down to `0`.
    pub reverse: bool,
    /// Collision when some eigenvalue is closer to `delta` than this times the spectral radius.
    pub collision_tolerance: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        Self { grid_size: 256, max_grid_size: 4096, reverse: false, collision_tolerance: 1e-6 }
    }
}

impl WindingOptions {
    pub fn with_grid(grid_size: usize) -> Self {
        Self { grid_size, max_grid_size: grid_size.max(4096), ..Self::default() }
    }
}

/// Phase data at one point of the loop.
#[derive(Clone, Copy, Debug)]
struct Sample {
    det_phase: f64,
    eig_phase: f64,
    min_distance: f64,
    radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub delta: Complex64,
    /// Loop parameter values (flux or momentum).
    pub grid: Vec<f64>,
    /// `arg det(H - delta) / pi` on the principal branch.
    pub jump_indicator: Vec<f64>,
    /// `(1/pi) Im d/dphi ln det(H - delta)` by centered differences.
    pub phase_derivative: Vec<f64>,
    /// Unwrapped eigenvalue phase `sum_i arg(E_i - delta)`, starting at its principal value.
    pub accumulated_phase: Vec<f64>,
    /// Signed jump count of the indicator.
    pub winding: i64,
    /// Total eigenvalue phase change over `2 pi`.
    pub phase_accumulation: f64,
    /// Closest approach of the spectrum to `delta` over the loop.
    pub min_distance: f64,
    /// Largest phase change between neighbouring grid points.
    pub max_phase_step: f64,
}

impl WindingResult {
    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    /// Both estimators give the same integer and the accumulation is quantized.
    pub fn estimators_agree(&self) -> bool {
        let rounded = self.phase_accumulation.round();
        (self.phase_accumulation - rounded).abs() < 1e-3 && rounded as i64 == self.winding
    }

    /// Columns `phi,jump_indicator,phase_derivative,accumulated_phase`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "phi,jump_indicator,phase_derivative,accumulated_phase")?;
        for i in 0..self.grid.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid[i], self.jump_indicator[i], self.phase_derivative[i], self.accumulated_phase[i]
            )?;
        }
        Ok(())
    }
}

fn loop_grid(n: usize, reverse: bool) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let x = TAU * k as f64 / n as f64;
            if reverse {
                -x
            } else {
                x
            }
        })
        .collect()
}

fn sample_matrix(shifted: &CMatrix, delta: Complex64) -> Result<Sample> {
    let det = linalg::log_det(shifted.as_ref());
    let ev = spectral::eigenvalues(shifted.as_ref())?;
    let eig_phase = wrap_phase(ev.iter().map(|e| e.arg()).sum());
    let min_distance = ev.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min);
    // eigenvalues of H - delta; the spectral radius is that of H itself
    let radius = ev.iter().map(|e| (e + delta).norm()).fold(0.0, f64::max);
    Ok(Sample { det_phase: det.phase, eig_phase, min_distance, radius })
}

/// Winding of `det(M(x) - delta)` around a closed loop `x in [0, 2 pi)`.
///
/// `shifted(x)` must return `M(x) - delta`, with `M(2 pi) = M(0)`. The grid is
/// doubled while the estimators disagree or a phase step exceeds `3 pi / 4`.
pub fn loop_winding<F>(shifted: F, delta: Complex64, options: &WindingOptions) -> Result<WindingResult>
where
    F: Fn(f64) -> CMatrix + Sync,
{
    if options.grid_size < 64 {
        return Err(Error::invalid(format!("grid size must be at least 64, got {}", options.grid_size)));
    }
    let mut n = options.grid_size;
    loop {
        let grid = loop_grid(n, options.reverse);
        let samples: Vec<Sample> =
            grid.par_iter().map(|&x| sample_matrix(&shifted(x), delta)).collect::<Result<_>>()?;

        for (x, s) in grid.iter().zip(&samples) {
            if s.min_distance < options.collision_tolerance * s.radius.max(f64::MIN_POSITIVE) {
                return Err(Error::EigenvalueCollision { at: *x, distance: s.min_distance });
            }
        }
        let result = assemble(delta, grid, &samples);
        let resolved = result.max_phase_step <= 0.75 * PI;
        if result.estimators_agree() && resolved {
            return Ok(result);
        }
        if 2 * n > options.max_grid_size {
            if result.estimators_agree() {
                return Ok(result);
            }
            return Err(Error::EstimatorDisagreement {
                grid: n,
                jumps: result.winding,
                accumulation: result.phase_accumulation,
            });
        }
        n *= 2;
    }
}

fn assemble(delta: Complex64, grid: Vec<f64>, samples: &[Sample]) -> WindingResult {
    let n = samples.len();
    // signed spacing, negative on a reversed loop
    let h = grid[1] - grid[0];
    let jump_indicator: Vec<f64> = samples.iter().map(|s| s.det_phase / PI).collect();

    // signed jumps, including the closing step back to the first point
    let mut winding = 0i64;
    for k in 0..n {
        let step = jump_indicator[(k + 1) % n] - jump_indicator[k];
        if step < -1.0 {
            winding += 1;
        } else if step > 1.0 {
            winding -= 1;
        }
    }

    let mut accumulated_phase = Vec::with_capacity(n);
    let mut total = samples[0].eig_phase;
    let mut max_phase_step = 0.0f64;
    accumulated_phase.push(total);
    for k in 0..n {
        let step = wrap_phase(samples[(k + 1) % n].eig_phase - samples[k].eig_phase);
        max_phase_step = max_phase_step.max(step.abs());
        total += step;
        if k + 1 < n {
            accumulated_phase.push(total);
        }
    }
    let phase_accumulation = (total - samples[0].eig_phase) / TAU;

    let phase_derivative = (0..n)
        .map(|k| {
            let prev = samples[(k + n - 1) % n].det_phase;
            let next = samples[(k + 1) % n].det_phase;
            let here = samples[k].det_phase;
            (wrap_phase(next - here) + wrap_phase(here - prev)) / (2.0 * h) / PI
        })
        .collect();

    let min_distance = samples.iter().map(|s| s.min_distance).fold(f64::INFINITY, f64::min);
    WindingResult {
        delta,
        grid,
        jump_indicator,
        phase_derivative,
        accumulated_phase,
        winding,
        phase_accumulation,
        min_distance,
        max_phase_step,
    }
}

/// Many-body winding number by threading flux through the boundary bond.
pub fn winding_number(params: &ModelParams, delta: Complex64, options: &WindingOptions) -> Result<WindingResult> {
    params.validate()?;
    if !params.boundary.is_periodic() {
        return Err(Error::invalid("flux insertion needs a periodic chain"));
    }
    let basis = std::sync::Arc::new(params.basis()?);
    let family = params.operator().flux_family(basis)?;
    let offset = params.boundary.flux();
    let mut result = loop_winding(|phi| family.shifted_at(offset + phi, delta), delta, options)?;
    result.grid.iter_mut().for_each(|phi| *phi += offset);
    Ok(result)
}

/// Winding of the doublon Bloch Hamiltonian over `k in [0, 2 pi)`.
pub fn doublon_bloch_winding(dp: &DoublonParams, delta: Complex64, options: &WindingOptions) -> Result<WindingResult> {
    let shift = Mat::from_fn(2, 2, |i, j| if i == j { delta } else { Complex64::new(0.0, 0.0) });
    loop_winding(|k| &doublon_bloch(dp, k) - &shift, delta, options)
}

/// Closed-form cross-check: winding of `delta^2 - H+(k) H-(k)` on a fine grid.
pub fn doublon_winding_closed_form(dp: &DoublonParams, delta: Complex64, grid_size: usize) -> f64 {
    let det = |k: f64| {
        let [e, _] = bloch_eigenvalues(dp, k);
        delta * delta - e * e
    };
    let mut total = 0.0;
    for m in 0..grid_size {
        let a = det(TAU * m as f64 / grid_size as f64).arg();
        let b = det(TAU * (m + 1) as f64 / grid_size as f64).arg();
        total += wrap_phase(b - a);
    }
    total / TAU
}

/// Spectrum of `H(phi)` on an evenly spaced flux grid, in grid order.
pub fn flux_spectra(params: &ModelParams, grid_size: usize) -> Result<Vec<(f64, Vec<Complex64>)>> {
    params.validate()?;
    let basis = std::sync::Arc::new(params.basis()?);
    let family = params.operator().flux_family(basis)?;
    loop_grid(grid_size, false)
        .into_par_iter()
        .map(|phi| Ok((phi, spectral::eigenvalues(family.matrix_at(phi).as_ref())?)))
        .collect()
}

/// Translation by one site, `|n_0 .. n_{L-1}> -> |n_{L-1} n_0 ..>`, as a permutation matrix.
pub fn translation_operator(h: &ManyBodyMatrix) -> CMatrix {
    let basis = h.basis();
    let n = basis.len();
    let mut t: CMatrix = Mat::zeros(n, n);
    for (j, s) in basis.iter().enumerate() {
        let i = basis.rank(&s.translated(1)).expect("translation stays in the basis");
        t[(i, j)] = Complex64::new(1.0, 0.0);
    }
    t
}
