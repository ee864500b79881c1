//! Periodically driven chains: drive protocols, one-period propagation,
//! quasienergies and the closed-form high-frequency effective Hamiltonians.
//!
//! Units have `hbar = 1`. Time-ordered products act on the left, so the
//! one-period propagator of a three-step drive is `U_3 U_2 U_1`.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{self, CMatrix};
use crate::model::{BondCoupling, BoundaryCondition, LatticeOperator, ManyBodyMatrix, ModelParams};
use crate::spectral;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Sign of the anti-Hermitian site term `± i mu_j n_j` in the loss step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSign {
    /// `+ i mu_j n_j`.
    #[default]
    AsWritten,
    /// `- i mu_j n_j`, which damps the norm for `mu_j > 0`.
    Flipped,
}

impl LossSign {
    pub fn factor(self) -> f64 {
        match self {
            LossSign::AsWritten => 1.0,
            LossSign::Flipped => -1.0,
        }
    }
}

/// Fast three-step layer (hopping kick, site-dependent loss, free step) that
/// can sit underneath the slow sinusoidal drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastLayer {
    pub delta1: f64,
    pub mu0: f64,
    /// Fast angular frequency; an integer multiple (at least 10) of the slow one.
    pub omega: f64,
    #[serde(default)]
    pub loss_sign: LossSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    /// `H = Delta K + U sum n(n-1) + V(t)` with `V` cycling through
    /// `Delta1 K`, `sum_j i mu_j n_j` (`mu_j = j mu0`) and zero.
    ThreeStepHatanoNelson {
        delta: f64,
        delta1: f64,
        #[serde(default)]
        interaction: Complex64,
        mu0: f64,
        omega: f64,
        #[serde(default)]
        loss_sign: LossSign,
    },
    /// `H = (Delta + Delta_t sin wt) K + U sum n(n-1) + sin(wt) (Delta_R R + Delta_L L)`.
    TwoFrequencySinusoid {
        delta: f64,
        #[serde(default)]
        delta_t: f64,
        interaction: Complex64,
        delta_r: Complex64,
        delta_l: Complex64,
        omega: f64,
        #[serde(default)]
        fast: Option<FastLayer>,
    },
    /// Sinusoidal modulation of the directed hoppings and of the interaction.
    ModulatedInteraction {
        delta: f64,
        interaction: Complex64,
        delta_r: Complex64,
        delta_l: Complex64,
        interaction_drive: Complex64,
        omega: f64,
    },
    /// `H = -Delta K + V(t)` with `V` cycling through `Delta1 K`,
    /// `Delta2 sum n(n-1)` and `i Delta3 (R - L)`.
    SquareWaveGD { delta: f64, delta1: f64, delta2: f64, delta3: Complex64, period: f64 },
}

/// A drive on a chain with a fixed boundary condition.
///
/// `K = R + L` with `R = sum_j a†_{j+1} a_j` and `L = sum_j a†_j a_{j+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetProtocol {
    pub drive: Drive,
    pub boundary: BoundaryCondition,
}

impl FloquetProtocol {
    pub fn new(drive: Drive, boundary: BoundaryCondition) -> Self {
        Self { drive, boundary }
    }

    /// Frequency the high-frequency expansion is in.
    pub fn expansion_frequency(&self) -> f64 {
        match &self.drive {
            Drive::ThreeStepHatanoNelson { omega, .. }
            | Drive::TwoFrequencySinusoid { omega, .. }
            | Drive::ModulatedInteraction { omega, .. } => *omega,
            Drive::SquareWaveGD { period, .. } => TAU / period,
        }
    }

    /// Stroboscopic period.
    pub fn period(&self) -> f64 {
        TAU / self.expansion_frequency()
    }

    /// Same drive at another expansion frequency. A fast layer keeps its
    /// frequency ratio.
    pub fn with_frequency(&self, frequency: f64) -> Self {
        let mut out = self.clone();
        match &mut out.drive {
            Drive::ThreeStepHatanoNelson { omega, .. } | Drive::ModulatedInteraction { omega, .. } => {
                *omega = frequency
            }
            Drive::TwoFrequencySinusoid { omega, fast, .. } => {
                if let Some(f) = fast {
                    f.omega *= frequency / *omega;
                }
                *omega = frequency;
            }
            Drive::SquareWaveGD { period, .. } => *period = TAU / frequency,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {x}")))
            }
        };
        let finite = |xs: &[Complex64]| {
            if xs.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                Ok(())
            } else {
                Err(Error::invalid("drive amplitudes must be finite"))
            }
        };
        match &self.drive {
            Drive::ThreeStepHatanoNelson { delta, delta1, interaction, mu0, omega, .. } => {
                positive("omega", *omega)?;
                finite(&[re(*delta), re(*delta1), *interaction, re(*mu0)])
            }
            Drive::TwoFrequencySinusoid { delta, delta_t, interaction, delta_r, delta_l, omega, fast } => {
                positive("omega", *omega)?;
                finite(&[re(*delta), re(*delta_t), *interaction, *delta_r, *delta_l])?;
                if let Some(f) = fast {
                    positive("fast omega", f.omega)?;
                    finite(&[re(f.delta1), re(f.mu0)])?;
                    let ratio = f.omega / omega;
                    if ratio < 10.0 - 1e-9 {
                        return Err(Error::invalid(format!(
                            "fast and slow frequencies must differ by at least a factor 10, got {ratio}"
                        )));
                    }
                    if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                        return Err(Error::invalid(format!(
                            "fast frequency must be an integer multiple of the slow one, got ratio {ratio}"
                        )));
                    }
                }
                Ok(())
            }
            Drive::ModulatedInteraction { delta, interaction, delta_r, delta_l, interaction_drive, omega } => {
                positive("omega", *omega)?;
                finite(&[re(*delta), *interaction, *delta_r, *delta_l, *interaction_drive])
            }
            Drive::SquareWaveGD { delta, delta1, delta2, delta3, period } => {
                positive("period", *period)?;
                finite(&[re(*delta), re(*delta1), re(*delta2), *delta3])
            }
        }
    }

    /// True when the generator has no jump discontinuities inside smooth parts
    /// and needs the adaptive integrator.
    pub fn is_sinusoidal(&self) -> bool {
        matches!(self.drive, Drive::TwoFrequencySinusoid { .. } | Drive::ModulatedInteraction { .. })
    }
}

/// Dense building blocks of every drive in one basis.
struct Blocks {
    kinetic: CMatrix,
    right: CMatrix,
    left: CMatrix,
    pairs: CMatrix,
    /// `sum_j j n_j`.
    ramp: CMatrix,
}

impl Blocks {
    fn new(sites: usize, boundary: BoundaryCondition, basis: &Arc<FockBasis>) -> Result<Self> {
        let one = BondCoupling::bare(ONE);
        let none = BondCoupling::default();
        let build = |op: LatticeOperator| op.assemble(basis.clone()).map(ManyBodyMatrix::into_matrix);
        Ok(Self {
            kinetic: build(LatticeOperator::kinetic(sites, boundary, ONE))?,
            right: build(LatticeOperator::new(sites, boundary).with_uniform_hopping(one, none))?,
            left: build(LatticeOperator::new(sites, boundary).with_uniform_hopping(none, one))?,
            pairs: build(LatticeOperator::pair_interaction(sites, boundary))?,
            ramp: build(LatticeOperator::potential(sites, boundary, (0..sites).map(|j| re(j as f64)).collect()))?,
        })
    }
}

fn lin(terms: &[(Complex64, &CMatrix)]) -> CMatrix {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| terms.iter().map(|(c, m)| c * m[(i, j)]).sum())
}

fn scale(m: &CMatrix, c: Complex64) -> CMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c * m[(i, j)])
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    &(a * b) - &(b * a)
}

/// Generator pieces: either equal-length constant steps, or a smooth slow
/// drive optionally stacked on fast constant steps.
enum Schedule {
    Steps(Vec<CMatrix>),
    Smooth { base: CMatrix, drive: CMatrix, omega: f64, fast: Option<(Vec<CMatrix>, usize)> },
}

struct Compiled {
    period: f64,
    schedule: Schedule,
}

fn three_steps(blocks: &Blocks, delta1: f64, mu0: f64, sign: LossSign) -> [CMatrix; 3] {
    let n = blocks.kinetic.nrows();
    [scale(&blocks.kinetic, re(delta1)), scale(&blocks.ramp, I * sign.factor() * mu0), Mat::zeros(n, n)]
}

fn compile(protocol: &FloquetProtocol, basis: &Arc<FockBasis>) -> Result<Compiled> {
    protocol.validate()?;
    let b = Blocks::new(basis.sites(), protocol.boundary, basis)?;
    let period = protocol.period();
    let schedule = match protocol.drive {
        Drive::ThreeStepHatanoNelson { delta, delta1, interaction, mu0, loss_sign, .. } => {
            let stat = lin(&[(re(delta), &b.kinetic), (interaction, &b.pairs)]);
            Schedule::Steps(three_steps(&b, delta1, mu0, loss_sign).iter().map(|v| &stat + v).collect())
        }
        Drive::TwoFrequencySinusoid { delta, delta_t, interaction, delta_r, delta_l, omega, fast } => {
            Schedule::Smooth {
                base: lin(&[(re(delta), &b.kinetic), (interaction, &b.pairs)]),
                drive: lin(&[(delta_r + delta_t, &b.right), (delta_l + delta_t, &b.left)]),
                omega,
                fast: fast.map(|f| {
                    let ratio = (f.omega / omega).round() as usize;
                    (three_steps(&b, f.delta1, f.mu0, f.loss_sign).to_vec(), ratio)
                }),
            }
        }
        Drive::ModulatedInteraction { delta, interaction, delta_r, delta_l, interaction_drive, omega } => {
            Schedule::Smooth {
                base: lin(&[(re(delta), &b.kinetic), (interaction, &b.pairs)]),
                drive: lin(&[(delta_r, &b.right), (delta_l, &b.left), (interaction_drive, &b.pairs)]),
                omega,
                fast: None,
            }
        }
        Drive::SquareWaveGD { delta, delta1, delta2, delta3, .. } => {
            let stat = scale(&b.kinetic, re(-delta));
            Schedule::Steps(vec![
                lin(&[(ONE, &stat), (re(delta1), &b.kinetic)]),
                lin(&[(ONE, &stat), (re(delta2), &b.pairs)]),
                lin(&[(ONE, &stat), (I * delta3, &b.right), (-I * delta3, &b.left)]),
            ])
        }
    };
    Ok(Compiled { period, schedule })
}

fn step_index(t: f64, period: f64, steps: usize) -> usize {
    let phase = t.rem_euclid(period) / period;
    ((phase * steps as f64) as usize).min(steps - 1)
}

impl Compiled {
    fn at(&self, t: f64) -> CMatrix {
        match &self.schedule {
            Schedule::Steps(steps) => steps[step_index(t, self.period, steps.len())].clone(),
            Schedule::Smooth { base, drive, omega, fast } => {
                let mut h = lin(&[(ONE, base), (re((omega * t).sin()), drive)]);
                if let Some((steps, ratio)) = fast {
                    let fast_period = self.period / *ratio as f64;
                    h += &steps[step_index(t, fast_period, steps.len())];
                }
                h
            }
        }
    }

    /// Smooth pieces `[t0, t1)` of `periods` periods, with the constant fast
    /// step (if any) valid on each.
    fn segments(&self, periods: usize) -> Vec<(f64, f64, Option<usize>)> {
        match &self.schedule {
            Schedule::Smooth { fast: Some((steps, ratio)), .. } => {
                let pieces = periods * ratio * steps.len();
                let width = self.period / (ratio * steps.len()) as f64;
                (0..pieces).map(|k| (k as f64 * width, (k + 1) as f64 * width, Some(k % steps.len()))).collect()
            }
            _ => (0..periods).map(|k| (k as f64 * self.period, (k + 1) as f64 * self.period, None)).collect(),
        }
    }
}

/// Refinement settings for the sinusoidal integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Target max-norm change between successive halvings, relative to
    /// `max(1, |U|_max)`.
    pub tolerance: f64,
    /// Substeps per smooth segment on the first pass.
    pub initial_steps: usize,
    /// Give up once a segment would need more substeps than this.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { tolerance: 1e-9, initial_steps: 16, max_steps: 1 << 16 }
    }
}

/// Fourth-order Magnus step with two Gauss-Legendre nodes.
fn magnus_segment(c: &Compiled, t0: f64, t1: f64, substeps: usize, fast: Option<usize>) -> CMatrix {
    let (base, drive, omega, fast_steps) = match &c.schedule {
        Schedule::Smooth { base, drive, omega, fast: f } => (base, drive, *omega, f.as_ref()),
        Schedule::Steps(_) => unreachable!("constant steps use exact exponentials"),
    };
    let offset = match (fast, fast_steps) {
        (Some(k), Some((steps, _))) => Some(&steps[k]),
        _ => None,
    };
    let gen = |t: f64| {
        let mut h = lin(&[(ONE, base), (re((omega * t).sin()), drive)]);
        if let Some(v) = offset {
            h += v;
        }
        h
    };
    let h = (t1 - t0) / substeps as f64;
    let c1 = 0.5 - 3f64.sqrt() / 6.0;
    let c2 = 0.5 + 3f64.sqrt() / 6.0;
    let mut u = linalg::identity(base.nrows());
    for s in 0..substeps {
        let ts = t0 + s as f64 * h;
        let h1 = gen(ts + c1 * h);
        let h2 = gen(ts + c2 * h);
        // Omega = -i h/2 (H1 + H2) - sqrt(3) h^2 / 12 [H2, H1]
        let sum = &h1 + &h2;
        let comm = commutator(&h2, &h1);
        let omega4 = lin(&[(re(-0.5 * h) * I, &sum), (re(-(3f64.sqrt()) * h * h / 12.0), &comm)]);
        u = &linalg::expm(omega4.as_ref()) * &u;
    }
    u
}

/// One- or multi-period evolution with its quasienergies.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub evolution: CMatrix,
    pub period: f64,
    /// Number of periods covered by `evolution`.
    pub periods: usize,
    /// `(i / T) log lambda` on the principal branch, for `periods == 1`.
    pub quasienergies: Vec<Complex64>,
    /// Exponentials multiplied together.
    pub step_count: usize,
    /// Max-norm change at the last refinement (0 for exact stepping).
    pub last_change: f64,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.evolution.nrows()
    }

    /// Width `2 pi / T` of the Floquet zone along the real axis.
    pub fn zone_width(&self) -> f64 {
        TAU / self.period
    }
}

/// Generator matrix at time `t` (taken modulo the period).
pub fn instantaneous_hamiltonian(
    protocol: &FloquetProtocol,
    time: f64,
    basis: &Arc<FockBasis>,
) -> Result<ManyBodyMatrix> {
    let c = compile(protocol, basis)?;
    ManyBodyMatrix::new(basis.clone(), c.at(time.rem_euclid(c.period)))
}

/// `U_T` for a single period.
pub fn propagate_period(
    protocol: &FloquetProtocol,
    basis: &Arc<FockBasis>,
    control: StepControl,
) -> Result<Propagator> {
    propagate_periods(protocol, basis, 1, control)
}

/// Evolution over `periods` consecutive periods, integrated directly.
pub fn propagate_periods(
    protocol: &FloquetProtocol,
    basis: &Arc<FockBasis>,
    periods: usize,
    control: StepControl,
) -> Result<Propagator> {
    if periods == 0 {
        return Err(Error::invalid("need at least one period"));
    }
    let c = compile(protocol, basis)?;
    let dim = basis.len();
    let (evolution, step_count, last_change) = match &c.schedule {
        Schedule::Steps(steps) => {
            let tau = c.period / steps.len() as f64;
            let factors: Vec<CMatrix> = steps.iter().map(|h| linalg::expm(scale(h, -I * tau).as_ref())).collect();
            let mut u = linalg::identity(dim);
            for _ in 0..periods {
                for f in &factors {
                    u = f * &u;
                }
            }
            (u, periods * steps.len(), 0.0)
        }
        Schedule::Smooth { .. } => {
            let segments = c.segments(periods);
            let run = |substeps: usize| {
                let mut u = linalg::identity(dim);
                for &(t0, t1, k) in &segments {
                    u = &magnus_segment(&c, t0, t1, substeps, k) * &u;
                }
                u
            };
            let mut substeps = control.initial_steps.max(1);
            let mut prev = run(substeps);
            loop {
                let next_steps = substeps * 2;
                if next_steps > control.max_steps {
                    let change = f64::NAN;
                    return Err(Error::PropagatorNonConvergence { steps: substeps * segments.len(), change });
                }
                let next = run(next_steps);
                let change = linalg::max_norm((&next - &prev).as_ref());
                let scale = linalg::max_norm(next.as_ref()).max(1.0);
                substeps = next_steps;
                if !change.is_finite() {
                    return Err(Error::PropagatorNonConvergence { steps: substeps * segments.len(), change });
                }
                if change < control.tolerance * scale {
                    break (next, substeps * segments.len(), change);
                }
                if substeps * 2 > control.max_steps {
                    return Err(Error::PropagatorNonConvergence { steps: substeps * segments.len(), change });
                }
                prev = next;
            }
        }
    };
    let period = c.period * periods as f64;
    let quasienergies = quasienergies(&evolution, period)?;
    Ok(Propagator { evolution, period: c.period, periods, quasienergies, step_count, last_change })
}

/// `(i / T) log lambda` for every eigenvalue of `u`, principal branch.
pub fn quasienergies(u: &CMatrix, period: f64) -> Result<Vec<Complex64>> {
    let lambdas = spectral::eigenvalues(u.as_ref())?;
    lambdas
        .into_iter()
        .map(|l| {
            if l.norm() == 0.0 {
                return Err(Error::Eigensolver {
                    dim: u.nrows(),
                    norm: linalg::max_norm(u.as_ref()),
                    reason: "singular propagator has no logarithm".into(),
                });
            }
            Ok(Complex64::new(-l.arg() / period, l.norm().ln() / period))
        })
        .collect()
}

/// Shift `e` by multiples of `2 pi / T` into `(-pi/T, pi/T]`.
pub fn fold_into_zone(e: Complex64, period: f64) -> Complex64 {
    Complex64::new(linalg::wrap_phase(e.re * period) / period, e.im)
}

/// Which closed-form effective Hamiltonian to build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveForm {
    /// The closed-form operator exactly as written: the static part plus the
    /// first-order density-dependent correction.
    #[default]
    AsPublished,
    /// The same plus the period average of the modulation, which the
    /// closed forms of the stepped drives leave out.
    Completed,
}

#[allow(clippy::too_many_arguments)]
fn three_step_effective(
    sites: usize,
    boundary: BoundaryCondition,
    delta: f64,
    delta1: f64,
    interaction: Complex64,
    mu0: f64,
    omega: f64,
    sign: LossSign,
    form: EffectiveForm,
) -> LatticeOperator {
    let c = sign.factor() * PI * delta1 / (27.0 * omega);
    let mu = |j: usize| j as f64 * mu0;
    let mut op = LatticeOperator::new(sites, boundary).with_interaction(interaction);
    let extra = match form {
        EffectiveForm::AsPublished => 0.0,
        EffectiveForm::Completed => delta1 / 3.0,
    };
    for b in 0..boundary.bond_count(sites) {
        let (j, k) = (b, (b + 1) % sites);
        // Delta - c (mu_j - mu_{j+1}) on a†_{j+1} a_j, mirrored on the reverse hop
        let right = re(delta + extra - c * (mu(j) - mu(k)));
        let left = re(delta + extra - c * (mu(k) - mu(j)));
        op = op.with_bond(b, BondCoupling::bare(right), BondCoupling::bare(left));
    }
    if form == EffectiveForm::Completed {
        op = op.with_onsite((0..sites).map(|j| I * sign.factor() * mu(j) / 3.0).collect());
    }
    op
}

/// Hopping `bare` with density couplings `density_r`, `density_l` on the
/// `(n_to - n_from)` factor of right and left hops.
fn gauge_chain(
    sites: usize,
    boundary: BoundaryCondition,
    bare: Complex64,
    density_r: Complex64,
    density_l: Complex64,
    interaction: Complex64,
) -> LatticeOperator {
    LatticeOperator::new(sites, boundary)
        .with_uniform_hopping(BondCoupling::new(bare, density_r), BondCoupling::new(bare, density_l))
        .with_interaction(interaction)
}

/// Closed-form effective generator as a lattice operator on `sites` sites.
pub fn effective_operator(protocol: &FloquetProtocol, sites: usize, form: EffectiveForm) -> Result<LatticeOperator> {
    protocol.validate()?;
    let boundary = protocol.boundary;
    let op = match protocol.drive {
        Drive::ThreeStepHatanoNelson { delta, delta1, interaction, mu0, omega, loss_sign } => {
            three_step_effective(sites, boundary, delta, delta1, interaction, mu0, omega, loss_sign, form)
        }
        Drive::TwoFrequencySinusoid { delta, delta_t, interaction, delta_r, delta_l, omega, fast } => {
            // -(i / w) [U sum n(n-1), D] with D the directed part of the slow drive
            let dr = -2.0 * I * interaction * (delta_r + delta_t) / omega;
            let dl = -2.0 * I * interaction * (delta_l + delta_t) / omega;
            let slow = gauge_chain(sites, boundary, re(delta), dr, dl, interaction);
            match fast {
                None => slow,
                Some(f) => {
                    let base = three_step_effective(
                        sites,
                        boundary,
                        delta,
                        f.delta1,
                        interaction,
                        f.mu0,
                        f.omega,
                        f.loss_sign,
                        form,
                    );
                    let density = gauge_chain(sites, boundary, ZERO, dr, dl, ZERO);
                    base.combine(ONE, &density, ONE)
                }
            }
        }
        Drive::ModulatedInteraction { delta, interaction, delta_r, delta_l, interaction_drive, omega } => {
            let d = |dd: Complex64| 2.0 * I * (delta * interaction_drive - interaction * dd) / omega;
            gauge_chain(sites, boundary, re(delta), d(delta_r), d(delta_l), interaction)
        }
        Drive::SquareWaveGD { delta, delta1, delta2, delta3, period } => {
            let omega = TAU / period;
            let x = I * delta2 * PI * (delta1 + I * delta3) / (27.0 * omega);
            let y = I * delta2 * PI * (delta1 - I * delta3) / (27.0 * omega);
            let published = gauge_chain(sites, boundary, re(-delta), x, y, ZERO);
            match form {
                EffectiveForm::AsPublished => published,
                EffectiveForm::Completed => {
                    let third = 1.0 / 3.0;
                    let average = LatticeOperator::new(sites, boundary)
                        .with_uniform_hopping(
                            BondCoupling::bare(third * (re(delta1) + I * delta3)),
                            BondCoupling::bare(third * (re(delta1) - I * delta3)),
                        )
                        .with_interaction(re(third * delta2));
                    published.combine(ONE, &average, ONE)
                }
            }
        }
    };
    Ok(op)
}

pub fn effective_hamiltonian(
    protocol: &FloquetProtocol,
    basis: &Arc<FockBasis>,
    form: EffectiveForm,
) -> Result<ManyBodyMatrix> {
    effective_operator(protocol, basis.sites(), form)?.assemble(basis.clone())
}

/// Model parameters reproducing the published effective operator of a
/// sinusoidal or square-wave drive, read off term by term.
///
/// Three-step drives and fast layers give density-independent asymmetric
/// hopping, which is outside the model family.
pub fn effective_model_params(protocol: &FloquetProtocol, sites: usize, particles: usize) -> Result<ModelParams> {
    protocol.validate()?;
    // density coupling i gamma on (n_to - n_from), bare hopping -t
    let (t, density_r, density_l, interaction) = match &protocol.drive {
        Drive::ThreeStepHatanoNelson { .. } | Drive::TwoFrequencySinusoid { fast: Some(_), .. } => {
            return Err(Error::invalid("drives with a fast loss layer have no density-dependent model form"))
        }
        _ => {
            let op = effective_operator(protocol, sites, EffectiveForm::AsPublished)?;
            let (r, l) = (op.right()[0], op.left()[0]);
            (-r.bare.re, r.density, l.density, op.interaction())
        }
    };
    Ok(ModelParams {
        t,
        gamma_l: -I * density_l,
        gamma_r: -I * density_r,
        interaction,
        sites,
        particles,
        boundary: protocol.boundary,
        ordering: Default::default(),
    })
}

/// `(gamma_l, gamma_r)` as quoted next to each closed form.
///
/// For the two-frequency drive these have the opposite sign of the couplings
/// implied by its operator, and for the square-wave drive they are
/// `i` times the implied couplings with left and right exchanged;
/// [`effective_model_params`] follows the operators.
pub fn quoted_couplings(protocol: &FloquetProtocol) -> Option<(Complex64, Complex64)> {
    match &protocol.drive {
        &Drive::TwoFrequencySinusoid { interaction, delta_r, delta_l, omega, .. } => {
            Some((2.0 * interaction * delta_l / omega, 2.0 * interaction * delta_r / omega))
        }
        &Drive::ModulatedInteraction { delta, interaction, delta_r, delta_l, interaction_drive, omega } => Some((
            2.0 * (delta * interaction_drive - interaction * delta_l) / omega,
            2.0 * (delta * interaction_drive - interaction * delta_r) / omega,
        )),
        &Drive::SquareWaveGD { delta1, delta2, delta3, period, .. } => {
            let omega = TAU / period;
            Some((
                I * delta2 * PI * (delta1 + I * delta3) / (27.0 * omega),
                I * delta2 * PI * (delta1 - I * delta3) / (27.0 * omega),
            ))
        }
        Drive::ThreeStepHatanoNelson { .. } => None,
    }
}

/// `-(2 pi / (9 Omega)) Delta1 K` of a fast three-step layer.
pub fn kick_operator(protocol: &FloquetProtocol, basis: &Arc<FockBasis>) -> Result<ManyBodyMatrix> {
    let (delta1, omega) = match protocol.drive {
        Drive::ThreeStepHatanoNelson { delta1, omega, .. } => (delta1, omega),
        Drive::TwoFrequencySinusoid { fast: Some(f), .. } => (f.delta1, f.omega),
        _ => return Err(Error::invalid("kick operator is defined for the fast three-step drive")),
    };
    let amp = re(-TAU / (9.0 * omega) * delta1);
    LatticeOperator::kinetic(basis.sites(), protocol.boundary, amp).assemble(basis.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasienergyComparison {
    /// Quasienergies of the propagator, folded.
    pub quasienergies: Vec<Complex64>,
    /// Effective eigenvalues, folded into the same zone.
    pub effective: Vec<Complex64>,
    /// `pairs[i]` is the effective eigenvalue matched to quasienergy `i`.
    pub pairs: Vec<usize>,
    pub max_distance: f64,
    pub mean_distance: f64,
}

/// Match quasienergies against the folded spectrum of `h_eff` with a
/// zone-periodic distance.
pub fn compare_quasienergies(prop: &Propagator, h_eff: &ManyBodyMatrix) -> Result<QuasienergyComparison> {
    if prop.periods != 1 {
        return Err(Error::invalid("quasienergies are compared for single-period propagators"));
    }
    if h_eff.dim() != prop.dim() {
        return Err(Error::DimensionMismatch { expected: prop.dim(), found: h_eff.dim() });
    }
    let period = prop.period;
    let edge = PI / period;
    let zone = TAU / period;
    let quasi: Vec<Complex64> = prop.quasienergies.iter().map(|&e| fold_into_zone(e, period)).collect();
    if let Some(q) = quasi.iter().find(|q| (q.re.abs() - edge).abs() < 1e-6 * zone) {
        return Err(Error::BranchFoldingAmbiguity { value: q.re, edge });
    }
    let effective: Vec<Complex64> =
        spectral::eigenvalues(h_eff.matrix().as_ref())?.into_iter().map(|e| fold_into_zone(e, period)).collect();
    let m = linalg::match_spectra(&quasi, &effective, |a, b| {
        let d = fold_into_zone(a - b, period);
        d.norm()
    });
    Ok(QuasienergyComparison {
        quasienergies: quasi,
        effective,
        pairs: m.pairs,
        max_distance: m.max_distance,
        mean_distance: m.mean_distance,
    })
}

/// One row of a high-frequency convergence sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub frequency: f64,
    pub max_matched_distance: f64,
    pub mean_matched_distance: f64,
    pub step_count: usize,
}

/// Propagate and compare at each frequency; points run in parallel.
pub fn convergence_sweep(
    protocol: &FloquetProtocol,
    frequencies: &[f64],
    basis: &Arc<FockBasis>,
    form: EffectiveForm,
    control: StepControl,
) -> Result<Vec<ConvergencePoint>> {
    frequencies
        .par_iter()
        .map(|&f| {
            let p = protocol.with_frequency(f);
            let prop = propagate_period(&p, basis, control)?;
            let cmp = compare_quasienergies(&prop, &effective_hamiltonian(&p, basis, form)?)?;
            Ok(ConvergencePoint {
                frequency: f,
                max_matched_distance: cmp.max_distance,
                mean_matched_distance: cmp.mean_distance,
                step_count: prop.step_count,
            })
        })
        .collect()
}

/// Successive ratios `d(f_k) / d(f_{k+1})` of the max matched distance.
pub fn convergence_ratios(points: &[ConvergencePoint]) -> Vec<f64> {
    points.windows(2).map(|w| w[0].max_matched_distance / w[1].max_matched_distance).collect()
}

pub fn write_convergence_csv<W: Write>(points: &[ConvergencePoint], mut w: W) -> io::Result<()> {
    writeln!(w, "frequency,max_matched_distance,mean_matched_distance,step_count")?;
    for p in points {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{}",
            p.frequency, p.max_matched_distance, p.mean_matched_distance, p.step_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_hamiltonian;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basis(sites: usize, particles: usize) -> Arc<FockBasis> {
        Arc::new(FockBasis::new(sites, particles).unwrap())
    }

    fn three_step(omega: f64, boundary: BoundaryCondition) -> FloquetProtocol {
        FloquetProtocol::new(
            Drive::ThreeStepHatanoNelson {
                delta: 1.0,
                delta1: 1.0,
                interaction: ZERO,
                mu0: 0.3,
                omega,
                loss_sign: LossSign::AsWritten,
            },
            boundary,
        )
    }

    fn two_frequency(omega: f64) -> FloquetProtocol {
        FloquetProtocol::new(
            Drive::TwoFrequencySinusoid {
                delta: -1.0,
                delta_t: 0.0,
                interaction: re(0.2),
                delta_r: re(0.3),
                delta_l: re(-0.5),
                omega,
                fast: None,
            },
            BoundaryCondition::periodic(),
        )
    }

    fn square_wave(period: f64, delta3: Complex64) -> FloquetProtocol {
        FloquetProtocol::new(
            Drive::SquareWaveGD { delta: 0.4, delta1: 0.7, delta2: 0.5, delta3, period },
            BoundaryCondition::periodic(),
        )
    }

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        linalg::max_norm((a - b).as_ref())
    }

    #[test]
    fn three_step_hamiltonian_per_window() {
        let b = basis(6, 2);
        let p = three_step(20.0, BoundaryCondition::Open);
        let period = p.period();
        let first = instantaneous_hamiltonian(&p, 0.1 * period, &b).unwrap();
        let hop = LatticeOperator::kinetic(6, BoundaryCondition::Open, re(2.0)).assemble(b.clone()).unwrap();
        assert!(max_diff(first.matrix(), hop.matrix()) < 1e-15);

        let second = instantaneous_hamiltonian(&p, 0.5 * period, &b).unwrap();
        let stat = LatticeOperator::kinetic(6, BoundaryCondition::Open, ONE).assemble(b.clone()).unwrap();
        let diff = second.matrix() - stat.matrix();
        for (i, s) in b.iter().enumerate() {
            let want: f64 = (0..6).map(|j| 0.3 * j as f64 * s.occupation(j) as f64).sum();
            assert!((diff[(i, i)] - c(0.0, want)).norm() < 1e-15);
        }
        let third = instantaneous_hamiltonian(&p, 0.9 * period + 3.0 * period, &b).unwrap();
        assert!(max_diff(third.matrix(), stat.matrix()) < 1e-15);
    }

    #[test]
    fn sine_node_leaves_the_static_part() {
        let b = basis(5, 2);
        let p = two_frequency(10.0);
        let h = instantaneous_hamiltonian(&p, PI / 10.0, &b).unwrap();
        let mut params = ModelParams::new(1.0, 0.0, 0.0, 5, 2, BoundaryCondition::periodic());
        params.interaction = re(0.2);
        let stat = build_hamiltonian(&params).unwrap();
        assert!(max_diff(h.matrix(), stat.matrix()) < 1e-14);
    }

    #[test]
    fn zero_drive_is_identity() {
        let b = basis(4, 2);
        let drives = [
            Drive::ThreeStepHatanoNelson {
                delta: 0.0,
                delta1: 0.0,
                interaction: ZERO,
                mu0: 0.0,
                omega: 3.0,
                loss_sign: LossSign::AsWritten,
            },
            Drive::TwoFrequencySinusoid {
                delta: 0.0,
                delta_t: 0.0,
                interaction: ZERO,
                delta_r: ZERO,
                delta_l: ZERO,
                omega: 2.0,
                fast: None,
            },
        ];
        for d in drives {
            let prop = propagate_period(&FloquetProtocol::new(d, BoundaryCondition::Open), &b, StepControl::default())
                .unwrap();
            assert!(max_diff(&prop.evolution, &linalg::identity(b.len())) < 1e-15);
        }
    }

    #[test]
    fn commuting_diagonal_steps() {
        let b = basis(4, 3);
        let p = FloquetProtocol::new(
            Drive::ThreeStepHatanoNelson {
                delta: 0.0,
                delta1: 0.0,
                interaction: c(0.4, -0.1),
                mu0: 0.25,
                omega: 2.0,
                loss_sign: LossSign::Flipped,
            },
            BoundaryCondition::Open,
        );
        let prop = propagate_period(&p, &b, StepControl::default()).unwrap();
        let period = p.period();
        for (i, s) in b.iter().enumerate() {
            let pairs: f64 = s.occupations().iter().map(|&n| (n * n.saturating_sub(1)) as f64).sum();
            let ramp: f64 = (0..4).map(|j| 0.25 * j as f64 * s.occupation(j) as f64).sum();
            // exp(-i (U pairs T - i ramp T / 3))
            let phase = -I * (c(0.4, -0.1) * pairs * period - I * ramp * period / 3.0);
            assert!((prop.evolution[(i, i)] - phase.exp()).norm() < 1e-12);
        }
    }

    #[test]
    fn static_protocol_reproduces_its_spectrum() {
        let b = basis(5, 2);
        let p = square_wave(0.7, ZERO);
        let p = FloquetProtocol {
            drive: Drive::SquareWaveGD { delta: 0.4, delta1: 0.0, delta2: 0.0, delta3: ZERO, period: 0.7 },
            ..p
        };
        let prop = propagate_period(&p, &b, StepControl::default()).unwrap();
        let h = instantaneous_hamiltonian(&p, 0.0, &b).unwrap();
        let cmp = compare_quasienergies(&prop, &h).unwrap();
        assert!(cmp.max_distance < 1e-12, "{}", cmp.max_distance);
    }

    #[test]
    fn zone_edge_is_reported() {
        let b = basis(4, 1);
        // eigenvalues of -K are -2 cos k = {-2, 0, 0, 2}; put 2 on the zone edge
        let p = FloquetProtocol::new(
            Drive::SquareWaveGD { delta: 1.0, delta1: 0.0, delta2: 0.0, delta3: ZERO, period: PI / 2.0 },
            BoundaryCondition::periodic(),
        );
        let prop = propagate_period(&p, &b, StepControl::default()).unwrap();
        let h = instantaneous_hamiltonian(&p, 0.0, &b).unwrap();
        let err = compare_quasienergies(&prop, &h).unwrap_err();
        assert!(matches!(err, Error::BranchFoldingAmbiguity { .. }));
    }

    #[test]
    fn hatano_nelson_closed_form() {
        let p = three_step(20.0, BoundaryCondition::Open);
        let op = effective_operator(&p, 6, EffectiveForm::AsPublished).unwrap();
        let shift = PI * 1.0 * 0.3 / (27.0 * 20.0);
        for b in 0..5 {
            assert!((op.right()[b].bare - re(1.0 + shift)).norm() < 1e-15);
            assert!((op.left()[b].bare - re(1.0 - shift)).norm() < 1e-15);
        }
        assert!(effective_model_params(&p, 6, 1).is_err());
        assert!(quoted_couplings(&p).is_none());
    }

    #[test]
    fn completed_three_step_converges() {
        let b = basis(6, 1);
        let base = three_step(10.0, BoundaryCondition::Open);
        let control = StepControl::default();
        let completed = convergence_sweep(&base, &[20.0, 40.0], &b, EffectiveForm::Completed, control).unwrap();
        let ratio = convergence_ratios(&completed)[0];
        assert!((2.0..=6.0).contains(&ratio), "ratio {ratio}");
        // without the averaged modulation the closed form stays a fixed distance away
        let literal = convergence_sweep(&base, &[20.0, 40.0], &b, EffectiveForm::AsPublished, control).unwrap();
        assert!(literal[1].max_matched_distance > 0.5);
    }

    #[test]
    fn two_frequency_density_term_is_the_first_order_commutator() {
        let b = basis(5, 2);
        let omega = 12.0;
        let p = FloquetProtocol::new(
            Drive::TwoFrequencySinusoid {
                delta: -1.0,
                delta_t: 0.15,
                interaction: c(0.2, -0.05),
                delta_r: c(0.3, 0.1),
                delta_l: c(-0.5, 0.2),
                omega,
                fast: None,
            },
            BoundaryCondition::periodic(),
        );
        let blocks = Blocks::new(5, p.boundary, &b).unwrap();
        let h0 = lin(&[(re(-1.0), &blocks.kinetic), (c(0.2, -0.05), &blocks.pairs)]);
        let d = lin(&[(c(0.45, 0.1), &blocks.right), (c(-0.35, 0.2), &blocks.left)]);
        let want = &h0 + &scale(&commutator(&h0, &d), -I / omega);
        let eff = effective_hamiltonian(&p, &b, EffectiveForm::AsPublished).unwrap();
        assert!(max_diff(eff.matrix(), &want) < 1e-13);
    }

    #[test]
    fn modulated_interaction_density_term() {
        let b = basis(5, 2);
        let omega = 9.0;
        let (delta, u, dr, dl, uw) = (0.8, c(0.0, -0.3), c(0.4, 0.2), c(0.1, -0.6), c(0.25, 0.0));
        let p = FloquetProtocol::new(
            Drive::ModulatedInteraction {
                delta,
                interaction: u,
                delta_r: dr,
                delta_l: dl,
                interaction_drive: uw,
                omega,
            },
            BoundaryCondition::periodic(),
        );
        let blocks = Blocks::new(5, p.boundary, &b).unwrap();
        let h0 = lin(&[(re(delta), &blocks.kinetic), (u, &blocks.pairs)]);
        let d = lin(&[(dr, &blocks.right), (dl, &blocks.left), (uw, &blocks.pairs)]);
        let want = &h0 + &scale(&commutator(&h0, &d), -I / omega);
        let eff = effective_hamiltonian(&p, &b, EffectiveForm::AsPublished).unwrap();
        assert!(max_diff(eff.matrix(), &want) < 1e-13);
        // here the quoted mapping and the operator agree
        let params = effective_model_params(&p, 5, 2).unwrap();
        let (gl, gr) = quoted_couplings(&p).unwrap();
        assert!((params.gamma_l - gl).norm() < 1e-15 && (params.gamma_r - gr).norm() < 1e-15);
        assert!((params.t + delta).abs() < 1e-15);
    }

    #[test]
    fn two_frequency_mapping_signs() {
        let p = two_frequency(20.0);
        let params = effective_model_params(&p, 5, 2).unwrap();
        assert_eq!(params.t, 1.0);
        let (gl, gr) = quoted_couplings(&p).unwrap();
        // quoted: 2 U Delta_{L/R} / w
        assert!((gl - re(2.0 * 0.2 * -0.5 / 20.0)).norm() < 1e-15);
        assert!((gr - re(2.0 * 0.2 * 0.3 / 20.0)).norm() < 1e-15);
        assert!((params.gamma_l + gl).norm() < 1e-15);
        assert!((params.gamma_r + gr).norm() < 1e-15);
        let b = basis(5, 2);
        let from_params = build_hamiltonian(&params).unwrap();
        let eff = effective_hamiltonian(&p, &b, EffectiveForm::AsPublished).unwrap();
        assert!(max_diff(from_params.matrix(), eff.matrix()) < 1e-14);
    }

    #[test]
    fn two_frequency_converges() {
        let b = basis(5, 2);
        let points = convergence_sweep(
            &two_frequency(10.0),
            &[10.0, 20.0],
            &b,
            EffectiveForm::AsPublished,
            StepControl::default(),
        )
        .unwrap();
        let ratio = convergence_ratios(&points)[0];
        assert!((2.0..=6.0).contains(&ratio), "ratio {ratio}");
        assert!(points[1].max_matched_distance < 1e-3);
    }

    #[test]
    fn square_wave_mapping() {
        let real = square_wave(0.3, re(0.3));
        let params = effective_model_params(&real, 5, 2).unwrap();
        assert!((params.gamma_r - params.gamma_l.conj()).norm() < 1e-15);
        assert!(!params.is_non_hermitian());
        let (gl, gr) = quoted_couplings(&real).unwrap();
        assert!((gl + gr.conj()).norm() < 1e-15);
        // implied couplings are the quoted ones times -i with sides exchanged
        assert!((params.gamma_r + I * gl).norm() < 1e-15);
        assert!((params.gamma_l + I * gr).norm() < 1e-15);

        let lossy = square_wave(0.3, c(0.3, 0.2));
        let params = effective_model_params(&lossy, 5, 2).unwrap();
        assert!(params.is_non_hermitian());
        assert!((params.gamma_l.norm() - params.gamma_r.norm()).abs() > 1e-3);
    }

    #[test]
    fn completed_square_wave_converges() {
        let b = basis(5, 2);
        let p = square_wave(TAU / 20.0, c(0.3, 0.2));
        let points =
            convergence_sweep(&p, &[40.0, 80.0], &b, EffectiveForm::Completed, StepControl::default()).unwrap();
        let ratio = convergence_ratios(&points)[0];
        assert!((2.0..=6.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn kick_operator_spectrum() {
        let b = basis(4, 1);
        let p = three_step(15.0, BoundaryCondition::periodic());
        let k = kick_operator(&p, &b).unwrap();
        assert!(k.hermiticity_defect() < 1e-15);
        let ev = spectral::eigenvalues(k.matrix().as_ref()).unwrap();
        let scale = -TAU / (9.0 * 15.0);
        let mut want: Vec<f64> = (0..4).map(|m| scale * 2.0 * (TAU * m as f64 / 4.0).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (e, w) in ev.iter().zip(&want) {
            assert!((e - re(*w)).norm() < 1e-14);
        }
        let mut flat = p.clone();
        if let Drive::ThreeStepHatanoNelson { delta1, .. } = &mut flat.drive {
            *delta1 = 0.0;
        }
        assert_eq!(linalg::max_norm(kick_operator(&flat, &b).unwrap().matrix().as_ref()), 0.0);
        assert!(kick_operator(&two_frequency(5.0), &b).is_err());
    }

    #[test]
    fn fast_layer_rules() {
        let mut p = two_frequency(2.0);
        let set_fast = |p: &mut FloquetProtocol, omega: f64| {
            if let Drive::TwoFrequencySinusoid { fast, .. } = &mut p.drive {
                *fast = Some(FastLayer { delta1: 1.0, mu0: 0.2, omega, loss_sign: LossSign::AsWritten });
            }
        };
        set_fast(&mut p, 15.0);
        assert!(p.validate().is_err());
        set_fast(&mut p, 21.0);
        assert!(p.validate().is_err());
        set_fast(&mut p, 20.0);
        p.validate().unwrap();
        let q = p.with_frequency(4.0);
        match q.drive {
            Drive::TwoFrequencySinusoid { fast: Some(f), omega, .. } => {
                assert_eq!(omega, 4.0);
                assert_eq!(f.omega, 40.0);
            }
            _ => unreachable!(),
        }
        let b = basis(3, 1);
        let prop = propagate_period(&p, &b, StepControl::default()).unwrap();
        assert_eq!(prop.quasienergies.len(), 3);
        assert!(kick_operator(&p, &b).is_ok());
    }

    #[test]
    fn fast_layer_under_slow_drive_converges() {
        let b = basis(4, 2);
        let mut p = two_frequency(4.0);
        if let Drive::TwoFrequencySinusoid { fast, .. } = &mut p.drive {
            *fast = Some(FastLayer { delta1: 1.0, mu0: 0.3, omega: 40.0, loss_sign: LossSign::AsWritten });
        }
        let points = convergence_sweep(&p, &[4.0, 8.0], &b, EffectiveForm::Completed, StepControl::default()).unwrap();
        let ratio = convergence_ratios(&points)[0];
        assert!((2.0..=6.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn convergence_csv() {
        let pts = [ConvergencePoint {
            frequency: 10.0,
            max_matched_distance: 0.5,
            mean_matched_distance: 0.25,
            step_count: 3,
        }];
        let mut out = Vec::new();
        write_convergence_csv(&pts, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "frequency,max_matched_distance,mean_matched_distance,step_count\n1.0000000000000000e1,5.0000000000000000e-1,2.5000000000000000e-1,3\n"
        );
    }

    fn hermitian_drive() -> impl Strategy<Value = Drive> {
        let amp = -1.0f64..1.0;
        prop_oneof![
            (amp.clone(), amp.clone(), amp.clone(), 3.0f64..12.0).prop_map(|(d, d1, u, w)| {
                Drive::ThreeStepHatanoNelson {
                    delta: d,
                    delta1: d1,
                    interaction: re(u),
                    mu0: 0.0,
                    omega: w,
                    loss_sign: LossSign::AsWritten,
                }
            }),
            (amp.clone(), amp.clone(), amp.clone(), amp.clone(), 3.0f64..12.0).prop_map(|(d, u, a, b, w)| {
                Drive::TwoFrequencySinusoid {
                    delta: d,
                    delta_t: 0.0,
                    interaction: re(u),
                    delta_r: c(a, b),
                    delta_l: c(a, -b),
                    omega: w,
                    fast: None,
                }
            }),
            (amp.clone(), amp.clone(), amp.clone(), amp.clone(), 0.2f64..1.5).prop_map(|(d, d1, d2, d3, t)| {
                Drive::SquareWaveGD { delta: d, delta1: d1, delta2: d2, delta3: re(d3), period: t }
            }),
        ]
    }

    fn any_drive() -> impl Strategy<Value = Drive> {
        let amp = -1.0f64..1.0;
        prop_oneof![
            (amp.clone(), amp.clone(), amp.clone(), 3.0f64..12.0).prop_map(|(d, d1, mu, w)| {
                Drive::ThreeStepHatanoNelson {
                    delta: d,
                    delta1: d1,
                    interaction: re(0.3),
                    mu0: mu,
                    omega: w,
                    loss_sign: LossSign::AsWritten,
                }
            }),
            (amp.clone(), amp.clone(), amp.clone(), amp.clone(), 3.0f64..12.0).prop_map(|(d, u, a, b, w)| {
                Drive::ModulatedInteraction {
                    delta: d,
                    interaction: c(0.1, u),
                    delta_r: c(a, b),
                    delta_l: c(b, a),
                    interaction_drive: re(0.2),
                    omega: w,
                }
            }),
            (amp.clone(), amp.clone(), amp.clone(), amp.clone(), 0.2f64..1.5).prop_map(|(d, d1, d2, d3, t)| {
                Drive::SquareWaveGD { delta: d, delta1: d1, delta2: d2, delta3: c(d3, 0.3), period: t }
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn two_periods_compose(drive in any_drive(), periodic in any::<bool>()) {
            let boundary = if periodic { BoundaryCondition::periodic() } else { BoundaryCondition::Open };
            let p = FloquetProtocol::new(drive, boundary);
            let b = basis(3, 2);
            let control = StepControl::default();
            let one = propagate_period(&p, &b, control).unwrap();
            let two = propagate_periods(&p, &b, 2, control).unwrap();
            let squared = &one.evolution * &one.evolution;
            let scale = linalg::max_norm(squared.as_ref()).max(1.0);
            prop_assert!(max_diff(&two.evolution, &squared) < 1e-9 * scale);
        }

        #[test]
        fn hermitian_drives_are_unitary(drive in hermitian_drive(), periodic in any::<bool>()) {
            let boundary = if periodic { BoundaryCondition::periodic() } else { BoundaryCondition::Open };
            let p = FloquetProtocol::new(drive, boundary);
            let b = basis(4, 2);
            let prop = propagate_period(&p, &b, StepControl::default()).unwrap();
            let u = &prop.evolution;
            let gram = &linalg::adjoint(u.as_ref()) * u;
            prop_assert!(max_diff(&gram, &linalg::identity(b.len())) < 1e-8);
            let det = linalg::log_det(u.as_ref());
            prop_assert!(det.log_abs.abs() < 1e-8);
            for q in &prop.quasienergies {
                prop_assert!(q.im.abs() < 1e-8);
                prop_assert!(q.re.abs() <= PI / prop.period + 1e-12);
            }
        }

        #[test]
        fn kick_is_hermitian(delta1 in -3.0f64..3.0, omega in 1.0f64..50.0, sites in 3usize..6, particles in 1usize..3) {
            let p = FloquetProtocol::new(
                Drive::ThreeStepHatanoNelson { delta: 1.0, delta1, interaction: ZERO, mu0: 0.1, omega, loss_sign: LossSign::AsWritten },
                BoundaryCondition::periodic(),
            );
            let k = kick_operator(&p, &basis(sites, particles)).unwrap();
            prop_assert!(k.hermiticity_defect() < 1e-15);
        }

        #[test]
        fn folding_stays_in_zone(x in -1e3f64..1e3, y in -5.0f64..5.0, period in 0.01f64..10.0) {
            let f = fold_into_zone(c(x, y), period);
            prop_assert!(f.re > -PI / period - 1e-12 && f.re <= PI / period + 1e-12);
            let turns = (x - f.re) * period / TAU;
            prop_assert!((turns - turns.round()).abs() < 1e-6);
            prop_assert_eq!(f.im, y);
        }
    }
}
