//! Dense many-body matrices for chains with density-dependent hopping.
//!
//! Every hop `a†_to a_from` carries a coefficient `bare + density * (n_to - n_from)`,
//! which covers the right and left terms of the gauge-field Hamiltonian, plain
//! asymmetric (Hatano-Nelson) hopping and the directional drive operators used
//! by the Floquet protocols. On-site potentials and the `U n (n - 1)`
//! interaction sit on the diagonal.

use std::io::{self, Write};
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, OccupationState};
use crate::linalg::{self, CMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Open,
    /// Closed ring with flux `phi` threaded through the bond `L-1 -> 0`.
    Periodic {
        flux: f64,
    },
}

impl BoundaryCondition {
    pub fn periodic() -> Self {
        BoundaryCondition::Periodic { flux: 0.0 }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, BoundaryCondition::Periodic { .. })
    }

    /// Raw flux; zero for open chains.
    pub fn flux(&self) -> f64 {
        match *self {
            BoundaryCondition::Open => 0.0,
            BoundaryCondition::Periodic { flux } => flux,
        }
    }

    /// Flux reduced to `[0, 2pi)` for reporting.
    pub fn reported_flux(&self) -> f64 {
        self.flux().rem_euclid(std::f64::consts::TAU)
    }

    pub fn with_flux(&self, flux: f64) -> Self {
        match self {
            BoundaryCondition::Open => BoundaryCondition::Open,
            BoundaryCondition::Periodic { .. } => BoundaryCondition::Periodic { flux },
        }
    }

    pub fn bond_count(&self, sites: usize) -> usize {
        match self {
            BoundaryCondition::Open => sites.saturating_sub(1),
            BoundaryCondition::Periodic { .. } => sites,
        }
    }

    /// Nearest-neighbour distance, wrapping around on a ring.
    pub fn site_distance(&self, sites: usize, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        if self.is_periodic() {
            d.min(sites - d)
        } else {
            d
        }
    }
}

/// Where the density difference in a hopping coefficient is evaluated.
///
/// `NormalOrdered` applies `a†_to [..] a_from` right to left and reads the
/// densities after the annihilation. `BeforeHop` and `AfterHop` read them on
/// the source and target states. The average of those two coincides with
/// `NormalOrdered` for every state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityOrdering {
    #[default]
    NormalOrdered,
    BeforeHop,
    AfterHop,
}

impl DensityOrdering {
    /// `n_to - n_from` for a hop out of a state with occupations `n_from`, `n_to`.
    fn difference(self, n_from: usize, n_to: usize) -> f64 {
        let (f, t) = (n_from as f64, n_to as f64);
        match self {
            DensityOrdering::NormalOrdered => t - (f - 1.0),
            DensityOrdering::BeforeHop => t - f,
            DensityOrdering::AfterHop => (t + 1.0) - (f - 1.0),
        }
    }
}

/// Parameters of the density-dependent gauge-field chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub t: f64,
    pub gamma_l: Complex64,
    pub gamma_r: Complex64,
    /// On-site interaction `U n_j (n_j - 1)`; complex for two-body loss.
    #[serde(default)]
    pub interaction: Complex64,
    pub sites: usize,
    pub particles: usize,
    pub boundary: BoundaryCondition,
    #[serde(default)]
    pub ordering: DensityOrdering,
}

impl ModelParams {
    /// Real gauge couplings, no interaction, normal ordering.
    pub fn new(
        t: f64,
        gamma_l: f64,
        gamma_r: f64,
        sites: usize,
        particles: usize,
        boundary: BoundaryCondition,
    ) -> Self {
        Self {
            t,
            gamma_l: Complex64::new(gamma_l, 0.0),
            gamma_r: Complex64::new(gamma_r, 0.0),
            interaction: ZERO,
            sites,
            particles,
            boundary,
            ordering: DensityOrdering::NormalOrdered,
        }
    }

    pub fn with_boundary(&self, boundary: BoundaryCondition) -> Self {
        Self { boundary, ..self.clone() }
    }

    pub fn with_flux(&self, flux: f64) -> Self {
        self.with_boundary(self.boundary.with_flux(flux))
    }

    pub fn with_particles(&self, particles: usize) -> Self {
        Self { particles, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::invalid("a chain needs at least one site"));
        }
        if self.boundary.is_periodic() && self.sites < 3 {
            return Err(Error::invalid(format!("periodic chains need at least 3 sites, got {}", self.sites)));
        }
        let finite = self.t.is_finite()
            && [self.gamma_l, self.gamma_r, self.interaction].iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.boundary.flux().is_finite();
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    /// True unless `gamma_r = conj(gamma_l)` and the interaction is real.
    pub fn is_non_hermitian(&self) -> bool {
        self.gamma_r != self.gamma_l.conj() || self.interaction.im != 0.0
    }

    pub fn operator(&self) -> LatticeOperator {
        LatticeOperator::new(self.sites, self.boundary)
            .with_uniform_hopping(
                BondCoupling::new(Complex64::new(-self.t, 0.0), I * self.gamma_r),
                BondCoupling::new(Complex64::new(-self.t, 0.0), I * self.gamma_l),
            )
            .with_interaction(self.interaction)
            .with_ordering(self.ordering)
    }

    pub fn basis(&self) -> Result<FockBasis> {
        FockBasis::new(self.sites, self.particles)
    }
}

/// Coefficient `bare + density * (n_to - n_from)` of one directed hop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BondCoupling {
    pub bare: Complex64,
    pub density: Complex64,
}

impl BondCoupling {
    pub fn new(bare: Complex64, density: Complex64) -> Self {
        Self { bare, density }
    }

    pub fn bare(bare: Complex64) -> Self {
        Self { bare, density: ZERO }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { bare: self.bare * factor, density: self.density * factor }
    }

    fn is_zero(&self) -> bool {
        self.bare == ZERO && self.density == ZERO
    }
}

/// Second-quantized nearest-neighbour operator on a chain.
///
/// Bond `b` joins sites `b` and `b + 1` (mod `L` on a ring). `right[b]` is the
/// coupling of `a†_{b+1} a_b`, `left[b]` that of `a†_b a_{b+1}`. On a ring the
/// last bond picks up `e^{-i phi}` (right) and `e^{+i phi}` (left).
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeOperator {
    sites: usize,
    boundary: BoundaryCondition,
    ordering: DensityOrdering,
    right: Vec<BondCoupling>,
    left: Vec<BondCoupling>,
    onsite: Vec<Complex64>,
    interaction: Complex64,
}

impl LatticeOperator {
    /// The zero operator.
    pub fn new(sites: usize, boundary: BoundaryCondition) -> Self {
        let bonds = boundary.bond_count(sites);
        Self {
            sites,
            boundary,
            ordering: DensityOrdering::NormalOrdered,
            right: vec![BondCoupling::default(); bonds],
            left: vec![BondCoupling::default(); bonds],
            onsite: vec![ZERO; sites],
            interaction: ZERO,
        }
    }

    /// Symmetric hopping `amplitude * sum_j (a†_{j+1} a_j + a†_j a_{j+1})`.
    pub fn kinetic(sites: usize, boundary: BoundaryCondition, amplitude: Complex64) -> Self {
        let c = BondCoupling::bare(amplitude);
        Self::new(sites, boundary).with_uniform_hopping(c, c)
    }

    /// `sum_j n_j (n_j - 1)`.
    pub fn pair_interaction(sites: usize, boundary: BoundaryCondition) -> Self {
        Self::new(sites, boundary).with_interaction(Complex64::new(1.0, 0.0))
    }

    /// `sum_j values[j] n_j`.
    pub fn potential(sites: usize, boundary: BoundaryCondition, values: Vec<Complex64>) -> Self {
        Self::new(sites, boundary).with_onsite(values)
    }

    pub fn with_uniform_hopping(mut self, right: BondCoupling, left: BondCoupling) -> Self {
        self.right.iter_mut().for_each(|c| *c = right);
        self.left.iter_mut().for_each(|c| *c = left);
        self
    }

    pub fn with_bond(mut self, bond: usize, right: BondCoupling, left: BondCoupling) -> Self {
        self.right[bond] = right;
        self.left[bond] = left;
        self
    }

    pub fn with_onsite(mut self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), self.sites, "one potential value per site");
        self.onsite = values;
        self
    }

    pub fn with_interaction(mut self, u: Complex64) -> Self {
        self.interaction = u;
        self
    }

    pub fn with_ordering(mut self, ordering: DensityOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn right(&self) -> &[BondCoupling] {
        &self.right
    }

    pub fn left(&self) -> &[BondCoupling] {
        &self.left
    }

    pub fn onsite(&self) -> &[Complex64] {
        &self.onsite
    }

    pub fn interaction(&self) -> Complex64 {
        self.interaction
    }

    /// Linear combination `a * self + b * other` (same chain, same ordering).
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Self {
        assert_eq!(self.sites, other.sites);
        assert_eq!(self.boundary, other.boundary);
        let mix = |x: &BondCoupling, y: &BondCoupling| BondCoupling {
            bare: a * x.bare + b * y.bare,
            density: a * x.density + b * y.density,
        };
        Self {
            sites: self.sites,
            boundary: self.boundary,
            ordering: self.ordering,
            right: self.right.iter().zip(&other.right).map(|(x, y)| mix(x, y)).collect(),
            left: self.left.iter().zip(&other.left).map(|(x, y)| mix(x, y)).collect(),
            onsite: self.onsite.iter().zip(&other.onsite).map(|(x, y)| a * x + b * y).collect(),
            interaction: a * self.interaction + b * other.interaction,
        }
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if basis.sites() != self.sites {
            return Err(Error::DimensionMismatch { expected: self.sites, found: basis.sites() });
        }
        if self.boundary.is_periodic() && self.sites < 3 {
            return Err(Error::invalid("periodic chains need at least 3 sites"));
        }
        Ok(())
    }

    /// Dense matrix in `basis`, with the boundary flux applied.
    pub fn assemble(&self, basis: Arc<FockBasis>) -> Result<ManyBodyMatrix> {
        let family = self.flux_family(basis)?;
        let flux = self.boundary.flux();
        Ok(ManyBodyMatrix { matrix: family.matrix_at(flux), basis: family.basis })
    }

    /// Split into the flux-independent part and the two boundary hops.
    pub fn flux_family(&self, basis: Arc<FockBasis>) -> Result<FluxFamily> {
        self.check_basis(&basis)?;
        let dim = basis.len();
        let mut bulk: CMatrix = Mat::zeros(dim, dim);
        let mut forward: CMatrix = Mat::zeros(dim, dim);
        let mut backward: CMatrix = Mat::zeros(dim, dim);
        let closing = if self.boundary.is_periodic() { Some(self.sites - 1) } else { None };

        for (col, state) in basis.iter().enumerate() {
            let occ = state.occupations();
            let mut diag = ZERO;
            for (j, &n) in occ.iter().enumerate() {
                diag += self.onsite[j] * n as f64 + self.interaction * (n * n.saturating_sub(1)) as f64;
            }
            bulk[(col, col)] = diag;

            for bond in 0..self.right.len() {
                let (j, k) = (bond, (bond + 1) % self.sites);
                let on_boundary = closing == Some(bond);
                for (from, to, coupling, dest) in [(j, k, &self.right[bond], 0), (k, j, &self.left[bond], 1)] {
                    if coupling.is_zero() {
                        continue;
                    }
                    let Some((row, value)) = self.hop_element(&basis, state, from, to, coupling) else {
                        continue;
                    };
                    let target = match (on_boundary, dest) {
                        (false, _) => &mut bulk,
                        (true, 0) => &mut forward,
                        (true, _) => &mut backward,
                    };
                    target[(row, col)] += value;
                }
            }
        }
        Ok(FluxFamily { basis, bulk, forward, backward })
    }

    fn hop_element(
        &self,
        basis: &FockBasis,
        state: &OccupationState,
        from: usize,
        to: usize,
        coupling: &BondCoupling,
    ) -> Option<(usize, Complex64)> {
        let hop = state.hop(from, to)?;
        let diff = self.ordering.difference(state.occupation(from), state.occupation(to));
        let coefficient = coupling.bare + coupling.density * diff;
        let row = basis.rank(&hop.target).expect("hops stay inside the basis");
        Some((row, coefficient * hop.amplitude))
    }
}

/// `H(phi) = bulk + e^{-i phi} forward + e^{+i phi} backward`.
#[derive(Clone, Debug)]
pub struct FluxFamily {
    basis: Arc<FockBasis>,
    bulk: CMatrix,
    forward: CMatrix,
    backward: CMatrix,
}

impl FluxFamily {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `H(phi) - shift * I`.
    pub fn shifted_at(&self, flux: f64, shift: Complex64) -> CMatrix {
        let f = Complex64::from_polar(1.0, -flux);
        let b = f.conj();
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            let mut v = self.bulk[(i, j)] + f * self.forward[(i, j)] + b * self.backward[(i, j)];
            if i == j {
                v -= shift;
            }
            v
        })
    }

    pub fn matrix_at(&self, flux: f64) -> CMatrix {
        self.shifted_at(flux, ZERO)
    }

    pub fn at(&self, flux: f64) -> ManyBodyMatrix {
        ManyBodyMatrix { basis: self.basis.clone(), matrix: self.matrix_at(flux) }
    }
}

/// A dense operator together with the basis that labels its rows and columns.
#[derive(Clone, Debug)]
pub struct ManyBodyMatrix {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
}

impl ManyBodyMatrix {
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn element(&self, row: &OccupationState, col: &OccupationState) -> Option<Complex64> {
        Some(self.matrix[(self.basis.rank(row)?, self.basis.rank(col)?)])
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix.as_ref())
    }

    /// Nonzero entries as `(row, col, value)`, column-major.
    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = self.matrix[(i, j)];
                if v != ZERO {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Text dump with header `row,col,re,im`, one nonzero entry per line.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i},{j},{:.16e},{:.16e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Assemble the chain Hamiltonian for `params`.
pub fn build_hamiltonian(params: &ModelParams) -> Result<ManyBodyMatrix> {
    params.validate()?;
    params.operator().assemble(Arc::new(params.basis()?))
}

/// `max |H - H†|` over all entries.
pub fn hermiticity_defect(h: &ManyBodyMatrix) -> f64 {
    h.hermiticity_defect()
}
