//! Eigenstate diagnostics: clustering weight, density-density correlator,
//! density profiles and skin-effect summaries.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, OccupationState};
use crate::model::BoundaryCondition;
use crate::spectral::ComplexSpectrum;

/// Eigenstates with at least this clustering weight count as bound.
pub const CLUSTER_THRESHOLD: f64 = 0.5;

/// Smallest admissible `|<L|R>|` for unit-norm left and right vectors.
pub const MIN_BIORTHOGONAL_OVERLAP: f64 = 1e-10;

/// Occupied sites form one contiguous run (wrapping around on a ring).
pub fn is_clustered(state: &OccupationState, boundary: BoundaryCondition) -> bool {
    let l = state.sites();
    let occupied: Vec<usize> = state.occupied_sites().collect();
    if occupied.len() <= 1 || occupied.len() == l {
        return true;
    }
    // count occupied sites whose right neighbour is empty
    let ends = occupied
        .iter()
        .filter(|&&j| {
            if j + 1 < l {
                state.occupation(j + 1) == 0
            } else {
                !boundary.is_periodic() || state.occupation(0) == 0
            }
        })
        .count();
    ends == 1
}

fn norm_sqr(state: &[Complex64]) -> f64 {
    state.iter().map(|z| z.norm_sqr()).sum()
}

fn check_len(state: &[Complex64], basis: &FockBasis) -> Result<()> {
    if state.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), found: state.len() });
    }
    Ok(())
}

/// Weight of `state` on configurations whose particles sit on one site or a
/// contiguous run of neighbouring sites.
pub fn cluster_weight(state: &[Complex64], basis: &FockBasis, boundary: BoundaryCondition) -> Result<f64> {
    check_len(state, basis)?;
    let total = norm_sqr(state);
    let inside: f64 =
        basis.iter().zip(state).filter(|(s, _)| is_clustered(s, boundary)).map(|(_, c)| c.norm_sqr()).sum();
    Ok((inside / total).clamp(0.0, 1.0))
}

/// `<a_j† a_k† a_j a_k>` for every `j`, normalized by `<psi|psi>`.
pub fn four_point_correlator(state: &[Complex64], basis: &FockBasis, k: usize) -> Result<Vec<f64>> {
    check_len(state, basis)?;
    if basis.particles() < 2 {
        return Err(Error::invalid("the density-density correlator needs at least two particles"));
    }
    if k >= basis.sites() {
        return Err(Error::invalid(format!("site {k} outside a chain of {} sites", basis.sites())));
    }
    let total = norm_sqr(state);
    let mut out = vec![0.0; basis.sites()];
    for (s, c) in basis.iter().zip(state) {
        let w = c.norm_sqr() / total;
        let nk = s.occupation(k) as f64;
        for (j, o) in out.iter_mut().enumerate() {
            let nj = s.occupation(j) as f64;
            *o += w * if j == k { nk * (nk - 1.0) } else { nj * nk };
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    /// `<n_j>` (real part in biorthogonal mode).
    pub values: Vec<f64>,
    /// Imaginary part of the biorthogonal expectation; zero in right mode.
    pub imaginary: Vec<f64>,
}

impl DensityProfile {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn center_of_mass(&self) -> f64 {
        let total = self.total();
        self.values.iter().enumerate().map(|(j, n)| j as f64 * n).sum::<f64>() / total
    }

    /// `(sum_j n_j)^2 / sum_j n_j^2`, between 1 and the number of sites.
    pub fn participation_ratio(&self) -> f64 {
        let total = self.total();
        total * total / self.values.iter().map(|n| n * n).sum::<f64>()
    }

    /// Share of the density on the first `quarter` sites.
    pub fn left_weight(&self, quarter: usize) -> f64 {
        self.values[..quarter].iter().sum::<f64>() / self.total()
    }

    pub fn right_weight(&self, quarter: usize) -> f64 {
        self.values[self.values.len() - quarter..].iter().sum::<f64>() / self.total()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum DensityMode<'a> {
    /// `<R|n_j|R> / <R|R>`.
    Right,
    /// `<L|n_j|R> / <L|R>` with the matching left eigenvector.
    Biorthogonal(&'a [Complex64]),
}

pub fn density_profile(state: &[Complex64], basis: &FockBasis, mode: DensityMode<'_>) -> Result<DensityProfile> {
    check_len(state, basis)?;
    let l = basis.sites();
    match mode {
        DensityMode::Right => {
            let total = norm_sqr(state);
            let mut values = vec![0.0; l];
            for (s, c) in basis.iter().zip(state) {
                let w = c.norm_sqr() / total;
                for (j, v) in values.iter_mut().enumerate() {
                    *v += w * s.occupation(j) as f64;
                }
            }
            Ok(DensityProfile { values, imaginary: vec![0.0; l] })
        }
        DensityMode::Biorthogonal(left) => {
            check_len(left, basis)?;
            let overlap: Complex64 = left.iter().zip(state).map(|(a, b)| a.conj() * b).sum();
            let scale = (norm_sqr(left) * norm_sqr(state)).sqrt();
            if overlap.norm() <= MIN_BIORTHOGONAL_OVERLAP * scale {
                return Err(Error::DegenerateBiorthogonalOverlap {
                    overlap: if scale > 0.0 { overlap.norm() / scale } else { 0.0 },
                });
            }
            let mut acc = vec![Complex64::new(0.0, 0.0); l];
            for ((s, a), b) in basis.iter().zip(left).zip(state) {
                let w = a.conj() * b / overlap;
                for (j, v) in acc.iter_mut().enumerate() {
                    *v += w * s.occupation(j) as f64;
                }
            }
            Ok(DensityProfile {
                values: acc.iter().map(|z| z.re).collect(),
                imaginary: acc.iter().map(|z| z.im).collect(),
            })
        }
    }
}

/// Per-eigenstate summary used for spectrum colourings and skin-effect plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenstateDiagnostics {
    pub energy: Complex64,
    pub cluster_weight: f64,
    pub density_profile: Vec<f64>,
    pub center_of_mass: f64,
    pub participation_ratio: f64,
    /// Correlator row for the requested reference site, when one was given.
    pub correlator_row: Option<Vec<f64>>,
}

/// Diagnostics for every eigenstate, in spectrum order.
pub fn diagnostics(
    spectrum: &ComplexSpectrum,
    basis: &FockBasis,
    boundary: BoundaryCondition,
    correlator_site: Option<usize>,
) -> Result<Vec<EigenstateDiagnostics>> {
    (0..spectrum.len())
        .into_par_iter()
        .map(|i| {
            let v = spectrum.eigenvector(i);
            let profile = density_profile(&v, basis, DensityMode::Right)?;
            let correlator_row = match correlator_site {
                Some(k) => Some(four_point_correlator(&v, basis, k)?),
                None => None,
            };
            Ok(EigenstateDiagnostics {
                energy: spectrum.eigenvalues()[i],
                cluster_weight: cluster_weight(&v, basis, boundary)?,
                center_of_mass: profile.center_of_mass(),
                participation_ratio: profile.participation_ratio(),
                density_profile: profile.values,
                correlator_row,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkinMetrics {
    /// Sites counted as one edge quarter.
    pub quarter: usize,
    pub center_of_mass: Vec<f64>,
    pub participation_ratio: Vec<f64>,
    /// Fraction of eigenstates with at least half their density on the first quarter.
    pub left_edge_fraction: f64,
    /// Same for the last quarter.
    pub right_edge_fraction: f64,
}

impl SkinMetrics {
    /// The larger of the two edge fractions.
    pub fn dominant_edge_fraction(&self) -> f64 {
        self.left_edge_fraction.max(self.right_edge_fraction)
    }
}

/// Edge accumulation of right eigenstates of an open chain.
pub fn skin_metrics(spectrum: &ComplexSpectrum, basis: &FockBasis) -> Result<SkinMetrics> {
    let quarter = (basis.sites() / 4).max(1);
    let profiles: Vec<DensityProfile> = (0..spectrum.len())
        .into_par_iter()
        .map(|i| density_profile(&spectrum.eigenvector(i), basis, DensityMode::Right))
        .collect::<Result<_>>()?;
    let n = profiles.len().max(1) as f64;
    let left = profiles.iter().filter(|p| p.left_weight(quarter) >= 0.5).count() as f64 / n;
    let right = profiles.iter().filter(|p| p.right_weight(quarter) >= 0.5).count() as f64 / n;
    Ok(SkinMetrics {
        quarter,
        center_of_mass: profiles.iter().map(|p| p.center_of_mass()).collect(),
        participation_ratio: profiles.iter().map(|p| p.participation_ratio()).collect(),
        left_edge_fraction: left,
        right_edge_fraction: right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, ModelParams};
    use crate::spectral::eigendecompose;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn basis_vector(basis: &FockBasis, state: &OccupationState) -> Vec<Complex64> {
        let mut v = vec![c(0.0, 0.0); basis.len()];
        v[basis.rank(state).unwrap()] = c(1.0, 0.0);
        v
    }

    #[test]
    fn cluster_weight_of_basis_states() {
        let basis = FockBasis::new(20, 2).unwrap();
        let pbc = BoundaryCondition::periodic();
        let on_site = basis_vector(&basis, &OccupationState::stacked(20, 5, 2));
        assert_eq!(cluster_weight(&on_site, &basis, pbc).unwrap(), 1.0);
        let apart = basis_vector(&basis, &OccupationState::from_positions(20, &[1, 10]));
        assert_eq!(cluster_weight(&apart, &basis, pbc).unwrap(), 0.0);
        let wrap = OccupationState::from_positions(20, &[0, 19]);
        assert!(is_clustered(&wrap, pbc));
        assert!(!is_clustered(&wrap, BoundaryCondition::Open));
    }

    #[test]
    fn clustering_of_three_particles() {
        let pbc = BoundaryCondition::periodic();
        assert!(is_clustered(&OccupationState::from_positions(6, &[1, 2, 3]), pbc));
        assert!(is_clustered(&OccupationState::from_positions(6, &[2, 2, 3]), pbc));
        assert!(is_clustered(&OccupationState::from_positions(6, &[5, 0, 0]), pbc));
        assert!(!is_clustered(&OccupationState::from_positions(6, &[1, 2, 4]), pbc));
    }

    #[test]
    fn correlator_of_basis_states() {
        let basis = FockBasis::new(20, 2).unwrap();
        let k = 10;
        let doublon = basis_vector(&basis, &OccupationState::stacked(20, k, 2));
        let row = four_point_correlator(&doublon, &basis, k).unwrap();
        assert_eq!(row[k], 2.0);
        assert_eq!(row.iter().sum::<f64>(), 2.0);

        let pair = basis_vector(&basis, &OccupationState::from_positions(20, &[k, k + 1]));
        let row = four_point_correlator(&pair, &basis, k).unwrap();
        assert_eq!(row[k + 1], 1.0);
        assert_eq!(row[k], 0.0);
        assert_eq!(row[0], 0.0);

        let single = FockBasis::new(5, 1).unwrap();
        assert!(four_point_correlator(&[c(1.0, 0.0); 5], &single, 0).is_err());
        assert!(four_point_correlator(&doublon, &basis, 20).is_err());
    }

    #[test]
    fn standing_waves_on_an_open_chain() {
        let l = 12;
        let p = ModelParams::new(1.0, 0.0, 0.0, l, 1, BoundaryCondition::Open);
        let h = build_hamiltonian(&p).unwrap();
        let s = eigendecompose(&h).unwrap();
        // E_m = -2 cos(pi m / (L + 1)) sorted ascending, so column m-1 is mode m
        for m in 1..=l {
            let prof = density_profile(&s.eigenvector(m - 1), h.basis(), DensityMode::Right).unwrap();
            for j in 0..l {
                let x = std::f64::consts::PI * m as f64 * (j + 1) as f64 / (l + 1) as f64;
                let want = 2.0 / (l + 1) as f64 * x.sin().powi(2);
                assert!((prof.values[j] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn plane_wave_superposition_is_flat() {
        let l = 8;
        let basis = FockBasis::new(l, 1).unwrap();
        // sum over k of e^{ikj} / L concentrates on j = 0; use random phases instead
        let v: Vec<Complex64> =
            (0..l).map(|j| Complex64::from_polar(1.0 / (l as f64).sqrt(), 0.7 * j as f64)).collect();
        let prof = density_profile(&v, &basis, DensityMode::Right).unwrap();
        for x in prof.values {
            assert!((x - 1.0 / l as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn biorthogonal_profile_sums_to_particle_number() {
        let p = ModelParams::new(1.0, 1.5, 0.0, 6, 2, BoundaryCondition::Open);
        let h = build_hamiltonian(&p).unwrap();
        let s = eigendecompose(&h).unwrap();
        let left = s.left_eigenvectors();
        for i in [0, 5, 20] {
            let l: Vec<Complex64> = (0..s.len()).map(|r| left[(r, i)]).collect();
            let prof = density_profile(&s.eigenvector(i), h.basis(), DensityMode::Biorthogonal(&l)).unwrap();
            assert!((prof.total() - 2.0).abs() < 1e-8);
            assert!(prof.imaginary.iter().sum::<f64>().abs() < 1e-8);
        }
        let orthogonal = vec![c(0.0, 0.0); h.dim()];
        let err = density_profile(&s.eigenvector(0), h.basis(), DensityMode::Biorthogonal(&orthogonal)).unwrap_err();
        assert!(matches!(err, Error::DegenerateBiorthogonalOverlap { .. }));
    }

    #[test]
    fn skin_effect_is_absent_for_free_bosons() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 12, 2, BoundaryCondition::Open);
        let h = build_hamiltonian(&p).unwrap();
        let m = skin_metrics(&eigendecompose(&h).unwrap(), h.basis()).unwrap();
        assert_eq!(m.quarter, 3);
        assert!(m.dominant_edge_fraction() < 0.1);
    }

    fn random_state(len: usize, seed: &[(f64, f64)]) -> Vec<Complex64> {
        (0..len)
            .map(|i| {
                let (a, b) = seed[i % seed.len()];
                c(a + 0.01 * i as f64, b)
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn profile_sums_and_bounds(
            sites in 2usize..=7, particles in 1usize..=3,
            seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
            k in 0usize..7, j in 0usize..7, periodic in any::<bool>(),
        ) {
            let basis = FockBasis::new(sites, particles).unwrap();
            let v = random_state(basis.len(), &seed);
            prop_assume!(norm_sqr(&v) > 1e-6);
            let prof = density_profile(&v, &basis, DensityMode::Right).unwrap();
            prop_assert!((prof.total() - particles as f64).abs() < 1e-10);
            let boundary = if periodic && sites >= 3 { BoundaryCondition::periodic() } else { BoundaryCondition::Open };
            let w = cluster_weight(&v, &basis, boundary).unwrap();
            prop_assert!((0.0..=1.0).contains(&w));
            if particles >= 2 {
                let (j, k) = (j % sites, k % sites);
                let row_k = four_point_correlator(&v, &basis, k).unwrap();
                let row_j = four_point_correlator(&v, &basis, j).unwrap();
                prop_assert!((row_k[j] - row_j[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn basis_states_are_fully_in_or_out(sites in 3usize..=7, particles in 1usize..=3, pick in any::<prop::sample::Index>()) {
            let basis = FockBasis::new(sites, particles).unwrap();
            let s = &basis.states()[pick.index(basis.len())];
            let w = cluster_weight(&basis_vector(&basis, s), &basis, BoundaryCondition::periodic()).unwrap();
            prop_assert!(w == 0.0 || w == 1.0);
        }

        #[test]
        fn eigenstate_profiles_sum_to_n(gl in -2.0f64..2.0, gr in -2.0f64..2.0, sites in 3usize..=6) {
            let p = ModelParams::new(1.0, gl, gr, sites, 2, BoundaryCondition::Open);
            let h = build_hamiltonian(&p).unwrap();
            let s = eigendecompose(&h).unwrap();
            for d in diagnostics(&s, h.basis(), p.boundary, Some(0)).unwrap() {
                prop_assert!((d.density_profile.iter().sum::<f64>() - 2.0).abs() < 1e-10);
                prop_assert!((0.0..=1.0).contains(&d.cluster_weight));
            }
        }
    }
}
