//! Exact diagonalization, point-gap topology and Floquet tools for bosonic
//! chains with density-dependent non-Hermitian hopping.

pub mod doublon;
pub mod error;
pub mod floquet;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod spectral;
pub mod topology;

pub use doublon::{derive_doublon_params, DoublonParams, OpenTermination};
pub use error::{Error, Result};
pub use floquet::{
    compare_quasienergies, effective_hamiltonian, effective_model_params, instantaneous_hamiltonian, kick_operator,
    propagate_period, Drive, EffectiveForm, FloquetProtocol, LossSign, Propagator, StepControl,
};
pub use fock::{FockBasis, Hop, OccupationState};
pub use linalg::CMatrix;
pub use model::{
    build_hamiltonian, hermiticity_defect, BondCoupling, BoundaryCondition, DensityOrdering, FluxFamily,
    LatticeOperator, ManyBodyMatrix, ModelParams,
};
pub use num_complex::Complex64;
pub use observables::{
    cluster_weight, density_profile, diagnostics, four_point_correlator, skin_metrics, DensityMode, DensityProfile,
    EigenstateDiagnostics, SkinMetrics,
};
pub use spectral::{eigendecompose, suggest_gap_point, ComplexSpectrum, PointGapProbe};
pub use topology::{doublon_bloch_winding, winding_number, WindingOptions, WindingResult};
