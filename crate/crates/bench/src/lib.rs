//! Fixtures shared by the benchmarks.

use nhgauge::{BoundaryCondition, Drive, FloquetProtocol, ModelParams};

/// Two bosons with one-sided gauge coupling on a ring.
pub fn ring(sites: usize) -> ModelParams {
    ModelParams::new(1.0, 1.5, 0.0, sites, 2, BoundaryCondition::periodic())
}

pub fn open_chain(sites: usize) -> ModelParams {
    ModelParams::new(1.0, 1.5, 0.0, sites, 2, BoundaryCondition::Open)
}

pub fn three_step(omega: f64) -> FloquetProtocol {
    FloquetProtocol::new(
        Drive::ThreeStepHatanoNelson {
            delta: 1.0,
            delta1: 1.0,
            interaction: nhgauge::Complex64::new(0.2, 0.0),
            mu0: 0.3,
            omega,
            loss_sign: Default::default(),
        },
        BoundaryCondition::Open,
    )
}
