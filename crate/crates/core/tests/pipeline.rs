use std::sync::Arc;

use nhgauge::floquet::{effective_model_params, quoted_couplings};
use nhgauge::spectral::{self, DEFAULT_COMPLEX_THRESHOLD};
use nhgauge::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn small_ring_winds_twice_and_doublon_once() {
    let p = ModelParams::new(1.0, 1.5, 0.0, 8, 2, BoundaryCondition::periodic());
    let h = build_hamiltonian(&p).unwrap();
    let ev = spectral::eigenvalues(h.matrix().as_ref()).unwrap();
    let probe = suggest_gap_point(&ev, DEFAULT_COMPLEX_THRESHOLD).unwrap();
    let full = winding_number(&p, probe.delta, &WindingOptions::default()).unwrap();
    assert_eq!(full.winding, 2);
    let dp = derive_doublon_params(&p);
    let d = doublon_bloch_winding(&dp, probe.delta, &WindingOptions::default()).unwrap();
    assert_eq!(full.winding, 2 * d.winding);
}

#[test]
fn one_particle_stays_trivial() {
    let p = ModelParams::new(1.0, 1.5, 0.0, 8, 1, BoundaryCondition::periodic());
    let h = build_hamiltonian(&p).unwrap();
    assert!(h.hermiticity_defect() < 1e-14);
    let ev = spectral::eigenvalues(h.matrix().as_ref()).unwrap();
    assert!(matches!(suggest_gap_point(&ev, DEFAULT_COMPLEX_THRESHOLD), Err(Error::NoComplexSector { .. })));
    let w = winding_number(&p, c(0.0, 0.5), &WindingOptions::default()).unwrap();
    assert_eq!(w.winding, 0);
}

#[test]
fn bound_states_carry_the_complex_energies() {
    let p = ModelParams::new(1.0, 3.0, 0.0, 10, 2, BoundaryCondition::periodic());
    let h = build_hamiltonian(&p).unwrap();
    let s = eigendecompose(&h).unwrap();
    let rows = diagnostics(&s, h.basis(), p.boundary, None).unwrap();
    let strongly_complex: Vec<_> = rows.iter().filter(|d| d.energy.im.abs() > 0.5).collect();
    assert!(!strongly_complex.is_empty());
    assert!(strongly_complex.iter().all(|d| d.cluster_weight > 0.5));
}

#[test]
fn floquet_mapping_feeds_the_model() {
    let protocol = FloquetProtocol::new(
        Drive::ModulatedInteraction {
            delta: -1.0,
            interaction: c(0.0, -0.2),
            delta_r: c(0.0, 0.0),
            delta_l: c(0.0, 0.0),
            interaction_drive: c(15.0, 0.0),
            omega: 20.0,
        },
        BoundaryCondition::periodic(),
    );
    let params = effective_model_params(&protocol, 6, 2).unwrap();
    assert_eq!(quoted_couplings(&protocol).unwrap(), (params.gamma_l, params.gamma_r));
    // 2 Delta U_w / w on both sides: symmetric real couplings
    assert!((params.gamma_l - c(-1.5, 0.0)).norm() < 1e-14);
    let basis = Arc::new(params.basis().unwrap());
    let direct = effective_hamiltonian(&protocol, &basis, EffectiveForm::AsPublished).unwrap();
    let via_params = build_hamiltonian(&params).unwrap();
    let diff = nhgauge::linalg::max_norm((direct.matrix() - via_params.matrix()).as_ref());
    assert!(diff < 1e-14);
}

#[test]
fn hopping_modulation_breaks_the_coupling_symmetry() {
    // density drive from a loss gradient: opposite shifts on right and left hops
    let drive = |delta_t: f64| {
        FloquetProtocol::new(
            Drive::TwoFrequencySinusoid {
                delta: -1.0,
                delta_t,
                interaction: c(0.1, 0.0),
                delta_r: c(37.5, 0.0),
                delta_l: c(-37.5, 0.0),
                omega: 10.0,
                fast: None,
            },
            BoundaryCondition::periodic(),
        )
    };
    let p = effective_model_params(&drive(0.0), 8, 2).unwrap();
    assert!((p.gamma_l.norm() - p.gamma_r.norm()).abs() < 1e-14);
    assert!((p.gamma_l + p.gamma_r).norm() < 1e-14);

    let q = effective_model_params(&drive(37.5), 8, 2).unwrap();
    assert!(q.gamma_l.norm() < 1e-14);
    assert!((q.gamma_r.norm() - 1.5).abs() < 1e-12);
    let ev = nhgauge::spectral::eigenvalues(build_hamiltonian(&q).unwrap().matrix().as_ref()).unwrap();
    let probe = suggest_gap_point(&ev, DEFAULT_COMPLEX_THRESHOLD).unwrap();
    let w = winding_number(&q, probe.delta, &WindingOptions::default()).unwrap();
    assert_eq!(w.winding.abs(), 2);
}
