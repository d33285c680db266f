use std::f64::consts::PI;

use passreg::controllers::{build_diagonal, build_fin_dim, scalar_gain};
use passreg::examples::{check_hypotheses, wave_boundary, ExampleSetup, WaveBoundaryParams};
use passreg::numerics::{c64, CMatrix};
use passreg::pde_models::PdeModel;
use passreg::stability::{
    check_exponential_hypotheses, check_feedback_decay, check_nonuniform_hypotheses, check_strong_hypotheses,
    empirical_decay, feedback_generator, fit_growth_exponent, m_log, m_log_inverse, predict_decay, scan_matrix,
    DecayInput, DecayKind, FrequencySet, Law, MTable, ResolventScan, ScanOptions,
};
use proptest::prelude::*;

fn synthetic(f: impl Fn(f64) -> f64) -> ResolventScan {
    // Oscillating factor creates local maxima on the envelope f.
    let grid: Vec<f64> = (0..4000).map(|i| 1.0 + i as f64 * 0.05).collect();
    let norms = grid.iter().map(|&w| f(w) * (0.75 + 0.25 * (2.0 * w).cos())).collect();
    ResolventScan { flags: vec![false; grid.len()], grid, norms }
}

#[test]
fn growth_exponent_of_exact_power_laws() {
    for alpha in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let fit = fit_growth_exponent(&synthetic(|w| w.powf(alpha)), (1.0, 200.0)).unwrap();
        assert!((fit.alpha - alpha).abs() <= 0.01 * alpha, "alpha {alpha}: {}", fit.alpha);
    }
    let flat = fit_growth_exponent(&synthetic(|_| 3.0), (1.0, 200.0)).unwrap();
    assert!(flat.alpha.abs() < 0.01);
}

#[test]
fn decoupled_scalar_scan_matches_closed_form() {
    let a = CMatrix::from_element(1, 1, c64(-1.0, 0.0));
    let scan = scan_matrix(&a, &ScanOptions::new(0.1, 50.0, 200)).unwrap();
    for (w, r) in scan.grid.iter().zip(&scan.norms) {
        assert!((r - 1.0 / (w * w + 1.0).sqrt()).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn m_log_inverse_is_left_inverse(incs in proptest::collection::vec(0.0f64..3.0, 3..30), m0 in 0.1f64..5.0, u in 0.0f64..1.0) {
        let omega: Vec<f64> = (0..incs.len()).map(|i| 0.5 + i as f64).collect();
        let m: Vec<f64> = incs.iter().scan(m0, |acc, d| { *acc += d; Some(*acc) }).collect();
        let table = MTable::new(omega.clone(), m).unwrap();
        let w = omega[0] + u * (omega[omega.len() - 1] - omega[0]);
        let back = m_log_inverse(&table, m_log(&table, w).unwrap()).unwrap();
        prop_assert!((back - w).abs() <= 1e-8 * w);
    }
}

#[test]
fn diagonal_feedback_decay_is_dominated_by_polynomial_bound() {
    // A_c - B_c C_c with C_c^k = (1 + |k|)^{-1/2-ε}: resolvent grows like ω^{1+2ε}.
    let eps = 0.25;
    let ctrl = build_diagonal(40, 1.0, 1, 1.0, eps, scalar_gain(0.0, 1), scalar_gain(0.0, 1)).unwrap();
    let opts = ScanOptions::new(0.5, 40.5, 400).refine(&ctrl.frequencies, 0.05);
    let report = check_feedback_decay(&ctrl, &opts).unwrap();
    assert!(report.abscissa < 0.0);
    let fit = report.fit.expect("growth fit");
    // M(ω) = M_0 g(ω) is an upper envelope; the measured growth may be slower.
    assert!(fit.alpha > 0.5 && fit.alpha <= 1.0 + 2.0 * eps + 0.1, "alpha {}", fit.alpha);

    let a = feedback_generator(&ctrl).unwrap();
    let emp = empirical_decay(&a, 7, 400.0, 0.02).unwrap();
    let alpha = 1.0 + 2.0 * eps;
    let model = predict_decay(DecayInput::Alpha(alpha));
    let t0 = 20.0;
    let t_mid = 200.0;
    // Constant fitted on [t0, t_mid], then held on the rest of the horizon.
    let m_e = emp
        .times
        .iter()
        .zip(&emp.ratios)
        .filter(|(t, _)| **t >= t0 && **t <= t_mid)
        .map(|(t, r)| r / model.bound(*t))
        .fold(0.0, f64::max);
    for (t, r) in emp.times.iter().zip(&emp.ratios).filter(|(t, _)| **t > t_mid) {
        assert!(*r <= m_e * model.bound(*t) * (1.0 + 1e-9), "t {t}: {r}");
    }
}

#[test]
fn scalar_exponential_decay_rate() {
    let a = CMatrix::from_element(1, 1, c64(-1.0, 0.0));
    let emp = empirical_decay(&a, 1, 10.0, 1e-3).unwrap();
    match emp.model.kind {
        DecayKind::Exponential { rate } => assert!((rate - 1.0).abs() < 0.05),
        k => panic!("unexpected {k:?}"),
    }
}

#[test]
fn example_hypotheses_hold() {
    for model in PdeModel::ALL {
        let setup = ExampleSetup::by_model(model).unwrap();
        let report = check_hypotheses(&setup).unwrap();
        assert!(report.all_pass(), "{model}: {report:?}");
    }
}

#[test]
fn strong_hypotheses_fail_without_plant_damping() {
    // No pre-stabilization: the lossless FEM plant has re P(iω) = 0.
    let setup = ExampleSetup::by_model(PdeModel::WaveDistributed).unwrap();
    let grid: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
    let report = check_strong_hypotheses(&setup.plant, &setup.controller, &grid).unwrap();
    assert!(!report.all_pass());
    assert!(report.cond1.iter().any(|c| !c.pass));
}

#[test]
fn exponential_hypotheses_fail_without_controller_feedthrough() {
    let setup = wave_boundary(WaveBoundaryParams { n: 40, d_c1: 0.0, ..Default::default() }).unwrap();
    let plant_s = setup.stabilized_plant().unwrap();
    let omega = FrequencySet::Neighborhoods { centers: setup.controller.frequencies.clone(), radius: PI / 4.0 };
    let grid: Vec<f64> = (0..801).map(|i| -70.0 + 0.175 * i as f64).collect();
    let report = check_exponential_hypotheses(&plant_s, &setup.controller, &omega, 0.45, 0.5, 2.0, &grid).unwrap();
    assert!(!report.cond2_failures.is_empty());
    assert!(!report.all_pass());
}

#[test]
fn exponential_hypotheses_fail_when_spectrum_outside_omega() {
    let setup = wave_boundary(WaveBoundaryParams { n: 40, ..Default::default() }).unwrap();
    let plant_s = setup.stabilized_plant().unwrap();
    let omega = FrequencySet::Neighborhoods { centers: vec![0.0], radius: 1.0 };
    let report = check_exponential_hypotheses(&plant_s, &setup.controller, &omega, 0.1, 0.9, 0.5, &[0.0, 1.0]).unwrap();
    assert!(!report.axis_spectrum_in_omega);
}

#[test]
fn nonuniform_hypotheses_fail_with_tight_gain_law() {
    let setup = ExampleSetup::by_model(PdeModel::Heat2D).unwrap();
    let plant_s = setup.stabilized_plant().unwrap();
    let mut laws = setup.laws.clone().unwrap();
    laws.g = Law::Const(1e-4);
    let report = check_nonuniform_hypotheses(&plant_s, &setup.controller, 1.0, &laws).unwrap();
    assert!(report.pinv_checks.iter().any(|c| !c.pass));
    assert!(!report.all_pass());

    let mut clustered = setup.laws.clone().unwrap();
    clustered.h = None;
    let report = check_nonuniform_hypotheses(&plant_s, &setup.controller, 2.0, &clustered).unwrap();
    assert!(report.h_required);
}

#[test]
fn exponential_prediction_for_bounded_scan() {
    let ctrl = build_fin_dim(&[1.0], 1, &[scalar_gain(1.0, 1)], scalar_gain(0.0, 1), scalar_gain(0.0, 1)).unwrap();
    let a = feedback_generator(&ctrl).unwrap();
    let scan = scan_matrix(&a, &ScanOptions::new(0.1, 100.0, 400)).unwrap();
    let model = predict_decay(DecayInput::Scan { scan: &scan, abscissa: -0.5 });
    assert!(model.is_exponential());
}
