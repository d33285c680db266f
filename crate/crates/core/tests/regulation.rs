mod common;

use std::f64::consts::PI;

use common::{random_matrix, random_passive, value_at};
use passreg::closed_loop::{assemble, ClosedLoopSystem};
use passreg::controllers::{build_fin_dim, scalar_gain, SignalEntry, SignalSpec};
use passreg::examples::ExampleSetup;
use passreg::numerics::{c64, CVector};
use passreg::pde_models::PdeModel;
use passreg::regulation::{
    check_regulation_conditions, compute_pi_ext, compute_pi_ext_alt, error_formula_check, ext_coefficient,
    fit_error_rate, is_compatible, pi_ext_max_difference, regulator_states, simulate, simulate_with,
    sliding_error_integral, AltPath, ConditionTag, SimulateOptions, SummabilityVerdict,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn tone(omegas: &[f64], p: usize, dim_w: usize, rng: &mut StdRng) -> SignalSpec {
    let entries = omegas
        .iter()
        .map(|&w| SignalEntry {
            omega: w,
            y_ref: CVector::from_fn(p, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
            w_dist: CVector::from_fn(dim_w, |_, _| c64(rng.gen_range(-1.0..1.0), 0.0)),
        })
        .collect();
    SignalSpec::new(entries, false).unwrap()
}

/// Damped random plant with a disturbance channel and an internal-model controller.
fn random_loop(seed: u64, n: usize, m: usize) -> (ClosedLoopSystem, SignalSpec, StdRng) {
    let mut rng = StdRng::seed_from_u64(seed);
    let base = random_passive(&mut rng, n, m);
    let b_d = random_matrix(&mut rng, n, 1);
    let plant = passreg::lti::StateSpaceSystem::with_disturbance(
        base.a() - passreg::numerics::identity(n) * c64(0.2, 0.0),
        base.b().clone(),
        b_d,
        base.c().clone(),
        base.d().clone(),
    )
    .unwrap();
    let freqs = [-1.3, 0.0, 2.1];
    let gains = vec![scalar_gain(1.0, m); 3];
    let ctrl = build_fin_dim(&freqs, m, &gains, scalar_gain(0.5, m), scalar_gain(0.5, m)).unwrap();
    let sig = tone(&freqs, m, 1, &mut rng);
    (assemble(&plant, &ctrl).unwrap(), sig, rng)
}

#[test]
fn zero_signal_from_zero_state_stays_zero() {
    let ex = ExampleSetup::by_model(PdeModel::WaveDistributed).unwrap();
    let cl = ex.closed_loop().unwrap();
    let empty = SignalSpec::new(Vec::new(), true).unwrap();
    let traj = simulate(&cl, &empty, &CVector::zeros(cl.n()), 2.0, 1e-2).unwrap();
    assert!(traj.error_norms.iter().all(|&e| e == 0.0));
    assert!(traj.state_norms.iter().all(|&x| x == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn homogeneous_norm_never_increases(seed in any::<u64>(), n in 1usize..8, dt in 0.001f64..2.0) {
        let (cl, _, mut rng) = random_loop(seed, n, 1);
        let x0 = CVector::from_fn(cl.n(), |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let empty = SignalSpec::new(Vec::new(), true).unwrap();
        let traj = simulate(&cl, &empty, &x0, 40.0 * dt, dt).unwrap();
        for w in traj.state_norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn regulator_states_have_zero_error(seed in any::<u64>(), n in 1usize..8, m in 1usize..3) {
        let (cl, sig, _) = random_loop(seed, n, m);
        for (e, x) in sig.entries().iter().zip(regulator_states(&cl, &sig).unwrap()) {
            let w = ext_coefficient(e);
            let res = (&cl.a_e * &x + &cl.b_e * &w - &x * c64(0.0, e.omega)).norm();
            prop_assert!(res <= 1e-9 * (1.0 + x.norm()));
            let err = (&cl.c_e * &x + &cl.d_e * &w).norm();
            prop_assert!(err <= 1e-9 * (1.0 + x.norm()), "steady-state error {err:e}");
        }
    }

    #[test]
    fn pi_ext_paths_agree(seed in any::<u64>(), n in 1usize..8) {
        let (cl, sig, _) = random_loop(seed, n, 1);
        let a = compute_pi_ext(&cl.plant, &cl.controller, &sig).unwrap();
        let b = compute_pi_ext_alt(&cl.plant, &cl.controller, &sig).unwrap();
        if b.iter().any(|x| x.path != AltPath::Unavailable) {
            let d = pi_ext_max_difference(&a, &b).unwrap();
            prop_assert!(d <= 1e-8, "difference {d:e}");
        }
    }
}

#[test]
fn tracking_and_disturbance_rejection_on_damped_plant() {
    let (cl, sig, mut rng) = random_loop(11, 6, 1);
    let x0 = CVector::from_fn(cl.n(), |_, _| c64(rng.gen_range(-1.0..1.0), 0.0));
    let traj = simulate(&cl, &sig, &x0, 80.0, 1e-2).unwrap();
    let early = traj.error_norms[..200].iter().copied().fold(0.0, f64::max);
    let late = traj.error_norms[traj.error_norms.len() - 200..].iter().copied().fold(0.0, f64::max);
    assert!(late <= 1e-3 * early, "late {late:e}, early {early:e}");
}

#[test]
fn error_formula_second_order() {
    let (cl, sig, mut rng) = random_loop(5, 4, 1);
    let x0 = CVector::from_fn(cl.n(), |_, _| c64(rng.gen_range(-1.0..1.0), 0.0));
    let devs: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| error_formula_check(&cl, &sig, &x0, &[1.0, 2.0], dt, false).unwrap().max_deviation)
        .collect();
    for w in devs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{devs:?}");
    }
}

#[test]
fn incompatible_state_skips_formula_check_on_request() {
    let ex = ExampleSetup::by_model(PdeModel::WaveDistributed).unwrap();
    let cl = ex.closed_loop().unwrap();
    assert!(!is_compatible(&cl, &ex.signal, &ex.x_e0));
    let rep = error_formula_check(&cl, &ex.signal, &ex.x_e0, &[0.5], 1e-2, true).unwrap();
    assert!(rep.skipped && rep.note.is_some());
}

#[test]
fn real_and_complex_paths_agree() {
    let ex = ExampleSetup::by_model(PdeModel::WaveDistributed).unwrap();
    let cl = ex.closed_loop().unwrap();
    let run = |allow_real| {
        simulate_with(&cl, &ex.signal, &ex.x_e0, 2.0, 1e-3, SimulateOptions { store_states: true, allow_real }).unwrap()
    };
    let (r, c) = (run(true), run(false));
    assert!(r.real_arithmetic && !c.real_arithmetic);
    let dev = r.states.iter().zip(&c.states).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let scale = c.state_norms.iter().copied().fold(0.0, f64::max);
    assert!(dev <= 1e-10 * scale, "deviation {dev:e}");
}

#[test]
fn step_halving_keeps_sliding_integral() {
    for model in PdeModel::ALL {
        let ex = ExampleSetup::by_model(model).unwrap();
        let cl = ex.closed_loop().unwrap();
        let curve = |dt: f64| {
            let traj = simulate(&cl, &ex.signal, &ex.x_e0, ex.t_final, dt).unwrap();
            sliding_error_integral(&traj, 1.0).unwrap()
        };
        let (coarse, fine) = (curve(ex.dt), curve(ex.dt / 2.0));
        let peak = fine.iter().map(|p| p.1).fold(0.0, f64::max);
        let dev = coarse.iter().map(|&(t, v)| (v - value_at(&fine, t)).abs()).fold(0.0, f64::max);
        assert!(dev < 0.05 * peak, "{model}: deviation {dev} against peak {peak}");
    }
}

#[test]
fn heat_regulation_sequences_are_summable() {
    let ex = ExampleSetup::by_model(PdeModel::Heat2D).unwrap();
    let entries = compute_pi_ext(&ex.plant, &ex.controller, &ex.signal).unwrap();
    let rep = check_regulation_conditions(&entries, &ConditionTag::ALL);
    for tag in [ConditionTag::Pi1L1, ConditionTag::Pi2L2, ConditionTag::UL1] {
        assert_eq!(rep.verdict(tag), Some(SummabilityVerdict::Summable), "{tag:?}");
    }
}

#[test]
fn harmonic_tail_is_polynomial() {
    let table: Vec<(f64, f64)> = (1..=200).map(|i| (i as f64 * 0.1, 1.0 / (i as f64 * 0.1))).collect();
    let m = fit_error_rate(&table, 1.0).unwrap();
    match m.kind {
        passreg::stability::DecayKind::Polynomial { alpha } => assert!((alpha - 1.0).abs() < 1e-6),
        k => panic!("unexpected {k:?}"),
    }
}

#[test]
fn sine_reference_entries() {
    let sig = passreg::examples::wave_distributed_signal().unwrap();
    let (_, y) = passreg::regulation::eval_signal(&sig, 0.25);
    let expected = (PI * 0.25).sin() + 0.25 * (2.0 * PI * 0.25).cos();
    assert!((y[0].re - expected).abs() < 1e-14);
}
