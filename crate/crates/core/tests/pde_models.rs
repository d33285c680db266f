use passreg::numerics::{c64, CMatrix, C64};
use passreg::pde_models::{
    build_heat_2d, build_wave_distributed, exact_transfer, heat_state, DiscretizationSpec, PdeModel,
};
use passreg::propagate::MidpointStepper;

const PROBES: [(f64, f64); 3] = [(1.0, 0.0), (1.0, 1.0), (0.0, 2.0)];

fn transfer_error(model: PdeModel, n: usize) -> f64 {
    let sys = DiscretizationSpec::new(model, n).unwrap().build().unwrap();
    PROBES
        .iter()
        .map(|&(re, im)| {
            let l = c64(re, im);
            (sys.transfer(l).unwrap()[(0, 0)] - exact_transfer(model, l).unwrap()).norm()
        })
        .fold(0.0, f64::max)
}

fn assert_converges(model: PdeModel, ns: &[usize], min_ratio: f64) {
    let errs: Vec<f64> = ns.iter().map(|&n| transfer_error(model, n)).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= min_ratio, "{model}: errors {errs:?}");
    }
}

#[test]
fn plants_are_passive() {
    for model in PdeModel::ALL {
        let sys = DiscretizationSpec::new(model, 16).unwrap().build().unwrap();
        let rep = sys.check_passive(1e-10);
        assert!(rep.is_passive, "{model}: {rep:?}");
    }
}

#[test]
fn wave_boundary_transfer_converges() {
    assert_converges(PdeModel::WaveBoundary, &[50, 100, 200], 1.8);
}

#[test]
fn heat_transfer_converges() {
    assert_converges(PdeModel::Heat2D, &[10, 20], 1.8);
}

#[test]
fn fem_transfer_converges_second_order() {
    assert_converges(PdeModel::WaveDistributed, &[12, 24, 48], 3.5);
}

#[test]
fn heat_generator_conserves_mass() {
    let sys = build_heat_2d(12).unwrap();
    let a = sys.a();
    for i in 0..a.nrows() {
        let s: C64 = a.row(i).iter().sum();
        assert!(s.norm() < 1e-9, "row {i}: {s}");
    }
    // Constant temperature is an equilibrium of the free dynamics.
    let x = heat_state(12, |_, _| 1.0);
    assert!((a * &x).norm() < 1e-9);
}

#[test]
fn fem_midpoint_conserves_energy() {
    let n = 32;
    let sys = build_wave_distributed(n).unwrap();
    let dt = 1e-2;
    let stepper = MidpointStepper::new(sys.a(), &CMatrix::zeros(2 * n, 0), dt, true).unwrap();
    let mut x = passreg::pde_models::wave_distributed_state(n, |s| (std::f64::consts::PI * s).sin(), |_| 0.0).unwrap();
    let e0 = x.norm();
    // Ten periods of the fundamental mode.
    for _ in 0..(20.0 / dt) as usize {
        x = stepper.step(&x, None);
    }
    assert!((x.norm() - e0).abs() <= 1e-8 * e0);
}

#[test]
fn discretization_spec_validation() {
    assert!(DiscretizationSpec::new(PdeModel::Heat2D, 7).is_err());
    let spec: DiscretizationSpec = serde_json::from_str(r#"{"model":"wave-boundary","N":20}"#).unwrap();
    assert_eq!(spec.model, PdeModel::WaveBoundary);
    assert_eq!(spec.build().unwrap().n(), 40);
    assert!("wave".parse::<PdeModel>().is_err());
    for m in PdeModel::ALL {
        assert_eq!(serde_json::to_value(m).unwrap(), m.name());
        assert_eq!(m.name().parse::<PdeModel>().unwrap(), m);
    }
}
