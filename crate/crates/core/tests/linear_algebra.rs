mod common;

use common::{random_matrix, random_passive, random_psd};
use passreg::lti::StateSpaceSystem;
use passreg::numerics::{c64, identity, inverse, min_singular_value, solve_linear, spectrum, CMatrix};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn solve_reproduces_identity(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, n) + identity(n) * c64(3.0, 0.0);
        let x = solve_linear(&a, &identity(n)).unwrap();
        let err = (&x * &a - identity(n)).norm() / (n as f64).sqrt();
        prop_assert!(err <= 1e-10, "deviation {err:e}");
    }

    #[test]
    fn spectrum_is_similarity_invariant(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, n) * c64(2.0, 0.0);
        let p = identity(n) + random_matrix(&mut rng, n, n) * c64(0.1, 0.0);
        let b = &p * &a * inverse(&p).unwrap();
        let ea = spectrum(&a).unwrap();
        let eb = spectrum(&b).unwrap();
        // Greedy matching avoids depending on the order of nearly equal real parts.
        let mut rest = eb.clone();
        for z in &ea {
            let (k, d) = rest.iter().enumerate().map(|(k, w)| (k, (w - z).norm())).min_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
            prop_assert!(d <= 1e-8, "eigenvalue {z} unmatched ({d:e})");
            rest.swap_remove(k);
        }
        prop_assert_eq!(ea.len(), eb.len());
    }

    #[test]
    fn sigma_min_of_adjoint(seed in any::<u64>(), r in 1usize..8, c in 1usize..8) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, r, c);
        let s1 = min_singular_value(&a).unwrap();
        let s2 = min_singular_value(&a.adjoint()).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-10 * (1.0 + s1));
    }

    #[test]
    fn feedback_preserves_passivity(seed in any::<u64>(), n in 1usize..10, m in 1usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sys = random_passive(&mut rng, n, m);
        prop_assert!(sys.check_passive(1e-10).is_passive);
        let k = random_psd(&mut rng, m);
        let fb = sys.output_feedback(&k).unwrap();
        let rep = fb.check_passive(1e-9);
        prop_assert!(rep.is_passive, "max eig {:e}", rep.max_eig_dissipation_block);
    }

    #[test]
    fn feedback_transfer_formula(seed in any::<u64>(), n in 1usize..8, m in 1usize..3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let sys = random_passive(&mut rng, n, m);
        let k = random_psd(&mut rng, m);
        let fb = sys.output_feedback(&k).unwrap();
        for _ in 0..20 {
            let lambda = c64(rng.gen_range(0.05..4.0), rng.gen_range(-6.0..6.0));
            let p = sys.transfer(lambda).unwrap();
            let expected = &p * inverse(&(identity(m) + &k * &p)).unwrap();
            let got = fb.transfer(lambda).unwrap();
            prop_assert!((&got - &expected).norm() <= 1e-9 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn woodbury_matches_direct_inverse(seed in any::<u64>(), n in 1usize..10, m in 1usize..4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, n);
        let b = random_matrix(&mut rng, n, m);
        let c = random_matrix(&mut rng, m, n);
        let sys = StateSpaceSystem::new(a, b, c, random_matrix(&mut rng, m, m)).unwrap();
        let q = random_matrix(&mut rng, m, m) + identity(m) * c64(2.0, 0.0);
        let lambda = c64(rng.gen_range(-2.0..2.0), rng.gen_range(-4.0..4.0));
        let direct = inverse(&(identity(n) * lambda - (sys.a() - sys.b() * &q * sys.c())));
        if let (Ok(w), Ok(d)) = (sys.resolvent_woodbury(&q, lambda), direct) {
            let cond = d.norm() * (identity(n) * lambda - sys.a()).norm();
            prop_assume!(cond < 1e8);
            prop_assert!((&w - &d).norm() <= 1e-9 * d.norm() * (1.0 + cond.sqrt()));
        }
    }
}

#[test]
fn woodbury_scalar_example() {
    let s = |x: f64| CMatrix::from_element(1, 1, c64(x, 0.0));
    let sys = StateSpaceSystem::new(s(-1.0), s(1.0), s(1.0), s(0.0)).unwrap();
    let r = sys.resolvent_woodbury(&s(1.0), c64(0.0, 0.0)).unwrap();
    assert!((r[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-14);
}

#[test]
fn non_square_io_rejected() {
    let err = StateSpaceSystem::new(identity(2), identity(2), passreg::numerics::zeros(1, 2), identity(2));
    assert!(err.is_err());
}
