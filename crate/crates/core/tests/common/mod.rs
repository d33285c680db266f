#![allow(dead_code)]

use passreg::lti::StateSpaceSystem;
use passreg::numerics::{c64, identity, CMatrix};
use rand::rngs::StdRng;
use rand::Rng;

pub fn random_matrix(rng: &mut StdRng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_psd(rng: &mut StdRng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    &g * g.adjoint()
}

pub fn random_skew(rng: &mut StdRng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    (&g - g.adjoint()) * c64(0.5, 0.0)
}

/// `A = K - F F* - δI`, `C = B*`, `D = G G* + K_D` with skew `K`, `K_D`.
pub fn random_passive(rng: &mut StdRng, n: usize, m: usize) -> StateSpaceSystem {
    let delta = rng.gen_range(0.0..0.5);
    let a = random_skew(rng, n) * c64(3.0, 0.0) - random_psd(rng, n) * c64(0.3, 0.0) - identity(n) * c64(delta, 0.0);
    let b = random_matrix(rng, n, m);
    let c = b.adjoint();
    let d = random_psd(rng, m) * c64(0.5, 0.0) + random_skew(rng, m);
    StateSpaceSystem::new(a, b, c, d).expect("consistent dimensions")
}

/// Value of a time-sorted sampled curve at the sample nearest to `t`.
pub fn value_at(curve: &[(f64, f64)], t: f64) -> f64 {
    let i = curve.partition_point(|p| p.0 < t);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| curve.get(j))
        .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
        .map(|p| p.1)
        .unwrap_or(f64::NAN)
}

pub fn window_max(curve: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    curve.iter().filter(|p| p.0 >= lo && p.0 <= hi).map(|p| p.1).fold(0.0, f64::max)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
