//! Passivity-preserving discretizations of the wave and heat example plants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::StateSpaceSystem;
use crate::numerics::{c64, from_real, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeModel {
    WaveBoundary,
    WaveDistributed,
    #[serde(rename = "heat-2d")]
    Heat2D,
}

impl PdeModel {
    pub const ALL: [PdeModel; 3] = [PdeModel::WaveBoundary, PdeModel::WaveDistributed, PdeModel::Heat2D];

    pub fn name(self) -> &'static str {
        match self {
            PdeModel::WaveBoundary => "wave-boundary",
            PdeModel::WaveDistributed => "wave-distributed",
            PdeModel::Heat2D => "heat-2d",
        }
    }
}

impl std::fmt::Display for PdeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PdeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wave-boundary" => Ok(PdeModel::WaveBoundary),
            "wave-distributed" => Ok(PdeModel::WaveDistributed),
            "heat-2d" => Ok(PdeModel::Heat2D),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub model: PdeModel,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl DiscretizationSpec {
    pub fn new(model: PdeModel, n: usize) -> Result<Self> {
        let spec = Self { model, n, params: Vec::new() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::PreconditionViolated(format!("resolution N = {} < 8", self.n)));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<StateSpaceSystem> {
        self.validate()?;
        match self.model {
            PdeModel::WaveBoundary => build_wave_boundary(self.n),
            PdeModel::WaveDistributed => build_wave_distributed(self.n),
            PdeModel::Heat2D => build_heat_2d(self.n),
        }
    }
}

fn require(n: usize) -> Result<()> {
    if n < 8 {
        return Err(Error::PreconditionViolated(format!("resolution N = {n} < 8")));
    }
    Ok(())
}

/// Boundary-controlled wave equation in Riemann-invariant form.
///
/// The outgoing and incoming characteristics on `(0,1)` are unfolded into one
/// loop of length 2 (reflection at `ξ = 1` is lossless), split into `2N` upwind
/// cells of width `h = 1/N`. The control enters the first cell, the observation
/// reads the last one and `D = 1`; the dissipation block is negative semidefinite
/// with equality along the loop closure.
pub fn build_wave_boundary(n: usize) -> Result<StateSpaceSystem> {
    require(n)?;
    let m = 2 * n;
    let h = 1.0 / n as f64;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] = -1.0 / h;
        a[(i, (i + m - 1) % m)] = 1.0 / h;
    }
    let g = (2.0 / h).sqrt();
    let mut b = DMatrix::<f64>::zeros(m, 1);
    b[(0, 0)] = g;
    let mut c = DMatrix::<f64>::zeros(1, m);
    c[(0, m - 1)] = g;
    let d = DMatrix::<f64>::from_element(1, 1, 1.0);
    Ok(StateSpaceSystem::new(from_real(&a), from_real(&b), from_real(&c), from_real(&d))?.labeled("wave-boundary"))
}

fn tridiag(n: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

/// Node coordinates of the interior FEM mesh with `n` unknowns.
pub fn fem_nodes(n: usize) -> Vec<f64> {
    let h = 1.0 / (n + 1) as f64;
    (1..=n).map(|i| i as f64 * h).collect()
}

struct FemFactors {
    l_mass: DMatrix<f64>,
    r_stiff: DMatrix<f64>,
}

fn fem_factors(n: usize) -> Result<FemFactors> {
    let h = 1.0 / (n + 1) as f64;
    let mass = tridiag(n, 4.0 * h / 6.0, h / 6.0);
    let stiff = tridiag(n, 2.0 / h, -1.0 / h);
    let l_mass = mass.cholesky().ok_or(Error::SingularMatrix)?.l();
    let r_stiff = stiff.cholesky().ok_or(Error::SingularMatrix)?.l();
    Ok(FemFactors { l_mass, r_stiff })
}

/// Distributed-control wave equation with Dirichlet ends, `b(ξ) = 2(1-ξ)`.
///
/// Piecewise-linear elements with `n` interior nodes. With `M = LLᵀ` and
/// `K = RRᵀ` the state `(Rᵀw, Lᵀw_t)` carries the energy norm, `A` is skew and
/// `C = Bᵀ`.
pub fn build_wave_distributed(n: usize) -> Result<StateSpaceSystem> {
    require(n)?;
    let h = 1.0 / (n + 1) as f64;
    let FemFactors { l_mass, r_stiff } = fem_factors(n)?;
    // ∫ b φ_i is exact for linear b.
    let f = DMatrix::from_iterator(n, 1, fem_nodes(n).into_iter().map(|x| 2.0 * h * (1.0 - x)));
    let l_inv_r = l_mass.solve_lower_triangular(&r_stiff).ok_or(Error::SingularMatrix)?;
    let l_inv_f = l_mass.solve_lower_triangular(&f).ok_or(Error::SingularMatrix)?;
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&l_inv_r.transpose());
    a.view_mut((n, 0), (n, n)).copy_from(&(-&l_inv_r));
    let mut b = DMatrix::<f64>::zeros(2 * n, 1);
    b.view_mut((n, 0), (n, 1)).copy_from(&l_inv_f);
    let c = b.transpose();
    let d = DMatrix::<f64>::zeros(1, 1);
    Ok(StateSpaceSystem::new(from_real(&a), from_real(&b), from_real(&c), from_real(&d))?.labeled("wave-distributed"))
}

/// State of the FEM wave model for nodal displacement `w0` and velocity `w1`.
pub fn wave_distributed_state(n: usize, w0: impl Fn(f64) -> f64, w1: impl Fn(f64) -> f64) -> Result<CVector> {
    let FemFactors { l_mass, r_stiff } = fem_factors(n)?;
    let nodes = fem_nodes(n);
    let d = nalgebra::DVector::from_iterator(n, nodes.iter().map(|&x| w0(x)));
    let v = nalgebra::DVector::from_iterator(n, nodes.iter().map(|&x| w1(x)));
    let q1 = r_stiff.transpose() * d;
    let q2 = l_mass.transpose() * v;
    Ok(CVector::from_iterator(2 * n, q1.iter().chain(q2.iter()).map(|&x| c64(x, 0.0))))
}

/// Nodal displacement of an FEM wave state.
pub fn wave_distributed_displacement(n: usize, x: &CVector) -> Result<Vec<f64>> {
    let FemFactors { r_stiff, .. } = fem_factors(n)?;
    let q1 = nalgebra::DVector::from_iterator(n, x.rows(0, n).iter().map(|z| z.re));
    let w = r_stiff.transpose().solve_upper_triangular(&q1).ok_or(Error::SingularMatrix)?;
    Ok(w.iter().copied().collect())
}

/// Cell centres of the `n x n` heat grid, ordered with `ξ_1` fastest.
pub fn heat_cells(n: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / n as f64;
    (0..n).flat_map(|j| (0..n).map(move |i| ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h))).collect()
}

/// Neumann boundary-controlled heat equation on the unit square.
///
/// Cell-centred finite volumes on an `n x n` grid. The state is `h` times the
/// cell temperature so the Euclidean norm matches the L² norm. Boundary fluxes
/// enter the cells adjacent to the actuated edge, and the output integrates the
/// same cells, so `C = Bᵀ` holds exactly. The disturbance enters through the top
/// edge over `ξ_1 ∈ [1/2, 1]`.
pub fn build_heat_2d(n: usize) -> Result<StateSpaceSystem> {
    require(n)?;
    let h = 1.0 / n as f64;
    let dim = n * n;
    let idx = |i: usize, j: usize| j * n + i;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let s = 1.0 / (h * h);
    for j in 0..n {
        for i in 0..n {
            let p = idx(i, j);
            let mut link = |q: usize| {
                a[(p, p)] -= s;
                a[(p, q)] += s;
            };
            if i > 0 {
                link(idx(i - 1, j));
            }
            if i + 1 < n {
                link(idx(i + 1, j));
            }
            if j > 0 {
                link(idx(i, j - 1));
            }
            if j + 1 < n {
                link(idx(i, j + 1));
            }
        }
    }
    let mut b = DMatrix::<f64>::zeros(dim, 1);
    for j in 0..n {
        b[(idx(0, j), 0)] = 1.0;
    }
    let mut b_d = DMatrix::<f64>::zeros(dim, 1);
    for i in 0..n {
        let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
        let overlap = (hi.min(1.0) - lo.max(0.5)).max(0.0);
        b_d[(idx(i, n - 1), 0)] = overlap / h;
    }
    let c = b.transpose();
    let d = DMatrix::<f64>::zeros(1, 1);
    Ok(StateSpaceSystem::with_disturbance(from_real(&a), from_real(&b), from_real(&b_d), from_real(&c), from_real(&d))?
        .labeled("heat-2d"))
}

/// Heat state sampled from a temperature field at the cell centres.
pub fn heat_state(n: usize, x0: impl Fn(f64, f64) -> f64) -> CVector {
    let h = 1.0 / n as f64;
    let cells = heat_cells(n);
    CVector::from_iterator(cells.len(), cells.iter().map(|&(a, b)| c64(h * x0(a, b), 0.0)))
}

/// Closed-form transfer function of the continuous model.
///
/// Wave with boundary control: `(1 + e^{-2λ}) / (1 - e^{-2λ})`. Heat:
/// `coth(√λ)/√λ` with the principal root. Distributed wave:
/// `(4/3 - 4 coth(λ)/λ + 4/λ²)/λ`.
pub fn exact_transfer(model: PdeModel, lambda: C64) -> Result<C64> {
    let one = c64(1.0, 0.0);
    match model {
        PdeModel::WaveBoundary => {
            let e = (-lambda * 2.0).exp();
            let den = one - e;
            if den.norm() <= 1e-14 {
                return Err(Error::PoleHit);
            }
            Ok((one + e) / den)
        }
        PdeModel::Heat2D => {
            if lambda.norm() <= 1e-14 {
                return Err(Error::PoleHit);
            }
            let r = lambda.sqrt();
            let t = r.tanh();
            if t.norm() <= 1e-14 {
                return Err(Error::PoleHit);
            }
            Ok(one / (t * r))
        }
        PdeModel::WaveDistributed => {
            if lambda.norm() < 1e-2 {
                // Series of the removable singularity at the origin.
                let l2 = lambda * lambda;
                return Ok(lambda * (c64(4.0 / 45.0, 0.0) - l2 * (8.0 / 945.0)));
            }
            let t = lambda.tanh();
            if t.norm() <= 1e-14 {
                return Err(Error::PoleHit);
            }
            let coth = one / t;
            Ok((c64(4.0 / 3.0, 0.0) - coth * 4.0 / lambda + one * 4.0 / (lambda * lambda)) / lambda)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        let w = exact_transfer(PdeModel::WaveBoundary, c64(1.0, 0.0)).unwrap();
        assert!((w.re - 1.0 / 1f64.tanh()).abs() < 1e-12);
        let h = exact_transfer(PdeModel::Heat2D, c64(1.0, 0.0)).unwrap();
        assert!((h.re - 1.0 / 1f64.tanh()).abs() < 1e-12);
        assert_eq!(exact_transfer(PdeModel::Heat2D, c64(0.0, 0.0)), Err(Error::PoleHit));
        assert_eq!(exact_transfer(PdeModel::WaveBoundary, c64(0.0, std::f64::consts::PI)), Err(Error::PoleHit));
    }

    #[test]
    fn fem_series_matches_closed_form_near_origin() {
        let l = 0.0101;
        let closed = exact_transfer(PdeModel::WaveDistributed, c64(l, 0.0)).unwrap();
        let series = l * (4.0 / 45.0 - l * l * 8.0 / 945.0);
        assert!((closed.re - series).abs() < 1e-9);
    }

    #[test]
    fn low_resolution_rejected() {
        assert!(matches!(build_heat_2d(4), Err(Error::PreconditionViolated(_))));
    }
}
