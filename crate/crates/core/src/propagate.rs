//! Implicit-midpoint propagation of `ẋ = A x + B w(t)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{identity, is_real, CMatrix, CVector, Factorization, C64};

/// Precomputed one-step maps `x_{n+1} = M x_n + N w(t_n + dt/2)`.
#[derive(Debug, Clone)]
pub enum MidpointStepper {
    Real { m: DMatrix<f64>, n: DMatrix<f64> },
    Complex { m: CMatrix, n: CMatrix },
}

impl MidpointStepper {
    /// Builds the maps; the real variant is used when `A` and `B` are real and `prefer_real` holds.
    pub fn new(a: &CMatrix, b: &CMatrix, dt: f64, prefer_real: bool) -> Result<Self> {
        let dim = a.nrows();
        let h = C64::new(0.5 * dt, 0.0);
        let lhs = identity(dim) - a * h;
        let lu = Factorization::new(&lhs).map_err(|_| Error::StepMatrixSingular)?;
        let m = lu.solve(&(identity(dim) + a * h))?;
        let n = lu.solve(&(b * C64::new(dt, 0.0)))?;
        if prefer_real && is_real(a) && is_real(b) {
            Ok(Self::Real { m: m.map(|z| z.re), n: n.map(|z| z.re) })
        } else {
            Ok(Self::Complex { m, n })
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Self::Real { .. })
    }

    /// Advances `x` by one step with forcing `w` sampled at the midpoint.
    pub fn step(&self, x: &CVector, w: Option<&CVector>) -> CVector {
        match self {
            Self::Complex { m, n } => {
                let mut out = m * x;
                if let Some(w) = w {
                    if n.ncols() > 0 {
                        out += n * w;
                    }
                }
                out
            }
            Self::Real { m, n } => {
                let xr = x.map(|z| z.re);
                let mut out = m * xr;
                if let Some(w) = w {
                    if n.ncols() > 0 {
                        out += n * w.map(|z| z.re);
                    }
                }
                out.map(|v| C64::new(v, 0.0))
            }
        }
    }
}
