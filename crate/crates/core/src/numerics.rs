//! Dense complex linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, LU, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative pivot threshold used to declare a matrix singular.
pub const PIVOT_REL_TOL: f64 = 1e-14;
/// Relative backward-error bound accepted for a Schur decomposition.
pub const SCHUR_BACKWARD_TOL: f64 = 1e-10;

const SCHUR_DEFLATION_TOLS: [f64; 3] = [1e-14, 1e-13, 1e-12];

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

pub fn from_real(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Largest eigenvalue of the Hermitian part `(M + M*)/2`.
pub fn max_hermitian_part_eig(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(&hermitian_part(m)).last().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue of the Hermitian part `(M + M*)/2`.
pub fn min_hermitian_part_eig(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(&hermitian_part(m)).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let max_iter = 100 * m.nrows().max(m.ncols()).max(10);
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::NoConvergence("singular value decomposition".into()))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Spectral norm.
pub fn norm2(m: &CMatrix) -> f64 {
    singular_values(m).ok().and_then(|s| s.first().copied()).unwrap_or_else(|| m.norm())
}

pub fn min_singular_value(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.last().copied().unwrap_or(0.0))
}

/// Norm of the pseudoinverse: reciprocal of the smallest singular value above `cutoff`.
pub fn pseudoinverse_norm(m: &CMatrix, cutoff: f64) -> Result<f64> {
    let s = singular_values(m)?;
    s.iter().rev().find(|&&x| x > cutoff).map(|x| 1.0 / x).ok_or(Error::RankZero)
}

/// Numerical rank with a cutoff relative to the largest singular value.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * top).count())
}

/// Orthonormal basis (as columns) of the numerical kernel of `m`.
pub fn kernel_basis(m: &CMatrix, abs_tol: f64) -> Result<CMatrix> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(identity(n));
    }
    // Pad to a square matrix so that V* is n x n.
    let rows = m.nrows().max(n);
    let mut sq = zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let max_iter = 100 * rows.max(10);
    let svd = SVD::try_new(sq, false, true, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::NoConvergence("kernel basis".into()))?;
    let v_t = svd.v_t.expect("requested V");
    let cols: Vec<CVector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= abs_tol)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        return Ok(zeros(n, 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// LU factorization with a pivot-size check.
pub struct Factorization {
    lu: LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl Factorization {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let scale = max_abs(a);
        let lu = a.clone().lu();
        let u = lu.u();
        let floor = PIVOT_REL_TOL * scale;
        if scale == 0.0 && n > 0 {
            return Err(Error::SingularMatrix);
        }
        if (0..n).any(|i| u[(i, i)].norm() <= floor) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if rhs.nrows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, expected {}",
                rhs.nrows(),
                self.n
            )));
        }
        self.lu.solve(rhs).ok_or(Error::SingularMatrix)
    }

    pub fn solve_vec(&self, rhs: &CVector) -> Result<CVector> {
        if rhs.nrows() != self.n {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        self.lu.solve(rhs).ok_or(Error::SingularMatrix)
    }
}

pub fn solve_linear(a: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    Factorization::new(a)?.solve(rhs)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve_linear(a, &identity(a.nrows()))
}

/// Minimum-norm least-squares solution of `A X = B`.
pub fn min_norm_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch("least-squares right-hand side".into()));
    }
    if a.ncols() == 0 {
        return Ok(zeros(0, b.ncols()));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 100 * a.nrows().max(a.ncols()).max(10))
        .ok_or_else(|| Error::NoConvergence("least squares".into()))?;
    let top = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let eps = 1e-12 * top.max(f64::MIN_POSITIVE);
    svd.solve(b, eps).map_err(|e| Error::NoConvergence(e.to_string()))
}

/// Complex Schur decomposition `A = Q T Q*` with `T` upper triangular.
pub fn schur(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch("schur of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok((zeros(0, 0), zeros(0, 0)));
    }
    // Deflating at machine epsilon stalls on clustered spectra; the backward-error
    // check below decides whether a looser deflation threshold was accurate enough.
    let s = SCHUR_DEFLATION_TOLS
        .iter()
        .find_map(|&eps| Schur::try_new(a.clone(), eps, 100 * n))
        .ok_or_else(|| Error::NoConvergence(format!("Schur iteration cap {} reached", 100 * n)))?;
    let (q, mut t) = s.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let backward = (a - &q * &t * q.adjoint()).norm();
    if backward > SCHUR_BACKWARD_TOL * scale {
        return Err(Error::NoConvergence(format!("Schur residual {backward:e} exceeds tolerance")));
    }
    Ok((q, t))
}

/// Eigenvalues of a square matrix; residual-checked through the Schur backward error.
pub fn spectrum(a: &CMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// `max Re(λ)` over the spectrum.
pub fn spectral_abscissa(a: &CMatrix) -> Result<f64> {
    Ok(spectrum(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Solves `(zI - T) x = b` in place for upper triangular `T`.
pub fn solve_shifted_upper(t: &CMatrix, z: C64, x: &mut [C64]) {
    let n = t.nrows();
    for j in (0..n).rev() {
        let xj = x[j] / (z - t[(j, j)]);
        x[j] = xj;
        let col = t.column(j);
        for i in 0..j {
            x[i] += col[i] * xj;
        }
    }
}

/// Fast evaluation of `σ_min(zI - A)` for many shifts `z`.
///
/// `A` is reduced once to triangular Schur form; each evaluation then runs a
/// Lanczos iteration on `(zI - T)^{-*} (zI - T)^{-1}` using triangular solves.
pub struct ShiftedResolvent {
    t: CMatrix,
    norm_a: f64,
}

impl ShiftedResolvent {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let (_, t) = schur(a)?;
        let norm_a = norm2(a);
        Ok(Self { t, norm_a })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn norm_a(&self) -> f64 {
        self.norm_a
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.t[(i, i)]).collect()
    }

    fn solve_upper(&self, z: C64, x: &mut [C64]) {
        solve_shifted_upper(&self.t, z, x);
    }

    // Solves (zI - T)* y = x in place.
    fn solve_lower_adjoint(&self, z: C64, x: &mut [C64]) {
        let n = self.dim();
        for i in 0..n {
            let col = self.t.column(i);
            let mut acc = x[i];
            for j in 0..i {
                acc += col[j].conj() * x[j];
            }
            x[i] = acc / (z - self.t[(i, i)]).conj();
        }
    }

    /// Smallest singular value of `zI - A`; zero when `z` is an eigenvalue.
    pub fn sigma_min(&self, z: C64) -> f64 {
        let n = self.dim();
        if n == 0 {
            return f64::INFINITY;
        }
        let min_diag = (0..n).map(|i| (z - self.t[(i, i)]).norm()).fold(f64::INFINITY, f64::min);
        if min_diag == 0.0 {
            return 0.0;
        }
        let lam = lanczos_top(n, |v: &mut Vec<C64>| {
            self.solve_upper(z, v);
            self.solve_lower_adjoint(z, v);
        });
        if lam <= 0.0 || !lam.is_finite() {
            return 0.0;
        }
        1.0 / lam.sqrt()
    }
}

// Largest eigenvalue of a Hermitian positive semidefinite operator by Lanczos
// with full reorthogonalization.
fn lanczos_top(n: usize, mut apply: impl FnMut(&mut Vec<C64>)) -> f64 {
    let max_steps = n.min(120);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_steps);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    // Deterministic start vector with no special structure.
    let mut seed: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut q: Vec<C64> = (0..n)
        .map(|_| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((seed >> 11) as f64) / ((1u64 << 53) as f64);
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((seed >> 11) as f64) / ((1u64 << 53) as f64);
            C64::new(a + 0.5, b - 0.5)
        })
        .collect();
    normalize(&mut q);
    let mut prev_top = 0.0;
    let mut stable = 0;
    let mut top = 0.0;
    for k in 0..max_steps {
        let mut w = q.clone();
        apply(&mut w);
        let alpha = dot(&q, &w).re;
        alphas.push(alpha);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let h = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
        }
        let beta = norm(&w);
        top = tridiagonal_top(&alphas, &betas);
        if !top.is_finite() {
            return top;
        }
        if k >= 2 {
            if (top - prev_top).abs() <= 1e-14 * top {
                stable += 1;
                if stable >= 2 {
                    break;
                }
            } else {
                stable = 0;
            }
        }
        prev_top = top;
        if beta <= 1e-13 * top.max(f64::MIN_POSITIVE) {
            break;
        }
        betas.push(beta);
        q = w.into_iter().map(|x| x / beta).collect();
    }
    top
}

fn tridiagonal_top(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(t).eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [C64]) {
    let s = norm(a);
    for x in a.iter_mut() {
        *x /= s;
    }
}

/// Vector 2-norm of a complex vector.
pub fn vnorm(v: &CVector) -> f64 {
    v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn random(rng: &mut StdRng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn solve_recovers_rhs() {
        let mut rng = StdRng::seed_from_u64(1);
        let a = random(&mut rng, 6, 6) + identity(6) * c64(3.0, 0.0);
        let b = random(&mut rng, 6, 2);
        let x = solve_linear(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn singular_is_rejected() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(2.0, 0.0), c64(4.0, 0.0)]);
        assert_eq!(solve_linear(&a, &identity(2)).unwrap_err(), Error::SingularMatrix);
    }

    #[test]
    fn spectrum_of_diagonal() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c64(0.0, 1.0), c64(-2.0, 0.0), c64(0.5, -3.0)]));
        let mut s = spectrum(&d).unwrap();
        s.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((s[0] - c64(-2.0, 0.0)).norm() < 1e-12);
        assert!((s[2] - c64(0.5, -3.0)).norm() < 1e-12);
    }

    #[test]
    fn pseudoinverse_norm_of_rank_one() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        assert!((pseudoinverse_norm(&a, 1e-12).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(pseudoinverse_norm(&zeros(2, 2), 1e-12).unwrap_err(), Error::RankZero);
    }

    #[test]
    fn kernel_of_shifted_diagonal() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c64(0.0, 1.0), c64(0.0, 2.0), c64(0.0, 1.0)]));
        let m = identity(3) * c64(0.0, 1.0) - d;
        let k = kernel_basis(&m, 1e-10).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-12);
    }

    #[test]
    fn shifted_resolvent_matches_svd() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random(&mut rng, 30, 30) - identity(30) * c64(2.0, 0.0);
        let sr = ShiftedResolvent::new(&a).unwrap();
        for w in [0.0, 0.7, 3.0, 11.0] {
            let z = c64(0.0, w);
            let direct = min_singular_value(&(identity(30) * z - &a)).unwrap();
            let fast = sr.sigma_min(z);
            assert!((direct - fast).abs() <= 1e-10 * direct.max(1e-3), "{direct} vs {fast}");
        }
    }
}
