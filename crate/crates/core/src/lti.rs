//! Finite-dimensional state-space systems `(A, B, B_d, C, D)` with `p = m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MatrixJson;
use crate::numerics::{
    self, c64, hermitian_eigenvalues, hermitian_part, identity, is_finite, norm2, solve_linear, zeros, CMatrix,
    Factorization, C64,
};

/// Default absolute tolerance for the passivity test.
pub const PASSIVITY_TOL: f64 = 1e-9;

/// Evaluates `P(λ)` at many points through one Schur reduction `A = U T U*`.
///
/// Each evaluation costs `O(n² m)` instead of a fresh `O(n³)` factorization.
#[derive(Debug, Clone)]
pub struct TransferEvaluator {
    t: CMatrix,
    cu: CMatrix,
    ub: CMatrix,
    d: CMatrix,
    hit_tol: f64,
}

impl TransferEvaluator {
    pub fn new(sys: &StateSpaceSystem) -> Result<Self> {
        let (u, t) = numerics::schur(sys.a())?;
        Ok(Self {
            cu: sys.c() * &u,
            ub: u.adjoint() * sys.b(),
            d: sys.d().clone(),
            hit_tol: 1e-12 * norm2(sys.a()).max(1.0),
            t,
        })
    }

    pub fn eval(&self, lambda: C64) -> Result<CMatrix> {
        let n = self.t.nrows();
        if (0..n).any(|i| (lambda - self.t[(i, i)]).norm() <= self.hit_tol) {
            return Err(Error::SpectrumHit(format!("{lambda}")));
        }
        let mut x = self.ub.clone();
        for j in 0..x.ncols() {
            numerics::solve_shifted_upper(&self.t, lambda, x.column_mut(j).as_mut_slice());
        }
        Ok(&self.cu * x + &self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: CMatrix,
    b: CMatrix,
    b_d: CMatrix,
    c: CMatrix,
    d: CMatrix,
    label: String,
}

impl StateSpaceSystem {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix, d: CMatrix) -> Result<Self> {
        let n = a.nrows();
        let b_d = zeros(n, 0);
        Self::with_disturbance(a, b, b_d, c, d)
    }

    pub fn with_disturbance(a: CMatrix, b: CMatrix, b_d: CMatrix, c: CMatrix, d: CMatrix) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let dims = |what: &str| Error::DimensionMismatch(what.to_string());
        if a.ncols() != n {
            return Err(dims("A must be square"));
        }
        if b.nrows() != n {
            return Err(dims("B must have n rows"));
        }
        if b_d.nrows() != n {
            return Err(dims("B_d must have n rows"));
        }
        if c.ncols() != n {
            return Err(dims("C must have n columns"));
        }
        if c.nrows() != m {
            return Err(dims("output and input dimensions must agree (p = m)"));
        }
        if d.nrows() != m || d.ncols() != m {
            return Err(dims("D must be p x m"));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("B_d", &b_d), ("C", &c), ("D", &d)] {
            if !is_finite(mat) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { a, b, b_d, c, d, label: String::new() })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }
    pub fn b(&self) -> &CMatrix {
        &self.b
    }
    pub fn b_d(&self) -> &CMatrix {
        &self.b_d
    }
    pub fn c(&self) -> &CMatrix {
        &self.c
    }
    pub fn d(&self) -> &CMatrix {
        &self.d
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    pub fn m_d(&self) -> usize {
        self.b_d.ncols()
    }

    /// Replaces the disturbance input matrix.
    pub fn set_disturbance(&mut self, b_d: CMatrix) -> Result<()> {
        if b_d.nrows() != self.n() {
            return Err(Error::DimensionMismatch("B_d must have n rows".into()));
        }
        self.b_d = b_d;
        Ok(())
    }

    /// `(λI - A)^{-1} X`.
    pub fn resolvent_apply(&self, lambda: C64, x: &CMatrix) -> Result<CMatrix> {
        let shifted = identity(self.n()) * lambda - &self.a;
        solve_linear(&shifted, x).map_err(|e| match e {
            Error::SingularMatrix => Error::SpectrumHit(format!("{lambda}")),
            other => other,
        })
    }

    /// `P(λ) = C (λI - A)^{-1} B + D`.
    pub fn transfer(&self, lambda: C64) -> Result<CMatrix> {
        let x = self.resolvent_apply(lambda, &self.b)?;
        Ok(&self.c * x + &self.d)
    }

    /// `P_d(λ) = C (λI - A)^{-1} B_d`.
    pub fn disturbance_transfer(&self, lambda: C64) -> Result<CMatrix> {
        if self.m_d() == 0 {
            return Ok(zeros(self.p(), 0));
        }
        let x = self.resolvent_apply(lambda, &self.b_d)?;
        Ok(&self.c * x)
    }

    /// Hermitian dissipation block whose negative semidefiniteness is impedance passivity.
    pub fn dissipation_block(&self) -> CMatrix {
        let n = self.n();
        let m = self.m();
        let half = c64(0.5, 0.0);
        let mut blk = zeros(n + m, n + m);
        blk.view_mut((0, 0), (n, n)).copy_from(&((&self.a + self.a.adjoint()) * half));
        let off = (&self.b - self.c.adjoint()) * half;
        blk.view_mut((0, n), (n, m)).copy_from(&off);
        blk.view_mut((n, 0), (m, n)).copy_from(&off.adjoint());
        blk.view_mut((n, n), (m, m)).copy_from(&((&self.d + self.d.adjoint()) * (-half)));
        blk
    }

    pub fn check_passive(&self, tol: f64) -> PassivityReport {
        let eigs = hermitian_eigenvalues(&self.dissipation_block());
        let max_eig = eigs.last().copied().unwrap_or(0.0);
        let d_h = (&self.d + self.d.adjoint()) * c64(0.5, 0.0);
        let re_d_min = hermitian_eigenvalues(&d_h).first().copied().unwrap_or(0.0);
        PassivityReport { is_passive: max_eig <= tol && re_d_min >= -tol, max_eig_dissipation_block: max_eig, re_d_min }
    }

    /// Closes the loop `u = -K y + v`.
    pub fn output_feedback(&self, k: &CMatrix) -> Result<StateSpaceSystem> {
        let m = self.m();
        if k.nrows() != m || k.ncols() != m {
            return Err(Error::DimensionMismatch("feedback gain must be m x p".into()));
        }
        let q1 = Factorization::new(&(identity(m) + &self.d * k))
            .and_then(|f| f.solve(&identity(m)))
            .map_err(|_| Error::FeedbackNotAdmissible)?;
        let q2 = Factorization::new(&(identity(m) + k * &self.d))
            .and_then(|f| f.solve(&identity(m)))
            .map_err(|_| Error::FeedbackNotAdmissible)?;
        let a = &self.a - &self.b * k * &q1 * &self.c;
        let b = &self.b * q2;
        let c = &q1 * &self.c;
        let d = &q1 * &self.d;
        let mut out = StateSpaceSystem::with_disturbance(a, b, self.b_d.clone(), c, d)?;
        out.label = self.label.clone();
        Ok(out)
    }

    /// Random entrywise perturbation that keeps the system passive.
    ///
    /// Every entry of `A` and `B` is scaled by an independent factor `1 + rel·u` with
    /// `u` uniform in `[-1, 1]`, `C` receives the adjoint of the `B` change, and the
    /// positive part of the Hermitian part of `ΔA` is removed. The dissipation block
    /// then changes only by a negative semidefinite term. Real systems stay real.
    pub fn perturb_passive(&self, rel: f64, seed: u64) -> Result<StateSpaceSystem> {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        if !(rel >= 0.0 && rel.is_finite()) {
            return Err(Error::InvalidInput("perturbation size must be finite and nonnegative".into()));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let mut relative = |m: &CMatrix| m.map(|z| z * rng.gen_range(-rel..=rel));
        let d_a = relative(&self.a);
        let d_b = relative(&self.b);
        let h = hermitian_part(&d_a);
        let eig = nalgebra::SymmetricEigen::new(h);
        let pos = eig.eigenvalues.map(|l| c64(l.max(0.0), 0.0));
        let mut h_pos = &eig.eigenvectors * CMatrix::from_diagonal(&pos) * eig.eigenvectors.adjoint();
        if numerics::is_real(&self.a) {
            h_pos.apply(|z| *z = c64(z.re, 0.0));
        }
        let a = &self.a + d_a - h_pos;
        let b = &self.b + &d_b;
        let c = &self.c + d_b.adjoint();
        let mut out = StateSpaceSystem::with_disturbance(a, b, self.b_d.clone(), c, self.d.clone())?;
        out.label = self.label.clone();
        Ok(out)
    }

    /// `R(λ, A - B Q C)` through the Woodbury identity.
    pub fn resolvent_woodbury(&self, q: &CMatrix, lambda: C64) -> Result<CMatrix> {
        let n = self.n();
        let r = self.resolvent_apply(lambda, &identity(n))?;
        let q_inv =
            Factorization::new(q).and_then(|f| f.solve(&identity(q.nrows()))).map_err(|_| Error::InnerSingular)?;
        let inner = q_inv + &self.c * &r * &self.b;
        let inner_inv = Factorization::new(&inner)
            .and_then(|f| f.solve(&identity(inner.nrows())))
            .map_err(|_| Error::InnerSingular)?;
        Ok(&r - &r * &self.b * inner_inv * &self.c * &r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    pub is_passive: bool,
    pub max_eig_dissipation_block: f64,
    pub re_d_min: f64,
}

/// Outcome of one inequality family in the operator lemmas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub applicable: bool,
    pub holds: bool,
}

impl LemmaCheck {
    fn skipped() -> Self {
        Self { applicable: false, holds: true }
    }
    fn from(ok: bool) -> Self {
        Self { applicable: true, holds: ok }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub a: LemmaCheck,
    pub b: LemmaCheck,
    pub c: LemmaCheck,
    pub d: LemmaCheck,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|c| c.holds)
    }
}

fn min_re(m: &CMatrix) -> f64 {
    numerics::min_hermitian_part_eig(m)
}

/// Checks the inequalities for `re T ⪰ cI`, `re S ⪰ dI` on a finite-dimensional instance.
///
/// `slack` is relative to the magnitude of each compared quantity.
pub fn verify_operator_lemmas(t: &CMatrix, s: &CMatrix, c: f64, d: f64, slack: f64) -> Result<LemmaReport> {
    let n = t.nrows();
    if t.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch("T and S must be square of equal size".into()));
    }
    let re_t = min_re(t);
    let re_s = min_re(s);
    let tol = |x: f64| slack * x.abs().max(1.0);
    if re_t < c - tol(c) || re_s < d - tol(d) || c < 0.0 || d < 0.0 {
        return Err(Error::PreconditionViolated(format!("need re T >= {c}, re S >= {d} (found {re_t:e}, {re_s:e})")));
    }
    let eye = identity(n);
    let nt = norm2(t);
    let ns = norm2(s);
    let t_inv = Factorization::new(t).and_then(|f| f.solve(&eye)).ok();
    let ist = Factorization::new(&(&eye + s * t)).and_then(|f| f.solve(&eye)).ok();
    let its = Factorization::new(&(&eye + t * s)).ok();
    let ge = |lhs: f64, rhs: f64| lhs >= rhs - tol(rhs.abs().max(lhs.abs()));
    let le = |lhs: f64, rhs: f64| lhs <= rhs + tol(rhs.abs().max(lhs.abs()));

    let a = match &t_inv {
        Some(ti) => {
            let mut ok = ge(min_re(ti), c / (nt * nt));
            if c > 0.0 {
                ok &= le(norm2(ti), 1.0 / c);
            }
            LemmaCheck::from(ok)
        }
        None if c > 0.0 => LemmaCheck::from(false),
        None => LemmaCheck::skipped(),
    };

    let product = ist.as_ref().map(|m| t * m);
    let b = if c > 0.0 || d > 0.0 {
        match &product {
            Some(p) => {
                let mut ok = le(norm2(p), nt * nt / (c + d * nt * nt));
                if c > 0.0 {
                    let bound = (c.powi(3) + c * c * d * nt * nt) / (nt * nt * (1.0 + c * ns).powi(2));
                    ok &= ge(min_re(p), bound);
                }
                LemmaCheck::from(ok)
            }
            None => LemmaCheck::from(false),
        }
    } else {
        LemmaCheck::skipped()
    };

    let cc = match (&t_inv, &product) {
        (Some(ti), Some(p)) if d > 0.0 => {
            let bound = d / (norm2(ti) + ns).powi(2);
            LemmaCheck::from(ge(min_re(p), bound))
        }
        (None, _) | (_, None) if d > 0.0 && c > 0.0 => LemmaCheck::from(false),
        _ => LemmaCheck::skipped(),
    };

    let s_hermitian = (s - s.adjoint()).norm() <= 1e-14 * s.norm().max(1.0);
    let s_psd = s_hermitian && hermitian_eigenvalues(s).first().copied().unwrap_or(0.0) >= -tol(ns);
    let dd = if s_psd {
        match (&product, &its) {
            (Some(p), Some(_)) => LemmaCheck::from(ge(min_re(p), 0.0)),
            _ => LemmaCheck::from(false),
        }
    } else {
        LemmaCheck::skipped()
    };

    Ok(LemmaReport { a, b, c: cc, d: dd })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdpReport {
    pub all_invertible: bool,
    pub failures: Vec<usize>,
    pub sup_inverse_norm: f64,
}

/// Checks that `I + D_c P_k` is invertible for each sampled plant value `P_k`.
pub fn check_idp_invertibility(p_values: &[CMatrix], d_c: &CMatrix) -> Result<IdpReport> {
    let mut failures = Vec::new();
    let mut sup = 0.0f64;
    for (k, p) in p_values.iter().enumerate() {
        if p.nrows() != d_c.ncols() || p.ncols() != d_c.nrows() {
            return Err(Error::DimensionMismatch("plant value vs feedthrough".into()));
        }
        let m = identity(d_c.nrows()) + d_c * p;
        match Factorization::new(&m).and_then(|f| f.solve(&identity(m.nrows()))) {
            Ok(inv) => sup = sup.max(norm2(&inv)),
            Err(_) => failures.push(k),
        }
    }
    Ok(IdpReport {
        all_invertible: failures.is_empty(),
        failures,
        sup_inverse_norm: if sup == 0.0 && !p_values.is_empty() { f64::INFINITY } else { sup },
    })
}

/// JSON exchange form of a state-space system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpaceJson {
    pub n: usize,
    pub m: usize,
    pub m_d: usize,
    pub p: usize,
    pub label: String,
    pub a: MatrixJson,
    pub b: MatrixJson,
    pub b_d: MatrixJson,
    pub c: MatrixJson,
    pub d: MatrixJson,
}

impl From<&StateSpaceSystem> for StateSpaceJson {
    fn from(s: &StateSpaceSystem) -> Self {
        Self {
            n: s.n(),
            m: s.m(),
            m_d: s.m_d(),
            p: s.p(),
            label: s.label.clone(),
            a: MatrixJson::from(&s.a),
            b: MatrixJson::from(&s.b),
            b_d: MatrixJson::from(&s.b_d),
            c: MatrixJson::from(&s.c),
            d: MatrixJson::from(&s.d),
        }
    }
}

impl TryFrom<StateSpaceJson> for StateSpaceSystem {
    type Error = Error;
    fn try_from(j: StateSpaceJson) -> Result<Self> {
        let a = j.a.to_matrix(j.n, j.n)?;
        let b = j.b.to_matrix(j.n, j.m)?;
        let b_d = j.b_d.to_matrix(j.n, j.m_d)?;
        let c = j.c.to_matrix(j.p, j.n)?;
        let d = j.d.to_matrix(j.p, j.m)?;
        Ok(StateSpaceSystem::with_disturbance(a, b, b_d, c, d)?.labeled(j.label))
    }
}

impl StateSpaceSystem {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StateSpaceJson::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: StateSpaceJson = serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        StateSpaceSystem::try_from(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(x, 0.0))
    }

    #[test]
    fn first_order_transfer() {
        let s = StateSpaceSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let p = s.transfer(c64(0.0, 1.0)).unwrap()[(0, 0)];
        assert!((p - c64(0.5, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn transfer_at_eigenvalue_is_rejected() {
        let s = StateSpaceSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        assert!(matches!(s.transfer(c64(-1.0, 0.0)), Err(Error::SpectrumHit(_))));
    }

    #[test]
    fn passivity_of_simple_systems() {
        let s = StateSpaceSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        assert!(s.check_passive(PASSIVITY_TOL).is_passive);
        let active = StateSpaceSystem::new(scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        assert!(!active.check_passive(PASSIVITY_TOL).is_passive);
    }

    #[test]
    fn feedback_moves_pole() {
        let s = StateSpaceSystem::new(scalar(0.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let fb = s.output_feedback(&scalar(2.0)).unwrap();
        assert!((fb.a()[(0, 0)] - c64(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inadmissible_feedback() {
        let s = StateSpaceSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(1.0)).unwrap();
        assert_eq!(s.output_feedback(&scalar(-1.0)).unwrap_err(), Error::FeedbackNotAdmissible);
    }

    #[test]
    fn lemma_scalar_example() {
        let r = verify_operator_lemmas(&scalar(1.0), &scalar(1.0), 1.0, 1.0, 1e-9).unwrap();
        assert!(r.all_hold());
        assert!(r.b.applicable);
    }

    #[test]
    fn lemma_precondition() {
        let r = verify_operator_lemmas(&scalar(0.5), &scalar(1.0), 1.0, 0.0, 1e-9);
        assert!(matches!(r, Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn json_roundtrip() {
        let s = StateSpaceSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(0.5)).unwrap().labeled("toy");
        let back = StateSpaceSystem::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }
}
