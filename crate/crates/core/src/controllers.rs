//! Internal-model controllers `(A_c, B_c, C_c, D_c1 + D_c2)` and reference signals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{MatrixJson, VectorJson};
use crate::lti::StateSpaceSystem;
use crate::numerics::{
    c64, identity, kernel_basis, min_singular_value, norm2, singular_values, zeros, CMatrix, CVector, C64,
};

/// Tolerance for deciding that two frequencies coincide.
pub const FREQ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalEntry {
    pub omega: f64,
    pub y_ref: CVector,
    pub w_dist: CVector,
}

/// Finite sum of harmonic reference and disturbance components.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    entries: Vec<SignalEntry>,
    real_valued: bool,
}

impl SignalSpec {
    pub fn new(entries: Vec<SignalEntry>, real_valued: bool) -> Result<Self> {
        for (i, a) in entries.iter().enumerate() {
            if !a.omega.is_finite() {
                return Err(Error::InvalidInput("non-finite frequency".into()));
            }
            if entries[..i].iter().any(|b| (b.omega - a.omega).abs() <= FREQ_TOL) {
                return Err(Error::InvalidInput(format!("duplicate frequency {}", a.omega)));
            }
        }
        if let Some(first) = entries.first() {
            let (p, md) = (first.y_ref.len(), first.w_dist.len());
            if entries.iter().any(|e| e.y_ref.len() != p || e.w_dist.len() != md) {
                return Err(Error::DimensionMismatch("signal coefficient lengths differ".into()));
            }
        }
        if real_valued {
            for a in &entries {
                let mirror = entries.iter().find(|b| (b.omega + a.omega).abs() <= FREQ_TOL);
                let ok = match mirror {
                    Some(b) => {
                        let scale = 1.0 + a.y_ref.norm() + a.w_dist.norm();
                        (&b.y_ref - a.y_ref.conjugate()).norm() <= 1e-12 * scale
                            && (&b.w_dist - a.w_dist.conjugate()).norm() <= 1e-12 * scale
                    }
                    None => false,
                };
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "real signal lacks the conjugate partner of frequency {}",
                        a.omega
                    )));
                }
            }
        }
        Ok(Self { entries, real_valued })
    }

    pub fn entries(&self) -> &[SignalEntry] {
        &self.entries
    }

    pub fn real_valued(&self) -> bool {
        self.real_valued
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.omega).collect()
    }

    pub fn max_frequency(&self) -> f64 {
        self.entries.iter().map(|e| e.omega.abs()).fold(0.0, f64::max)
    }

    pub fn dim_y(&self) -> usize {
        self.entries.first().map_or(0, |e| e.y_ref.len())
    }

    pub fn dim_w(&self) -> usize {
        self.entries.first().map_or(0, |e| e.w_dist.len())
    }

    /// Same frequencies with all disturbance coefficients replaced.
    pub fn with_disturbance(&self, w: impl Fn(f64) -> CVector) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| SignalEntry { omega: e.omega, y_ref: e.y_ref.clone(), w_dist: w(e.omega) })
            .collect();
        Self::new(entries, self.real_valued)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<SignalEntryJson> = self
            .entries
            .iter()
            .map(|e| SignalEntryJson {
                omega: e.omega,
                y_ref: VectorJson::from(&e.y_ref),
                w_dist: VectorJson::from(&e.w_dist),
            })
            .collect();
        serde_json::to_string_pretty(&list).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Vec<SignalEntryJson> = serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let entries: Vec<SignalEntry> = list
            .iter()
            .map(|e| SignalEntry { omega: e.omega, y_ref: CVector::from(&e.y_ref), w_dist: CVector::from(&e.w_dist) })
            .collect();
        let real = is_conjugate_closed(&entries);
        Self::new(entries, real)
    }
}

fn is_conjugate_closed(entries: &[SignalEntry]) -> bool {
    entries.iter().all(|a| {
        entries.iter().any(|b| {
            (b.omega + a.omega).abs() <= FREQ_TOL
                && (&b.y_ref - a.y_ref.conjugate()).norm() <= 1e-12 * (1.0 + a.y_ref.norm())
                && (&b.w_dist - a.w_dist.conjugate()).norm() <= 1e-12 * (1.0 + a.w_dist.norm())
        })
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SignalEntryJson {
    omega: f64,
    y_ref: VectorJson,
    w_dist: VectorJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recipe {
    FinDim,
    FinDimReal,
    Transport,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRealization {
    pub a_c: CMatrix,
    pub b_c: CMatrix,
    pub c_c: CMatrix,
    pub d_c1: CMatrix,
    pub d_c2: CMatrix,
    pub recipe: Recipe,
    /// Frequencies of the internal model (imaginary-axis eigenvalues of `A_c`).
    pub frequencies: Vec<f64>,
}

impl ControllerRealization {
    pub fn n_c(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn p(&self) -> usize {
        self.c_c.nrows()
    }

    /// Total feedthrough `D_c1 + D_c2`.
    pub fn d_c(&self) -> CMatrix {
        &self.d_c1 + &self.d_c2
    }

    /// Copy with `D_c2 = 0`, the part left after pre-stabilizing the plant.
    pub fn without_prestabilization(&self) -> Self {
        let mut out = self.clone();
        out.d_c2 = zeros(self.p(), self.p());
        out
    }

    /// `(A_c, B_c, C_c, D)` as a state-space system.
    pub fn as_system(&self, d: CMatrix) -> Result<StateSpaceSystem> {
        StateSpaceSystem::new(self.a_c.clone(), self.b_c.clone(), self.c_c.clone(), d)
    }

    /// `G(λ) = C_c (λ - A_c)^{-1} B_c + D_c1 + D_c2`.
    pub fn transfer(&self, lambda: C64) -> Result<CMatrix> {
        self.as_system(self.d_c())?.transfer(lambda)
    }

    /// Orthonormal basis of `ker(iω - A_c)`.
    pub fn mode_basis(&self, omega: f64) -> Result<CMatrix> {
        let m = identity(self.n_c()) * c64(0.0, omega) - &self.a_c;
        kernel_basis(&m, 1e-9 * (1.0 + omega.abs()))
    }

    /// Restriction `C_c^k = C_c V_k` of the output map to the mode at `ω`.
    pub fn mode_gain(&self, omega: f64) -> Result<(CMatrix, CMatrix)> {
        let v = self.mode_basis(omega)?;
        Ok((&self.c_c * &v, v))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ControllerJson::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ControllerJson = serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(Self {
            a_c: j.a_c.to_matrix(j.n_c, j.n_c)?,
            b_c: j.b_c.to_matrix(j.n_c, j.p)?,
            c_c: j.c_c.to_matrix(j.p, j.n_c)?,
            d_c1: j.d_c1.to_matrix(j.p, j.p)?,
            d_c2: j.d_c2.to_matrix(j.p, j.p)?,
            recipe: j.recipe,
            frequencies: j.frequencies,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerJson {
    pub n_c: usize,
    pub p: usize,
    pub recipe: Recipe,
    pub frequencies: Vec<f64>,
    pub a_c: MatrixJson,
    pub b_c: MatrixJson,
    pub c_c: MatrixJson,
    pub d_c1: MatrixJson,
    pub d_c2: MatrixJson,
}

impl From<&ControllerRealization> for ControllerJson {
    fn from(c: &ControllerRealization) -> Self {
        Self {
            n_c: c.n_c(),
            p: c.p(),
            recipe: c.recipe,
            frequencies: c.frequencies.clone(),
            a_c: MatrixJson::from(&c.a_c),
            b_c: MatrixJson::from(&c.b_c),
            c_c: MatrixJson::from(&c.c_c),
            d_c1: MatrixJson::from(&c.d_c1),
            d_c2: MatrixJson::from(&c.d_c2),
        }
    }
}

fn check_feedthrough(d: &CMatrix, p: usize) -> Result<()> {
    if d.nrows() != p || d.ncols() != p {
        return Err(Error::DimensionMismatch("feedthrough must be p x p".into()));
    }
    Ok(())
}

fn check_gain(g: &CMatrix, p: usize) -> Result<()> {
    if g.nrows() != p || g.ncols() != p {
        return Err(Error::DimensionMismatch("gain must be p x p".into()));
    }
    let scale = norm2(g);
    if scale == 0.0 || min_singular_value(g)? <= 1e-12 * scale {
        return Err(Error::SingularGain);
    }
    Ok(())
}

/// Block-diagonal `A_c = diag(iω_k I_p)` with `C_c = [C_c^1 … C_c^q]` and `B_c = C_c*`.
pub fn build_fin_dim(
    freqs: &[f64],
    p: usize,
    gains: &[CMatrix],
    d_c1: CMatrix,
    d_c2: CMatrix,
) -> Result<ControllerRealization> {
    if freqs.len() != gains.len() {
        return Err(Error::DimensionMismatch("one gain per frequency".into()));
    }
    check_feedthrough(&d_c1, p)?;
    check_feedthrough(&d_c2, p)?;
    let q = freqs.len();
    let mut a_c = zeros(q * p, q * p);
    let mut c_c = zeros(p, q * p);
    for (k, (&w, g)) in freqs.iter().zip(gains).enumerate() {
        check_gain(g, p)?;
        for j in 0..p {
            a_c[(k * p + j, k * p + j)] = c64(0.0, w);
        }
        c_c.view_mut((0, k * p), (p, p)).copy_from(g);
    }
    Ok(ControllerRealization {
        b_c: c_c.adjoint(),
        a_c,
        c_c,
        d_c1,
        d_c2,
        recipe: Recipe::FinDim,
        frequencies: freqs.to_vec(),
    })
}

/// Real block-diagonal controller with `J_k = [[0, ω_k I], [-ω_k I, 0]]`.
///
/// `freqs` lists `0` (optional) and positive frequencies; gains are real `p x p`.
pub fn build_fin_dim_real(
    freqs: &[f64],
    p: usize,
    gains: &[CMatrix],
    d_c1: CMatrix,
    d_c2: CMatrix,
) -> Result<ControllerRealization> {
    if freqs.len() != gains.len() {
        return Err(Error::DimensionMismatch("one gain per frequency".into()));
    }
    check_feedthrough(&d_c1, p)?;
    check_feedthrough(&d_c2, p)?;
    for (i, &w) in freqs.iter().enumerate() {
        if w < 0.0 || freqs[..i].iter().any(|&v| (v - w).abs() <= FREQ_TOL) {
            return Err(Error::InvalidInput("frequencies must be nonnegative and distinct".into()));
        }
    }
    let n_c: usize = freqs.iter().map(|&w| if w == 0.0 { p } else { 2 * p }).sum();
    let mut a_c = zeros(n_c, n_c);
    let mut c_c = zeros(p, n_c);
    let mut modes = Vec::new();
    let mut off = 0;
    for (&w, g) in freqs.iter().zip(gains) {
        check_gain(g, p)?;
        c_c.view_mut((0, off), (p, p)).copy_from(g);
        if w == 0.0 {
            modes.push(0.0);
            off += p;
        } else {
            for j in 0..p {
                a_c[(off + j, off + p + j)] = c64(w, 0.0);
                a_c[(off + p + j, off + j)] = c64(-w, 0.0);
            }
            modes.push(w);
            modes.push(-w);
            off += 2 * p;
        }
    }
    Ok(ControllerRealization {
        b_c: c_c.adjoint(),
        a_c,
        c_c,
        d_c1,
        d_c2,
        recipe: Recipe::FinDimReal,
        frequencies: modes,
    })
}

/// Unitary `V` with `V* A_c V` diagonal for a real block controller, and the
/// complex-form frequencies and gains it produces.
pub fn fin_dim_real_similarity(freqs: &[f64], p: usize) -> CMatrix {
    let n_c: usize = freqs.iter().map(|&w| if w == 0.0 { p } else { 2 * p }).sum();
    let mut v = zeros(n_c, n_c);
    let s = 1.0 / 2f64.sqrt();
    let mut off = 0;
    for &w in freqs {
        if w == 0.0 {
            for j in 0..p {
                v[(off + j, off + j)] = c64(1.0, 0.0);
            }
            off += p;
        } else {
            for j in 0..p {
                v[(off + j, off + j)] = c64(s, 0.0);
                v[(off + j, off + p + j)] = c64(s, 0.0);
                v[(off + p + j, off + j)] = c64(0.0, s);
                v[(off + p + j, off + p + j)] = c64(0.0, -s);
            }
            off += 2 * p;
        }
    }
    v
}

/// Frequencies `2πk/τ` for `|k| ≤ (N-1)/2`.
pub fn transport_frequencies(tau: f64, n_cells: usize) -> Vec<f64> {
    let k_max = ((n_cells - 1) / 2) as i64;
    (-k_max..=k_max).map(|k| 2.0 * PI * k as f64 / tau).collect()
}

/// Modal truncation of the periodic transport channel of period `τ`.
pub fn build_transport(
    tau: f64,
    p: usize,
    n_cells: usize,
    d_c1: CMatrix,
    d_c2: CMatrix,
) -> Result<ControllerRealization> {
    if n_cells < 8 {
        return Err(Error::InvalidInput("transport controller needs N >= 8".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("period must be positive".into()));
    }
    let freqs = transport_frequencies(tau, n_cells);
    let gain = identity(p) * c64((2.0 / tau).sqrt(), 0.0);
    let gains = vec![gain; freqs.len()];
    let mut ctrl = build_fin_dim(&freqs, p, &gains, d_c1, d_c2)?;
    ctrl.recipe = Recipe::Transport;
    Ok(ctrl)
}

/// `(1 + e^{-λτ}) / (1 - e^{-λτ})`, the transfer of the lossless periodic channel.
pub fn transport_symbol(lambda: C64, tau: f64) -> Result<C64> {
    let e = (-lambda * tau).exp();
    let den = c64(1.0, 0.0) - e;
    if den.norm() <= 1e-14 {
        return Err(Error::PoleHit);
    }
    Ok((c64(1.0, 0.0) + e) / den)
}

/// `G_0(λ) = (1 + e^{-λτ}) / (1 - e^{-λτ}) I + D_sum`.
pub fn transport_transfer_exact(lambda: C64, tau: f64, d_sum: &CMatrix) -> Result<CMatrix> {
    let s = transport_symbol(lambda, tau)?;
    Ok(identity(d_sum.nrows()) * s + d_sum)
}

/// Moves the listed transport modes off the imaginary axis: `A_c - B_0 B_0*`.
pub fn stabilize_transport_modes(ctrl: &ControllerRealization, mus: &[f64]) -> Result<ControllerRealization> {
    if ctrl.recipe != Recipe::Transport {
        return Err(Error::InvalidInput("only transport controllers have removable modes".into()));
    }
    let p = ctrl.p();
    let mut out = ctrl.clone();
    for &mu in mus {
        let idx = ctrl
            .frequencies
            .iter()
            .position(|&w| (w - mu).abs() <= FREQ_TOL * (1.0 + mu.abs()))
            .ok_or(Error::ModeNotRetained(mu))?;
        if !out.frequencies.iter().any(|&w| (w - mu).abs() <= FREQ_TOL * (1.0 + mu.abs())) {
            continue;
        }
        for j in 0..p {
            let i = idx * p + j;
            out.a_c[(i, i)] -= c64(1.0, 0.0);
        }
        out.frequencies.retain(|&w| (w - mu).abs() > FREQ_TOL * (1.0 + mu.abs()));
    }
    Ok(out)
}

/// Truncated diagonal controller with `ω_k = k ω_0`, `|k| ≤ N_S`, and input weights
/// `c (1 + |k|)^{-1/2-ε}`.
pub fn build_diagonal(
    n_s: usize,
    omega_0: f64,
    p: usize,
    c: f64,
    eps: f64,
    d_c1: CMatrix,
    d_c2: CMatrix,
) -> Result<ControllerRealization> {
    if n_s < 1 || !(c > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidInput("need N_S >= 1, c > 0 and eps > 0".into()));
    }
    let ks: Vec<i64> = (-(n_s as i64)..=n_s as i64).collect();
    let freqs: Vec<f64> = ks.iter().map(|&k| k as f64 * omega_0).collect();
    let gains: Vec<CMatrix> = ks.iter().map(|&k| identity(p) * c64(diagonal_weight(k, c, eps), 0.0)).collect();
    let mut ctrl = build_fin_dim(&freqs, p, &gains, d_c1, d_c2)?;
    ctrl.recipe = Recipe::Diagonal;
    Ok(ctrl)
}

pub fn diagonal_weight(k: i64, c: f64, eps: f64) -> f64 {
    c * (1.0 + k.unsigned_abs() as f64).powf(-0.5 - eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalModelCheck {
    pub omega: f64,
    pub kernel_dim: usize,
    pub kernel_dim_ok: bool,
    pub b_c_injective: bool,
    pub range_trivial: bool,
}

impl InternalModelCheck {
    pub fn passes(&self) -> bool {
        self.kernel_dim_ok && self.b_c_injective && self.range_trivial
    }
}

fn rank_abs(m: &CMatrix, tol: f64) -> Result<usize> {
    Ok(singular_values(m)?.iter().filter(|&&s| s > tol).count())
}

/// Rank tests of the internal-model conditions at each signal frequency.
pub fn verify_internal_model(
    ctrl: &ControllerRealization,
    sig: &SignalSpec,
    p: usize,
) -> Result<Vec<InternalModelCheck>> {
    let n_c = ctrl.n_c();
    let b_scale = norm2(&ctrl.b_c).max(1.0);
    let rank_b = rank_abs(&ctrl.b_c, 1e-10 * b_scale)?;
    let mut out = Vec::new();
    for e in sig.entries() {
        let shifted = identity(n_c) * c64(0.0, e.omega) - &ctrl.a_c;
        let tol = 1e-9 * (1.0 + norm2(&shifted));
        let r = rank_abs(&shifted, tol)?;
        let mut joint = zeros(n_c, n_c + ctrl.b_c.ncols());
        joint.view_mut((0, 0), (n_c, n_c)).copy_from(&shifted);
        joint.view_mut((0, n_c), (n_c, ctrl.b_c.ncols())).copy_from(&ctrl.b_c);
        let rj = rank_abs(&joint, tol.max(1e-10 * b_scale))?;
        out.push(InternalModelCheck {
            omega: e.omega,
            kernel_dim: n_c - r,
            kernel_dim_ok: n_c - r >= p,
            b_c_injective: rank_b == ctrl.b_c.ncols(),
            range_trivial: rj == r + rank_b,
        });
    }
    Ok(out)
}

/// Helper for scalar-gain construction: `k I_p`.
pub fn scalar_gain(k: f64, p: usize) -> CMatrix {
    identity(p) * c64(k, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::spectrum;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(x, 0.0))
    }

    #[test]
    fn integrator() {
        let c = build_fin_dim(&[0.0], 1, &[scalar(1.0)], scalar(1.0), scalar(0.0)).unwrap();
        assert_eq!(c.a_c[(0, 0)], c64(0.0, 0.0));
        assert_eq!(c.b_c[(0, 0)], c64(1.0, 0.0));
    }

    #[test]
    fn singular_gain_rejected() {
        let r = build_fin_dim(&[1.0], 1, &[scalar(0.0)], scalar(1.0), scalar(0.0));
        assert_eq!(r.unwrap_err(), Error::SingularGain);
    }

    #[test]
    fn two_by_two_kernel() {
        let c = build_fin_dim(&[1.0, 2.0], 2, &[identity(2), identity(2)], identity(2), zeros(2, 2)).unwrap();
        assert_eq!(c.n_c(), 4);
        assert_eq!(c.mode_basis(1.0).unwrap().ncols(), 2);
    }

    #[test]
    fn real_single_frequency() {
        let c = build_fin_dim_real(&[1.0], 1, &[scalar(1.0)], scalar(1.0), scalar(0.0)).unwrap();
        let mut s = spectrum(&c.a_c).unwrap();
        s.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((s[0] - c64(0.0, -1.0)).norm() < 1e-12);
        assert!((s[1] - c64(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn transport_symbol_values() {
        let g = transport_symbol(c64(1.0, 0.0), 1.0).unwrap();
        let e = (-1f64).exp();
        assert!((g.re - (1.0 + e) / (1.0 - e)).abs() < 1e-14);
        assert!(transport_symbol(c64(0.0, PI), 1.0).unwrap().norm() < 1e-14);
        assert_eq!(transport_symbol(c64(0.0, 2.0 * PI), 1.0).unwrap_err(), Error::PoleHit);
        let far = transport_transfer_exact(c64(60.0, 0.0), 1.0, &scalar(2.0)).unwrap();
        assert!((far[(0, 0)] - c64(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stabilize_unknown_mode() {
        let c = build_transport(1.0, 1, 9, scalar(1.0), scalar(0.0)).unwrap();
        assert!(matches!(stabilize_transport_modes(&c, &[1.0]), Err(Error::ModeNotRetained(_))));
        assert_eq!(stabilize_transport_modes(&c, &[]).unwrap(), c);
    }

    #[test]
    fn diagonal_weights() {
        let c = build_diagonal(15, PI, 1, 8.0, 0.1, scalar(0.0), scalar(15.0)).unwrap();
        assert_eq!(c.n_c(), 31);
        assert!((c.b_c[(15, 0)].re - 8.0).abs() < 1e-15);
    }

    #[test]
    fn signal_requires_conjugate_partner() {
        let e = SignalEntry { omega: 1.0, y_ref: CVector::from_element(1, c64(1.0, 0.0)), w_dist: CVector::zeros(0) };
        assert!(SignalSpec::new(vec![e.clone()], true).is_err());
        assert!(SignalSpec::new(vec![e], false).is_ok());
    }
}
