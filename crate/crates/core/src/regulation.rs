//! Closed-loop simulation, regulation error metrics and the regulator-equation solutions.

use serde::Serialize;

use crate::closed_loop::ClosedLoopSystem;
use crate::controllers::{ControllerRealization, SignalEntry, SignalSpec};
use crate::error::{Error, Result};
use crate::fit::{fit_exponential, fit_line, fit_power_law};
use crate::io::csv_table;
use crate::lti::StateSpaceSystem;
use crate::numerics::{c64, identity, min_norm_solve, solve_linear, zeros, CMatrix, CVector, Factorization, C64};
use crate::propagate::MidpointStepper;
use crate::stability::{choose_model, DecayModel};

/// Largest admissible `dt · ω_max / (2π)`.
pub const MAX_STEP_FRACTION: f64 = 0.1;

/// `(w_dist(t), y_ref(t))`.
pub fn eval_signal(sig: &SignalSpec, t: f64) -> (CVector, CVector) {
    let mut w = CVector::zeros(sig.dim_w());
    let mut y = CVector::zeros(sig.dim_y());
    for e in sig.entries() {
        let ph = c64(0.0, e.omega * t).exp();
        w += &e.w_dist * ph;
        y += &e.y_ref * ph;
    }
    if sig.real_valued() {
        w.apply(|z| *z = c64(z.re, 0.0));
        y.apply(|z| *z = c64(z.re, 0.0));
    }
    (w, y)
}

/// Stacked exogenous coefficient `w_ext^k = (w_dist^k, y_ref^k)`.
pub fn ext_coefficient(e: &SignalEntry) -> CVector {
    let mut v = CVector::zeros(e.w_dist.len() + e.y_ref.len());
    v.rows_mut(0, e.w_dist.len()).copy_from(&e.w_dist);
    v.rows_mut(e.w_dist.len(), e.y_ref.len()).copy_from(&e.y_ref);
    v
}

/// `w_ext(t)`.
pub fn eval_ext(sig: &SignalSpec, t: f64) -> CVector {
    let (w, y) = eval_signal(sig, t);
    let mut v = CVector::zeros(w.len() + y.len());
    v.rows_mut(0, w.len()).copy_from(&w);
    v.rows_mut(w.len(), y.len()).copy_from(&y);
    v
}

fn check_signal_dims(cl: &ClosedLoopSystem, sig: &SignalSpec) -> Result<()> {
    if sig.entries().is_empty() {
        return Ok(());
    }
    if sig.dim_w() + sig.dim_y() != cl.b_e.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} + {} components, loop expects {}",
            sig.dim_w(),
            sig.dim_y(),
            cl.b_e.ncols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    /// Closed-loop states; empty when state storage was disabled.
    pub states: Vec<CVector>,
    pub state_norms: Vec<f64>,
    pub errors: Vec<CVector>,
    pub error_norms: Vec<f64>,
    pub scheme: &'static str,
    pub dt: f64,
    pub real_arithmetic: bool,
}

impl TrajectoryResult {
    pub fn to_csv(&self) -> String {
        csv_table(
            &["t", "error_norm", "state_norm"],
            self.times.iter().zip(&self.error_norms).zip(&self.state_norms).map(|((t, e), x)| vec![*t, *e, *x]),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    pub store_states: bool,
    /// Use real arithmetic when every input is real.
    pub allow_real: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { store_states: true, allow_real: true }
    }
}

/// Implicit-midpoint simulation of the closed loop under the exogenous signal.
pub fn simulate(
    cl: &ClosedLoopSystem,
    sig: &SignalSpec,
    x_e0: &CVector,
    t_final: f64,
    dt: f64,
) -> Result<TrajectoryResult> {
    simulate_with(cl, sig, x_e0, t_final, dt, SimulateOptions::default())
}

pub fn simulate_with(
    cl: &ClosedLoopSystem,
    sig: &SignalSpec,
    x_e0: &CVector,
    t_final: f64,
    dt: f64,
    opts: SimulateOptions,
) -> Result<TrajectoryResult> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_final >= 0".into()));
    }
    if x_e0.len() != cl.n() {
        return Err(Error::DimensionMismatch("initial state length".into()));
    }
    check_signal_dims(cl, sig)?;
    let w_max = sig.max_frequency();
    if w_max > 0.0 && dt > MAX_STEP_FRACTION * 2.0 * std::f64::consts::PI / w_max {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} does not resolve the frequency {w_max}; need dt <= {:.3e}",
            MAX_STEP_FRACTION * 2.0 * std::f64::consts::PI / w_max
        )));
    }
    let real = opts.allow_real
        && cl.is_real()
        && (sig.real_valued() || sig.entries().is_empty())
        && x_e0.iter().all(|z| z.im == 0.0);
    let stepper = MidpointStepper::new(&cl.a_e, &cl.b_e, dt, real)?;
    let has_input = !sig.entries().is_empty();
    let steps = (t_final / dt).round() as usize;
    let mut x = x_e0.clone();
    let mut out = TrajectoryResult {
        times: Vec::with_capacity(steps + 1),
        states: Vec::new(),
        state_norms: Vec::with_capacity(steps + 1),
        errors: Vec::with_capacity(steps + 1),
        error_norms: Vec::with_capacity(steps + 1),
        scheme: "implicit-midpoint",
        dt,
        real_arithmetic: stepper.is_real(),
    };
    let zero_ext = CVector::zeros(cl.b_e.ncols());
    let record = |out: &mut TrajectoryResult, t: f64, x: &CVector| {
        let w = if has_input { eval_ext(sig, t) } else { zero_ext.clone() };
        let e = &cl.c_e * x + &cl.d_e * w;
        out.times.push(t);
        out.state_norms.push(x.norm());
        out.error_norms.push(e.norm());
        out.errors.push(e);
        if opts.store_states {
            out.states.push(x.clone());
        }
    };
    record(&mut out, 0.0, &x);
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        x = if has_input {
            let w = eval_ext(sig, t_mid);
            stepper.step(&x, Some(&w))
        } else {
            stepper.step(&x, None)
        };
        record(&mut out, (k + 1) as f64 * dt, &x);
    }
    Ok(out)
}

/// `(t, ∫_t^{t+window} ‖e(s)‖ ds)` by the trapezoid rule on the stored samples.
pub fn sliding_error_integral(traj: &TrajectoryResult, window: f64) -> Result<Vec<(f64, f64)>> {
    let n = traj.times.len();
    if n < 2 || traj.times[n - 1] - traj.times[0] < window * (1.0 - 1e-12) {
        return Err(Error::WindowExceedsTrajectory);
    }
    let mut cum = vec![0.0; n];
    for i in 1..n {
        let h = traj.times[i] - traj.times[i - 1];
        cum[i] = cum[i - 1] + 0.5 * h * (traj.error_norms[i] + traj.error_norms[i - 1]);
    }
    let at = |t: f64| -> f64 {
        let j = traj.times.partition_point(|&s| s < t).clamp(1, n - 1);
        let (t0, t1) = (traj.times[j - 1], traj.times[j]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        cum[j - 1] + s * (cum[j] - cum[j - 1])
    };
    let t_end = traj.times[n - 1];
    let tol = 1e-9 * traj.dt;
    Ok(traj
        .times
        .iter()
        .enumerate()
        .take_while(|(_, &t)| t + window <= t_end + tol)
        .map(|(i, &t)| (t, at(t + window) - cum[i]))
        .collect())
}

/// Better of an exponential and a power-law fit of the table for `t ≥ t_start`.
pub fn fit_error_rate(table: &[(f64, f64)], t_start: f64) -> Result<DecayModel> {
    let (t, v): (Vec<f64>, Vec<f64>) =
        table.iter().copied().filter(|&(t, v)| t >= t_start && t > 0.0 && v > 0.0).unzip();
    if t.len() < 10 {
        return Err(Error::InsufficientData(format!("{} post-transient points, need 10", t.len())));
    }
    let band = (t[0], *t.last().expect("nonempty"));
    choose_model(fit_exponential(&t, &v), fit_power_law(&t, &v), band)
        .ok_or_else(|| Error::InsufficientData("degenerate fit".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub max_error: f64,
}

/// Maxima of `‖e(t)‖` over the dyadic windows `[2^j, 2^{j+1}]`, `j ≥ 0`.
pub fn pointwise_error_decay(traj: &TrajectoryResult) -> Vec<TailWindow> {
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let mut out = Vec::new();
    let mut a = 1.0;
    while a < t_end {
        let b = (2.0 * a).min(t_end);
        let max_error = traj
            .times
            .iter()
            .zip(&traj.error_norms)
            .filter(|(t, _)| **t >= a && **t <= b)
            .map(|(_, e)| *e)
            .fold(0.0, f64::max);
        out.push(TailWindow { t_start: a, t_end: b, max_error });
        a *= 2.0;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiExtEntry {
    /// Position in the signal list.
    pub k: usize,
    pub omega: f64,
    pub pi1: CVector,
    /// Coordinates in the orthonormal basis of `ker(iω_k - A_c)`.
    pub pi2: CVector,
    pub u_k: CVector,
    /// Controller-state component `V_k Π_2^k`.
    pub z_k: CVector,
}

fn disturbance_term(plant: &StateSpaceSystem, e: &SignalEntry) -> Result<CVector> {
    if plant.m_d() == 0 {
        if e.w_dist.iter().any(|z| z.norm() > 0.0) {
            return Err(Error::DimensionMismatch("disturbance given but plant has no B_d".into()));
        }
        return Ok(CVector::zeros(plant.n()));
    }
    if e.w_dist.len() != plant.m_d() {
        return Err(Error::DimensionMismatch("disturbance coefficient length".into()));
    }
    Ok(plant.b_d() * &e.w_dist)
}

fn vec_of(m: &CMatrix) -> CVector {
    m.column(0).into_owned()
}

fn col(v: &CVector) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn mode_coordinates(ctrl: &ControllerRealization, omega: f64, rhs: &CVector) -> Result<(CVector, CVector)> {
    let (ck, v) = ctrl.mode_gain(omega)?;
    if ck.ncols() != ck.nrows() {
        return Err(Error::InvalidInput(format!(
            "mode at {omega} has dimension {}, expected {}",
            ck.ncols(),
            ck.nrows()
        )));
    }
    let pi2 = vec_of(&solve_linear(&ck, &col(rhs)).map_err(|_| Error::SingularGain)?);
    let z = &v * &pi2;
    Ok((pi2, z))
}

/// `Π_ext^k` through the pre-stabilized plant `(A^S, B^S, C^S, D^S)`.
pub fn compute_pi_ext(
    plant: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    sig: &SignalSpec,
) -> Result<Vec<PiExtEntry>> {
    let ps = plant.output_feedback(&ctrl.d_c2)?;
    let mut out = Vec::new();
    for (k, e) in sig.entries().iter().enumerate() {
        let iw = c64(0.0, e.omega);
        let bdw = disturbance_term(plant, e)?;
        let mut rhs = zeros(ps.n(), ps.m() + 1);
        rhs.view_mut((0, 0), (ps.n(), ps.m())).copy_from(ps.b());
        rhs.set_column(ps.m(), &bdw);
        let x = ps.resolvent_apply(iw, &rhs)?;
        let r_b = x.columns(0, ps.m()).into_owned();
        let r_bdw = x.column(ps.m()).into_owned();
        let p_s = ps.c() * &r_b + ps.d();
        let target = &e.y_ref - ps.c() * &r_bdw;
        let u = vec_of(&solve_linear(&p_s, &col(&target)).map_err(|_| Error::TransmissionZero(e.omega))?);
        let pi1 = &r_b * &u + &r_bdw;
        let (pi2, z_k) = mode_coordinates(ctrl, e.omega, &(&u - &ctrl.d_c2 * &e.y_ref))?;
        out.push(PiExtEntry { k, omega: e.omega, pi1, pi2, u_k: u, z_k });
    }
    Ok(out)
}

/// Alternate expression through the unstabilized plant; needs `iω_k ∈ ρ(A)`.
pub fn pi_ext_unstabilized(
    plant: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    k: usize,
    e: &SignalEntry,
) -> Result<PiExtEntry> {
    let iw = c64(0.0, e.omega);
    let p = plant.transfer(iw)?;
    let bdw = disturbance_term(plant, e)?;
    let r_bdw = vec_of(&plant.resolvent_apply(iw, &col(&bdw))?);
    let target = &e.y_ref - plant.c() * &r_bdw;
    let u_tilde = vec_of(&solve_linear(&p, &col(&target)).map_err(|_| Error::TransmissionZero(e.omega))?);
    let pi1 = vec_of(&plant.resolvent_apply(iw, &col(&(&bdw + plant.b() * &u_tilde)))?);
    let u = &u_tilde + &ctrl.d_c2 * &e.y_ref;
    let (pi2, z_k) = mode_coordinates(ctrl, e.omega, &u_tilde)?;
    Ok(PiExtEntry { k, omega: e.omega, pi1, pi2, u_k: u, z_k })
}

/// Alternate expression for an invertible feedthrough `D`.
pub fn pi_ext_feedthrough(
    plant: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    k: usize,
    e: &SignalEntry,
) -> Result<PiExtEntry> {
    let iw = c64(0.0, e.omega);
    let ps = plant.output_feedback(&ctrl.d_c2)?;
    let ds_inv = Factorization::new(ps.d())
        .and_then(|f| f.solve(&identity(ps.m())))
        .map_err(|_| Error::InvalidInput("feedthrough is not invertible".into()))?;
    let inner =
        StateSpaceSystem::new(ps.a() - ps.b() * &ds_inv * ps.c(), ps.b().clone(), ps.c().clone(), ps.d().clone())?;
    let bdw = disturbance_term(plant, e)?;
    let term1 = vec_of(&inner.resolvent_apply(iw, &col(&bdw))?);
    let p_s = ps.transfer(iw)?;
    let v = vec_of(&solve_linear(&p_s, &col(&e.y_ref)).map_err(|_| Error::TransmissionZero(e.omega))?);
    let term2 = vec_of(&ps.resolvent_apply(iw, &col(&(ps.b() * v)))?);
    let pi1 = term1 + term2;
    let u = &ds_inv * (&e.y_ref - ps.c() * &pi1);
    let (pi2, z_k) = mode_coordinates(ctrl, e.omega, &(&u - &ctrl.d_c2 * &e.y_ref))?;
    Ok(PiExtEntry { k, omega: e.omega, pi1, pi2, u_k: u, z_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AltPath {
    Unstabilized,
    InvertibleFeedthrough,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltPiExt {
    pub path: AltPath,
    pub entry: Option<PiExtEntry>,
}

/// `Π_ext^k` by the alternate formulas, choosing the applicable path per frequency.
pub fn compute_pi_ext_alt(
    plant: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    sig: &SignalSpec,
) -> Result<Vec<AltPiExt>> {
    let mut out = Vec::new();
    for (k, e) in sig.entries().iter().enumerate() {
        match pi_ext_unstabilized(plant, ctrl, k, e) {
            Ok(entry) => out.push(AltPiExt { path: AltPath::Unstabilized, entry: Some(entry) }),
            Err(Error::SpectrumHit(_)) => match pi_ext_feedthrough(plant, ctrl, k, e) {
                Ok(entry) => out.push(AltPiExt { path: AltPath::InvertibleFeedthrough, entry: Some(entry) }),
                Err(Error::InvalidInput(_)) | Err(Error::SpectrumHit(_)) => {
                    out.push(AltPiExt { path: AltPath::Unavailable, entry: None })
                }
                Err(err) => return Err(err),
            },
            Err(err) => return Err(err),
        }
    }
    Ok(out)
}

fn max_modulus(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise difference between two `Π_ext` computations.
pub fn pi_ext_max_difference(a: &[PiExtEntry], b: &[AltPiExt]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (x, y) in a.iter().zip(b) {
        if let Some(y) = &y.entry {
            let d = [max_modulus(&(&x.pi1 - &y.pi1)), max_modulus(&(&x.z_k - &y.z_k)), max_modulus(&(&x.u_k - &y.u_k))];
            worst = d.iter().fold(worst, |m, v| m.max(*v));
            compared += 1;
        }
    }
    (compared > 0).then_some(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionTag {
    Pi1L1,
    Pi2L2,
    UL1,
    OmegaPi1L1,
    OmegaPi2L2,
}

impl ConditionTag {
    pub const ALL: [ConditionTag; 5] = [
        ConditionTag::Pi1L1,
        ConditionTag::Pi2L2,
        ConditionTag::UL1,
        ConditionTag::OmegaPi1L1,
        ConditionTag::OmegaPi2L2,
    ];

    fn power(self) -> f64 {
        match self {
            ConditionTag::Pi2L2 | ConditionTag::OmegaPi2L2 => 2.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SummabilityVerdict {
    Summable,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceDiagnostic {
    pub tag: Option<ConditionTag>,
    pub p: f64,
    /// Partial sums of `|a_n|^p`.
    pub partial_sums: Vec<f64>,
    /// Tail power-law exponent `s` in `|a_n| ~ n^s`.
    pub tail_exponent: Option<f64>,
    /// Tail geometric log-ratio per index, when the sequence looks geometric.
    pub tail_log_ratio: Option<f64>,
    pub verdict: SummabilityVerdict,
}

/// Margin on `p·s < -1` required for a summable verdict.
pub const SUMMABILITY_MARGIN: f64 = 0.1;

/// Trend diagnostic for `(a_n) ∈ l^p` from the tail of a finite sequence.
pub fn diagnose_sequence(values: &[f64], p: f64) -> SequenceDiagnostic {
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = values
        .iter()
        .map(|v| {
            acc += v.abs().powf(p);
            acc
        })
        .collect();
    let nz: Vec<(f64, f64)> =
        values.iter().enumerate().filter(|(_, v)| v.abs() > 0.0).map(|(i, v)| ((i + 1) as f64, v.abs())).collect();
    let tail = &nz[nz.len() / 2..];
    let (x, y): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
    let pw = fit_power_law(&x, &y);
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let geo = fit_line(&x, &ly);
    let geometric = match (geo, pw) {
        (Some(g), Some(q)) => g.slope < 0.0 && g.residual < q.residual,
        (Some(g), None) => g.slope < 0.0,
        _ => false,
    };
    let verdict = if nz.is_empty() || geometric || pw.is_some_and(|f| p * f.slope < -1.0 - SUMMABILITY_MARGIN) {
        SummabilityVerdict::Summable
    } else {
        SummabilityVerdict::Divergent
    };
    SequenceDiagnostic {
        tag: None,
        p,
        partial_sums,
        tail_exponent: pw.map(|f| f.slope),
        tail_log_ratio: if geometric { geo.map(|g| g.slope) } else { None },
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegulationConditionsReport {
    pub frequencies: Vec<f64>,
    pub sequences: Vec<SequenceDiagnostic>,
}

impl RegulationConditionsReport {
    pub fn verdict(&self, tag: ConditionTag) -> Option<SummabilityVerdict> {
        self.sequences.iter().find(|s| s.tag == Some(tag)).map(|s| s.verdict)
    }
}

/// Summability diagnostics of `Π_ext` components ordered by increasing `|ω_k|`.
///
/// Entries sharing `|ω_k|` are merged so that `±ω_k` count as one index.
pub fn check_regulation_conditions(entries: &[PiExtEntry], tags: &[ConditionTag]) -> RegulationConditionsReport {
    let mut levels: Vec<(f64, [f64; 5])> = Vec::new();
    for e in entries {
        let w = e.omega.abs();
        let vals = [e.pi1.norm(), e.pi2.norm(), e.u_k.norm(), w * e.pi1.norm(), w * e.pi2.norm()];
        match levels.iter_mut().find(|(l, _)| (l - w).abs() <= 1e-9 * (1.0 + w)) {
            Some((_, acc)) => {
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a = (a.powi(2) + v.powi(2)).sqrt();
                }
            }
            None => levels.push((w, vals)),
        }
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sequences = tags
        .iter()
        .map(|&tag| {
            let i = ConditionTag::ALL.iter().position(|&t| t == tag).expect("known tag");
            let values: Vec<f64> = levels.iter().map(|l| l.1[i]).collect();
            let mut d = diagnose_sequence(&values, tag.power());
            d.tag = Some(tag);
            d
        })
        .collect();
    RegulationConditionsReport { frequencies: levels.iter().map(|l| l.0).collect(), sequences }
}

/// `R(iω_k, A_e) B_e w_ext^k` for each signal entry.
pub fn regulator_states(cl: &ClosedLoopSystem, sig: &SignalSpec) -> Result<Vec<CVector>> {
    check_signal_dims(cl, sig)?;
    sig.entries()
        .iter()
        .map(|e| {
            let rhs = &cl.b_e * ext_coefficient(e);
            let m = identity(cl.n()) * c64(0.0, e.omega) - &cl.a_e;
            solve_linear(&m, &col(&rhs)).map(|x| vec_of(&x)).map_err(|_| Error::SpectrumHit(format!("i{}", e.omega)))
        })
        .collect()
}

/// `q_ext = Σ iω_k R(iω_k, A_e) B_e w_ext^k`.
pub fn compute_q_ext(cl: &ClosedLoopSystem, sig: &SignalSpec) -> Result<CVector> {
    let mut q = CVector::zeros(cl.n());
    for (e, x) in sig.entries().iter().zip(regulator_states(cl, sig)?) {
        q += x * c64(0.0, e.omega);
    }
    Ok(q)
}

/// Minimum-norm `z_0` with `C_c z_0 = D_c (C x_0 - y_ref(0))`.
pub fn compatible_initial_state(
    plant: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    x0: &CVector,
    y_ref0: &CVector,
) -> Result<CVector> {
    let rhs = ctrl.d_c() * (plant.c() * x0 - y_ref0);
    let z = vec_of(&min_norm_solve(&ctrl.c_c, &col(&rhs))?);
    let res = (&ctrl.c_c * &z - &rhs).norm();
    if res > 1e-10 * (1.0 + rhs.norm()) {
        return Err(Error::InconsistentSystem(res));
    }
    Ok(z)
}

/// Whether `(x_0, z_0)` satisfies `w_dist(0) = 0` and `C_c z_0 = D_c (C x_0 - y_ref(0))`.
pub fn is_compatible(cl: &ClosedLoopSystem, sig: &SignalSpec, x_e0: &CVector) -> bool {
    let (w0, y0) = eval_signal(sig, 0.0);
    let n = cl.n_plant();
    let x0 = x_e0.rows(0, n).into_owned();
    let z0 = x_e0.rows(n, cl.n() - n).into_owned();
    let ctrl = &cl.controller;
    let y0 = if y0.is_empty() { CVector::zeros(ctrl.p()) } else { y0 };
    let lhs = &ctrl.c_c * z0;
    let rhs = ctrl.d_c() * (cl.plant.c() * x0 - y0);
    w0.norm() <= 1e-12 && (lhs - &rhs).norm() <= 1e-8 * (1.0 + rhs.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorFormulaReport {
    pub max_deviation: f64,
    pub skipped: bool,
    pub note: Option<String>,
}

/// Compares the forced error with `C_e T_e(t) A_e^{-1}(A_e x_e0 + B_e w_ext(0) - q_ext)`.
pub fn error_formula_check(
    cl: &ClosedLoopSystem,
    sig: &SignalSpec,
    x_e0: &CVector,
    sample_times: &[f64],
    dt: f64,
    require_compatible: bool,
) -> Result<ErrorFormulaReport> {
    let compatible = is_compatible(cl, sig, x_e0);
    if require_compatible && !compatible {
        return Ok(ErrorFormulaReport {
            max_deviation: f64::NAN,
            skipped: true,
            note: Some("initial state is not compatible with the exogenous signal".into()),
        });
    }
    let q = compute_q_ext(cl, sig)?;
    let w0 = eval_ext(sig, 0.0);
    let w0 = if w0.is_empty() { CVector::zeros(cl.b_e.ncols()) } else { w0 };
    let rhs = &cl.a_e * x_e0 + &cl.b_e * w0 - q;
    let v0 = vec_of(&solve_linear(&cl.a_e, &col(&rhs)).map_err(|_| Error::SpectrumHit("0".into()))?);
    let t_final = sample_times.iter().copied().fold(0.0, f64::max);
    let opts = SimulateOptions { store_states: false, allow_real: true };
    let forced = simulate_with(cl, sig, x_e0, t_final, dt, opts)?;
    let empty = SignalSpec::new(Vec::new(), true)?;
    let homogeneous = simulate_with(cl, &empty, &v0, t_final, dt, opts)?;
    let mut worst: f64 = 0.0;
    for &t in sample_times {
        let i = (t / dt).round() as usize;
        if i >= forced.errors.len() {
            return Err(Error::InvalidInput(format!("sample time {t} beyond the simulated horizon")));
        }
        let dev = (&forced.errors[i] - &homogeneous.errors[i]).norm();
        worst = worst.max(dev);
    }
    Ok(ErrorFormulaReport {
        max_deviation: worst,
        skipped: false,
        note: (!compatible)
            .then(|| "initial state is not compatible; identity still holds in finite dimensions".into()),
    })
}

/// Convenience: scalar complex to a 1-vector.
pub fn scalar_vec(z: C64) -> CVector {
    CVector::from_element(1, z)
}
