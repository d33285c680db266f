//! Spectral clearance, resolvent scans, decay-rate models and hypothesis checkers.

use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_loop::ClosedLoopSystem;
use crate::controllers::{ControllerRealization, FREQ_TOL};
use crate::error::{Error, Result};
use crate::fit::{fit_exponential, fit_offset_power_law, fit_power_law, LineFit};
use crate::io::{csv_table, parse_csv};
use crate::lti::{StateSpaceSystem, TransferEvaluator};
use crate::numerics::{
    self, c64, hermitian_part, identity, min_hermitian_part_eig, min_singular_value, norm2, pseudoinverse_norm,
    solve_linear, spectrum, CMatrix, CVector, ShiftedResolvent, C64,
};
use crate::propagate::MidpointStepper;

/// Relative floor below which `σ_min(iω - A)` marks a spectrum hit.
pub const SPECTRUM_HIT_REL: f64 = 1e-12;
/// Growth exponents below this value are treated as a bounded resolvent.
pub const BOUNDED_ALPHA: f64 = 0.2;

pub fn spectral_abscissa(a: &CMatrix) -> Result<f64> {
    numerics::spectral_abscissa(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub omega_min: f64,
    pub omega_max: f64,
    pub samples: usize,
    pub refine_near: Vec<f64>,
    pub cluster_halfwidth: f64,
    pub cluster_points: usize,
}

impl ScanOptions {
    pub fn new(omega_min: f64, omega_max: f64, samples: usize) -> Self {
        Self { omega_min, omega_max, samples, refine_near: Vec::new(), cluster_halfwidth: 0.0, cluster_points: 25 }
    }

    pub fn refine(mut self, centers: &[f64], halfwidth: f64) -> Self {
        self.refine_near = centers.to_vec();
        self.cluster_halfwidth = halfwidth;
        self
    }

    /// Log-spaced base grid merged with the refinement clusters, inside `[ω_min, ω_max]`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.samples < 2 || !(self.omega_min > 0.0) || !(self.omega_max > self.omega_min) {
            return Err(Error::InvalidInput("scan needs 0 < omega_min < omega_max and samples >= 2".into()));
        }
        let (l0, l1) = (self.omega_min.ln(), self.omega_max.ln());
        let mut g: Vec<f64> =
            (0..self.samples).map(|i| (l0 + (l1 - l0) * i as f64 / (self.samples - 1) as f64).exp()).collect();
        if self.cluster_halfwidth > 0.0 && self.cluster_points > 0 {
            let m = self.cluster_points;
            for &c in &self.refine_near {
                for j in 0..m {
                    let s = if m == 1 { 0.0 } else { -1.0 + 2.0 * j as f64 / (m - 1) as f64 };
                    let w = c + s * self.cluster_halfwidth;
                    if w >= self.omega_min && w <= self.omega_max {
                        g.push(w);
                    }
                }
            }
        }
        g.sort_by(|a, b| a.total_cmp(b));
        g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventScan {
    pub grid: Vec<f64>,
    pub norms: Vec<f64>,
    pub flags: Vec<bool>,
}

impl ResolventScan {
    pub fn sup_norm(&self) -> f64 {
        self.norms.iter().zip(&self.flags).filter(|(_, f)| !**f).map(|(n, _)| *n).fold(0.0, f64::max)
    }

    pub fn band(&self) -> (f64, f64) {
        (self.grid.first().copied().unwrap_or(0.0), self.grid.last().copied().unwrap_or(0.0))
    }

    pub fn to_csv(&self) -> String {
        csv_table(
            &["omega", "resolvent_norm", "flag"],
            self.grid
                .iter()
                .zip(&self.norms)
                .zip(&self.flags)
                .map(|((w, n), f)| vec![*w, *n, if *f { 1.0 } else { 0.0 }]),
        )
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (header, rows) = parse_csv(text)?;
        if header != ["omega", "resolvent_norm", "flag"] {
            return Err(Error::InvalidInput("scan CSV needs columns omega,resolvent_norm,flag".into()));
        }
        Ok(Self {
            grid: rows.iter().map(|r| r[0]).collect(),
            norms: rows.iter().map(|r| r[1]).collect(),
            flags: rows.iter().map(|r| r[2] != 0.0).collect(),
        })
    }
}

/// Scans `‖R(iω, A)‖` over the grid of `opts`.
pub fn scan_matrix(a: &CMatrix, opts: &ScanOptions) -> Result<ResolventScan> {
    let grid = opts.grid()?;
    let ev = ShiftedResolvent::new(a)?;
    let floor = SPECTRUM_HIT_REL * ev.norm_a().max(1.0);
    let sig: Vec<f64> = grid.par_iter().map(|&w| ev.sigma_min(c64(0.0, w))).collect();
    let flags: Vec<bool> = sig.iter().map(|&s| s <= floor).collect();
    let norms = sig.iter().zip(&flags).map(|(&s, &f)| if f { f64::INFINITY } else { 1.0 / s }).collect();
    Ok(ResolventScan { grid, norms, flags })
}

pub fn scan_resolvent(cl: &ClosedLoopSystem, opts: &ScanOptions) -> Result<ResolventScan> {
    scan_matrix(&cl.a_e, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub alpha: f64,
    pub residual: f64,
    /// `(ω, ‖R‖)` points used in the fit.
    pub peaks: Vec<(f64, f64)>,
}

/// Log-log slope of the upper envelope of the scan over `window`.
///
/// The envelope consists of the local maxima of the scan. When fewer than three
/// exist (monotone data) the running-maximum record points are used instead.
pub fn fit_growth_exponent(scan: &ResolventScan, window: (f64, f64)) -> Result<GrowthFit> {
    let idx: Vec<usize> = (0..scan.grid.len())
        .filter(|&i| scan.grid[i] >= window.0 && scan.grid[i] <= window.1 && !scan.flags[i])
        .collect();
    let v = |i: usize| scan.norms[i];
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for (j, &i) in idx.iter().enumerate() {
        if j == 0 || j + 1 == idx.len() {
            continue;
        }
        let (l, r) = (idx[j - 1], idx[j + 1]);
        if v(i) >= v(l) && v(i) >= v(r) && (v(i) > v(l) || v(i) > v(r) || v(i) == v(l)) {
            peaks.push((scan.grid[i], v(i)));
        }
    }
    if peaks.len() < 3 {
        peaks.clear();
        let mut best = f64::NEG_INFINITY;
        for &i in &idx {
            if v(i) >= best {
                best = v(i);
                peaks.push((scan.grid[i], v(i)));
            }
        }
    }
    if peaks.len() < 3 {
        return Err(Error::InsufficientPeaks { needed: 3, found: peaks.len() });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = peaks.iter().copied().unzip();
    let f = fit_power_law(&x, &y).ok_or(Error::InsufficientPeaks { needed: 3, found: peaks.len() })?;
    Ok(GrowthFit { alpha: f.slope, residual: f.residual, peaks })
}

/// Increasing function `M(ω)` given by samples, interpolated log-log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTable {
    pub omega: Vec<f64>,
    pub m: Vec<f64>,
}

impl MTable {
    pub fn new(omega: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if omega.len() < 2 || omega.len() != m.len() {
            return Err(Error::InvalidInput("M table needs at least two samples".into()));
        }
        if omega[0] <= 0.0 || omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("M table frequencies must be positive and increasing".into()));
        }
        if m.iter().any(|&x| !(x > 0.0)) || m.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("M table values must be positive and nondecreasing".into()));
        }
        Ok(Self { omega, m })
    }

    /// Tabulates a law on a log-spaced grid.
    pub fn from_fn(omega_min: f64, omega_max: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (l0, l1) = (omega_min.ln(), omega_max.ln());
        let omega: Vec<f64> =
            (0..points).map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1).max(1) as f64).exp()).collect();
        let m = omega.iter().map(|&w| f(w)).collect();
        Self::new(omega, m)
    }

    /// Running-maximum envelope of a resolvent scan.
    pub fn from_scan(scan: &ResolventScan) -> Result<Self> {
        let mut omega = Vec::new();
        let mut m = Vec::new();
        let mut best = 0.0f64;
        for ((&w, &n), &f) in scan.grid.iter().zip(&scan.norms).zip(&scan.flags) {
            if f || w <= 0.0 {
                continue;
            }
            best = best.max(n);
            omega.push(w);
            m.push(best);
        }
        Self::new(omega, m)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.omega[0], *self.omega.last().expect("nonempty"))
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(w >= lo * (1.0 - 1e-12) && w <= hi * (1.0 + 1e-12)) {
            return Err(Error::OutOfTable(w));
        }
        let w = w.clamp(lo, hi);
        let j = self.omega.partition_point(|&x| x <= w).clamp(1, self.omega.len() - 1);
        let (x0, x1) = (self.omega[j - 1].ln(), self.omega[j].ln());
        let (y0, y1) = (self.m[j - 1].ln(), self.m[j].ln());
        let s = (w.ln() - x0) / (x1 - x0);
        Ok((y0 + s * (y1 - y0)).exp())
    }
}

/// `M_log(ω) = M(ω) (log(1 + M(ω)) + log(1 + ω))`.
pub fn m_log(table: &MTable, w: f64) -> Result<f64> {
    let m = table.eval(w)?;
    Ok(m * ((1.0 + m).ln() + (1.0 + w).ln()))
}

/// Inverse of [`m_log`] by bisection.
pub fn m_log_inverse(table: &MTable, t: f64) -> Result<f64> {
    let (mut lo, mut hi) = table.range();
    let (f_lo, f_hi) = (m_log(table, lo)?, m_log(table, hi)?);
    if !(t >= f_lo && t <= f_hi) {
        return Err(Error::OutOfRange(t));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if m_log(table, mid)? < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DecayKind {
    Exponential { rate: f64 },
    Polynomial { alpha: f64 },
    NonUniform { table: MTable },
}

/// Predicted or fitted decay law `‖x(t)‖ ≤ M_e · rate(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    #[serde(flatten)]
    pub kind: DecayKind,
    pub m_e: f64,
    /// Time scaling `c` inside `M_log^{-1}(c t)`.
    pub c: f64,
    pub fit_residual: f64,
    pub band: (f64, f64),
}

impl DecayModel {
    pub fn is_polynomial(&self) -> bool {
        matches!(self.kind, DecayKind::Polynomial { .. })
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.kind, DecayKind::Exponential { .. })
    }

    /// Evaluates the bound at time `t > 0`.
    pub fn bound(&self, t: f64) -> f64 {
        match &self.kind {
            DecayKind::Exponential { rate } => self.m_e * (-rate * t).exp(),
            DecayKind::Polynomial { alpha } => self.m_e * t.powf(-1.0 / alpha),
            DecayKind::NonUniform { table } => {
                let (_, hi) = table.range();
                let top = m_log(table, hi).unwrap_or(f64::INFINITY);
                let w = m_log_inverse(table, (self.c * t).min(top)).unwrap_or(table.range().0);
                self.m_e / w
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

pub enum DecayInput<'a> {
    Scan { scan: &'a ResolventScan, abscissa: f64 },
    Alpha(f64),
}

/// Classifies the decay implied by a resolvent scan or a known growth exponent.
pub fn predict_decay(input: DecayInput<'_>) -> DecayModel {
    match input {
        DecayInput::Alpha(alpha) => DecayModel {
            kind: DecayKind::Polynomial { alpha },
            m_e: 1.0,
            c: 1.0,
            fit_residual: 0.0,
            band: (0.0, f64::INFINITY),
        },
        DecayInput::Scan { scan, abscissa } => {
            let band = scan.band();
            let fit = fit_growth_exponent(scan, band);
            match fit {
                Ok(f) if f.alpha >= BOUNDED_ALPHA => DecayModel {
                    kind: DecayKind::Polynomial { alpha: f.alpha },
                    m_e: 1.0,
                    c: 1.0,
                    fit_residual: f.residual,
                    band,
                },
                _ if abscissa < 0.0 && scan.flags.iter().all(|f| !f) => DecayModel {
                    kind: DecayKind::Exponential { rate: -abscissa },
                    m_e: scan.sup_norm().max(1.0),
                    c: 1.0,
                    fit_residual: fit.map(|f| f.residual).unwrap_or(0.0),
                    band,
                },
                _ => {
                    let table = MTable::from_scan(scan)
                        .unwrap_or(MTable { omega: vec![band.0.max(1e-6), band.1.max(1.0)], m: vec![1.0, 1.0] });
                    DecayModel { kind: DecayKind::NonUniform { table }, m_e: 1.0, c: 1.0, fit_residual: f64::NAN, band }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmpiricalDecay {
    pub times: Vec<f64>,
    /// `‖x(t)‖ / ‖A x_0‖`.
    pub ratios: Vec<f64>,
    pub exponential: Option<LineFit>,
    pub polynomial: Option<LineFit>,
    pub model: DecayModel,
}

/// Simulates `ẋ = A x` from `x_0 = A^{-1} y_0` with random `y_0` and fits the decay.
pub fn empirical_decay(a: &CMatrix, seed: u64, t_final: f64, dt: f64) -> Result<EmpiricalDecay> {
    let n = a.nrows();
    let mut rng = StdRng::seed_from_u64(seed);
    let real = numerics::is_real(a);
    let y0 = CVector::from_fn(n, |_, _| {
        let re = rng.gen_range(-1.0..1.0);
        let im = if real { 0.0 } else { rng.gen_range(-1.0..1.0) };
        c64(re, im)
    });
    let x0 = solve_linear(a, &CMatrix::from_column_slice(n, 1, y0.as_slice()))
        .map_err(|_| Error::SpectrumHit("0".into()))?
        .column(0)
        .into_owned();
    let scale = y0.norm();
    let stepper = MidpointStepper::new(a, &CMatrix::zeros(n, 0), dt, true)?;
    let steps = (t_final / dt).round() as usize;
    let mut x = x0;
    let mut times = vec![0.0];
    let mut ratios = vec![x.norm() / scale];
    for k in 1..=steps {
        x = stepper.step(&x, None);
        times.push(k as f64 * dt);
        ratios.push(x.norm() / scale);
    }
    let sel: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 0.25 * t_final).collect();
    let (tx, ry): (Vec<f64>, Vec<f64>) = sel.iter().map(|&i| (times[i], ratios[i])).unzip();
    let exponential = fit_exponential(&tx, &ry);
    let polynomial = fit_power_law(&tx, &ry);
    let band = (0.25 * t_final, t_final);
    let model =
        choose_model(exponential, polynomial, band).ok_or_else(|| Error::InsufficientData("decay fit".into()))?;
    Ok(EmpiricalDecay { times, ratios, exponential, polynomial, model })
}

/// Picks the better of an exponential and a power-law fit by residual.
pub(crate) fn choose_model(exp: Option<LineFit>, poly: Option<LineFit>, band: (f64, f64)) -> Option<DecayModel> {
    let poly_ok = poly.filter(|p| p.slope < 0.0);
    match (exp, poly_ok) {
        (Some(e), Some(p)) if p.residual < e.residual => Some(polynomial_model(p, band)),
        (Some(e), _) => Some(DecayModel {
            kind: DecayKind::Exponential { rate: -e.slope },
            m_e: e.intercept.exp(),
            c: 1.0,
            fit_residual: e.residual,
            band,
        }),
        (None, Some(p)) => Some(polynomial_model(p, band)),
        (None, None) => None,
    }
}

fn polynomial_model(p: LineFit, band: (f64, f64)) -> DecayModel {
    DecayModel {
        kind: DecayKind::Polynomial { alpha: -1.0 / p.slope },
        m_e: p.intercept.exp(),
        c: 1.0,
        fit_residual: p.residual,
        band,
    }
}

/// Scalar-in-frequency law used by the hypothesis checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Law {
    Const(f64),
    /// `coef · (shift + ω)^exponent`.
    Power {
        coef: f64,
        shift: f64,
        exponent: f64,
    },
    Table(MTable),
}

impl Law {
    pub fn eval(&self, w: f64) -> Result<f64> {
        match self {
            Law::Const(v) => Ok(*v),
            Law::Power { coef, shift, exponent } => Ok(coef * (shift + w).powf(*exponent)),
            Law::Table(t) => t.eval(w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqCheck {
    pub omega: f64,
    pub value: f64,
    pub pass: bool,
}

fn re_min(m: &CMatrix) -> f64 {
    min_hermitian_part_eig(m)
}

fn controller_g(ctrl: &ControllerRealization, w: f64) -> Result<CMatrix> {
    ctrl.as_system(ctrl.d_c1.clone())?.transfer(c64(0.0, w))
}

fn is_controller_freq(ctrl: &ControllerRealization, w: f64) -> bool {
    ctrl.frequencies.iter().any(|&f| (f - w).abs() <= FREQ_TOL * (1.0 + w.abs()))
}

/// Imaginary-axis eigenvalues of `A_c` (as frequencies).
fn imaginary_axis_frequencies(a_c: &CMatrix) -> Result<Vec<f64>> {
    let tol = 1e-9 * (1.0 + norm2(a_c));
    Ok(spectrum(a_c)?.into_iter().filter(|z| z.re.abs() <= tol).map(|z| z.im).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongHypothesesReport {
    pub spectrum_matches: bool,
    pub cond1: Vec<FreqCheck>,
    pub cond2_checked: usize,
    pub cond2_vacuous: bool,
    pub cond2_failures: Vec<f64>,
    pub cond3: Vec<FreqCheck>,
}

impl StrongHypothesesReport {
    pub fn all_pass(&self) -> bool {
        self.spectrum_matches
            && self.cond1.iter().all(|c| c.pass)
            && self.cond2_failures.is_empty()
            && self.cond3.iter().all(|c| c.pass)
    }
}

/// Sufficient conditions for strong closed-loop stability of a pre-stabilized plant
/// with the controller `(A_c, B_c, C_c, D_c1)`.
pub fn check_strong_hypotheses(
    plant_s: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    grid: &[f64],
) -> Result<StrongHypothesesReport> {
    let p = ctrl.p();
    let axis = imaginary_axis_frequencies(&ctrl.a_c)?;
    let spectrum_matches = axis.iter().all(|&w| is_controller_freq(ctrl, w))
        && ctrl.frequencies.iter().all(|&f| axis.iter().any(|&w| (w - f).abs() <= 1e-8 * (1.0 + f.abs())));
    let mut cond1 = Vec::new();
    for &w in &ctrl.frequencies {
        let value = match plant_s.transfer(c64(0.0, w)) {
            Ok(pw) => re_min(&pw),
            Err(_) => f64::NAN,
        };
        cond1.push(FreqCheck { omega: w, value, pass: value > 1e-10 });
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut ev: Option<TransferEvaluator> = None;
    for &w in grid {
        if is_controller_freq(ctrl, w) {
            continue;
        }
        let g = controller_g(ctrl, w)?;
        let re_g = hermitian_part(&g);
        if norm2(&re_g) > 1e-10 * (1.0 + norm2(&g)) {
            continue;
        }
        checked += 1;
        if ev.is_none() {
            ev = Some(TransferEvaluator::new(plant_s)?);
        }
        let ok = match ev.as_ref().expect("initialized").eval(c64(0.0, w)) {
            Ok(pw) => min_singular_value(&(identity(p) + &pw * &g))? > 1e-10,
            Err(_) => false,
        };
        if !ok {
            failures.push(w);
        }
    }
    let mut cond3 = Vec::new();
    let d_samples = [0.1, 1.0, 10.0];
    for &w in &ctrl.frequencies {
        let mut worst = f64::INFINITY;
        for &mu in &d_samples {
            let d0 = identity(p) * c64(mu, 0.0);
            let inner = solve_linear(&(identity(p) + &ctrl.d_c1 * &d0), &identity(p))?;
            let a = &ctrl.a_c - &ctrl.b_c * &d0 * inner * &ctrl.c_c;
            let m = identity(ctrl.n_c()) * c64(0.0, w) - a;
            worst = worst.min(min_singular_value(&m)?);
        }
        cond3.push(FreqCheck { omega: w, value: worst, pass: worst > 1e-10 });
    }
    Ok(StrongHypothesesReport {
        spectrum_matches,
        cond1,
        cond2_checked: checked,
        cond2_vacuous: checked == 0,
        cond2_failures: failures,
        cond3,
    })
}

/// Frequency set `Ω` of the exponential-stability theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrequencySet {
    All,
    Neighborhoods { centers: Vec<f64>, radius: f64 },
}

impl FrequencySet {
    pub fn contains(&self, w: f64) -> bool {
        match self {
            FrequencySet::All => true,
            FrequencySet::Neighborhoods { centers, radius } => centers.iter().any(|&c| (w - c).abs() < *radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialHypothesesReport {
    pub plant_abscissa: f64,
    pub gamma_on_omega: f64,
    pub gamma_ok: bool,
    pub axis_spectrum_in_omega: bool,
    pub sup_controller_resolvent: f64,
    pub cond2_checked: usize,
    pub cond2_failures: Vec<f64>,
    pub cond3_abscissae: Vec<(f64, f64)>,
}

impl ExponentialHypothesesReport {
    pub fn all_pass(&self) -> bool {
        self.plant_abscissa < 0.0
            && self.gamma_ok
            && self.axis_spectrum_in_omega
            && self.sup_controller_resolvent.is_finite()
            && self.cond2_failures.is_empty()
            && self.cond3_abscissae.iter().all(|(_, a)| *a < 0.0)
    }
}

/// Sufficient conditions for exponential closed-loop stability.
#[allow(clippy::too_many_arguments)]
pub fn check_exponential_hypotheses(
    plant_s: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    omega_set: &FrequencySet,
    gamma: f64,
    delta: f64,
    gamma_0: f64,
    grid: &[f64],
) -> Result<ExponentialHypothesesReport> {
    let p = ctrl.p();
    let plant_abscissa = spectral_abscissa(plant_s.a())?;
    let axis = imaginary_axis_frequencies(&ctrl.a_c)?;
    let axis_spectrum_in_omega = axis.iter().all(|&w| omega_set.contains(w));
    let mut gamma_on_omega = f64::INFINITY;
    let mut sup_res: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    let ev = TransferEvaluator::new(plant_s)?;
    for &w in grid {
        let pw = ev.eval(c64(0.0, w))?;
        let re_p = re_min(&pw);
        if omega_set.contains(w) {
            gamma_on_omega = gamma_on_omega.min(re_p);
            continue;
        }
        checked += 1;
        let shifted = identity(ctrl.n_c()) * c64(0.0, w) - &ctrl.a_c;
        let s = min_singular_value(&shifted)?;
        sup_res = sup_res.max(if s <= 1e-12 { f64::INFINITY } else { 1.0 / s });
        let g = controller_g(ctrl, w)?;
        let gp = norm2(&(&g * &pw));
        let gamma_w = re_p.max(0.0);
        let d_w = re_min(&g).max(0.0);
        if !(gp <= delta || gamma_w + d_w >= gamma_0) {
            failures.push(w);
        }
    }
    let d = plant_s.d();
    let mut cond3 = Vec::new();
    for mu in [0.25, 0.5, 0.75] {
        let k = d * c64(mu, 0.0);
        let inner = solve_linear(&(identity(p) + &k * &ctrl.d_c1), &k)?;
        let a = &ctrl.a_c - &ctrl.b_c * inner * &ctrl.c_c;
        cond3.push((mu, spectral_abscissa(&a)?));
    }
    Ok(ExponentialHypothesesReport {
        plant_abscissa,
        gamma_on_omega,
        gamma_ok: gamma_on_omega >= gamma,
        axis_spectrum_in_omega,
        sup_controller_resolvent: sup_res,
        cond2_checked: checked,
        cond2_failures: failures,
        cond3_abscissae: cond3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonuniformHypothesesReport {
    pub pinv_checks: Vec<FreqCheck>,
    pub min_gap: f64,
    pub gap_ok: bool,
    pub h_required: bool,
    pub gamma_checks_failed: Vec<f64>,
    pub min_re_p_on_clusters: f64,
    pub m_table: Option<MTable>,
}

impl NonuniformHypothesesReport {
    pub fn all_pass(&self) -> bool {
        self.pinv_checks.iter().all(|c| c.pass)
            && !self.h_required
            && self.gamma_checks_failed.is_empty()
            && self.min_re_p_on_clusters > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonuniformLaws {
    pub gamma: Law,
    pub g: Law,
    pub h: Option<Law>,
    /// `ω_γ`: the `γ` bound is required for `|ω| ≥ ω_γ`.
    pub omega_gamma: f64,
    pub m_0: f64,
}

/// Checks the hypotheses of the non-uniform stability theorem and tabulates `M = M_0 g h / γ`.
pub fn check_nonuniform_hypotheses(
    plant_s: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    eps: f64,
    laws: &NonuniformLaws,
) -> Result<NonuniformHypothesesReport> {
    let mut pinv_checks = Vec::new();
    for &w in &ctrl.frequencies {
        let (ck, _) = ctrl.mode_gain(w)?;
        let norm = pseudoinverse_norm(&ck, 1e-12).unwrap_or(f64::INFINITY);
        let bound = laws.g.eval(w.abs())?;
        pinv_checks.push(FreqCheck { omega: w, value: norm * norm, pass: norm * norm <= bound * (1.0 + 1e-9) });
    }
    let mut freqs = ctrl.frequencies.clone();
    freqs.sort_by(|a, b| a.total_cmp(b));
    let min_gap = freqs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let gap_ok = min_gap > 2.0 * eps;
    let h_required = !gap_ok && laws.h.is_none();
    let m_pts = 12;
    let mut failed = Vec::new();
    let mut min_re = f64::INFINITY;
    let ev = TransferEvaluator::new(plant_s)?;
    for &wk in &freqs {
        for j in -m_pts..=m_pts {
            let w = wk + eps * j as f64 / (m_pts + 1) as f64;
            let pw = ev.eval(c64(0.0, w))?;
            let re_p = re_min(&pw);
            min_re = min_re.min(re_p);
            if w.abs() >= laws.omega_gamma && re_p < laws.gamma.eval(w.abs())? {
                failed.push(w);
            }
        }
    }
    let w_max = freqs.iter().fold(1.0f64, |m, w| m.max(w.abs())) * 2.0;
    let h = laws.h.clone().unwrap_or(Law::Const(1.0));
    let m_table = MTable::from_fn(1e-2, w_max, 200, |w| {
        laws.m_0 * laws.g.eval(w).unwrap_or(f64::NAN) * h.eval(w).unwrap_or(f64::NAN)
            / laws.gamma.eval(w).unwrap_or(f64::NAN)
    })
    .ok();
    Ok(NonuniformHypothesesReport {
        pinv_checks,
        min_gap,
        gap_ok,
        h_required,
        gamma_checks_failed: failed,
        min_re_p_on_clusters: min_re,
        m_table,
    })
}

#[derive(Debug, Clone)]
pub struct FeedbackDecayReport {
    pub abscissa: f64,
    pub scan: ResolventScan,
    pub fit: Option<GrowthFit>,
}

/// `A_c^{cl} = A_c - B_c (I + D_c)^{-1} C_c`.
pub fn feedback_generator(ctrl: &ControllerRealization) -> Result<CMatrix> {
    let p = ctrl.p();
    let inner = solve_linear(&(identity(p) + ctrl.d_c()), &ctrl.c_c)?;
    Ok(&ctrl.a_c - &ctrl.b_c * inner)
}

/// Abscissa, resolvent scan and growth fit of the controller under unit output feedback.
pub fn check_feedback_decay(ctrl: &ControllerRealization, opts: &ScanOptions) -> Result<FeedbackDecayReport> {
    let a = feedback_generator(ctrl)?;
    let abscissa = spectral_abscissa(&a)?;
    let scan = scan_matrix(&a, opts)?;
    let fit = fit_growth_exponent(&scan, scan.band()).ok();
    Ok(FeedbackDecayReport { abscissa, scan, fit })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NecessityVerdict {
    /// Bounded table: an exponentially stable closed loop is not excluded.
    Bounded,
    /// Growing table: the closed loop cannot be exponentially stable.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityReport {
    pub table: Vec<(f64, f64)>,
    pub sup: f64,
    pub growth_exponent: Option<f64>,
    pub monotone_tail: bool,
    pub verdict: NecessityVerdict,
}

/// Tabulates `‖P_S(iω_k)^{-1}‖` and decides whether it grows across the truncation.
pub fn check_exp_necessity(plant_s: &StateSpaceSystem, freqs: &[f64]) -> Result<NecessityReport> {
    let mut table = Vec::new();
    for &w in freqs {
        let pw = plant_s.transfer(c64(0.0, w))?;
        let inv = solve_linear(&pw, &identity(pw.nrows())).map_err(|_| Error::TransmissionZero(w))?;
        table.push((w, norm2(&inv)));
    }
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sup = table.iter().map(|t| t.1).fold(0.0, f64::max);
    let pos: Vec<(f64, f64)> = table.iter().copied().filter(|t| t.0 > 0.0).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pos.iter().copied().unzip();
    // The offset absorbs the constant part contributed by the pre-stabilizing feedthrough.
    let fit = fit_offset_power_law(&x, &y, -2.0, 2.0);
    let growth_exponent = fit.map(|f| f.exponent);
    let growing = fit.is_some_and(|f| f.coef > 0.0 && f.exponent >= 0.1);
    let tail = &pos[pos.len() / 2..];
    let monotone_tail = tail.len() >= 2 && tail.windows(2).all(|w| w[1].1 > w[0].1);
    let verdict = if growing && monotone_tail { NecessityVerdict::Unbounded } else { NecessityVerdict::Bounded };
    Ok(NecessityReport { table, sup, growth_exponent, monotone_tail, verdict })
}

/// Evaluates `re P(iω)`'s smallest eigenvalue; convenience for reports.
pub fn re_transfer_min(sys: &StateSpaceSystem, w: f64) -> Result<f64> {
    Ok(re_min(&sys.transfer(C64::new(0.0, w))?))
}
