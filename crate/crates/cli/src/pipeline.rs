//! Resolves a run configuration, runs the requested checks and writes the artifacts.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use passreg::closed_loop::{assemble, check_contraction, ClosedLoopSystem};
use passreg::controllers::{
    build_diagonal, build_fin_dim, build_fin_dim_real, build_transport, scalar_gain, verify_internal_model,
    ControllerRealization, SignalSpec,
};
use passreg::examples::{check_hypotheses, ExampleSetup, HypothesisReport};
use passreg::fit::fit_power_law;
use passreg::io::csv_table;
use passreg::lti::StateSpaceSystem;
use passreg::numerics::{spectral_abscissa, spectrum, CVector};
use passreg::regulation::{
    compatible_initial_state, compute_pi_ext, compute_pi_ext_alt, eval_signal, fit_error_rate, pi_ext_max_difference,
    pointwise_error_decay, simulate_with, sliding_error_integral, SimulateOptions, TrajectoryResult,
};
use passreg::stability::{
    check_exp_necessity, check_exponential_hypotheses, check_strong_hypotheses, fit_growth_exponent, predict_decay,
    scan_matrix, scan_resolvent, DecayInput, DecayKind, DecayModel, FrequencySet, Law, NecessityVerdict,
    NonuniformLaws, ResolventScan, ScanOptions,
};

use crate::config::{
    Analysis, Boundedness, ControllerSource, DecayClass, GrowthWindow, HypothesesConfig, InitialState,
    InitialStateKind, NamedWindow, PlantSource, RecipeConfig, Refine, RunConfig, ScanTarget,
};
use crate::svg::{line_chart, Chart};

const DEFAULT_T_FINAL: f64 = 10.0;
const DEFAULT_DT: f64 = 1e-3;
/// Relative distance to `kπ` below which a plant eigenfrequency counts as resolved.
const RESOLVED_REL: f64 = 0.05;
/// Draws per accepted sample before the robustness suite gives up.
const MAX_DRAWS_PER_SAMPLE: usize = 10;

/// Plant, controller and signal after resolving the config.
pub struct Setup {
    pub plant: StateSpaceSystem,
    pub controller: ControllerRealization,
    pub signal: SignalSpec,
    pub x_e0: CVector,
    pub t_final: f64,
    pub dt: f64,
    laws: Option<NonuniformLaws>,
    example: Option<ExampleSetup>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn build_recipe(r: &RecipeConfig, p: usize) -> Result<ControllerRealization> {
    let g = |k: f64| scalar_gain(k, p);
    Ok(match r {
        RecipeConfig::FinDim { frequencies, gain, d_c1, d_c2 } => {
            build_fin_dim(frequencies, p, &vec![g(*gain); frequencies.len()], g(*d_c1), g(*d_c2))?
        }
        RecipeConfig::FinDimReal { frequencies, gain, d_c1, d_c2 } => {
            build_fin_dim_real(frequencies, p, &vec![g(*gain); frequencies.len()], g(*d_c1), g(*d_c2))?
        }
        RecipeConfig::Transport { tau, cells, d_c1, d_c2 } => build_transport(*tau, p, *cells, g(*d_c1), g(*d_c2))?,
        RecipeConfig::Diagonal { n_s, omega_0, c, eps, d_c1, d_c2 } => {
            build_diagonal(*n_s, *omega_0, p, *c, *eps, g(*d_c1), g(*d_c2))?
        }
    })
}

fn stack(x0: &CVector, z0: &CVector) -> CVector {
    let mut v = CVector::zeros(x0.len() + z0.len());
    v.rows_mut(0, x0.len()).copy_from(x0);
    v.rows_mut(x0.len(), z0.len()).copy_from(z0);
    v
}

pub fn resolve(cfg: &RunConfig) -> Result<Setup> {
    let base = cfg.example.map(ExampleSetup::by_model).transpose()?;
    let plant = match &cfg.plant {
        Some(PlantSource::File(f)) => StateSpaceSystem::from_json(&read(&f.file)?)?,
        Some(PlantSource::Model(spec)) => spec.build()?,
        None => base.as_ref().expect("validated").plant.clone(),
    };
    let controller = match &cfg.controller {
        Some(ControllerSource::File(f)) => ControllerRealization::from_json(&read(&f.file)?)?,
        Some(ControllerSource::Recipe(r)) => build_recipe(r, plant.p())?,
        None => base.as_ref().expect("validated").controller.clone(),
    };
    let signal = match &cfg.signal {
        Some(f) => SignalSpec::from_json(&read(&f.file)?)?,
        None => base.as_ref().expect("validated").signal.clone(),
    };
    let overridden = cfg.plant.is_some() || cfg.controller.is_some();
    let n_e = plant.n() + controller.n_c();
    let x_e0 = match &cfg.initial_state {
        Some(InitialState::File(f)) => {
            let v: passreg::io::VectorJson =
                serde_json::from_str(&read(&f.file)?).with_context(|| format!("parsing {}", f.file.display()))?;
            CVector::from(&v)
        }
        Some(InitialState::Named(k)) => initial_state(*k, base.as_ref(), &plant, &controller, &signal)?,
        None => {
            let k = if base.is_some() && !overridden { InitialStateKind::Example } else { InitialStateKind::Zero };
            initial_state(k, base.as_ref(), &plant, &controller, &signal)?
        }
    };
    if x_e0.len() != n_e {
        bail!("initial state has length {}, closed loop has {n_e} states", x_e0.len());
    }
    let t_final = cfg.t_final.or(base.as_ref().map(|b| b.t_final)).unwrap_or(DEFAULT_T_FINAL);
    let dt = cfg.dt.or(base.as_ref().map(|b| b.dt)).unwrap_or(DEFAULT_DT);
    let laws = if cfg.controller.is_none() { base.as_ref().and_then(|b| b.laws.clone()) } else { None };
    Ok(Setup { plant, controller, signal, x_e0, t_final, dt, laws, example: base })
}

fn initial_state(
    kind: InitialStateKind,
    base: Option<&ExampleSetup>,
    plant: &StateSpaceSystem,
    ctrl: &ControllerRealization,
    sig: &SignalSpec,
) -> Result<CVector> {
    let n = plant.n();
    let plant_part = || match base {
        Some(b) if b.plant.n() == n => b.x_e0.rows(0, n).into_owned(),
        _ => CVector::zeros(n),
    };
    match kind {
        InitialStateKind::Zero => Ok(CVector::zeros(n + ctrl.n_c())),
        InitialStateKind::Example => {
            let b = base.context("initial_state `example` needs an example")?;
            Ok(b.x_e0.clone())
        }
        InitialStateKind::Compatible => {
            let x0 = plant_part();
            let (_, y0) = eval_signal(sig, 0.0);
            let z0 = compatible_initial_state(plant, ctrl, &x0, &y0)?;
            Ok(stack(&x0, &z0))
        }
    }
}

/// One entry of the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub threshold: Value,
    pub detail: String,
}

fn check(name: &str, pass: bool, value: f64, threshold: Value, detail: String) -> Check {
    Check { name: name.into(), pass, value: value.is_finite().then_some(value), threshold, detail }
}

fn failed(name: &str, threshold: Value, err: impl std::fmt::Display) -> Check {
    Check { name: name.into(), pass: false, value: None, threshold, detail: format!("error: {err}") }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub hypotheses: Option<HypothesisReport>,
    pub decay: Option<DecayModel>,
    pub all_pass: bool,
}

/// Everything a run produced.
pub struct RunOutput {
    pub verdict: Verdict,
    pub scan: Option<ResolventScan>,
    pub trajectory: Option<TrajectoryResult>,
    pub sliding: Option<Vec<(f64, f64)>>,
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect()
}

fn hypothesis_band(ctrl: &ControllerRealization) -> f64 {
    ctrl.frequencies.iter().fold(0.0f64, |m, w| m.max(w.abs())) + 2.0 * PI
}

fn run_hypotheses(cfg: &RunConfig, s: &Setup) -> Result<HypothesisReport> {
    let plant_s = s.plant.output_feedback(&s.controller.d_c2)?;
    let w_top = hypothesis_band(&s.controller);
    match &cfg.hypotheses {
        HypothesesConfig::Auto => {
            let base = s
                .example
                .as_ref()
                .context("`hypotheses.theorem = auto` needs an example; choose `strong` or `exponential`")?;
            let setup = ExampleSetup {
                model: base.model,
                plant: s.plant.clone(),
                controller: s.controller.clone(),
                signal: s.signal.clone(),
                x_e0: s.x_e0.clone(),
                t_final: s.t_final,
                dt: s.dt,
                laws: s.laws.clone(),
            };
            Ok(check_hypotheses(&setup)?)
        }
        HypothesesConfig::Strong { grid_points } => {
            let grid = uniform_grid(-w_top, w_top, *grid_points);
            Ok(HypothesisReport::Strong(check_strong_hypotheses(&plant_s, &s.controller, &grid)?))
        }
        HypothesesConfig::Exponential { radius, gamma, delta, gamma_0, grid_points } => {
            let grid = uniform_grid(-w_top, w_top, *grid_points);
            let set = FrequencySet::Neighborhoods { centers: s.controller.frequencies.clone(), radius: *radius };
            Ok(HypothesisReport::Exponential(check_exponential_hypotheses(
                &plant_s,
                &s.controller,
                &set,
                *gamma,
                *delta,
                *gamma_0,
                &grid,
            )?))
        }
    }
}

fn positive_eigenfrequencies(a: &passreg::numerics::CMatrix) -> Result<Vec<f64>> {
    let mut w: Vec<f64> = spectrum(a)?.iter().map(|z| z.im).filter(|w| *w > 0.0).collect();
    w.sort_by(|a, b| a.total_cmp(b));
    Ok(w)
}

struct ScanRun {
    scan: ResolventScan,
    abscissa: f64,
    plant_freqs: Vec<f64>,
}

fn run_scan(cfg: &RunConfig, s: &Setup, cl: &ClosedLoopSystem) -> Result<ScanRun> {
    let sc = &cfg.scan;
    let plant_s = s.plant.output_feedback(&s.controller.d_c2)?;
    let plant_freqs = positive_eigenfrequencies(plant_s.a())?;
    let w_ctrl = s.controller.frequencies.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let omega_max = sc.omega_max.unwrap_or(2.0 * w_ctrl + 10.0);
    let mut opts = ScanOptions::new(sc.omega_min, omega_max, sc.samples);
    opts = match sc.refine {
        Refine::None => opts,
        Refine::Controller => {
            let c: Vec<f64> = s.controller.frequencies.iter().map(|w| w.abs()).collect();
            opts.refine(&c, sc.halfwidth)
        }
        Refine::Plant => opts.refine(&plant_freqs, sc.halfwidth),
    };
    let (scan, abscissa) = match sc.target {
        ScanTarget::ClosedLoop => (scan_resolvent(cl, &opts)?, spectral_abscissa(&cl.a_e)?),
        ScanTarget::StabilizedPlant => (scan_matrix(plant_s.a(), &opts)?, spectral_abscissa(plant_s.a())?),
    };
    Ok(ScanRun { scan, abscissa, plant_freqs })
}

fn growth_window(cfg: &RunConfig, run: &ScanRun) -> (f64, f64) {
    match cfg.thresholds.growth_window {
        GrowthWindow::Range([a, b]) => (a, b),
        GrowthWindow::Named(NamedWindow::Full) => run.scan.band(),
        GrowthWindow::Named(NamedWindow::Resolved) => {
            let k = run
                .plant_freqs
                .iter()
                .enumerate()
                .take_while(|(i, w)| ((**w - PI * (*i + 1) as f64) / (PI * (*i + 1) as f64)).abs() <= RESOLVED_REL)
                .count();
            (run.scan.band().0, (k as f64 + 0.5) * PI)
        }
    }
}

fn decay_class(m: &DecayModel) -> DecayClass {
    match m.kind {
        DecayKind::Exponential { .. } => DecayClass::Exponential,
        DecayKind::Polynomial { .. } => DecayClass::Polynomial,
        DecayKind::NonUniform { .. } => DecayClass::NonUniform,
    }
}

fn describe(k: &DecayKind) -> String {
    match k {
        DecayKind::Exponential { rate } => format!("exponential, rate {rate:.4}"),
        DecayKind::Polynomial { alpha } => format!("polynomial, alpha {alpha:.4}"),
        DecayKind::NonUniform { table } => format!("non-uniform, M tabulated at {} points", table.omega.len()),
    }
}

fn class_name(c: DecayClass) -> Value {
    serde_json::to_value(c).unwrap_or(Value::Null)
}

/// Growth exponent of a frequency law, when it is a power law or constant.
fn law_exponent(l: &Law) -> Option<f64> {
    match l {
        Law::Const(_) => Some(0.0),
        Law::Power { exponent, .. } => Some(*exponent),
        Law::Table(_) => None,
    }
}

/// Decay law implied by passing hypotheses.
fn predict_from_hypotheses(
    hyp: Option<&HypothesisReport>,
    laws: Option<&NonuniformLaws>,
    cl: &ClosedLoopSystem,
    w_top: f64,
) -> Result<Option<(DecayModel, &'static str)>> {
    match hyp {
        Some(HypothesisReport::Exponential(r)) if r.all_pass() => {
            let a = spectral_abscissa(&cl.a_e)?;
            if a < 0.0 {
                let model = DecayModel {
                    kind: DecayKind::Exponential { rate: -a },
                    m_e: 1.0,
                    c: 1.0,
                    fit_residual: 0.0,
                    band: (0.0, w_top),
                };
                return Ok(Some((model, "exponential hypotheses; rate from the spectral abscissa of A_e")));
            }
        }
        Some(HypothesisReport::Nonuniform(r)) if r.all_pass() => {
            let Some(t) = &r.m_table else { return Ok(None) };
            // Power laws give the exponent of M exactly; tables are fitted over their top decade.
            let exact = laws.and_then(|l| {
                let h = l.h.as_ref().map_or(Some(0.0), law_exponent)?;
                Some(law_exponent(&l.g)? + h - law_exponent(&l.gamma)?)
            });
            let (hi_w, residual, alpha) = match exact {
                Some(a) => (t.range().1, 0.0, Some(a)),
                None => {
                    let top = t.range().1;
                    let (x, y): (Vec<f64>, Vec<f64>) =
                        t.omega.iter().zip(&t.m).filter(|(w, _)| **w >= top / 10.0).map(|(w, m)| (*w, *m)).unzip();
                    match fit_power_law(&x, &y) {
                        Some(f) => (top, f.residual, Some(f.slope)),
                        None => (top, f64::NAN, None),
                    }
                }
            };
            if let Some(alpha) = alpha {
                let model = DecayModel {
                    kind: DecayKind::Polynomial { alpha },
                    m_e: 1.0,
                    c: 1.0,
                    fit_residual: residual,
                    band: (t.range().0, hi_w),
                };
                return Ok(Some((model, "non-uniform hypotheses; growth exponent of M")));
            }
        }
        _ => {}
    }
    Ok(None)
}

fn nearest(curve: &[(f64, f64)], t: f64) -> f64 {
    curve.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs())).map_or(f64::NAN, |p| p.1)
}

/// `I(probe) / max I(early window)` for a sliding error integral.
fn decay_ratio(cfg: &RunConfig, sl: &[(f64, f64)]) -> (f64, f64) {
    let th = &cfg.thresholds;
    let [lo, hi] = th.early_window;
    let early = sl.iter().filter(|p| p.0 >= lo && p.0 <= hi).map(|p| p.1).fold(0.0, f64::max);
    let probe_t = th.probe_time.unwrap_or_else(|| sl.last().map_or(0.0, |p| p.0));
    let probe = nearest(sl, probe_t);
    // An identically zero error has nothing left to decay.
    let ratio = if early == 0.0 && probe == 0.0 { 0.0 } else { probe / early };
    (ratio, probe_t)
}

fn simulate_setup(cl: &ClosedLoopSystem, s: &Setup) -> Result<TrajectoryResult> {
    Ok(simulate_with(
        cl,
        &s.signal,
        &s.x_e0,
        s.t_final,
        s.dt,
        SimulateOptions { store_states: false, allow_real: true },
    )?)
}

pub fn run(cfg: &RunConfig, analyses: &BTreeSet<Analysis>) -> Result<RunOutput> {
    let s = resolve(cfg)?;
    let cl = assemble(&s.plant, &s.controller)?;
    let th = &cfg.thresholds;
    let has = |a: Analysis| analyses.contains(&a);
    let mut checks = Vec::new();

    if has(Analysis::Passivity) {
        let rep = s.plant.check_passive(th.passivity_tol);
        checks.push(check(
            "passivity",
            rep.is_passive,
            rep.max_eig_dissipation_block,
            json!(th.passivity_tol),
            format!(
                "largest eigenvalue of the dissipation block {:.3e}, smallest eigenvalue of re D {:.3e}",
                rep.max_eig_dissipation_block, rep.re_d_min
            ),
        ));
    }
    if has(Analysis::Contraction) {
        let c = check_contraction(&cl);
        checks.push(check(
            "contraction",
            c <= th.contraction_tol,
            c,
            json!(th.contraction_tol),
            format!("largest eigenvalue of the Hermitian part of A_e {c:.3e}"),
        ));
    }
    if has(Analysis::InternalModel) {
        checks.push(match verify_internal_model(&s.controller, &s.signal, s.plant.p()) {
            Ok(list) => {
                let bad: Vec<f64> = list.iter().filter(|c| !c.passes()).map(|c| c.omega).collect();
                check(
                    "internal_model",
                    bad.is_empty(),
                    bad.len() as f64,
                    json!(0),
                    if bad.is_empty() {
                        format!("rank conditions hold at all {} signal frequencies", list.len())
                    } else {
                        format!("rank conditions fail at ω = {bad:?}")
                    },
                )
            }
            Err(e) => failed("internal_model", json!(0), e),
        });
    }

    let mut hypotheses = None;
    if has(Analysis::Hypotheses) || has(Analysis::Decay) {
        match run_hypotheses(cfg, &s) {
            Ok(r) => hypotheses = Some(r),
            Err(e) if has(Analysis::Hypotheses) => checks.push(failed("hypotheses", Value::Null, e)),
            Err(_) => {}
        }
        if has(Analysis::Hypotheses) {
            if let Some(r) = &hypotheses {
                let theorem = match r {
                    HypothesisReport::Exponential(_) => "exponential",
                    HypothesisReport::Strong(_) => "strong",
                    HypothesisReport::Nonuniform(_) => "nonuniform",
                };
                let pass = r.all_pass();
                checks.push(check(
                    "hypotheses",
                    pass,
                    f64::NAN,
                    Value::Null,
                    format!("{theorem} stability hypotheses {}", if pass { "hold" } else { "violated" }),
                ));
            }
        }
    }

    if has(Analysis::Necessity) {
        let expected = th.expected_necessity.unwrap_or(Boundedness::Bounded);
        let exp_val = serde_json::to_value(expected).unwrap_or(Value::Null);
        let freqs: Vec<f64> = s.controller.frequencies.iter().copied().filter(|w| *w > 0.0).collect();
        let res = s
            .plant
            .output_feedback(&s.controller.d_c2)
            .map_err(anyhow::Error::from)
            .and_then(|ps| check_exp_necessity(&ps, &freqs).map_err(anyhow::Error::from));
        checks.push(match res {
            Ok(r) => {
                let got = match r.verdict {
                    NecessityVerdict::Bounded => Boundedness::Bounded,
                    NecessityVerdict::Unbounded => Boundedness::Unbounded,
                };
                check(
                    "necessity",
                    got == expected,
                    r.sup,
                    exp_val,
                    format!(
                        "|P_S(iω_k)^-1| over {} frequencies is {:?}: {:.3}..{:.3}, growth exponent {}",
                        r.table.len(),
                        r.verdict,
                        r.table.first().map_or(f64::NAN, |t| t.1),
                        r.table.last().map_or(f64::NAN, |t| t.1),
                        r.growth_exponent.map_or("n/a".into(), |g| format!("{g:.3}"))
                    ),
                )
            }
            Err(e) => failed("necessity", exp_val, e),
        });
    }

    let w_top = hypothesis_band(&s.controller);
    let hyp_prediction = if has(Analysis::Decay) {
        predict_from_hypotheses(hypotheses.as_ref(), s.laws.as_ref(), &cl, w_top)
    } else {
        Ok(None)
    };
    let scan_for_decay = has(Analysis::Decay) && matches!(hyp_prediction, Ok(None));
    let want_scan = analyses.iter().any(|a| a.needs_scan()) || scan_for_decay;
    let want_sim = analyses.iter().any(|a| a.needs_simulation());
    let (scan_res, sim_res) = std::thread::scope(|sc| {
        let scan_h = want_scan.then(|| sc.spawn(|| run_scan(cfg, &s, &cl)));
        let sim = want_sim.then(|| simulate_setup(&cl, &s));
        (scan_h.map(|h| h.join().expect("scan thread panicked")), sim)
    });

    let scan_run = match scan_res {
        Some(Ok(r)) => Some(r),
        Some(Err(e)) => {
            checks.push(failed("scan", Value::Null, &e));
            None
        }
        None => None,
    };
    if let Some(r) = &scan_run {
        if has(Analysis::Scan) {
            let hits = r.scan.flags.iter().filter(|f| **f).count();
            checks.push(check(
                "scan",
                hits == 0,
                r.scan.sup_norm(),
                json!(0),
                format!(
                    "{} frequencies in [{:.3}, {:.3}], sup norm {:.4}, {hits} spectrum hits, abscissa {:.3e}",
                    r.scan.grid.len(),
                    r.scan.band().0,
                    r.scan.band().1,
                    r.scan.sup_norm(),
                    r.abscissa
                ),
            ));
        }
        if has(Analysis::Growth) {
            let window = growth_window(cfg, r);
            let band = th.growth_band;
            checks.push(match fit_growth_exponent(&r.scan, window) {
                Ok(f) => check(
                    "growth",
                    band.is_none_or(|[lo, hi]| f.alpha >= lo && f.alpha <= hi),
                    f.alpha,
                    json!(band),
                    format!(
                        "growth exponent {:.3} over {} peaks in [{:.3}, {:.3}]",
                        f.alpha,
                        f.peaks.len(),
                        window.0,
                        window.1
                    ),
                ),
                Err(e) => failed("growth", json!(band), e),
            });
        }
    }

    let mut decay = None;
    if has(Analysis::Decay) {
        let threshold = json!({
            "kind": th.expected_decay.map(class_name),
            "alpha_band": th.decay_alpha_band,
        });
        let prediction = hyp_prediction.map(|p| {
            p.or_else(|| {
                scan_run.as_ref().map(|r| {
                    (predict_decay(DecayInput::Scan { scan: &r.scan, abscissa: r.abscissa }), "resolvent scan")
                })
            })
        });
        match prediction {
            Ok(Some((m, source))) => {
                let kind_ok = th.expected_decay.is_none_or(|c| c == decay_class(&m));
                let (alpha, alpha_ok) = match m.kind {
                    DecayKind::Polynomial { alpha } => {
                        (alpha, th.decay_alpha_band.is_none_or(|[lo, hi]| alpha >= lo && alpha <= hi))
                    }
                    DecayKind::Exponential { rate } => (rate, true),
                    DecayKind::NonUniform { .. } => (f64::NAN, true),
                };
                checks.push(check(
                    "decay",
                    kind_ok && alpha_ok,
                    alpha,
                    threshold,
                    format!("{} from {source}", describe(&m.kind)),
                ));
                decay = Some(m);
            }
            Ok(None) => checks.push(check("decay", false, f64::NAN, threshold, "no decay law available".into())),
            Err(e) => checks.push(failed("decay", threshold, e)),
        }
    }

    if has(Analysis::PiExt) {
        let res = compute_pi_ext(&s.plant, &s.controller, &s.signal)
            .and_then(|a| Ok((a, compute_pi_ext_alt(&s.plant, &s.controller, &s.signal)?)));
        checks.push(match res {
            Ok((a, b)) => match pi_ext_max_difference(&a, &b) {
                Some(d) => check(
                    "pi_ext",
                    d <= th.pi_ext_tol,
                    d,
                    json!(th.pi_ext_tol),
                    format!("largest entrywise difference of the two paths over {} frequencies {d:.3e}", a.len()),
                ),
                None => check(
                    "pi_ext",
                    false,
                    f64::NAN,
                    json!(th.pi_ext_tol),
                    "no alternative path is available for this configuration".into(),
                ),
            },
            Err(e) => failed("pi_ext", json!(th.pi_ext_tol), e),
        });
    }

    let mut trajectory = None;
    let mut sliding = None;
    match sim_res {
        Some(Ok(traj)) => {
            let finite = traj.error_norms.iter().chain(&traj.state_norms).all(|v| v.is_finite());
            let e_max = traj.error_norms.iter().copied().fold(0.0, f64::max);
            if has(Analysis::Simulate) {
                checks.push(check(
                    "simulate",
                    finite,
                    e_max,
                    Value::Null,
                    format!(
                        "{} steps of {} with dt = {}, max |e| {e_max:.4}",
                        traj.times.len().saturating_sub(1),
                        traj.scheme,
                        traj.dt
                    ),
                ));
            }
            match sliding_error_integral(&traj, cfg.window) {
                Ok(sl) => {
                    if has(Analysis::Regulation) {
                        regulation_checks(cfg, &traj, &sl, &mut checks);
                    }
                    sliding = Some(sl);
                }
                Err(e) => checks.push(failed("regulation", json!(th.decay_ratio), e)),
            }
            trajectory = Some(traj);
        }
        Some(Err(e)) => checks.push(failed("simulate", Value::Null, e)),
        None => {}
    }

    if has(Analysis::Robustness) {
        checks.push(robustness(cfg, &s).unwrap_or_else(|e| failed("robustness", json!(th.decay_ratio), e)));
    }

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(RunOutput {
        verdict: Verdict { config: cfg.clone(), checks, hypotheses, decay, all_pass },
        scan: scan_run.map(|r| r.scan),
        trajectory,
        sliding,
    })
}

fn describe_fit(sl: &[(f64, f64)], start: f64) -> (Result<DecayModel, passreg::Error>, String) {
    let fit = fit_error_rate(sl, start);
    let text = match &fit {
        Ok(m) => format!("fit of the sliding integral from t = {start}: {}", describe(&m.kind)),
        Err(e) => format!("no fit of the sliding integral from t = {start}: {e}"),
    };
    (fit, text)
}

fn regulation_checks(cfg: &RunConfig, traj: &TrajectoryResult, sl: &[(f64, f64)], checks: &mut Vec<Check>) {
    let th = &cfg.thresholds;
    let (ratio, probe_t) = decay_ratio(cfg, sl);
    let (fit, fit_text) = describe_fit(sl, th.error_fit_start);
    let mut detail = format!(
        "sliding error integral at t = {probe_t} over its maximum on [{}, {}] is {ratio:.4}",
        th.early_window[0], th.early_window[1]
    );
    if th.expected_error_fit.is_none() {
        detail = format!("{detail}; {fit_text}");
    }
    checks.push(check("regulation", ratio <= th.decay_ratio, ratio, json!(th.decay_ratio), detail));
    if th.monotone_tails {
        let tails: Vec<f64> = pointwise_error_decay(traj).iter().map(|w| w.max_error).collect();
        let ok = tails.windows(2).all(|w| w[1] < w[0]);
        checks.push(check(
            "tail_monotone",
            ok,
            tails.len() as f64,
            json!(true),
            format!(
                "max |e| over dyadic windows [{}]",
                tails.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    if let Some(expected) = th.expected_error_fit {
        let value = match fit.as_ref().map(|m| &m.kind) {
            Ok(DecayKind::Exponential { rate }) => *rate,
            Ok(DecayKind::Polynomial { alpha }) => *alpha,
            _ => f64::NAN,
        };
        let pass = fit.as_ref().is_ok_and(|m| decay_class(m) == expected);
        checks.push(check("error_fit", pass, value, class_name(expected), fit_text));
    }
}

fn robustness(cfg: &RunConfig, s: &Setup) -> Result<Check> {
    let th = &cfg.thresholds;
    let mut seed = cfg.seed.unwrap_or(0);
    let mut ratios = Vec::new();
    let mut rejected = 0;
    while ratios.len() < th.robustness_samples {
        if rejected > MAX_DRAWS_PER_SAMPLE * th.robustness_samples {
            bail!("too many perturbations rejected ({rejected})");
        }
        let plant = s.plant.perturb_passive(th.robustness_rel, seed)?;
        seed += 1;
        let cl = assemble(&plant, &s.controller)?;
        if check_contraction(&cl) > th.contraction_tol || spectral_abscissa(&cl.a_e)? >= 0.0 {
            rejected += 1;
            continue;
        }
        let traj = simulate_setup(&cl, s)?;
        let sl = sliding_error_integral(&traj, cfg.window)?;
        ratios.push(decay_ratio(cfg, &sl).0);
    }
    let below = ratios.iter().filter(|r| **r <= th.decay_ratio).count();
    Ok(check(
        "robustness",
        below == ratios.len(),
        below as f64,
        json!(th.decay_ratio),
        format!(
            "{below}/{} perturbed plants meet the decay ratio (ratios {}); {rejected} draws rejected",
            ratios.len(),
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

/// Writes the verdict, CSV tables and charts; returns the written file names.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        files.push(name.to_string());
        Ok(())
    };
    if let Some(traj) = &out.trajectory {
        put("trajectory.csv", &traj.to_csv())?;
        let e: Vec<(f64, f64)> = traj.times.iter().copied().zip(traj.error_norms.iter().copied()).collect();
        let chart = Chart { title: "Tracking error", x_label: "t", y_label: "|e(t)|", log_y: false };
        put("error.svg", &line_chart(&chart, &e))?;
    }
    if let Some(sl) = &out.sliding {
        put("error_integral.csv", &csv_table(&["t", "sliding_integral"], sl.iter().map(|p| vec![p.0, p.1])))?;
        let chart = Chart {
            title: "Sliding integral of the error norm",
            x_label: "t",
            y_label: "integral of |e| over [t, t + window]",
            log_y: true,
        };
        put("error_integral.svg", &line_chart(&chart, sl))?;
    }
    if let Some(scan) = &out.scan {
        put("resolvent_scan.csv", &scan.to_csv())?;
    }
    put("verdict.json", &(serde_json::to_string_pretty(&out.verdict)? + "\n"))?;
    Ok(files)
}
