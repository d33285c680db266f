//! Ready-made plant, controller and signal configurations for the three PDE examples.

use std::f64::consts::PI;

use crate::closed_loop::{assemble, ClosedLoopSystem};
use crate::controllers::{
    build_diagonal, build_fin_dim_real, build_transport, scalar_gain, ControllerRealization, SignalEntry, SignalSpec,
};
use crate::error::{Error, Result};
use crate::lti::StateSpaceSystem;
use crate::numerics::{c64, CVector, C64};
use crate::pde_models::{
    build_heat_2d, build_wave_boundary, build_wave_distributed, heat_state, wave_distributed_state, PdeModel,
};
use crate::regulation::{compatible_initial_state, eval_signal};
use crate::stability::{
    check_exponential_hypotheses, check_nonuniform_hypotheses, check_strong_hypotheses, ExponentialHypothesesReport,
    FrequencySet, Law, NonuniformHypothesesReport, NonuniformLaws, StrongHypothesesReport,
};

#[derive(Debug, Clone)]
pub struct ExampleSetup {
    pub model: PdeModel,
    pub plant: StateSpaceSystem,
    pub controller: ControllerRealization,
    pub signal: SignalSpec,
    pub x_e0: CVector,
    pub t_final: f64,
    pub dt: f64,
    /// Frequency laws for the non-uniform stability check, when the controller has them.
    pub laws: Option<NonuniformLaws>,
}

impl ExampleSetup {
    pub fn closed_loop(&self) -> Result<ClosedLoopSystem> {
        assemble(&self.plant, &self.controller)
    }

    /// The plant under the pre-stabilizing feedback `u = -D_c2 y`.
    pub fn stabilized_plant(&self) -> Result<StateSpaceSystem> {
        self.plant.output_feedback(&self.controller.d_c2)
    }

    pub fn by_model(model: PdeModel) -> Result<Self> {
        match model {
            PdeModel::WaveBoundary => wave_boundary(WaveBoundaryParams::default()),
            PdeModel::WaveDistributed => wave_distributed(WaveDistributedParams::default()),
            PdeModel::Heat2D => heat_2d(HeatParams::default()),
        }
    }
}

fn scalar_entry(omega: f64, y: C64, dim_w: usize) -> SignalEntry {
    SignalEntry { omega, y_ref: CVector::from_element(1, y), w_dist: CVector::zeros(dim_w) }
}

fn stack(x0: CVector, z0: &CVector) -> CVector {
    let n = x0.len();
    let mut v = CVector::zeros(n + z0.len());
    v.rows_mut(0, n).copy_from(&x0);
    v.rows_mut(n, z0.len()).copy_from(z0);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveBoundaryParams {
    pub n: usize,
    /// Transport cells, i.e. retained modes `|k| ≤ (cells - 1)/2`.
    pub cells: usize,
    pub d_c1: f64,
    pub d_c2: f64,
    /// Highest harmonic of the triangle-wave reference.
    pub harmonics: usize,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for WaveBoundaryParams {
    fn default() -> Self {
        Self { n: 100, cells: 21, d_c1: 1.0, d_c2: 1.0, harmonics: 9, t_final: 10.0, dt: 5e-3 }
    }
}

/// Zero-mean triangle wave of period 1 and amplitude 1/2, truncated to odd `k ≤ harmonics`.
pub fn triangle_wave_signal(harmonics: usize) -> Result<SignalSpec> {
    let mut entries = Vec::new();
    for k in (1..=harmonics).filter(|k| k % 2 == 1) {
        let c = 2.0 / (PI * PI * (k * k) as f64);
        entries.push(scalar_entry(2.0 * PI * k as f64, c64(c, 0.0), 0));
        entries.push(scalar_entry(-2.0 * PI * k as f64, c64(c, 0.0), 0));
    }
    SignalSpec::new(entries, true)
}

/// Boundary-controlled wave equation with the periodic transport controller.
pub fn wave_boundary(p: WaveBoundaryParams) -> Result<ExampleSetup> {
    let plant = build_wave_boundary(p.n)?;
    let controller = build_transport(1.0, 1, p.cells, scalar_gain(p.d_c1, 1), scalar_gain(p.d_c2, 1))?;
    let signal = triangle_wave_signal(p.harmonics)?;
    let x_e0 = CVector::zeros(plant.n() + controller.n_c());
    Ok(ExampleSetup {
        model: PdeModel::WaveBoundary,
        plant,
        controller,
        signal,
        x_e0,
        t_final: p.t_final,
        dt: p.dt,
        laws: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveDistributedParams {
    pub n: usize,
    pub k: f64,
    pub d_c1: f64,
    pub d_c2: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for WaveDistributedParams {
    fn default() -> Self {
        Self { n: 24, k: 3.0, d_c1: 34.0, d_c2: 1.0, t_final: 24.0, dt: 1e-3 }
    }
}

/// `sin(πt) + cos(2πt)/4`.
pub fn wave_distributed_signal() -> Result<SignalSpec> {
    SignalSpec::new(
        vec![
            scalar_entry(PI, c64(0.0, -0.5), 0),
            scalar_entry(-PI, c64(0.0, 0.5), 0),
            scalar_entry(2.0 * PI, c64(0.125, 0.0), 0),
            scalar_entry(-2.0 * PI, c64(0.125, 0.0), 0),
        ],
        true,
    )
}

/// Distributed-control wave equation with the real finite-dimensional controller.
pub fn wave_distributed(p: WaveDistributedParams) -> Result<ExampleSetup> {
    let plant = build_wave_distributed(p.n)?;
    let gains = vec![scalar_gain(p.k, 1); 2];
    let controller = build_fin_dim_real(&[PI, 2.0 * PI], 1, &gains, scalar_gain(p.d_c1, 1), scalar_gain(p.d_c2, 1))?;
    let signal = wave_distributed_signal()?;
    let x0 = wave_distributed_state(p.n, |x| x * (1.0 - x) * (2.0 - 5.0 * x), |_| 0.0)?;
    let x_e0 = stack(x0, &CVector::zeros(controller.n_c()));
    Ok(ExampleSetup {
        model: PdeModel::WaveDistributed,
        plant,
        controller,
        signal,
        x_e0,
        t_final: p.t_final,
        dt: p.dt,
        laws: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    pub n: usize,
    pub n_s: usize,
    pub c: f64,
    pub eps: f64,
    pub d_c1: f64,
    pub d_c2: f64,
    /// Amplitude `a` of the reference `a t (1 - |t|)` on `[-1, 1]`.
    pub amplitude: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self { n: 20, n_s: 15, c: 8.0, eps: 0.1, d_c1: 0.0, d_c2: 15.0, amplitude: 4.0, t_final: 10.0, dt: 2e-3 }
    }
}

/// 2-periodic odd extension of `a t (1 - t)`, truncated to `|k| ≤ n_s`.
///
/// Its sine coefficients are `8a/(kπ)³` for odd `k`, so they decay like `|k|^{-3}`.
pub fn heat_reference_signal(amplitude: f64, n_s: usize, dim_w: usize) -> Result<SignalSpec> {
    let mut entries = Vec::new();
    for k in (1..=n_s).filter(|k| k % 2 == 1) {
        let b = 8.0 * amplitude / (k as f64 * PI).powi(3);
        entries.push(scalar_entry(PI * k as f64, c64(0.0, -b / 2.0), dim_w));
        entries.push(scalar_entry(-PI * k as f64, c64(0.0, b / 2.0), dim_w));
    }
    SignalSpec::new(entries, true)
}

pub fn heat_initial_temperature(x1: f64, x2: f64) -> f64 {
    -(1.0 + x1 * x1 / 4.0 - x1.powi(3) / 6.0) * ((PI * x2).cos() / 10.0 + 2.0)
}

/// Two-dimensional heat equation with the truncated diagonal controller and a
/// compatible controller initial state.
pub fn heat_2d(p: HeatParams) -> Result<ExampleSetup> {
    let plant = build_heat_2d(p.n)?;
    let controller = build_diagonal(p.n_s, PI, 1, p.c, p.eps, scalar_gain(p.d_c1, 1), scalar_gain(p.d_c2, 1))?;
    let signal = heat_reference_signal(p.amplitude, p.n_s, plant.m_d())?;
    let x0 = heat_state(p.n, heat_initial_temperature);
    let (_, y0) = eval_signal(&signal, 0.0);
    let z0 = compatible_initial_state(&plant, &controller, &x0, &y0)?;
    let x_e0 = stack(x0, &z0);
    // re P_S(iω) behaves like (2ω)^{-1/2} for large ω; 0.05 leaves a wide margin.
    // ‖(C_c^k)^†‖² = (1 + |k|)^{1+2ε}/c² is dominated by (1 + |ω_k|)^{1+2ε}/c².
    let laws = NonuniformLaws {
        gamma: Law::Power { coef: 0.05, shift: 1.0, exponent: -0.5 },
        g: Law::Power { coef: 1.0 / (p.c * p.c), shift: 1.0, exponent: 1.0 + 2.0 * p.eps },
        h: None,
        omega_gamma: 0.0,
        m_0: 1.0,
    };
    Ok(ExampleSetup {
        model: PdeModel::Heat2D,
        plant,
        controller,
        signal,
        x_e0,
        t_final: p.t_final,
        dt: p.dt,
        laws: Some(laws),
    })
}

/// Hypothesis report matching the stability mechanism of each example.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "theorem", rename_all = "snake_case")]
pub enum HypothesisReport {
    Exponential(ExponentialHypothesesReport),
    Strong(StrongHypothesesReport),
    Nonuniform(NonuniformHypothesesReport),
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        match self {
            HypothesisReport::Exponential(r) => r.all_pass(),
            HypothesisReport::Strong(r) => r.all_pass(),
            HypothesisReport::Nonuniform(r) => r.all_pass(),
        }
    }
}

/// Neighbourhood radius around the transport frequencies.
pub const WAVE_BOUNDARY_OMEGA_RADIUS: f64 = PI / 4.0;

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Runs the hypothesis checker that applies to the example's controller family.
pub fn check_hypotheses(setup: &ExampleSetup) -> Result<HypothesisReport> {
    let plant_s = setup.stabilized_plant()?;
    let ctrl = &setup.controller;
    let w_top = ctrl.frequencies.iter().fold(0.0f64, |m, w| m.max(w.abs())) + 2.0 * PI;
    match setup.model {
        PdeModel::WaveBoundary => {
            let omega_set =
                FrequencySet::Neighborhoods { centers: ctrl.frequencies.clone(), radius: WAVE_BOUNDARY_OMEGA_RADIUS };
            let grid = uniform_grid(-w_top, w_top, 1201);
            // re P_S ≥ cos²(π/4) = 1/2 on the neighbourhoods for the continuous plant.
            Ok(HypothesisReport::Exponential(check_exponential_hypotheses(
                &plant_s, ctrl, &omega_set, 0.45, 0.9, 0.5, &grid,
            )?))
        }
        PdeModel::WaveDistributed => {
            let grid = uniform_grid(-w_top, w_top, 801);
            Ok(HypothesisReport::Strong(check_strong_hypotheses(&plant_s, ctrl, &grid)?))
        }
        PdeModel::Heat2D => {
            let laws = setup.laws.as_ref().ok_or_else(|| {
                Error::PreconditionViolated("heat example requires non-uniform frequency laws".into())
            })?;
            // Controller frequencies are spaced by π, so unit clusters are singletons.
            Ok(HypothesisReport::Nonuniform(check_nonuniform_hypotheses(&plant_s, ctrl, 1.0, laws)?))
        }
    }
}
