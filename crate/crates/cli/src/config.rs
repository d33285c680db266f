//! Run configuration: what to build, which checks to run and their thresholds.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use passreg::pde_models::{DiscretizationSpec, PdeModel};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Example whose plant, controller, signal, initial state and step sizes fill unset fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<PdeModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<FileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    /// Requested checks; empty selects the defaults of the subcommand.
    #[serde(default)]
    pub analysis: Vec<Analysis>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub hypotheses: HypothesesConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Length of the sliding window of the error integral.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_window() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRef {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSource {
    File(FileRef),
    Model(DiscretizationSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControllerSource {
    File(FileRef),
    Recipe(RecipeConfig),
}

/// Controller recipes with scalar gains `k I_p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RecipeConfig {
    FinDim {
        frequencies: Vec<f64>,
        #[serde(default = "one")]
        gain: f64,
        #[serde(default)]
        d_c1: f64,
        #[serde(default)]
        d_c2: f64,
    },
    /// `frequencies` lists `0` and the positive frequencies; each `ω > 0` also covers `-ω`.
    FinDimReal {
        frequencies: Vec<f64>,
        #[serde(default = "one")]
        gain: f64,
        #[serde(default)]
        d_c1: f64,
        #[serde(default)]
        d_c2: f64,
    },
    Transport {
        #[serde(default = "one")]
        tau: f64,
        cells: usize,
        #[serde(default)]
        d_c1: f64,
        #[serde(default)]
        d_c2: f64,
    },
    Diagonal {
        n_s: usize,
        #[serde(default = "pi")]
        omega_0: f64,
        c: f64,
        eps: f64,
        #[serde(default)]
        d_c1: f64,
        #[serde(default)]
        d_c2: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn pi() -> f64 {
    PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(InitialStateKind),
    File(FileRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialStateKind {
    Zero,
    /// The example's initial state.
    Example,
    /// Plant state from the example (zero otherwise) with the compatible controller state.
    Compatible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Passivity,
    Contraction,
    InternalModel,
    Hypotheses,
    Necessity,
    Scan,
    Growth,
    Decay,
    PiExt,
    Simulate,
    Regulation,
    Robustness,
}

impl Analysis {
    pub fn needs_scan(self) -> bool {
        matches!(self, Analysis::Scan | Analysis::Growth)
    }

    pub fn needs_simulation(self) -> bool {
        matches!(self, Analysis::Simulate | Analysis::Regulation)
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    Exponential,
    Polynomial,
    NonUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundedness {
    Bounded,
    Unbounded,
}

/// Frequency window of the growth fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GrowthWindow {
    Range([f64; 2]),
    Named(NamedWindow),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedWindow {
    /// The whole scan band.
    Full,
    /// `[ω_min, (k + 1/2)π]` where the first `k` plant eigenfrequencies lie within 5% of `jπ`.
    Resolved,
}

/// Pass/fail thresholds. Every field has a documented default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest admissible eigenvalue of the plant dissipation block (1e-9).
    pub passivity_tol: f64,
    /// Largest admissible eigenvalue of the Hermitian part of `A_e` (1e-10).
    pub contraction_tol: f64,
    /// Entrywise agreement of the two `Π_ext` paths (1e-8).
    pub pi_ext_tol: f64,
    /// Sliding error integral at `probe_time` over its maximum on `early_window` (0.1).
    pub decay_ratio: f64,
    /// Probe time of the decay ratio; the last available time when unset.
    pub probe_time: Option<f64>,
    /// Reference window for the decay ratio (`[0, 2]`).
    pub early_window: [f64; 2],
    /// Require decreasing maxima of `‖e(t)‖` over dyadic windows (false).
    pub monotone_tails: bool,
    /// Start of the error-rate fit (2.0).
    pub error_fit_start: f64,
    /// Required kind of the error-rate fit (unset).
    pub expected_error_fit: Option<DecayClass>,
    /// Window of the resolvent growth fit (`full`).
    pub growth_window: GrowthWindow,
    /// Admissible range of the fitted growth exponent (unset).
    pub growth_band: Option<[f64; 2]>,
    /// Required class of the predicted decay (unset).
    pub expected_decay: Option<DecayClass>,
    /// Admissible range of a predicted polynomial exponent (unset).
    pub decay_alpha_band: Option<[f64; 2]>,
    /// Required verdict of the exponential-stability necessity test; `bounded` when unset.
    pub expected_necessity: Option<Boundedness>,
    /// Number of accepted perturbed plants (10).
    pub robustness_samples: usize,
    /// Relative entrywise size of the perturbations (0.01).
    pub robustness_rel: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            passivity_tol: 1e-9,
            contraction_tol: 1e-10,
            pi_ext_tol: 1e-8,
            decay_ratio: 0.1,
            probe_time: None,
            early_window: [0.0, 2.0],
            monotone_tails: false,
            error_fit_start: 2.0,
            expected_error_fit: None,
            growth_window: GrowthWindow::Named(NamedWindow::Full),
            growth_band: None,
            expected_decay: None,
            decay_alpha_band: None,
            expected_necessity: None,
            robustness_samples: 10,
            robustness_rel: 0.01,
        }
    }
}

/// Which stability theorem's hypotheses to check.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "snake_case", deny_unknown_fields)]
pub enum HypothesesConfig {
    /// The theorem matching the example's controller family.
    #[default]
    Auto,
    Strong {
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
    Exponential {
        /// Radius of the frequency neighbourhoods around the controller frequencies.
        radius: f64,
        gamma: f64,
        delta: f64,
        gamma_0: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
}

fn default_grid_points() -> usize {
    801
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanTarget {
    ClosedLoop,
    StabilizedPlant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refine {
    None,
    Controller,
    Plant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub target: ScanTarget,
    pub omega_min: f64,
    /// Upper end of the band; twice the largest controller frequency plus 10 when unset.
    pub omega_max: Option<f64>,
    pub samples: usize,
    pub refine: Refine,
    pub halfwidth: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            target: ScanTarget::ClosedLoop,
            omega_min: 0.1,
            omega_max: None,
            samples: 400,
            refine: Refine::Controller,
            halfwidth: 0.05,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes file references relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(PlantSource::File(f)) = &mut self.plant {
            fix(&mut f.file);
        }
        if let Some(ControllerSource::File(f)) = &mut self.controller {
            fix(&mut f.file);
        }
        if let Some(f) = &mut self.signal {
            fix(&mut f.file);
        }
        if let Some(InitialState::File(f)) = &mut self.initial_state {
            fix(&mut f.file);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.example.is_none() {
            if self.plant.is_none() {
                bail!("config needs `plant` or `example`");
            }
            if self.controller.is_none() {
                bail!("config needs `controller` or `example`");
            }
            if self.signal.is_none() {
                bail!("config needs `signal` or `example`");
            }
        }
        for f in self.referenced_files() {
            if !f.exists() {
                bail!("referenced file {} does not exist", f.display());
            }
        }
        if let Some(PlantSource::Model(spec)) = &self.plant {
            spec.validate()?;
        }
        for (name, v) in [("t_final", self.t_final), ("dt", self.dt)] {
            if v.is_some_and(|v| !(v > 0.0)) {
                bail!("`{name}` must be positive");
            }
        }
        if !(self.window > 0.0) {
            bail!("`window` must be positive");
        }
        let th = &self.thresholds;
        if th.early_window[1] <= th.early_window[0] {
            bail!("`thresholds.early_window` must be an increasing pair");
        }
        if !(self.scan.omega_min > 0.0) || self.scan.omega_max.is_some_and(|w| w <= self.scan.omega_min) {
            bail!("scan band needs 0 < omega_min < omega_max");
        }
        Ok(())
    }

    fn referenced_files(&self) -> Vec<&Path> {
        let mut out = Vec::new();
        if let Some(PlantSource::File(f)) = &self.plant {
            out.push(f.file.as_path());
        }
        if let Some(ControllerSource::File(f)) = &self.controller {
            out.push(f.file.as_path());
        }
        if let Some(f) = &self.signal {
            out.push(f.file.as_path());
        }
        if let Some(InitialState::File(f)) = &self.initial_state {
            out.push(f.file.as_path());
        }
        out
    }

    /// The full pipeline of an example with its acceptance thresholds.
    pub fn for_example(model: PdeModel) -> Self {
        use Analysis::*;
        let mut cfg = RunConfig { example: Some(model), window: 1.0, ..Default::default() };
        let th = &mut cfg.thresholds;
        match model {
            PdeModel::WaveBoundary => {
                cfg.analysis = vec![
                    Passivity,
                    Contraction,
                    InternalModel,
                    Hypotheses,
                    Necessity,
                    Scan,
                    Decay,
                    PiExt,
                    Simulate,
                    Regulation,
                ];
                th.expected_decay = Some(DecayClass::Exponential);
                th.expected_necessity = Some(Boundedness::Bounded);
                th.monotone_tails = true;
                cfg.scan = ScanConfig { omega_max: Some(80.0), ..ScanConfig::default() };
            }
            PdeModel::WaveDistributed => {
                cfg.analysis =
                    vec![Passivity, Contraction, InternalModel, Hypotheses, Scan, Growth, PiExt, Simulate, Regulation];
                th.decay_ratio = 1.0 / 50.0;
                th.probe_time = Some(23.0);
                th.monotone_tails = true;
                th.growth_window = GrowthWindow::Named(NamedWindow::Resolved);
                th.growth_band = Some([1.5, 2.5]);
                cfg.scan = ScanConfig {
                    target: ScanTarget::StabilizedPlant,
                    omega_min: 1.0,
                    omega_max: Some(200.0),
                    samples: 600,
                    refine: Refine::Plant,
                    halfwidth: 0.05,
                };
            }
            PdeModel::Heat2D => {
                cfg.analysis = vec![
                    Passivity,
                    Contraction,
                    InternalModel,
                    Hypotheses,
                    Necessity,
                    Decay,
                    Scan,
                    Growth,
                    PiExt,
                    Simulate,
                    Regulation,
                ];
                th.expected_decay = Some(DecayClass::Polynomial);
                th.decay_alpha_band = Some([1.2, 2.2]);
                th.expected_necessity = Some(Boundedness::Unbounded);
                th.expected_error_fit = Some(DecayClass::Polynomial);
                th.growth_window = GrowthWindow::Range([PI, 15.0 * PI]);
                th.growth_band = Some([1.2, 2.2]);
                cfg.scan =
                    ScanConfig { omega_min: 1.0, omega_max: Some(16.0 * PI), halfwidth: 0.5, ..ScanConfig::default() };
            }
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"example": "heat-2d"}"#).unwrap();
        assert_eq!(cfg.thresholds, Thresholds::default());
        assert_eq!(cfg.hypotheses, HypothesesConfig::Auto);
        assert!(cfg.analysis.is_empty());
        cfg.validate().unwrap();
    }

    #[test]
    fn recipes_parse() {
        let c: ControllerSource =
            serde_json::from_str(r#"{"recipe": "fin-dim-real", "frequencies": [3.14], "gain": 3, "d_c2": 1}"#).unwrap();
        assert!(matches!(c, ControllerSource::Recipe(RecipeConfig::FinDimReal { gain, .. }) if gain == 3.0));
        let p: PlantSource = serde_json::from_str(r#"{"model": "wave-boundary", "N": 40}"#).unwrap();
        assert!(matches!(p, PlantSource::Model(_)));
        let s: InitialState = serde_json::from_str(r#""compatible""#).unwrap();
        assert!(matches!(s, InitialState::Named(InitialStateKind::Compatible)));
    }

    #[test]
    fn incomplete_config_rejected() {
        let cfg: RunConfig = serde_json::from_str(r#"{"plant": {"model": "heat-2d", "N": 10}}"#).unwrap();
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"example": "heat-2d", "bogus": 1}"#).is_err());
    }

    #[test]
    fn shipped_configs_validate() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().to_string();
            if name.ends_with(".json") && !name.ends_with("-signal.json") {
                RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e:#}"));
                n += 1;
            }
        }
        assert!(n >= 3);
    }

    #[test]
    fn analysis_names() {
        assert_eq!(Analysis::InternalModel.to_string(), "internal_model");
    }
}
