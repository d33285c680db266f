#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod pipeline;
mod svg;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Analysis, RunConfig};
use passreg::io::parse_csv;
use passreg::pde_models::PdeModel;
use passreg::regulation::fit_error_rate;
use passreg::stability::{fit_growth_exponent, predict_decay, DecayInput, DecayModel, ResolventScan};

/// Robust output regulation for passive systems: build, couple, scan, simulate, fit and verify.
#[derive(Parser)]
#[command(name = "passreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized suites.
    #[arg(long)]
    seed: Option<u64>,
    /// Time step of the simulation.
    #[arg(long)]
    dt: Option<f64>,
    /// Final simulation time.
    #[arg(long = "t-final")]
    t_final: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline of a built-in example with its acceptance thresholds.
    Example {
        #[arg(value_parser = ["wave-boundary", "wave-distributed", "heat-2d"])]
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check stability hypotheses, internal-model conditions and the predicted decay.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the resolvent norm along the imaginary axis.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the closed loop and evaluate the regulation error.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a decay law to a CSV table or to the error of a simulated config.
    Fit {
        /// Two-column table `t,value` or a resolvent scan `omega,resolvent_norm,flag`.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        input: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Discard rows with `t` below this value (`thresholds.error_fit_start` with --config).
        #[arg(long = "t-start", default_value_t = 0.0)]
        t_start: f64,
        #[command(flatten)]
        common: Common,
    },
}

const VERIFY_DEFAULT: [Analysis; 6] = [
    Analysis::Passivity,
    Analysis::Contraction,
    Analysis::InternalModel,
    Analysis::Hypotheses,
    Analysis::Necessity,
    Analysis::Decay,
];

fn apply(cfg: &mut RunConfig, common: &Common) -> Result<()> {
    if common.dt.is_some() {
        cfg.dt = common.dt;
    }
    if common.t_final.is_some() {
        cfg.t_final = common.t_final;
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.output_dir = common.out.clone();
    }
    cfg.validate()
}

fn run_pipeline(cfg: &RunConfig, analyses: BTreeSet<Analysis>, default_out: &str) -> Result<bool> {
    let out = pipeline::run(cfg, &analyses)?;
    for c in &out.verdict.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(default_out));
    let files = pipeline::write_artifacts(&out, &dir)?;
    println!("wrote {} to {}", files.join(", "), dir.display());
    let failed = out.verdict.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        println!("all {} checks passed", out.verdict.checks.len());
    } else {
        println!("{failed} of {} checks failed", out.verdict.checks.len());
    }
    Ok(out.verdict.all_pass)
}

fn load(path: &Path, common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    apply(&mut cfg, common)?;
    Ok(cfg)
}

fn fit_table(input: &Path, t_start: f64, out: Option<&Path>) -> Result<bool> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let model: DecayModel = if text.lines().next().is_some_and(|h| h.trim() == "omega,resolvent_norm,flag") {
        let scan = ResolventScan::from_csv(&text)?;
        let (lo, hi) = scan.band();
        let fit = fit_growth_exponent(&scan, (lo.max(t_start), hi))?;
        let mut m = predict_decay(DecayInput::Alpha(fit.alpha));
        m.fit_residual = fit.residual;
        m.band = (lo.max(t_start), hi);
        m
    } else {
        let (header, rows) = parse_csv(&text)?;
        if header.len() < 2 {
            bail!("{} needs at least two columns", input.display());
        }
        let table: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
        fit_error_rate(&table, t_start)?
    };
    let json = model.to_json();
    println!("{json}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("fit.json"), json + "\n")?;
    }
    Ok(true)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Example { name, common } => {
            let model: PdeModel = name.parse()?;
            let mut cfg = RunConfig::for_example(model);
            apply(&mut cfg, &common)?;
            let analyses = cfg.analysis.iter().copied().collect();
            run_pipeline(&cfg, analyses, &format!("out/{model}"))
        }
        Command::Verify { config, common } => {
            let cfg = load(&config, &common)?;
            let analyses = if cfg.analysis.is_empty() {
                VERIFY_DEFAULT.into_iter().collect()
            } else {
                cfg.analysis.iter().copied().collect()
            };
            run_pipeline(&cfg, analyses, "out")
        }
        Command::Scan { config, common } => {
            let cfg = load(&config, &common)?;
            let mut analyses = BTreeSet::from([Analysis::Scan]);
            if cfg.thresholds.growth_band.is_some() {
                analyses.insert(Analysis::Growth);
            }
            run_pipeline(&cfg, analyses, "out")
        }
        Command::Simulate { config, common } => {
            let cfg = load(&config, &common)?;
            run_pipeline(&cfg, BTreeSet::from([Analysis::Simulate, Analysis::Regulation]), "out")
        }
        Command::Fit { input, config, t_start, common } => match (input, config) {
            (Some(input), _) => fit_table(&input, t_start, common.out.as_deref()),
            (None, Some(config)) => {
                let cfg = load(&config, &common)?;
                run_pipeline(&cfg, BTreeSet::from([Analysis::Regulation]), "out")
            }
            (None, None) => bail!("fit needs --input or --config"),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
