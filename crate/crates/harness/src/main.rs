use std::path::PathBuf;
use std::process::ExitCode;

use adjmc_harness::config::{DsmcMethod, RteMethod, ScalingTarget};
use adjmc_harness::{preset, run_experiment, ExperimentConfig, ExperimentKind, PRESETS};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Adjoint Monte Carlo gradients for kinetic equations.
#[derive(Debug, Parser)]
#[command(name = "adjmc", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named configuration shipped with the tool (applied before --config).
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Output directory; falls back to $ADJMC_OUT, then the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set rte.n_particles=4096`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score, pathwise and finite-difference gradients on Gaussian toys.
    McDemo,
    /// Particle RTE forward runs.
    RteForward,
    /// RTE gradient with respect to the scattering coefficient.
    RteGrad {
        #[arg(long, value_enum)]
        method: Option<RteMethodArg>,
    },
    /// DSMC forward runs with moment history.
    DsmcForward,
    /// DSMC gradient with respect to the initial temperatures.
    DsmcGrad {
        #[arg(long, value_enum)]
        method: Option<DsmcMethodArg>,
    },
    /// Spread of the gradient error against ensemble size.
    Scaling {
        #[arg(long, value_enum)]
        target: Option<TargetArg>,
    },
    /// Runs the invariant suite; exits nonzero if any check fails.
    Validate,
    /// Lists the shipped presets.
    Presets,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RteMethodArg {
    POtd,
    PDto,
    Fvm,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DsmcMethodArg {
    Adjoint,
    Fd,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Rte,
    Dsmc,
}

fn build_config(common: &Common, command: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &common.preset {
        Some(name) => preset(name).with_context(|| format!("unknown preset `{name}`"))?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &common.config {
        cfg = cfg.merge_file(path)?;
    }
    cfg.experiment.kind = match command {
        Command::McDemo => ExperimentKind::McDemo,
        Command::RteForward => ExperimentKind::RteForward,
        Command::RteGrad { method } => {
            if let Some(m) = method {
                cfg.rte.method = match m {
                    RteMethodArg::POtd => RteMethod::POtd,
                    RteMethodArg::PDto => RteMethod::PDto,
                    RteMethodArg::Fvm => RteMethod::Fvm,
                    RteMethodArg::All => RteMethod::All,
                };
            }
            ExperimentKind::RteGradient
        }
        Command::DsmcForward => ExperimentKind::DsmcForward,
        Command::DsmcGrad { method } => {
            if let Some(m) = method {
                cfg.dsmc.method = match m {
                    DsmcMethodArg::Adjoint => DsmcMethod::Adjoint,
                    DsmcMethodArg::Fd => DsmcMethod::Fd,
                    DsmcMethodArg::Both => DsmcMethod::Both,
                };
            }
            ExperimentKind::DsmcGradient
        }
        Command::Scaling { target } => {
            if let Some(t) = target {
                cfg.scaling.target = match t {
                    TargetArg::Rte => ScalingTarget::Rte,
                    TargetArg::Dsmc => ScalingTarget::Dsmc,
                };
            }
            match cfg.scaling.target {
                ScalingTarget::Rte => ExperimentKind::RteScaling,
                ScalingTarget::Dsmc => ExperimentKind::DsmcScaling,
            }
        }
        Command::Validate => ExperimentKind::Validate,
        Command::Presets => bail!("presets takes no configuration"),
    };
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(r) = common.repeats {
        cfg.experiment.repeats = r;
    }
    cfg = cfg.with_overrides(&common.overrides)?;
    if let Some(out) = common.out.clone().or_else(|| std::env::var_os("ADJMC_OUT").map(PathBuf::from)) {
        cfg.experiment.output_dir = out;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Presets = cli.command {
        for (name, _) in PRESETS {
            println!("{name}");
        }
        return Ok(true);
    }
    let cfg = build_config(&cli.common, &cli.command)?;
    let report = run_experiment(&cfg)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for (k, v) in &report.summary {
        println!("{k} = {v}");
    }
    println!("wrote {} files to {}", report.files.len(), report.output_dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
