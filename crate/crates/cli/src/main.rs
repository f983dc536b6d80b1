//! Command line runner: execute solver runs from TOML configs, list the
//! built-in problems, or validate a config without running it.

mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{apply_override, InitConfig, ResolvedConfig, RunConfig};
use mfg_core::grid::ScalarField;
use mfg_core::hjb::NewtonOptions;
use mfg_core::play::{
    reference_field, run_fictitious_play, run_hierarchical, HierarchySpec, Init, IterationRecord,
};
use mfg_core::catalog;

#[derive(Parser)]
#[command(
    name = "mfg",
    about = "Fictitious-play solver for mean-field games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run described by a TOML config.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Override a config scalar by dotted path, e.g. --set grid.n_t=64
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in problems with one-line descriptions.
    ListProblems,
    /// Parse and validate a config, echoing the resolved form.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
}

fn load_config(path: &PathBuf, overrides: &[String]) -> Result<ResolvedConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg = if overrides.is_empty() {
        RunConfig::parse(&text)?
    } else {
        let mut doc: toml::Value = toml::from_str(&text).context("config is not valid TOML")?;
        for spec in overrides {
            apply_override(&mut doc, spec)?;
        }
        doc.try_into().context("config does not match the schema")?
    };
    cfg.resolve()
}

struct RunOutcome {
    records: Vec<IterationRecord>,
    rho: ScalarField,
    phi: ScalarField,
    converged: bool,
}

fn execute(cfg: &ResolvedConfig) -> Result<RunOutcome> {
    let base = cfg.base_grid()?;
    let opts = NewtonOptions {
        tol_residual: cfg.newton_tol,
        ..NewtonOptions::default()
    };
    let schedule = cfg.schedule.to_schedule();
    if cfg.hierarchy.levels == 0 {
        let problem = cfg.instantiate(&base)?;
        let init = match cfg.init {
            InitConfig::ZeroPhi => Init::Phi(ScalarField::zeros(&base)),
            InitConfig::Rho0 => Init::Rho(ScalarField::from_fn(&base, |s, _| problem.rho0[s])),
        };
        let reference = reference_field(&problem);
        let res = run_fictitious_play(
            &problem,
            &schedule,
            cfg.epsilon,
            cfg.k_max,
            init,
            reference.as_ref(),
            &opts,
        )?;
        Ok(RunOutcome {
            records: res.records,
            rho: res.state.rho,
            phi: res.best.phi,
            converged: res.converged,
        })
    } else {
        let spec = HierarchySpec {
            levels: cfg.hierarchy.levels,
            epsilon: cfg.epsilon,
            k_max: cfg.k_max,
        };
        let family = |g: &mfg_core::grid::GridSpec| {
            cfg.instantiate(g).map_err(|e| mfg_core::ProblemError::Invalid {
                message: e.to_string(),
            })
        };
        let res = run_hierarchical(
            &family,
            &base,
            &spec,
            &schedule,
            ScalarField::zeros(&base),
            &opts,
        )?;
        let mut records = Vec::new();
        for level in &res.levels {
            records.extend(level.records.iter().cloned());
        }
        let converged = res.levels.last().map(|l| l.converged).unwrap_or(false);
        Ok(RunOutcome {
            records,
            rho: res.state.rho,
            phi: res.best.phi,
            converged,
        })
    }
}

fn cmd_run(config: PathBuf, set: Vec<String>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = load_config(&config, &set)?;
    if let Some(dir) = out {
        cfg.output.dir = dir.to_string_lossy().into_owned();
    }
    let out_dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    fs::write(out_dir.join("resolved-config.toml"), cfg.echo_toml()?)
        .context("writing resolved-config.toml")?;

    let outcome = execute(&cfg)?;
    output::write_iterations_csv(&out_dir.join("iterations.csv"), &outcome.records)?;
    if cfg.output.fields {
        if outcome.rho.grid().dim() == 1 {
            output::write_fields_1d(&out_dir.join("fields.csv"), &outcome.rho, &outcome.phi)?;
        } else {
            output::write_fields_2d(&out_dir, &outcome.rho, &outcome.phi)?;
        }
    }
    let last = outcome.records.last();
    println!(
        "{} after {} iterations (|gain| = {:.3e}); outputs in {}",
        if outcome.converged {
            "converged"
        } else {
            "stopped at iteration cap"
        },
        outcome.records.len(),
        last.map(|r| r.gain.abs()).unwrap_or(f64::NAN),
        out_dir.display(),
    );
    Ok(if outcome.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_list() -> ExitCode {
    for name in catalog::CATALOG_NAMES {
        println!("{name:18} {}", catalog::describe(name).unwrap_or(""));
    }
    ExitCode::SUCCESS
}

fn cmd_validate(config: PathBuf, set: Vec<String>) -> Result<ExitCode> {
    let cfg = load_config(&config, &set)?;
    print!("{}", cfg.echo_toml()?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, set, out } => cmd_run(config, set, out),
        Command::ListProblems => Ok(cmd_list()),
        Command::Validate { config, set } => cmd_validate(config, set),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
