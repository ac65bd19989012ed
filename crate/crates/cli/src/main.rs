use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lilfield::harness::config::{ExperimentConfig, ExperimentKind, Format};
use lilfield::harness::experiments::{run, THREADS_ENV};
use lilfield::harness::report::Report;
use lilfield::Error;

#[derive(Parser)]
#[command(name = "lilfield", version, about = "Experiments on stationary random fields over Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the environment, then to all cores.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
    /// Dimension, when no config is given.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Dyadic window exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    window: Option<Vec<u32>>,
    #[arg(long)]
    replications: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the experiment described by --config.
    Run(Common),
    /// Monte Carlo norms of the maximal function over a window schedule.
    Maximal(Common),
    /// Checks the pointwise decomposition inequality on fresh realizations.
    VerifyDecomposition(Common),
    /// Monte Carlo check of the martingale deviation inequality.
    CheckDeviation(Common),
    /// Exact checks of the Orlicz, weak-Lp, series and weak-type lemmas.
    CheckLemmas(Common),
    /// Projective series of a causal linear field.
    Series(Common),
    /// Full against dyadic maximal functions.
    DyadicRatio(Common),
    /// Summarizes or converts a saved JSON report.
    Report {
        path: PathBuf,
        #[arg(long, value_enum)]
        format: Option<OutFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn usage(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn build_config(kind: Option<ExperimentKind>, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match (&common.config, kind) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(kind)) => ExperimentConfig::default_for(kind, common.d),
        (None, None) => {
            return Err(Error::Config { path: "--config".into(), message: "`run` needs a configuration file".into() })
        }
    };
    if let Some(kind) = kind {
        if config.experiment != kind {
            return Err(Error::Config {
                path: "experiment".into(),
                message: format!("config describes `{}`, not `{}`", config.experiment.name(), kind.name()),
            });
        }
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(t) = common.threads {
        config.threads = Some(t);
    }
    if let Some(r) = common.replications {
        config.replications = r;
    }
    if let Some(w) = &common.window {
        if common.config.is_none() {
            config.d = w.len();
        }
        config.window = w.clone();
        if let Some(m) = config.maximal.as_mut() {
            m.schedule = vec![w.clone()];
        }
        if let Some(s) = config.dyadic.as_mut() {
            s.schedule = vec![w.clone()];
        }
    }
    if let Some(out) = &common.out {
        config.output = Some(out.clone());
    }
    if let Some(f) = common.format {
        config.format = match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        };
    }
    config.validate()?;
    Ok(config)
}

fn emit(report: &Report, format: Format, out: Option<&PathBuf>) -> std::io::Result<()> {
    let text = match format {
        Format::Csv => report.to_csv_string(),
        Format::Json => report.to_json_string() + "\n",
    };
    match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn summarize(report: &Report) {
    for c in &report.checks {
        eprintln!(
            "{} {}{}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) }
        );
    }
    eprintln!(
        "{}: {} records, {:.2}s",
        report.config.experiment.name(),
        report.records.len(),
        report.wall_clock_seconds
    );
}

fn execute(kind: Option<ExperimentKind>, common: &Common) -> ExitCode {
    let config = match build_config(kind, common) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    if let Err(e) = emit(&report, config.format, config.output.as_ref()) {
        return usage(e);
    }
    summarize(&report);
    ExitCode::from(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(c) => execute(None, c),
        Command::Maximal(c) => execute(Some(ExperimentKind::MaximalEstimate), c),
        Command::VerifyDecomposition(c) => execute(Some(ExperimentKind::VerifyDecomposition), c),
        Command::CheckDeviation(c) => execute(Some(ExperimentKind::CheckDeviation), c),
        Command::CheckLemmas(c) => execute(Some(ExperimentKind::CheckOrliczLemmas), c),
        Command::Series(c) => execute(Some(ExperimentKind::Series), c),
        Command::DyadicRatio(c) => execute(Some(ExperimentKind::DyadicRatio), c),
        Command::Report { path, format, out } => {
            let report = match fs::read_to_string(path).map_err(Error::from).and_then(|t| Report::from_json_str(&t)) {
                Ok(r) => r,
                Err(e) => return usage(e),
            };
            if let Some(f) = format {
                let f = match f {
                    OutFormat::Csv => Format::Csv,
                    OutFormat::Json => Format::Json,
                };
                if let Err(e) = emit(&report, f, out.as_ref()) {
                    return usage(e);
                }
            }
            summarize(&report);
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
