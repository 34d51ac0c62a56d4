use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cyclic_pls::cyclic::{Direction, Step2Inner};
use cyclic_pls::dataset::{load_table, MissingPolicy};
use cyclic_pls::modelspec::{load_model, validate_model, Scheme};
use cyclic_pls::plscore::FitOptions;
use cyclic_pls::report::{render_text, run_cyclic, run_fit, RunConfig, RunError, RunReport};
use cyclic_pls::simgen::{simulate, write_outputs, PopulationSpec};

#[derive(Parser)]
#[command(name = "cyclic-pls", version, about = "PLS path models with two-step cyclic effect estimation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate a sequential (acyclic) path model.
    Fit(RunArgs),
    /// Estimate sequential and cyclic effects and test for reinforcement.
    Cyclic(RunArgs),
    /// Generate a synthetic dataset from a population specification.
    Simulate(SimulateArgs),
    /// Check a model specification, optionally against a data file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Centroid,
    Factorial,
    Path,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Listwise,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    #[value(name = "ce_gt_se")]
    CeGtSe,
    #[value(name = "se_gt_ce")]
    SeGtCe,
    #[value(name = "two_sided")]
    TwoSided,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Where to write the JSON report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bootstrap replicates; 0 skips resampling.
    #[arg(long, default_value_t = 500)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inner weighting scheme (overrides the model file).
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "listwise")]
    missing: MissingArg,
    /// Alternative hypothesis of the reinforcement test.
    #[arg(long, value_enum, default_value = "ce_gt_se")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Keep the sequential paths among cyclic targets in the step-2 model.
    #[arg(long)]
    step2_controls: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Population specification (JSON).
    #[arg(long)]
    population: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar; defaults to the CSV path with `.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Overrides the seed in the population file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the sample size in the population file.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Check indicator names against this CSV header.
    #[arg(long)]
    data: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            scheme: self.scheme.map(|s| match s {
                SchemeArg::Centroid => Scheme::Centroid,
                SchemeArg::Factorial => Scheme::Factorial,
                SchemeArg::Path => Scheme::Path,
            }),
            fit: FitOptions {
                tol: self.tol,
                max_iter: self.max_iter,
            },
            missing: match self.missing {
                MissingArg::Listwise => MissingPolicy::Listwise,
                MissingArg::Mean => MissingPolicy::MeanImpute,
            },
            bootstrap: self.bootstrap,
            level: self.level,
            seed: self.seed,
            direction: match self.direction {
                DirectionArg::CeGtSe => Direction::CeGtSe,
                DirectionArg::SeGtCe => Direction::SeGtCe,
                DirectionArg::TwoSided => Direction::TwoSided,
            },
            step2_inner: if self.step2_controls {
                Step2Inner::WithTargetControls
            } else {
                Step2Inner::FeedbackOnly
            },
        }
    }
}

fn check_flags(args: &RunArgs) -> Result<(), RunError> {
    if !(args.tol > 0.0) {
        return Err(RunError::validation(format!("--tol must be positive, got {}", args.tol)));
    }
    if args.max_iter == 0 {
        return Err(RunError::validation("--max-iter must be positive"));
    }
    if args.format == Format::Both && args.out.is_none() {
        return Err(RunError::validation("--format both needs --out for the JSON report"));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(report: &RunReport, args: &RunArgs) -> Result<()> {
    let json = report.to_json();
    let mut stdout = io::stdout().lock();
    match (&args.out, args.format) {
        (Some(out), Format::Json) => write_file(out, &json)?,
        (None, Format::Json) => stdout.write_all(json.as_bytes())?,
        (out, Format::Text | Format::Both) => {
            if let Some(out) = out {
                write_file(out, &json)?;
            }
            stdout.write_all(render_text(report).as_bytes())?;
        }
    }
    stdout.flush()?;
    Ok(())
}

fn cmd_run(args: &RunArgs, cyclic: bool) -> Result<()> {
    check_flags(args)?;
    let spec = load_model(&args.model).map_err(RunError::from)?;
    let raw = load_table(&args.data).map_err(RunError::from)?;
    let cfg = args.config();
    let report = if cyclic {
        run_cyclic(&spec, &raw, &cfg)?
    } else {
        run_fit(&spec, &raw, &cfg)?
    };
    emit(&report, args)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut pop = PopulationSpec::load(&args.population).map_err(RunError::from)?;
    if let Some(seed) = args.seed {
        pop.seed = seed;
    }
    if let Some(n) = args.n {
        pop.n = n;
    }
    let (table, truth) = simulate(&pop).map_err(RunError::from)?;
    let truth_path = args.truth.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });
    write_outputs(&table, &truth, &args.out, &truth_path).map_err(RunError::from)?;
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let spec = load_model(&args.model).map_err(RunError::from)?;
    let columns: Vec<String> = match &args.data {
        Some(path) => load_table(path).map_err(RunError::from)?.header,
        None => spec.blocks.iter().flat_map(|b| b.indicators.clone()).collect(),
    };
    let report = validate_model(&spec, &columns);
    if report.is_empty() {
        println!("model is valid: {} constructs, {} paths", spec.blocks.len(), spec.paths.len());
        Ok(())
    } else {
        Err(RunError::validation(format!("invalid model:\n{report}")).into())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(run) = err.downcast_ref::<RunError>() {
        return run.exit_code() as u8;
    }
    if err.chain().any(|e| e.is::<io::Error>()) {
        return 4;
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Fit(args) => cmd_run(args, false),
        Cmd::Cyclic(args) => cmd_run(args, true),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
