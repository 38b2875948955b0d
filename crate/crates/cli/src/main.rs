use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use paraexp_ocp::experiment::{
    parse_patch, run_bound, run_solve, run_spectrum, run_table, trajectory_csv, ConfigPatch, Count,
    CsvTable, ExperimentConfig, Restart, ResultRecord, SpectrumRoute, StepReading, TableId, TableOptions,
};
use serde::de::DeserializeOwned;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Parallel-in-time exponential solver for linear-quadratic control of the
/// heat and wave equations.
///
/// Settings come from built-in per-problem defaults, then the JSON document
/// given by --config, then individual flags; later sources win.
///
/// Exit codes: 0 success, 1 invalid input, 2 non-convergence or failed sub-run.
#[derive(Parser, Debug)]
#[command(name = "paraexp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file, or `-` for stdin.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,

    /// Directory for output files; stdout when absent.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the interface system and reconstruct the optimal trajectory.
    Solve,
    /// Reproduce one reference table as CSV with a diff report.
    Table {
        /// One of t1, t2, t3, t4, t5, t10.
        id: String,
        /// Read the step counts of t10 as N (fine steps) or L (sub-intervals).
        #[arg(long, default_value = "n", value_parser = keyword::<StepReading>)]
        step_reading: StepReading,
        /// Source of singular values: dense iteration or per-mode blocks.
        #[arg(long, default_value = "dense", value_parser = keyword::<SpectrumRoute>)]
        spectrum: SpectrumRoute,
    },
    /// Sweep the eigenvalue bound of the preconditioned heat system over N.
    Bound {
        /// Comma-separated N values; defaults to 1e5, 2e5, ..., 1e6.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
    },
    /// Materialize M (and M·M̂⁻¹) and report extreme singular values.
    Spectrum,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Worker threads: a count or `auto` (one per sub-interval).
    #[arg(long, global = true, value_parser = count)]
    workers: Option<Count>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// heat or wave.
    #[arg(long, global = true, value_parser = keyword::<paraexp_ocp::ProblemKind>)]
    problem: Option<paraexp_ocp::ProblemKind>,
    /// Spatial unknowns per field.
    #[arg(short = 'r', long = "r", global = true)]
    r: Option<usize>,
    /// Number of sub-intervals L.
    #[arg(short = 'L', long = "sub-intervals", global = true)]
    sub_intervals: Option<usize>,
    /// Fine steps per sub-interval N.
    #[arg(short = 'N', long = "fine-steps", global = true)]
    fine_steps: Option<usize>,
    /// Time horizon T.
    #[arg(short = 'T', long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// euler or sdirk3.
    #[arg(long, global = true, value_parser = keyword::<paraexp_ocp::QuadratureRule>)]
    quadrature: Option<paraexp_ocp::QuadratureRule>,
    /// on or off.
    #[arg(long, global = true, value_parser = keyword::<paraexp_ocp::experiment::Switch>)]
    precond: Option<paraexp_ocp::experiment::Switch>,
    /// GMRES restart length or `full`.
    #[arg(long, global = true, value_parser = restart)]
    restart: Option<Restart>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration budget or `auto`.
    #[arg(long, global = true, value_parser = count)]
    maxit: Option<Count>,
    /// left, right or none.
    #[arg(long, global = true, value_parser = keyword::<paraexp_ocp::PrecondSide>)]
    side: Option<paraexp_ocp::PrecondSide>,
    /// Write the fine trajectory as CSV (needs --out).
    #[arg(long, global = true)]
    trajectory: bool,
    /// gauss_target, target_polynomial or zero.
    #[arg(long, global = true, value_parser = keyword::<paraexp_ocp::Profile>)]
    target: Option<paraexp_ocp::Profile>,
}

impl Overrides {
    fn patch(&self) -> ConfigPatch {
        ConfigPatch {
            problem: self.problem,
            r: self.r,
            sub_intervals: self.sub_intervals,
            fine_steps: self.fine_steps,
            horizon: self.horizon,
            alpha: self.alpha,
            quadrature: self.quadrature,
            precond: self.precond,
            restart: self.restart,
            tol: self.tol,
            maxit: self.maxit,
            side: self.side,
            workers: self.workers,
            seed: self.seed,
            trajectory: self.trajectory.then_some(true),
            target: self.target,
        }
    }
}

fn keyword<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn count(s: &str) -> Result<Count, String> {
    match s.parse::<usize>() {
        Ok(n) => Ok(Count::Fixed(n)),
        Err(_) => keyword::<Count>(s),
    }
}

fn restart(s: &str) -> Result<Restart, String> {
    match s.parse::<usize>() {
        Ok(n) => Ok(Restart::Every(n)),
        Err(_) => keyword::<Restart>(s),
    }
}

/// Failure that maps to exit code 1.
#[derive(Debug)]
struct InvalidInput;

impl std::fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid input")
    }
}

impl std::error::Error for InvalidInput {}

fn read_patch(source: Option<&str>) -> Result<ConfigPatch> {
    let Some(source) = source else {
        return Ok(ConfigPatch::default());
    };
    let text = if source == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).context("reading configuration from stdin")?;
        buf
    } else {
        fs::read_to_string(source).with_context(|| format!("reading configuration {source}"))?
    };
    parse_patch(&text).with_context(|| format!("parsing configuration {source}"))
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let patch = read_patch(cli.config.as_deref())?.merged(&cli.overrides.patch());
    Ok(ExperimentConfig::from_patch(&patch)?)
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_record(out: Option<&Path>, name: &str, record: &ResultRecord) -> Result<()> {
    let mut text = serde_json::to_string_pretty(record)?;
    text.push('\n');
    emit(out, name, &text)
}

fn emit_csv(out: Option<&Path>, name: &str, table: &CsvTable) -> Result<()> {
    emit(out, name, &table.render())
}

fn run(cli: &Cli) -> Result<u8> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Solve => {
            let cfg = resolve(cli).map_err(|e| e.context(InvalidInput))?;
            if cfg.trajectory && out.is_none() {
                return Err(anyhow!("--trajectory needs --out").context(InvalidInput));
            }
            let outcome = run_solve(&cfg)?;
            emit_record(out, "solve.json", &outcome.record)?;
            if cfg.trajectory {
                emit_csv(out, "trajectory.csv", &trajectory_csv(&outcome.solution)?)?;
            }
            if !outcome.record.succeeded() {
                eprintln!(
                    "GMRES stopped after {} iterations at residual {:e}",
                    outcome.record.iterations.unwrap_or(0),
                    outcome.record.final_residual.unwrap_or(f64::NAN)
                );
                return Ok(2);
            }
            Ok(0)
        }
        Command::Spectrum => {
            let cfg = resolve(cli).map_err(|e| e.context(InvalidInput))?;
            let record = run_spectrum(&cfg).map_err(|e| anyhow::Error::new(e).context(InvalidInput))?;
            emit_record(out, "spectrum.json", &record)?;
            Ok(0)
        }
        Command::Bound { sweep } => {
            let cfg = resolve(cli).map_err(|e| e.context(InvalidInput))?;
            let sweep = if sweep.is_empty() {
                paraexp_ocp::experiment::BOUND_SWEEP.to_vec()
            } else {
                sweep.clone()
            };
            let table = run_bound(&cfg, &sweep).map_err(|e| anyhow::Error::new(e).context(InvalidInput))?;
            emit_csv(out, "bound.csv", &table)?;
            Ok(0)
        }
        Command::Table {
            id,
            step_reading,
            spectrum,
        } => {
            let id: TableId = id.parse().map_err(|e| anyhow::Error::new(e).context(InvalidInput))?;
            let overrides = resolve_table_overrides(cli).map_err(|e| e.context(InvalidInput))?;
            let opts = TableOptions {
                wave_horizon: overrides.horizon,
                workers: overrides.workers.unwrap_or(Count::AUTO),
                seed: overrides.seed.unwrap_or(0),
                step_reading: *step_reading,
                spectrum: *spectrum,
            };
            let outcome = run_table(id, &opts)?;
            emit_csv(out, &format!("{id}.csv"), &outcome.csv)?;
            let report = outcome.diff_report();
            match out {
                Some(dir) => fs::write(dir.join(format!("{id}_diff.txt")), &report)?,
                None => eprint!("{report}"),
            }
            if outcome.has_failures() {
                eprintln!("{id}: at least one sub-run failed");
                return Ok(2);
            }
            Ok(0)
        }
    }
}

/// Tables fix their own sweeps; only the horizon, workers and seed apply.
fn resolve_table_overrides(cli: &Cli) -> Result<ConfigPatch> {
    let patch = read_patch(cli.config.as_deref())?.merged(&cli.overrides.patch());
    if let Some(t) = patch.horizon {
        if !(t > 0.0 && t.is_finite()) {
            bail!("T must be positive, got {t}");
        }
    }
    if patch.workers == Some(Count::Fixed(0)) {
        bail!("workers must be positive or \"auto\"");
    }
    Ok(patch)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.downcast_ref::<InvalidInput>().is_some();
            ExitCode::from(if invalid { 1 } else { 2 })
        }
    }
}
