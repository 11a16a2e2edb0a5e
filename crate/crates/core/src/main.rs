use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mpec_cq::bho::{BhoInstance, Dataset, FoldSplit};
use mpec_cq::cq::DEFAULT_BIACTIVE_CAP;
use mpec_cq::error::Error;
use mpec_cq::fixtures::run_fixtures;
use mpec_cq::fuzz::{generated_point, run_fuzz, FuzzConfig};
use mpec_cq::model::Tolerances;
use mpec_cq::report::{log_grid, run_check, run_sweep, to_json, CheckInput, InstanceExport};

/// Constraint qualification and stationarity checks for MPECs, and the
/// bilevel SVC hyperparameter instance. Every flag can also be set through
/// an `MPECCQ_*` environment variable.
#[derive(Parser, Debug)]
#[command(name = "mpec-cq", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    #[arg(long, global = true, env = "MPECCQ_TOL_ACTIVITY")]
    tol_activity: Option<f64>,
    #[arg(long, global = true, env = "MPECCQ_TOL_RANK")]
    tol_rank: Option<f64>,
    #[arg(long, global = true, env = "MPECCQ_TOL_PD")]
    tol_pd: Option<f64>,
    #[arg(long, global = true, env = "MPECCQ_TOL_MARGIN")]
    tol_margin: Option<f64>,
    #[arg(long, global = true, env = "MPECCQ_TOL_FEAS")]
    tol_feas: Option<f64>,
    #[arg(long, global = true, env = "MPECCQ_TOL_WITNESS")]
    tol_witness: Option<f64>,
    /// Largest biactive set enumerated before a verdict becomes undecided.
    #[arg(long, global = true, env = "MPECCQ_CAP_GH", default_value_t = DEFAULT_BIACTIVE_CAP)]
    cap_gh: usize,
    /// Add wall-clock timing to reports (makes output nondeterministic).
    #[arg(long, global = true, env = "MPECCQ_TIMING")]
    timing: bool,
}

impl Global {
    fn tolerances(&self) -> Result<Tolerances, Error> {
        let mut t = Tolerances::default();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut t.activity_eps, self.tol_activity);
        set(&mut t.rank_rel_tol, self.tol_rank);
        set(&mut t.pd_eps, self.tol_pd);
        set(&mut t.strict_margin_eps, self.tol_margin);
        set(&mut t.feas_eps, self.tol_feas);
        set(&mut t.witness_slack, self.tol_witness);
        t.validate()?;
        Ok(t)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze an evaluation record, or an instance together with a point.
    Check {
        #[arg(long, env = "MPECCQ_INPUT")]
        input: PathBuf,
        /// Point JSON `{"C","zeta","z","alpha","xi"}` when `--input` is an instance.
        #[arg(long, env = "MPECCQ_POINT")]
        point: Option<PathBuf>,
        #[arg(long, env = "MPECCQ_OUT")]
        out: Option<PathBuf>,
    },
    /// Classify stationarity for a given objective gradient.
    Stationarity {
        #[arg(long, env = "MPECCQ_INPUT")]
        input: PathBuf,
        /// Inline JSON array or a file holding one.
        #[arg(long, env = "MPECCQ_GRADF")]
        gradf: String,
        #[arg(long, env = "MPECCQ_POINT")]
        point: Option<PathBuf>,
        #[arg(long, env = "MPECCQ_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the three built-in counterexamples.
    Fixtures,
    /// Randomized cross-checks of every checker.
    Fuzz {
        #[arg(long, env = "MPECCQ_N", default_value_t = 200)]
        n: usize,
        #[arg(long, env = "MPECCQ_SEED", default_value_t = 42)]
        seed: u64,
        /// Skip the pattern-forced SVC points.
        #[arg(long, env = "MPECCQ_NO_FORCED")]
        no_forced: bool,
        #[arg(long, env = "MPECCQ_AFFINE_PER_ITERATION", default_value_t = 5)]
        affine_per_iteration: usize,
        #[arg(long, env = "MPECCQ_OUT")]
        out: Option<PathBuf>,
    },
    /// Bilevel SVC hyperparameter instances.
    Bho {
        #[command(subcommand)]
        command: BhoCommand,
    },
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// CSV, one sample per row, label last.
    #[arg(long, env = "MPECCQ_DATA")]
    data: PathBuf,
    #[arg(long, env = "MPECCQ_FOLDS")]
    folds: usize,
    #[arg(long, env = "MPECCQ_M1")]
    m1: usize,
    #[arg(long, env = "MPECCQ_M2")]
    m2: usize,
    #[arg(long, env = "MPECCQ_SEED", default_value_t = 0)]
    seed: u64,
}

impl SplitArgs {
    fn instance(&self) -> Result<BhoInstance, Error> {
        let ds = Dataset::from_csv_path(&self.data)?;
        let split = FoldSplit::new(ds.len(), self.folds, self.m1, self.m2, self.seed)?;
        BhoInstance::from_dataset(&ds, &split)
    }
}

#[derive(Subcommand, Debug)]
enum BhoCommand {
    /// Build an instance from a dataset and write it with its affine data.
    Build {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, env = "MPECCQ_OUT")]
        out: PathBuf,
    },
    /// Solve the lower level at one `C` and write the completed point.
    Point {
        /// Output of `bho build`.
        #[arg(long, env = "MPECCQ_INSTANCE")]
        instance: PathBuf,
        #[arg(long = "C", alias = "c", env = "MPECCQ_C")]
        c: f64,
        #[arg(long, env = "MPECCQ_OUT")]
        out: Option<PathBuf>,
    },
    /// Analyze generated points over a log-spaced grid of `C`.
    Sweep {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, env = "MPECCQ_C_MIN")]
        c_min: f64,
        #[arg(long, env = "MPECCQ_C_MAX")]
        c_max: f64,
        #[arg(long, env = "MPECCQ_C_COUNT")]
        c_count: usize,
        /// Include the generated points in the report.
        #[arg(long, env = "MPECCQ_POINTS")]
        points: bool,
        #[arg(long, env = "MPECCQ_OUT")]
        out: Option<PathBuf>,
    },
}

/// Exit code 2 for anything wrong with the input, 1 for numerical or
/// invariant failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_)
        | Error::NonFinite(_)
        | Error::Tolerance { .. }
        | Error::Complementarity { .. }
        | Error::InsufficientData(_)
        | Error::Parse(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let text = to_json(value);
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_check_input(input: &Path, point: Option<&Path>) -> Result<CheckInput, Error> {
    let point = point.map(read).transpose()?;
    CheckInput::parse(&read(input)?, point.as_deref())
}

fn parse_gradf(arg: &str) -> Result<Vec<f64>, Error> {
    let text = if arg.trim_start().starts_with('[') { arg.to_string() } else { read(Path::new(arg))? };
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("--gradf: {e}")))
}

fn run(cli: Cli) -> Result<bool, Error> {
    let tol = cli.global.tolerances()?;
    let cap = cli.global.cap_gh;
    let timing = cli.global.timing;
    match cli.command {
        Command::Check { input, point, out } => {
            let input = load_check_input(&input, point.as_deref())?;
            let report = run_check(&input, None, &tol, cap, timing)?;
            emit(&report, out.as_deref())?;
            Ok(report.passed())
        }
        Command::Stationarity { input, gradf, point, out } => {
            let input = load_check_input(&input, point.as_deref())?;
            let g = parse_gradf(&gradf)?;
            let report = run_check(&input, Some(&g), &tol, cap, timing)?;
            emit(&report, out.as_deref())?;
            Ok(report.passed())
        }
        Command::Fixtures => {
            let summary = run_fixtures(&tol)?;
            emit(&summary, None)?;
            for r in summary.results.iter().filter(|r| !r.passed) {
                eprintln!("fixture {} failed: {}", r.name, r.mismatches.join("; "));
            }
            Ok(summary.all_passed())
        }
        Command::Fuzz { n, seed, no_forced, affine_per_iteration, out } => {
            let cfg = FuzzConfig {
                iterations: n,
                seed,
                tol,
                cap,
                affine_per_iteration,
                forced: !no_forced,
                ..Default::default()
            };
            let summary = run_fuzz(&cfg);
            emit(&summary, out.as_deref())?;
            for v in &summary.violations {
                eprintln!(
                    "violation [{}] {}: {} (instance {}); reproduce: {}",
                    v.source, v.check, v.detail, v.instance_digest, v.reproduce
                );
            }
            Ok(summary.passed())
        }
        Command::Bho { command } => match command {
            BhoCommand::Build { split, out } => {
                let export = InstanceExport::new(&split.instance()?);
                emit(&export, Some(&out))?;
                eprintln!("wrote instance {} (n = {}) to {}", export.digest, export.n, out.display());
                Ok(true)
            }
            BhoCommand::Point { instance, c, out } => {
                let doc: serde_json::Value =
                    serde_json::from_str(&read(&instance)?).map_err(|e| Error::Parse(e.to_string()))?;
                let inst: BhoInstance = serde_json::from_value(doc.get("instance").cloned().unwrap_or(doc))
                    .map_err(|e| Error::Parse(e.to_string()))?;
                let point = generated_point(&inst, c, &tol)?;
                emit(&point, out.as_deref())?;
                Ok(true)
            }
            BhoCommand::Sweep { split, c_min, c_max, c_count, points, out } => {
                let grid = log_grid(c_min, c_max, c_count)?;
                let report = run_sweep(&split.instance()?, &grid, &tol, cap, points);
                emit(&report, out.as_deref())?;
                Ok(report.passed())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
