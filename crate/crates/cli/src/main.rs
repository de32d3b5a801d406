//! `dyadic`: exact and approximate inverses of low-rank perturbations, and the
//! randomized convergence study.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 malformed input, 5 dimension or
//! invalid value, 6 singular input, 7 invalid bench configuration.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dyadic_core::experiment::{write_records_csv, write_summary_csv};
use dyadic_core::{
    run_experiment, summarize, Distribution, Error, ExperimentConfig, MetricMode, Operator, Problem,
};

#[derive(Parser, Debug)]
#[command(
    name = "dyadic",
    version,
    about = "Inverses of operators under dyadic perturbations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print det A, det B and det B' for a problem file.
    Det { problem: PathBuf },
    /// Print the exact inverse of the perturbed operator.
    Inverse { problem: PathBuf },
    /// Print the order-m approximation, the Taylor polynomial of the same
    /// order, and their errors against the exact inverse.
    Approx {
        problem: PathBuf,
        #[arg(long, short = 'm')]
        order: usize,
    },
    /// Run the randomized convergence study and write per-trial CSV.
    Bench(BenchArgs),
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    /// Dimensions, e.g. `2..10` or `3,5,8` (ranges are inclusive).
    #[arg(long, value_parser = parse_list, default_value = "2..10")]
    dims: IntList,
    /// Numbers of dyads.
    #[arg(long, value_parser = parse_list, default_value = "2..15")]
    ranks: IntList,
    /// Approximation orders. Defaults to `0..max rank`.
    #[arg(long, value_parser = parse_list)]
    orders: Option<IntList>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, env = "LOWRANK_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "normal")]
    dist: Distribution,
    #[arg(long, default_value = "none")]
    metric: MetricMode,
    /// Per-trial records; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Per-cell summary (medians, means, win-rate).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Clone, Debug)]
struct IntList(Vec<usize>);

/// Comma-separated items, each a number or an inclusive range `a..b`
/// (`a..=b` is accepted too).
fn parse_list(s: &str) -> Result<IntList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: usize = lo
                .trim()
                .parse()
                .map_err(|_| format!("bad range start in `{item}`"))?;
            let hi: usize = hi
                .trim()
                .parse()
                .map_err(|_| format!("bad range end in `{item}`"))?;
            if lo > hi {
                return Err(format!("empty range `{item}`"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(
                item.parse()
                    .map_err(|_| format!("not a number: `{item}`"))?,
            );
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(IntList(out))
}

enum Failure {
    Io(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 3,
            Failure::Core(e) => match e {
                Error::Malformed(_) => 4,
                Error::DimensionMismatch { .. }
                | Error::NonFinite(_)
                | Error::InvalidArgument(_)
                | Error::EmptyInput(_) => 5,
                Error::SingularMatrix
                | Error::SingularBase
                | Error::SingularPerturbation { .. }
                | Error::TruncatedDetSingular { .. }
                | Error::DegenerateMetric => 6,
                Error::InvalidConfig(_) => 7,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(msg) => msg.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

fn io_failure(path: &Path, err: io::Error) -> Failure {
    Failure::Io(format!("{}: {err}", path.display()))
}

fn load(path: &Path) -> Result<Problem, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(Problem::from_json(&text)?)
}

fn rows(op: &Operator) -> serde_json::Value {
    json!(op.to_rows())
}

fn print_json(value: serde_json::Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &value)
        .map_err(|e| Failure::Io(format!("stdout: {e}")))?;
    writeln!(out).map_err(|e| Failure::Io(format!("stdout: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Det { problem } => {
            let report = load(&problem)?.det()?;
            print_json(json!({
                "det_a": report.det_a,
                "det_b": report.det_b,
                "det_b_prime": report.det_b_prime,
            }))
        }
        Command::Inverse { problem } => {
            let inverse = load(&problem)?.exact_inverse()?;
            print_json(json!({ "inverse": rows(&inverse) }))
        }
        Command::Approx { problem, order } => {
            let r = load(&problem)?.approx(order)?;
            print_json(json!({
                "order": r.order,
                "det_m": r.det_m,
                "approx_inverse": rows(&r.approx_inverse),
                "approx_error": r.approx_error,
                "taylor_inverse": rows(&r.taylor_inverse),
                "taylor_error": r.taylor_error,
            }))
        }
        Command::Bench(args) => bench(args),
    }
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let Format::Csv = args.format;
    let orders = match args.orders {
        Some(list) => list.0,
        None => (0..=args.ranks.0.iter().copied().max().unwrap_or(0)).collect(),
    };
    let cfg = ExperimentConfig {
        dims: args.dims.0,
        ranks: args.ranks.0,
        orders,
        trials: args.trials,
        seed: args.seed,
        distribution: args.dist,
        metric: args.metric,
    };
    let records = run_experiment(&cfg)?;

    let regenerated = records
        .iter()
        .filter(|r| r.regenerated && r.order == cfg.orders[0])
        .count();
    let cells = cfg.dims.len() * cfg.ranks.len() * cfg.trials;
    eprintln!("regenerated {regenerated} of {cells} trials");

    match &args.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            let mut out = BufWriter::new(file);
            write_records_csv(&mut out, &records).map_err(|e| io_failure(path, e))?;
            out.flush().map_err(|e| io_failure(path, e))?;
        }
        None => {
            let mut out = BufWriter::new(io::stdout().lock());
            write_records_csv(&mut out, &records)
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Io(format!("stdout: {e}")))?;
        }
    }
    if let Some(path) = &args.summary {
        let rows = summarize(&records)?;
        let file = File::create(path).map_err(|e| io_failure(path, e))?;
        let mut out = BufWriter::new(file);
        write_summary_csv(&mut out, &rows)
            .and_then(|_| out.flush())
            .map_err(|e| io_failure(path, e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
