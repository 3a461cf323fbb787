use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use l0fit::constrained::fit_constrained;
use l0fit::instances::{gen_correlation, gen_planted, Graph};
use l0fit::tree::{dendrogram_of, matrix_to_tree, parse_newick, parse_newick_with_labels, serialize_newick};
use l0fit::treefit::fit_tree_with;
use l0fit::ultrafit::{solve, UltraSolverSpec, DEFAULT_EXACT_LIMIT};
use l0fit::value::{parse_value, zero, Value};
use l0fit::verify::{check_tree_metric_within, check_ultrametric_within};
use l0fit::{
    l0_distance, Certificate, ConstrainedInstance, DistanceMatrix, Error, Execution, FitReport, UltrametricFitter,
};

/// Fit tree metrics and ultrametrics minimizing the number of disagreeing
/// pairs.
#[derive(Parser)]
#[command(name = "l0fit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree metric to a distance matrix
    FitTree(FitArgs),
    /// Fit an ultrametric to a distance matrix
    FitUltra(FitArgs),
    /// Fit a constrained ultrametric to a constrained instance
    FitConstrained(FitArgs),
    /// Check a matrix or Newick file for a metric property
    Check(CheckArgs),
    /// Generate an instance
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args)]
struct FitArgs {
    /// Input file (distance matrix, or constrained instance for fit-constrained)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::Heuristic)]
    solver: SolverArg,
    /// Largest instance the exact solver accepts
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    /// Newick output; stdout when absent
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report output; stderr when absent
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the fitted matrix
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Run on a single thread
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Matrix,
    Ultrametric,
    Tree,
    Newick,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: CheckKind,
    /// Accept violations up to this size (matrix kinds only)
    #[arg(long)]
    tolerance: Option<String>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random tree metric with `k` overwritten entries
    Planted {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Correlation-clustering instance from a graph file
    Cc {
        /// Graph file: vertex count, labels, then one edge per line
        #[arg(long)]
        input: PathBuf,
        /// Value used in place of 0
        #[arg(long)]
        delta: Option<String>,
        /// Number of auxiliary elements; defaults to n(n-1)
        #[arg(long)]
        vprime_size: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn value_arg(text: &str) -> anyhow::Result<Value> {
    parse_value(text).map_err(|e| Error::InvalidArgument(e.to_string()).into())
}

impl FitArgs {
    fn spec(&self) -> UltraSolverSpec {
        let base = match self.solver {
            SolverArg::Exact => UltraSolverSpec::exact(),
            SolverArg::Heuristic => UltraSolverSpec::heuristic(),
        };
        base.with_limit(self.exact_limit).with_execution(self.execution())
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn finish(&self, report: &FitReport, fitted: &DistanceMatrix, newick: &str) -> anyhow::Result<()> {
        emit(self.output.as_deref(), &format!("{newick}\n"))?;
        if let Some(p) = &self.matrix {
            emit(Some(p), &fitted.to_text())?;
        }
        match &self.report {
            Some(p) => emit(Some(p), &report.to_text())?,
            None => eprint!("{}", report.to_text()),
        }
        eprintln!("wall time {:.3}s", report.wall_time.as_secs_f64());
        Ok(())
    }
}

fn fit_tree_cmd(args: &FitArgs) -> anyhow::Result<()> {
    let d = DistanceMatrix::parse(&read(&args.input)?)?;
    let (t, report) = fit_tree_with(&d, &args.spec(), args.execution())?;
    let newick = serialize_newick(&matrix_to_tree(&t)?);
    args.finish(&report, &t, &newick)
}

fn fit_ultra_cmd(args: &FitArgs) -> anyhow::Result<()> {
    let d = DistanceMatrix::parse(&read(&args.input)?)?;
    let spec = args.spec();
    let start = Instant::now();
    let u = solve(&d, &spec)?;
    let report = FitReport::build(&d, &u, spec.name(), None, Certificate::Ultrametric, start.elapsed())?;
    args.finish(&report, &u, &serialize_newick(&dendrogram_of(&u)))
}

fn fit_constrained_cmd(args: &FitArgs) -> anyhow::Result<()> {
    let inst = ConstrainedInstance::parse(&read(&args.input)?)?;
    let (u, report) = fit_constrained(&inst, &args.spec())?;
    args.finish(&report, &u, &serialize_newick(&dendrogram_of(&u)))
}

fn check_cmd(args: &CheckArgs) -> anyhow::Result<()> {
    let text = read(&args.input)?;
    let tolerance = args.tolerance.as_deref().map(value_arg).transpose()?;
    let tol = tolerance.as_ref().unwrap_or(zero());
    let parse = || match &tolerance {
        Some(t) => DistanceMatrix::parse_with_tolerance(&text, t),
        None => DistanceMatrix::parse(&text),
    };
    match args.kind {
        CheckKind::Matrix => {
            let m = parse()?;
            println!("ok matrix n {}", m.n());
        }
        CheckKind::Ultrametric => {
            let m = parse()?;
            check_ultrametric_within(&m, tol).map_err(Error::NotUltrametric)?;
            println!("ok ultrametric n {}", m.n());
        }
        CheckKind::Tree => {
            let m = parse()?;
            check_tree_metric_within(&m, tol).map_err(Error::NotTreeMetric)?;
            println!("ok tree-metric n {}", m.n());
        }
        CheckKind::Newick => {
            if tolerance.is_some() {
                bail!(Error::InvalidArgument(
                    "--tolerance applies to matrix files only".into()
                ));
            }
            let tree = parse_newick(&text)?;
            tree.validate()?;
            let m = tree.induced_matrix()?;
            let again = parse_newick_with_labels(&serialize_newick(&tree), tree.labels())?.induced_matrix()?;
            if l0_distance(&m, &again).unwrap_or(usize::MAX) != 0 {
                bail!(Error::Invariant(
                    "Newick round trip changed the induced distances".into()
                ));
            }
            check_tree_metric_within(&m, zero()).map_err(Error::NotTreeMetric)?;
            println!("ok newick n {}", m.n());
        }
    }
    Ok(())
}

fn gen_cmd(cmd: &GenCommand) -> anyhow::Result<()> {
    match cmd {
        GenCommand::Planted { n, k, seed, output } => {
            let p = gen_planted(*n, *k, *seed)?;
            emit(output.as_deref(), &p.matrix.to_text())
        }
        GenCommand::Cc {
            input,
            delta,
            vprime_size,
            output,
        } => {
            let g = Graph::parse(&read(input)?)?;
            let delta = delta.as_deref().map(value_arg).transpose()?;
            let d = gen_correlation(&g, delta.as_ref(), *vprime_size)?;
            emit(output.as_deref(), &d.to_text())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::FitTree(a) => fit_tree_cmd(a),
        Command::FitUltra(a) => fit_ultra_cmd(a),
        Command::FitConstrained(a) => fit_constrained_cmd(a),
        Command::Check(a) => check_cmd(a),
        Command::Gen(g) => gen_cmd(g),
    }
}

/// 1 for bad input, 2 for size limits, 3 for internal invariant failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ExactLimit { .. } | Error::TooLarge { .. }) => 2,
        Some(Error::Invariant(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
