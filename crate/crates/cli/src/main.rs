//! `manred`: generate datasets, reduce them, and run the benchmark grid.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage or unknown dataset kind,
//! 3 I/O, 4 disconnected neighbor graph, 5 solver did not converge.

mod commands;
mod spec_arg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "manred", version, about = "Dimensionality reduction for manifold-valued data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV plus a `.spec.json` sidecar.
    Generate(GenerateArgs),
    /// Fit one reducer and write the embedding CSV and model JSON.
    Reduce(ReduceArgs),
    /// Fréchet mean of a dataset, printed as one CSV row.
    Mean(MeanArgs),
    /// Run the benchmark grid and write the report as CSV and JSON.
    Benchmark(BenchmarkArgs),
    /// Geodesic distance between two points.
    Geodesic(GeodesicArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Dataset kind, e.g. sphere_hard or swiss_roll.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReduceMethod {
    Pga,
    Rrpca,
    Ronpp,
    Rle,
    Rlda,
    Risomap,
    Rsvm,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[arg(long, value_enum)]
    method: ReduceMethod,
    /// Input CSV with a header and a label column.
    #[arg(long = "in")]
    input: PathBuf,
    /// Manifold: a JSON file, inline JSON, or `sphere:D`, `spd:N`,
    /// `grassmann:P,N`, `stiefel:P,N`, `euclidean:D`. Defaults to the
    /// input's sidecar, else Euclidean.
    #[arg(long)]
    spec: Option<String>,
    /// Neighbors for graph methods; defaults to min(10, max(3, n/10)).
    #[arg(long)]
    k: Option<usize>,
    /// Output dimension; defaults to min(3, d-1).
    #[arg(long)]
    components: Option<usize>,
    /// Embedding CSV; the model goes to the same stem with `.model.json`.
    #[arg(long)]
    out: PathBuf,
    /// Grow k until the neighbor graph is connected instead of failing.
    #[arg(long)]
    grow_k: bool,
    #[arg(long, default_value = "label")]
    label_column: String,
}

#[derive(Debug, Args)]
struct MeanArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, default_value_t = manred::stats::DEFAULT_MEAN_TOL)]
    tol: f64,
    #[arg(long, default_value_t = manred::stats::DEFAULT_MEAN_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value = "label")]
    label_column: String,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// JSON object overriding benchmark settings; omitted keys keep defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV; the JSON report goes next to it.
    #[arg(long)]
    out: PathBuf,
    /// Directory with mnist.csv, wine.csv and/or cancer.csv.
    #[arg(long)]
    include_real: Option<PathBuf>,
    /// Add the geodesic-kernel SVM row (binary datasets only).
    #[arg(long)]
    with_rsvm: bool,
}

#[derive(Debug, Args)]
struct GeodesicArgs {
    #[arg(long)]
    spec: String,
    /// Comma-separated coordinates, matrices row-major.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long, allow_hyphen_values = true)]
    y: String,
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args()))
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Mean(a) => commands::mean(&a),
        Command::Benchmark(a) => commands::benchmark(&a),
        Command::Geodesic(a) => commands::geodesic(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
