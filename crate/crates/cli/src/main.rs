//! Command-line front end: synthetic data, density fields, kernel
//! matrices, clustering runs, embeddings, evaluation, and whole
//! experiment configs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod experiment;
mod ops;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "kclust", version, about = "kernel clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Density estimates, adaptive bandwidths, and equalization weights.
    #[command(subcommand)]
    Density(DensityCommand),
    /// Build, export, and inspect affinity matrices.
    #[command(subcommand)]
    Kernel(KernelCommand),
    /// Run a clustering criterion with the multistart optimizer.
    Cluster(ClusterArgs),
    /// Distance-matrix embeddings, MDS projections, and transform curves.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Evaluation metrics and bias reports.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run a JSON experiment config and write its artifact bundle.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Two interleaved half-circle clusters, optionally density-graded.
    TwoMoons(TwoMoonsArgs),
    /// Two dense blobs plus a far group of outlier points.
    OutlierBlobs(OutlierBlobsArgs),
}

#[derive(Args)]
struct TwoMoonsArgs {
    /// Points per moon.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Isotropic Gaussian jitter.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Density grading ratio (> 1); omit for uniform spacing.
    #[arg(long)]
    graded: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (features + label column).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct OutlierBlobsArgs {
    /// Points per blob.
    #[arg(long, default_value_t = 6)]
    n_dense: usize,
    #[arg(long, default_value_t = 2)]
    n_outliers: usize,
    /// Minimum outlier distance in blob diameters.
    #[arg(long, default_value_t = 0.3)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum DensityCommand {
    /// Per-point density estimates (KNN or Parzen).
    Estimate(DensityEstimateArgs),
    /// Adaptive bandwidths from the density law.
    Bandwidth(BandwidthArgs),
    /// Density-equalizing weights w = (1/rho) / mean(1/rho).
    Weights(WeightsArgs),
}

#[derive(Args)]
struct DensityEstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// knn or parzen.
    #[arg(long, default_value = "knn")]
    estimator: String,
    /// Neighbor count for the knn estimator.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Fixed Parzen bandwidth; omit to use Scott's rule.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BandwidthArgs {
    #[arg(long)]
    input: PathBuf,
    /// Neighbor count for the KNN density behind the law.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Density transform: const, identity, or log.
    #[arg(long, default_value = "const")]
    tau: String,
    /// Alpha for the log transform.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Scale anchor: "scott", "median-knn", or a number.
    #[arg(long, default_value = "scott")]
    reference: String,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    input: PathBuf,
    /// knn or parzen.
    #[arg(long, default_value = "knn")]
    estimator: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Parzen bandwidth; omit to use Scott's rule.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum KernelCommand {
    /// Build an affinity matrix and write it as binary + JSON sidecar.
    Build(KernelBuildArgs),
    /// Print degree statistics and a PSD report for a stored matrix.
    Inspect(KernelInspectArgs),
}

#[derive(Args, Clone)]
struct KernelBuildArgs {
    #[arg(long)]
    input: PathBuf,
    /// gaussian, adaptive, zmp, or knn.
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Bandwidth for the gaussian family; omit to use Scott's rule.
    #[arg(long)]
    sigma: Option<f64>,
    /// Neighbor count for adaptive/zmp/knn families.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Density transform for the adaptive family.
    #[arg(long, default_value = "const")]
    tau: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Scale anchor for the adaptive family.
    #[arg(long, default_value = "median-knn")]
    reference: String,
    /// Keep the raw asymmetric KNN kernel.
    #[arg(long)]
    no_symmetrize: bool,
    /// Replace the result by its degree normalization A/(d_p d_q).
    #[arg(long)]
    normalize: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct KernelInspectArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    psd_tol: f64,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// aa, nc, or kmeans.
    #[arg(long, default_value = "aa")]
    criterion: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Precomputed matrix (binary + sidecar); otherwise built from flags.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelFlags,
    /// none, equalize-knn, or equalize-parzen.
    #[arg(long, default_value = "none")]
    weighting: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    labels_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct KernelFlags {
    /// gaussian, adaptive, zmp, or knn.
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 10)]
    kernel_k: usize,
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Embed the adaptive-bandwidth proxy distances of a dataset.
    Geodesic(EmbedGeodesicArgs),
    /// Embed the degree-modified distances (density inversion demo).
    Inversion(EmbedInversionArgs),
    /// Classical MDS of a stored distance matrix.
    Mds(EmbedMdsArgs),
    /// Sample the implicit density-transform curves.
    Curves(EmbedCurvesArgs),
}

#[derive(Args)]
struct EmbedGeodesicArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "const")]
    tau: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// MDS projection dimension for the plot data.
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EmbedInversionArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Neighbor count for the before/after density comparison.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EmbedMdsArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EmbedCurvesArgs {
    /// normalization or weighted.
    #[arg(long, default_value = "normalization")]
    family: String,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    #[arg(long, default_value_t = 1)]
    n_dim: usize,
    #[arg(long, default_value_t = 20.0)]
    n_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1.0001)]
    x_min: f64,
    #[arg(long, default_value_t = 1e6)]
    x_max: f64,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Normalized mutual information between two label files.
    Nmi(EvalNmiArgs),
    /// Mode-isolation bias report for a clustering result.
    ModeIsolation(EvalModeArgs),
    /// Sparse-subset isolation report for a clustering result.
    SparseIsolation(EvalSparseArgs),
}

#[derive(Args)]
struct EvalNmiArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
struct EvalModeArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Neighbor count for the KNN density behind the report.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalSparseArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated outlier indices.
    #[arg(long)]
    outliers: String,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version "errors" are successful exits
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Synth(cmd) => ops::run_synth(cmd),
        Command::Density(cmd) => ops::run_density(cmd),
        Command::Kernel(cmd) => ops::run_kernel(cmd),
        Command::Cluster(args) => ops::run_cluster(args),
        Command::Embed(cmd) => ops::run_embed(cmd),
        Command::Eval(cmd) => ops::run_eval(cmd),
        Command::Experiment(args) => experiment::run_from_path(&args.config).map(|summary| {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
