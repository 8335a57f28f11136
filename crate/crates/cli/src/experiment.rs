//! JSON experiment configs and the pipeline runner behind
//! `kclust experiment`.
//!
//! Configs are strict: unknown keys are rejected so misspelled options
//! fail fast instead of silently running defaults. Every run is fully
//! deterministic given the seeds in the config; the summary records the
//! seed and a hash of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kclust::analysis::{mode_isolation_report, nmi, sparse_isolation_report};
use kclust::dataset::{
    generate_clusters_with_outliers, generate_two_moons, save_labels, DataSet, DensityProfile,
    Partition, WeightVector,
};
use kclust::density::{
    adaptive_bandwidth, equalization_weights, knn_density, knn_radius, parzen_density_at_data,
    scott_scalar_bandwidth, BandwidthField, DensityTransform,
};
use kclust::embedding::{
    density_inversion_distances, density_transform_curves, euclidean_embedding,
    geodesic_proxy_distances, log_grid, mds_project_embedding, CurveParams, DistanceMatrix,
    InversionCurve,
};
use kclust::error::{Error, Result};
use kclust::kernels::{gaussian_kernel_matrix, KernelMatrix};

use crate::ops;

const SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub criterion: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub weighting: WeightingConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub curves: Option<CurvesConfig>,
    #[serde(default)]
    pub line: Option<LineConfig>,
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Cluster,
    TransformCurves,
    InversionLine,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    TwoMoons {
        n_per_moon: usize,
        noise: f64,
        #[serde(default)]
        graded: Option<f64>,
        seed: u64,
    },
    OutlierBlobs {
        n_dense: usize,
        n_outliers: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Named(String),
}

impl SigmaSpec {
    fn resolve(&self, data: &DataSet) -> Result<f64> {
        match self {
            SigmaSpec::Value(v) => Ok(*v),
            SigmaSpec::Named(name) if name == "scott" => scott_scalar_bandwidth(data),
            SigmaSpec::Named(other) => Err(Error::InvalidArgument(format!(
                "sigma must be a number or \"scott\", got \"{other}\""
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Gaussian {
        sigma: SigmaSpec,
    },
    AdaptiveGaussian {
        k: usize,
        #[serde(default = "default_tau")]
        tau: String,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default = "default_reference")]
        reference: String,
    },
    Zmp {
        k: usize,
    },
    Knn {
        k: usize,
        #[serde(default = "default_true")]
        symmetrize: bool,
    },
}

fn default_tau() -> String {
    "const".into()
}

fn default_reference() -> String {
    "median_knn".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightingConfig {
    #[default]
    None,
    EqualizeKnn {
        k: usize,
    },
    EqualizeParzen {
        sigma: SigmaSpec,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: default_restarts(),
            seed: 0,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

fn default_restarts() -> usize {
    10
}

fn default_max_iter() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesConfig {
    pub family: String,
    pub sigma: f64,
    #[serde(default)]
    pub h: f64,
    pub n_dim: usize,
    pub n_bar: f64,
    pub eps: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub n: usize,
    pub warp: f64,
    pub scale: f64,
    pub sigma: f64,
    pub density_k: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub headline: serde_json::Value,
}

pub fn run_from_path(path: &Path) -> Result<Summary> {
    let raw = std::fs::read(path)?;
    let config: ExperimentConfig = serde_json::from_slice(&raw)?;
    let hash = hex_digest(&raw);
    run(&config, &hash)
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run(config: &ExperimentConfig, config_hash: &str) -> Result<Summary> {
    if config.version != SUPPORTED_VERSION {
        return Err(Error::InvalidArgument(format!(
            "config version {} is not supported (expected {SUPPORTED_VERSION})",
            config.version
        )));
    }
    validate(config)?;
    log::info!(
        "experiment '{}' (config {}, seed {})",
        config.name,
        &config_hash[..12],
        config.optimizer.seed
    );
    let headline = match config.task {
        Task::Cluster => run_cluster_task(config)?,
        Task::TransformCurves => run_curves_task(config)?,
        Task::InversionLine => run_line_task(config)?,
    };
    Ok(Summary {
        name: config.name.clone(),
        config_hash: config_hash.to_string(),
        seed: config.optimizer.seed,
        headline,
    })
}

/// Fail-fast validation: every referenced section must exist for the task
/// before any computation starts.
fn validate(config: &ExperimentConfig) -> Result<()> {
    match config.task {
        Task::Cluster => {
            let dataset = config
                .dataset
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("cluster task needs a dataset".into()))?;
            match (&dataset.path, &dataset.generator) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(Error::InvalidArgument(
                        "dataset needs exactly one of 'path' or 'generator'".into(),
                    ))
                }
            }
            let criterion = config
                .criterion
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("cluster task needs a criterion".into()))?;
            if !matches!(criterion, "aa" | "nc" | "kmeans") {
                return Err(Error::InvalidArgument(format!(
                    "criterion must be aa, nc, or kmeans, got '{criterion}'"
                )));
            }
            if criterion != "kmeans" && config.kernel.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "criterion '{criterion}' needs a kernel section"
                )));
            }
            let k = config
                .k
                .ok_or_else(|| Error::InvalidArgument("cluster task needs k".into()))?;
            if k < 1 {
                return Err(Error::InvalidArgument("k must be >= 1".into()));
            }
            if config.sweep.is_some()
                && !matches!(config.kernel, Some(KernelConfig::Gaussian { .. }))
            {
                return Err(Error::InvalidArgument(
                    "bandwidth sweeps need a gaussian kernel section".into(),
                ));
            }
            if config.curves.is_some() || config.line.is_some() {
                return Err(Error::InvalidArgument(
                    "cluster task does not accept 'curves' or 'line' sections".into(),
                ));
            }
        }
        Task::TransformCurves => {
            if config.curves.is_none() {
                return Err(Error::InvalidArgument(
                    "transform_curves task needs a 'curves' section".into(),
                ));
            }
            if config.dataset.is_some() || config.kernel.is_some() || config.line.is_some() {
                return Err(Error::InvalidArgument(
                    "transform_curves task only accepts the 'curves' section".into(),
                ));
            }
        }
        Task::InversionLine => {
            if config.line.is_none() {
                return Err(Error::InvalidArgument(
                    "inversion_line task needs a 'line' section".into(),
                ));
            }
            if config.dataset.is_some() || config.kernel.is_some() || config.curves.is_some() {
                return Err(Error::InvalidArgument(
                    "inversion_line task only accepts the 'line' section".into(),
                ));
            }
        }
    }
    Ok(())
}

fn build_dataset(spec: &DatasetSpec) -> Result<(DataSet, Option<Partition>, Option<Vec<usize>>)> {
    if let Some(path) = &spec.path {
        let data = ops::load(path)?;
        let truth = data.truth_partition();
        return Ok((data, truth, None));
    }
    match spec.generator.as_ref().expect("validated") {
        GeneratorSpec::TwoMoons {
            n_per_moon,
            noise,
            graded,
            seed,
        } => {
            let profile = match graded {
                Some(ratio) => DensityProfile::Graded { ratio: *ratio },
                None => DensityProfile::Uniform,
            };
            let (data, truth) = generate_two_moons(*n_per_moon, *noise, profile, *seed)?;
            Ok((data, Some(truth), None))
        }
        GeneratorSpec::OutlierBlobs {
            n_dense,
            n_outliers,
            separation,
            seed,
        } => {
            let (data, truth) =
                generate_clusters_with_outliers(*n_dense, *n_outliers, *separation, *seed)?;
            let outliers = (2 * n_dense..data.n()).collect();
            Ok((data, Some(truth), Some(outliers)))
        }
    }
}

fn build_kernel(config: &KernelConfig, data: &DataSet) -> Result<(KernelMatrix, Option<f64>)> {
    match config {
        KernelConfig::Gaussian { sigma } => {
            let sigma = sigma.resolve(data)?;
            Ok((gaussian_kernel_matrix(data, sigma)?, Some(sigma)))
        }
        KernelConfig::AdaptiveGaussian {
            k,
            tau,
            alpha,
            reference,
        } => {
            let rho = knn_density(data, *k)?;
            let tau = match tau.as_str() {
                "const" => DensityTransform::Constant,
                "identity" => DensityTransform::Identity,
                "log" => DensityTransform::Log {
                    alpha: alpha.unwrap_or(1.0),
                },
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown density transform '{other}'"
                    )))
                }
            };
            let reference = match reference.as_str() {
                "scott" => scott_scalar_bandwidth(data)?,
                "median_knn" => {
                    let radii = knn_radius(data, *k)?;
                    ops::median(&radii)
                }
                other => other.parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad bandwidth reference '{other}'"))
                })?,
            };
            let bw = adaptive_bandwidth(&rho, &tau, data.dim(), reference)?;
            Ok((
                kclust::kernels::adaptive_gaussian_kernel_matrix(data, &bw)?,
                None,
            ))
        }
        KernelConfig::Zmp { k } => {
            let radii = knn_radius(data, *k)?;
            let bw = BandwidthField::per_point_scalar(radii)?;
            Ok((kclust::kernels::zmp_kernel_matrix(data, &bw)?, None))
        }
        KernelConfig::Knn { k, symmetrize } => Ok((
            kclust::kernels::knn_kernel_matrix(data, *k, *symmetrize)?,
            None,
        )),
    }
}

fn build_weights(
    config: &WeightingConfig,
    data: &DataSet,
    kernel_sigma: Option<f64>,
) -> Result<WeightVector> {
    match config {
        WeightingConfig::None => Ok(WeightVector::uniform(data.n())),
        WeightingConfig::EqualizeKnn { k } => {
            let rho = knn_density(data, *k)?;
            equalization_weights(&rho)
        }
        WeightingConfig::EqualizeParzen { sigma } => {
            let sigma = match (sigma, kernel_sigma) {
                (SigmaSpec::Named(name), Some(s)) if name == "kernel" => s,
                _ => sigma.resolve(data)?,
            };
            let bw = BandwidthField::global_scalar(sigma, data.n())?;
            let rho = parzen_density_at_data(data, &bw, None)?;
            equalization_weights(&rho)
        }
    }
}

fn run_cluster_task(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let dataset_spec = config.dataset.as_ref().expect("validated");
    let (data, truth, outliers) = build_dataset(dataset_spec)?;
    let criterion = config.criterion.as_deref().expect("validated");
    let k = config.k.expect("validated");
    let opt = &config.optimizer;

    if let Some(sweep) = &config.sweep {
        return run_sweep(config, &data, truth.as_ref(), criterion, k, sweep);
    }

    let (kernel, kernel_sigma) = match criterion {
        "kmeans" => (None, None),
        _ => {
            let (a, sigma) = build_kernel(config.kernel.as_ref().expect("validated"), &data)?;
            (Some(a), sigma)
        }
    };
    let weights = build_weights(&config.weighting, &data, kernel_sigma)?;
    let run = ops::cluster_with(
        &data,
        kernel.as_ref(),
        criterion,
        k,
        &weights,
        opt.restarts,
        opt.seed,
        opt.max_iter,
        opt.tol,
    )?;
    log::info!(
        "energy {} (trace of {} entries)",
        run.energy.value,
        run.trace.len()
    );

    if let Some(path) = &config.outputs.labels {
        save_labels(path, &run.partition)?;
    }

    // bias diagnostics
    let rho = knn_density(&data, 10.min(data.n() - 1).max(1))?;
    let bias = if run.partition.k() >= 2 {
        Some(mode_isolation_report(
            &run.partition,
            &rho,
            kernel.as_ref(),
            truth.as_ref(),
        )?)
    } else {
        None
    };
    let sparse = match (&outliers, run.partition.k()) {
        (Some(outlier_indices), 2) => Some(sparse_isolation_report(
            &run.partition,
            &data,
            outlier_indices,
            truth.as_ref(),
        )?),
        _ => None,
    };
    let nmi_truth = truth
        .as_ref()
        .map(|t| nmi(&run.partition, t))
        .transpose()?;

    let report = serde_json::json!({
        "name": config.name,
        "criterion": criterion,
        "k": k,
        "seed": opt.seed,
        "restarts": opt.restarts,
        "energy": run.energy,
        "trace": run.trace,
        "diagonal_shift": run.shift,
        "cluster_sizes": run.partition.cluster_sizes(),
        "nmi_vs_truth": nmi_truth,
        "mode_isolation": bias,
        "sparse_isolation": sparse,
    });
    if let Some(path) = &config.outputs.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }

    if let Some(path) = &config.outputs.plot_data {
        write_plot_data(path, config, &data, &rho.rho)?;
    }

    Ok(report)
}

/// 3-D MDS plot data with a density color column. Adaptive kernels are
/// projected through their proxy-distance embedding, everything else
/// through the raw pairwise distances.
fn write_plot_data(
    path: &Path,
    config: &ExperimentConfig,
    data: &DataSet,
    rho: &[f64],
) -> Result<()> {
    let embedding = match config.kernel.as_ref() {
        Some(KernelConfig::AdaptiveGaussian { k, .. }) | Some(KernelConfig::Zmp { k }) => {
            let density = knn_density(data, *k)?;
            let radii = knn_radius(data, *k)?;
            let bw = adaptive_bandwidth(
                &density,
                &DensityTransform::Constant,
                data.dim(),
                ops::median(&radii),
            )?;
            euclidean_embedding(&geodesic_proxy_distances(data, &bw)?)?
        }
        _ => euclidean_embedding(&DistanceMatrix::from_points(data))?,
    };
    let (coords, _) = mds_project_embedding(&embedding, 3)?;
    let mut out = std::fs::File::create(path)?;
    use std::io::Write as _;
    writeln!(out, "y0,y1,y2,density")?;
    for p in 0..coords.nrows() {
        writeln!(
            out,
            "{},{},{},{}",
            coords[[p, 0]],
            coords[[p, 1]],
            coords[[p, 2]],
            rho[p]
        )?;
    }
    Ok(())
}

fn run_sweep(
    config: &ExperimentConfig,
    data: &DataSet,
    truth: Option<&Partition>,
    criterion: &str,
    k: usize,
    sweep: &SweepConfig,
) -> Result<serde_json::Value> {
    let opt = &config.optimizer;
    let mut rows = Vec::new();
    for &sigma in &sweep.sigmas {
        let kernel = gaussian_kernel_matrix(data, sigma)?;
        let weights = build_weights(&config.weighting, data, Some(sigma))?;
        let run = ops::cluster_with(
            data,
            Some(&kernel),
            criterion,
            k,
            &weights,
            opt.restarts,
            opt.seed,
            opt.max_iter,
            opt.tol,
        )?;
        let rho = knn_density(data, 10.min(data.n() - 1).max(1))?;
        let bias = mode_isolation_report(&run.partition, &rho, Some(&kernel), truth)?;
        rows.push(serde_json::json!({
            "sigma": sigma,
            "energy": run.energy.value,
            "nmi_vs_truth": bias.nmi,
            "minority_fraction": bias.minority_fraction,
            "mode_in_minority": bias.mode_in_minority,
            "degree_cv": bias.degree_cv,
        }));
    }
    let report = serde_json::json!({
        "name": config.name,
        "criterion": criterion,
        "k": k,
        "seed": opt.seed,
        "sweep": rows,
    });
    if let Some(path) = &config.outputs.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(path) = &config.outputs.plot_data {
        let mut out = std::fs::File::create(path)?;
        use std::io::Write as _;
        writeln!(out, "sigma,energy,nmi,minority_fraction,mode_in_minority")?;
        for row in report["sweep"].as_array().expect("rows") {
            writeln!(
                out,
                "{},{},{},{},{}",
                row["sigma"],
                row["energy"],
                row["nmi_vs_truth"],
                row["minority_fraction"],
                row["mode_in_minority"]
            )?;
        }
    }
    Ok(report)
}

fn run_curves_task(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let curves = config.curves.as_ref().expect("validated");
    let family = match curves.family.as_str() {
        "normalization" => InversionCurve::NormalizationOnly,
        "weighted" => InversionCurve::NormalizationWithWeights,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown curve family '{other}'"
            )))
        }
    };
    let params = CurveParams {
        sigma: curves.sigma,
        h: curves.h,
        n_dim: curves.n_dim,
        n_bar: curves.n_bar,
        eps: curves.eps,
    };
    let grid = log_grid(curves.x_min, curves.x_max, curves.points)?;
    let samples = density_transform_curves(family, &params, &grid)?;
    if let Some(path) = &config.outputs.plot_data {
        let mut out = std::fs::File::create(path)?;
        use std::io::Write as _;
        writeln!(out, "x,tau")?;
        for (x, t) in samples.x.iter().zip(samples.tau.iter()) {
            writeln!(out, "{x},{t}")?;
        }
    }
    let report = serde_json::json!({
        "name": config.name,
        "family": curves.family,
        "minima": samples.minima,
        "maxima": samples.maxima,
    });
    if let Some(path) = &config.outputs.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// A 1-D line with smoothly increasing density, its degree-modified
/// distances, and the resulting embedded density: the sparsest points
/// come out relatively densest.
fn run_line_task(config: &ExperimentConfig) -> Result<serde_json::Value> {
    let line = config.line.as_ref().expect("validated");
    let xs: Vec<f64> = (0..line.n)
        .map(|i| ((i as f64 + 0.5) / line.n as f64).powf(line.warp) * line.scale)
        .collect();
    let data = DataSet::from_1d(&xs, "graded-line")?;
    let a = gaussian_kernel_matrix(&data, line.sigma)?;
    let rho = knn_density(&data, line.density_k)?;
    let d = density_inversion_distances(&data, &a, line.sigma)?;
    let embedding = euclidean_embedding(&d)?;
    let embedded = embedding.as_dataset("embedded")?;
    let rho_embedded = knn_density(&embedded, line.density_k)?;

    let mut order: Vec<usize> = (0..line.n).collect();
    order.sort_by(|&i, &j| rho.rho[i].partial_cmp(&rho.rho[j]).expect("finite"));
    let sparsest: Vec<usize> = order[..line.n / 2].to_vec();
    let original: Vec<f64> = sparsest.iter().map(|&i| rho.rho[i]).collect();
    let mapped: Vec<f64> = sparsest.iter().map(|&i| rho_embedded.rho[i]).collect();
    let sparsest_half_rank_corr = kclust::spearman(&original, &mapped)?;

    if let Some(path) = &config.outputs.plot_data {
        let (coords, _) = mds_project_embedding(&embedding, 3)?;
        let mut out = std::fs::File::create(path)?;
        use std::io::Write as _;
        writeln!(out, "x,y0,y1,y2,density,embedded_density")?;
        for p in 0..line.n {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                xs[p],
                coords[[p, 0]],
                coords[[p, 1]],
                coords[[p, 2]],
                rho.rho[p],
                rho_embedded.rho[p]
            )?;
        }
    }
    let report = serde_json::json!({
        "name": config.name,
        "h": embedding.h,
        "embedded_dimensions": embedding.n_prime,
        "max_residual": embedding.max_residual,
        "sparsest_half_rank_correlation": sparsest_half_rank_corr,
    });
    if let Some(path) = &config.outputs.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
