//! Implementations of the direct (non-experiment) subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use kclust::analysis::{mode_isolation_report, nmi, sparse_isolation_report};
use kclust::clustering::{
    basic_kmeans, kernel_kmeans_multistart, mode_ball_partition, normalized_cut_multistart,
    single_linkage_partition, Init,
};
use kclust::dataset::{
    generate_clusters_with_outliers, generate_two_moons, load_dataset, load_labels, save_dataset,
    save_labels, DataSet, DensityProfile, Format, Partition, WeightVector,
};
use kclust::density::{
    adaptive_bandwidth, equalization_weights, knn_density, knn_radius, parzen_density_at_data,
    scott_bandwidth, scott_scalar_bandwidth, BandwidthField, DensityField, DensityTransform,
};
use kclust::embedding::{
    density_inversion_distances, density_transform_curves, euclidean_embedding,
    geodesic_proxy_distances, log_grid, mds_project_embedding, CurveParams, DistanceMatrix,
    InversionCurve,
};
use kclust::error::{Error, Result};
use kclust::kernels::{
    adaptive_gaussian_kernel_matrix, check_psd, gaussian_kernel_matrix, knn_kernel_matrix,
    node_degrees, normalize_affinity, zmp_kernel_matrix, KernelMatrix,
};

use crate::{
    ClusterArgs, DensityCommand, EmbedCommand, EvalCommand, KernelBuildArgs, KernelCommand,
    SynthCommand,
};

pub fn run_synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::TwoMoons(args) => {
            let profile = match args.graded {
                Some(ratio) => DensityProfile::Graded { ratio },
                None => DensityProfile::Uniform,
            };
            let (data, _) = generate_two_moons(args.n, args.noise, profile, args.seed)?;
            save_dataset(&args.output, &data)?;
            log::info!("wrote {} points to {}", data.n(), args.output.display());
        }
        SynthCommand::OutlierBlobs(args) => {
            let (data, _) = generate_clusters_with_outliers(
                args.n_dense,
                args.n_outliers,
                args.separation,
                args.seed,
            )?;
            save_dataset(&args.output, &data)?;
            log::info!("wrote {} points to {}", data.n(), args.output.display());
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<DataSet> {
    load_dataset(path, Format::from_path(path))
}

fn parse_tau(tau: &str, alpha: f64) -> Result<DensityTransform> {
    match tau {
        "const" => Ok(DensityTransform::Constant),
        "identity" => Ok(DensityTransform::Identity),
        "log" => Ok(DensityTransform::Log { alpha }),
        other => Err(Error::InvalidArgument(format!(
            "unknown density transform '{other}'"
        ))),
    }
}

fn parse_reference(reference: &str, data: &DataSet, k: usize) -> Result<f64> {
    match reference {
        "scott" => scott_scalar_bandwidth(data),
        "median-knn" | "median_knn" => {
            let radii = knn_radius(data, k)?;
            Ok(median(&radii))
        }
        value => value.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "reference must be 'scott', 'median-knn', or a number, got '{value}'"
            ))
        }),
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn run_density(cmd: DensityCommand) -> Result<()> {
    match cmd {
        DensityCommand::Estimate(args) => {
            let data = load(&args.input)?;
            let rho = estimate_density(&data, &args.estimator, args.k, args.sigma)?;
            rho.write_csv(&args.output)?;
        }
        DensityCommand::Bandwidth(args) => {
            let data = load(&args.input)?;
            let rho = knn_density(&data, args.k)?;
            let tau = parse_tau(&args.tau, args.alpha)?;
            let reference = parse_reference(&args.reference, &data, args.k)?;
            let bw = adaptive_bandwidth(&rho, &tau, data.dim(), reference)?;
            bw.write_csv(&args.output, data.dim())?;
        }
        DensityCommand::Weights(args) => {
            let data = load(&args.input)?;
            let rho = estimate_density(&data, &args.estimator, args.k, args.sigma)?;
            let w = equalization_weights(&rho)?;
            let mut out = std::fs::File::create(&args.output)?;
            writeln!(out, "index,value")?;
            for (i, v) in w.values().iter().enumerate() {
                writeln!(out, "{i},{v}")?;
            }
        }
    }
    Ok(())
}

fn estimate_density(
    data: &DataSet,
    estimator: &str,
    k: usize,
    sigma: Option<f64>,
) -> Result<DensityField> {
    match estimator {
        "knn" => knn_density(data, k),
        "parzen" => {
            let bw = match sigma {
                Some(s) => BandwidthField::global_scalar(s, data.n())?,
                None => scott_bandwidth(data)?,
            };
            parzen_density_at_data(data, &bw, None)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown estimator '{other}'"
        ))),
    }
}

pub fn build_kernel(
    data: &DataSet,
    family: &str,
    sigma: Option<f64>,
    k: usize,
    tau: &str,
    alpha: f64,
    reference: &str,
    symmetrize: bool,
) -> Result<KernelMatrix> {
    match family {
        "gaussian" => {
            let sigma = match sigma {
                Some(s) => s,
                None => scott_scalar_bandwidth(data)?,
            };
            gaussian_kernel_matrix(data, sigma)
        }
        "adaptive" | "adaptive_gaussian" => {
            let rho = knn_density(data, k)?;
            let tau = parse_tau(tau, alpha)?;
            let reference = parse_reference(reference, data, k)?;
            let bw = adaptive_bandwidth(&rho, &tau, data.dim(), reference)?;
            adaptive_gaussian_kernel_matrix(data, &bw)
        }
        "zmp" => {
            let radii = knn_radius(data, k)?;
            let bw = BandwidthField::per_point_scalar(radii)?;
            zmp_kernel_matrix(data, &bw)
        }
        "knn" => knn_kernel_matrix(data, k, symmetrize),
        other => Err(Error::InvalidArgument(format!(
            "unknown kernel family '{other}'"
        ))),
    }
}

pub fn run_kernel(cmd: KernelCommand) -> Result<()> {
    match cmd {
        KernelCommand::Build(args) => {
            let KernelBuildArgs {
                input,
                family,
                sigma,
                k,
                tau,
                alpha,
                reference,
                no_symmetrize,
                normalize,
                output,
            } = args;
            let data = load(&input)?;
            let mut kernel = build_kernel(
                &data,
                &family,
                sigma,
                k,
                &tau,
                alpha,
                &reference,
                !no_symmetrize,
            )?;
            if normalize {
                kernel = normalize_affinity(&kernel)?;
            }
            kernel.save(&output)?;
            log::info!("wrote {}x{} matrix to {}", kernel.n(), kernel.n(), output.display());
        }
        KernelCommand::Inspect(args) => {
            let kernel = KernelMatrix::load(&args.matrix)?;
            let degrees = node_degrees(&kernel);
            let mean = degrees.iter().sum::<f64>() / degrees.len() as f64;
            let min = degrees.iter().cloned().fold(f64::MAX, f64::min);
            let max = degrees.iter().cloned().fold(f64::MIN, f64::max);
            let mut report = serde_json::json!({
                "n": kernel.n(),
                "spec": kernel.spec(),
                "symmetric": kernel.is_symmetric(),
                "degrees": {"min": min, "mean": mean, "max": max},
            });
            if kernel.is_symmetric() {
                let psd = check_psd(&kernel, args.psd_tol)?;
                report["psd"] = serde_json::to_value(psd)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

/// Structured starts shared by all multistart clustering runs: single
/// linkage on the affinity plus a feature-space ball around the density
/// argmax (when k = 2 experiments ask for it, both are cheap in general).
pub fn standard_seeds(a: &KernelMatrix, data: &DataSet, k: usize) -> Result<Vec<Partition>> {
    let mut seeds = vec![single_linkage_partition(a, k)?];
    if k >= 2 {
        if let Ok(rho) = knn_density(data, 10.min(data.n() - 1).max(1)) {
            if let Ok(rho) = rho.clamped() {
                seeds.push(mode_ball_partition(data, &rho.rho, k, 0.25)?);
            }
        }
    }
    Ok(seeds)
}

pub struct ClusterRun {
    pub partition: Partition,
    pub energy: kclust::EnergyReport,
    pub trace: Vec<f64>,
    pub shift: Option<f64>,
}

pub fn cluster_with(
    data: &DataSet,
    kernel: Option<&KernelMatrix>,
    criterion: &str,
    k: usize,
    weighting: &WeightVector,
    restarts: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterRun> {
    match criterion {
        "kmeans" => {
            let (partition, energy) =
                basic_kmeans(data, k, &Init::PlusPlus { seed }, max_iter, tol)?;
            Ok(ClusterRun {
                partition,
                trace: vec![energy.value],
                energy,
                shift: None,
            })
        }
        "aa" => {
            let a = kernel.ok_or_else(|| {
                Error::InvalidArgument("average association needs a kernel".into())
            })?;
            let seeds = standard_seeds(a, data, k)?;
            let out = kernel_kmeans_multistart(a, k, weighting, restarts, seed, max_iter, tol, &seeds)?;
            Ok(ClusterRun {
                partition: out.partition,
                energy: out.energy,
                trace: out.trace,
                shift: None,
            })
        }
        "nc" => {
            let a = kernel.ok_or_else(|| {
                Error::InvalidArgument("normalized cut needs a kernel".into())
            })?;
            let seeds = standard_seeds(a, data, k)?;
            let out = normalized_cut_multistart(a, k, restarts, seed, max_iter, tol, &seeds)?;
            Ok(ClusterRun {
                partition: out.partition,
                energy: out.energy,
                trace: out.trace,
                shift: out.shift,
            })
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown criterion '{other}'"
        ))),
    }
}

pub fn run_cluster(args: ClusterArgs) -> Result<()> {
    let data = load(&args.input)?;
    let kernel = match (&args.matrix, args.criterion.as_str()) {
        (_, "kmeans") => None,
        (Some(path), _) => Some(KernelMatrix::load(path)?),
        (None, _) => Some(build_kernel(
            &data,
            &args.kernel.family,
            args.kernel.sigma,
            args.kernel.kernel_k,
            "const",
            1.0,
            "median-knn",
            true,
        )?),
    };
    let weights = match args.weighting.as_str() {
        "none" => WeightVector::uniform(data.n()),
        "equalize-knn" => {
            let rho = knn_density(&data, args.kernel.kernel_k)?;
            equalization_weights(&rho)?
        }
        "equalize-parzen" => {
            let sigma = match args.kernel.sigma {
                Some(s) => s,
                None => scott_scalar_bandwidth(&data)?,
            };
            let bw = BandwidthField::global_scalar(sigma, data.n())?;
            let rho = parzen_density_at_data(&data, &bw, None)?;
            equalization_weights(&rho)?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown weighting '{other}'"
            )))
        }
    };

    let run = cluster_with(
        &data,
        kernel.as_ref(),
        &args.criterion,
        args.k,
        &weights,
        args.restarts,
        args.seed,
        args.max_iter,
        args.tol,
    )?;
    log::info!(
        "seed {} energy {} after trace of {} entries",
        args.seed,
        run.energy.value,
        run.trace.len()
    );
    if let Some(path) = &args.labels_out {
        save_labels(path, &run.partition)?;
    }
    let report = serde_json::json!({
        "criterion": args.criterion,
        "k": args.k,
        "seed": args.seed,
        "restarts": args.restarts,
        "energy": run.energy,
        "trace": run.trace,
        "diagonal_shift": run.shift,
        "cluster_sizes": run.partition.cluster_sizes(),
    });
    match &args.report_out {
        Some(path) => std::fs::write(path, serde_json::to_string_pretty(&report)?)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn write_coords_csv(
    path: &Path,
    coords: &ndarray::Array2<f64>,
    density: Option<&[f64]>,
) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    let mut header: Vec<String> = (0..coords.ncols()).map(|j| format!("y{j}")).collect();
    if density.is_some() {
        header.push("density".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for p in 0..coords.nrows() {
        let mut fields: Vec<String> = (0..coords.ncols())
            .map(|j| format!("{}", coords[[p, j]]))
            .collect();
        if let Some(d) = density {
            fields.push(format!("{}", d[p]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn run_embed(cmd: EmbedCommand) -> Result<()> {
    match cmd {
        EmbedCommand::Geodesic(args) => {
            let data = load(&args.input)?;
            let rho = knn_density(&data, args.k)?;
            let tau = parse_tau(&args.tau, args.alpha)?;
            let radii = knn_radius(&data, args.k)?;
            let bw = adaptive_bandwidth(&rho, &tau, data.dim(), median(&radii))?;
            let d = geodesic_proxy_distances(&data, &bw)?;
            let e = euclidean_embedding(&d)?;
            let (coords, padded) = mds_project_embedding(&e, args.dim)?;
            if padded {
                log::warn!("projection padded with zero axes");
            }
            write_coords_csv(&args.output, &coords, Some(&rho.rho))?;
            log::info!(
                "embedding: h = {}, dimensions = {}, residual = {:.2e}",
                e.h,
                e.n_prime,
                e.max_residual
            );
        }
        EmbedCommand::Inversion(args) => {
            let data = load(&args.input)?;
            let a = gaussian_kernel_matrix(&data, args.sigma)?;
            let d = density_inversion_distances(&data, &a, args.sigma)?;
            let e = euclidean_embedding(&d)?;
            let (coords, _) = mds_project_embedding(&e, args.dim)?;
            let rho = knn_density(&data, args.k)?;
            write_coords_csv(&args.output, &coords, Some(&rho.rho))?;
            let embedded = e.as_dataset("embedded")?;
            let rho_embedded = knn_density(&embedded, args.k)?;
            let spearman = kclust::spearman(&rho.rho, &rho_embedded.rho)?;
            println!(
                "{}",
                serde_json::json!({
                    "h": e.h,
                    "embedded_dimensions": e.n_prime,
                    "max_residual": e.max_residual,
                    "density_rank_correlation": spearman,
                })
            );
        }
        EmbedCommand::Mds(args) => {
            let d = DistanceMatrix::load(&args.matrix)?;
            let (coords, padded) = kclust::embedding::mds_project(&d, args.dim)?;
            if padded {
                log::warn!("projection padded with zero axes");
            }
            write_coords_csv(&args.output, &coords, None)?;
        }
        EmbedCommand::Curves(args) => {
            let curve = match args.family.as_str() {
                "normalization" => InversionCurve::NormalizationOnly,
                "weighted" => InversionCurve::NormalizationWithWeights,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown curve family '{other}'"
                    )))
                }
            };
            let params = CurveParams {
                sigma: args.sigma,
                h: args.h,
                n_dim: args.n_dim,
                n_bar: args.n_bar,
                eps: args.eps,
            };
            let grid = log_grid(args.x_min, args.x_max, args.points)?;
            let samples = density_transform_curves(curve, &params, &grid)?;
            let mut out = std::fs::File::create(&args.output)?;
            writeln!(out, "x,tau")?;
            for (x, t) in samples.x.iter().zip(samples.tau.iter()) {
                writeln!(out, "{x},{t}")?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "minima": samples.minima,
                    "maxima": samples.maxima,
                })
            );
        }
    }
    Ok(())
}

pub fn run_eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Nmi(args) => {
            let a = load_labels(&args.a)?;
            let b = load_labels(&args.b)?;
            println!("{:?}", nmi(&a, &b)?);
        }
        EvalCommand::ModeIsolation(args) => {
            let data = load(&args.input)?;
            let labels = load_labels(&args.labels)?;
            let rho = knn_density(&data, args.k)?;
            let truth = match &args.truth {
                Some(path) => Some(load_labels(path)?),
                None => data.truth_partition(),
            };
            let report = mode_isolation_report(&labels, &rho, None, truth.as_ref())?;
            emit_report(&args.output, &serde_json::to_value(&report)?)?;
        }
        EvalCommand::SparseIsolation(args) => {
            let data = load(&args.input)?;
            let labels = load_labels(&args.labels)?;
            let outliers: Vec<usize> = args
                .outliers
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| Error::Format {
                        row: 0,
                        message: format!("bad outlier index '{s}'"),
                    })
                })
                .collect::<Result<_>>()?;
            let truth = match &args.truth {
                Some(path) => Some(load_labels(path)?),
                None => data.truth_partition(),
            };
            let report = sparse_isolation_report(&labels, &data, &outliers, truth.as_ref())?;
            emit_report(&args.output, &serde_json::to_value(&report)?)?;
        }
    }
    Ok(())
}

fn emit_report(path: &Option<PathBuf>, report: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match path {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}
