//! Lloyd-style alternation for (weighted) kernel K-means, the normalized
//! cut reduction onto it, and plain feature-space K-means.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{nc_energy, ClusterStats, Criterion, EnergyReport};
use crate::dataset::{DataSet, Partition, WeightVector};
use crate::error::{Error, Result};
use crate::kernels::{node_degrees, normalize_affinity, KernelMatrix};

/// Initialization strategies for the Lloyd optimizers.
#[derive(Debug, Clone)]
pub enum Init {
    /// Uniformly random assignment (empty clusters re-filled).
    Random { seed: u64 },
    /// Start from a given partition.
    Labels(Partition),
    /// Kmeans++-style seeding: centers sampled with probability
    /// proportional to squared distance from the chosen set.
    PlusPlus { seed: u64 },
}

/// Result of a kernel K-means run.
#[derive(Debug, Clone)]
pub struct KernelKMeansOutput {
    pub partition: Partition,
    pub energy: EnergyReport,
    /// Weighted average association value per iteration, starting with the
    /// initial partition.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Number of empty-cluster repairs performed.
    pub reseeds: usize,
}

/// Weighted kernel K-means via the pairwise identity
/// |phi_p - m_k|^2 = A_pp - 2 c_pk / W_k + I_k / W_k^2.
///
/// Runs until assignments stabilize, the relative energy improvement
/// drops below `tol`, or `max_iter` passes. A cluster emptied mid-run is
/// re-seeded with the point farthest (in embedding distance) from its
/// current centroid. For a positive semidefinite matrix every iteration
/// is non-increasing in energy; indefinite matrices are accepted but
/// carry no such guarantee.
pub fn kernel_kmeans(
    a: &KernelMatrix,
    k: usize,
    w: &WeightVector,
    init: &Init,
    max_iter: usize,
    tol: f64,
) -> Result<KernelKMeansOutput> {
    let n = a.n();
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the number of points {n}"
        )));
    }
    if w.len() != n {
        return Err(Error::Dimension(format!(
            "{} weights for {n} points",
            w.len()
        )));
    }
    if w.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "kernel K-means weights must be strictly positive".into(),
        ));
    }

    let mut assignment = initial_assignment(a, k, w, init)?;
    let mut reseeds = 0usize;
    reseeds += fill_empty_clusters(a, k, w, &mut assignment)?;

    let mut trace = Vec::new();
    let mut energy = weighted_aa_value(a, w, &assignment, k)?;
    trace.push(energy);

    let mut iterations = 0;
    for _ in 0..max_iter {
        let stats = stats_of(a, w, &assignment, k)?;
        let mut next = assignment.clone();
        for p in 0..n {
            let mut best_k = assignment[p];
            let mut best = f64::INFINITY;
            for c in 0..k {
                if stats.total_weight[c] <= 0.0 {
                    continue;
                }
                let wk = stats.total_weight[c];
                let delta =
                    stats.intra[c] / (wk * wk) - 2.0 * stats.point_to_cluster[[p, c]] / wk;
                if delta < best {
                    best = delta;
                    best_k = c;
                }
            }
            next[p] = best_k;
        }
        let unchanged = next == assignment;
        assignment = next;
        reseeds += fill_empty_clusters(a, k, w, &mut assignment)?;
        iterations += 1;
        if unchanged {
            break;
        }
        let new_energy = weighted_aa_value(a, w, &assignment, k)?;
        trace.push(new_energy);
        let improvement = (energy - new_energy).abs();
        energy = new_energy;
        if improvement <= tol * energy.abs().max(1.0) {
            break;
        }
    }

    let partition = Partition::new(assignment, k)?;
    let energy = super::weighted_aa_energy(a, w, &partition)?;
    Ok(KernelKMeansOutput {
        partition,
        energy,
        trace,
        iterations,
        reseeds,
    })
}

/// Best of `restarts` kernel K-means runs; ties in energy go to the
/// lowest restart index.
///
/// The first restarts take their initial partitions from `seeded` (e.g.
/// [`single_linkage_partition`], [`mode_ball_partition`]); the remainder
/// use kmeans++-style seeding. Exact Lloyd on the full kernel matrix is
/// sensitive to local minima, so structured starts plus energy-based
/// selection is the practical recipe.
pub fn kernel_kmeans_multistart(
    a: &KernelMatrix,
    k: usize,
    w: &WeightVector,
    restarts: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    seeded: &[Partition],
) -> Result<KernelKMeansOutput> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    // restarts run concurrently; the merge is by (energy, restart index),
    // so the outcome is independent of the thread pool size
    let runs: Vec<KernelKMeansOutput> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = match seeded.get(r) {
                Some(part) => Init::Labels(part.clone()),
                None => Init::PlusPlus {
                    seed: derive_seed(seed, r as u64),
                },
            };
            kernel_kmeans(a, k, w, &init, max_iter, tol)
        })
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, run| {
            if run.energy.value < best.energy.value {
                run
            } else {
                best
            }
        })
        .expect("restarts >= 1"))
}

/// Agglomerates points into `k` clusters by repeatedly joining the pair
/// of clusters with the highest affinity edge between them (single
/// linkage on affinities). Deterministic; useful as a structured start
/// for Lloyd.
pub fn single_linkage_partition(a: &KernelMatrix, k: usize) -> Result<Partition> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut walk = i;
        while parent[walk] != root {
            let next = parent[walk];
            parent[walk] = root;
            walk = next;
        }
        root
    }
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for p in 0..n {
        for q in (p + 1)..n {
            edges.push((a.entry(p, q), p, q));
        }
    }
    edges.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .expect("finite affinities")
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    let mut clusters = n;
    for (_, p, q) in edges {
        if clusters == k {
            break;
        }
        let (rp, rq) = (find(&mut parent, p), find(&mut parent, q));
        if rp != rq {
            parent[rp.max(rq)] = rp.min(rq);
            clusters -= 1;
        }
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut assignment = vec![0usize; n];
    for p in 0..n {
        let root = find(&mut parent, p);
        let next = label_of_root.len();
        assignment[p] = *label_of_root.entry(root).or_insert(next);
    }
    Partition::new(assignment, k)
}

/// Seeds cluster 1 with the `fraction` of points nearest (in feature
/// space) to the density argmax; remaining clusters for k > 2 get one far
/// point each. A structured start that probes mode-isolating optima.
pub fn mode_ball_partition(
    data: &DataSet,
    rho: &[f64],
    k: usize,
    fraction: f64,
) -> Result<Partition> {
    let n = data.n();
    if rho.len() != n {
        return Err(Error::Dimension(
            "density field length does not match dataset".into(),
        ));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "fraction must be in (0, 1)".into(),
        ));
    }
    let mut arg = 0;
    for i in 0..n {
        if rho[i] > rho[arg] {
            arg = i;
        }
    }
    let mut by_dist: Vec<(f64, usize)> = (0..n)
        .map(|p| {
            let d: f64 = (0..data.dim())
                .map(|j| (data.points()[[p, j]] - data.points()[[arg, j]]).powi(2))
                .sum();
            (d, p)
        })
        .collect();
    by_dist.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let ball = ((n as f64 * fraction).round() as usize).clamp(1, n - (k - 1));
    let mut assignment = vec![0usize; n];
    for &(_, p) in by_dist.iter().take(ball) {
        assignment[p] = 1;
    }
    for c in 2..k {
        assignment[by_dist[n - (c - 1)].1] = c;
    }
    Partition::new(assignment, k)
}

pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step keeps restart streams decorrelated
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Result of a normalized cut run.
#[derive(Debug, Clone)]
pub struct NormalizedCutOutput {
    pub partition: Partition,
    /// Normalized cut energy of the original matrix.
    pub energy: EnergyReport,
    /// Normalized cut value per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub reseeds: usize,
    /// Diagonal shift applied to make the normalized matrix positive
    /// semidefinite, when one was needed.
    pub shift: Option<f64>,
}

/// Normalized cut as weighted kernel K-means on the degree-normalized
/// affinity with weights w = d. When the normalized matrix is not
/// positive semidefinite a diagonal shift delta/d_p is applied first; the
/// shift changes every partition's energy by the same constant, so the
/// optimization is unaffected and the reported energies refer to the
/// original matrix.
pub fn normalized_cut(
    a: &KernelMatrix,
    k: usize,
    init: &Init,
    max_iter: usize,
    tol: f64,
) -> Result<NormalizedCutOutput> {
    let (kernel, w, shift) = nc_reduction(a)?;
    let run = kernel_kmeans(&kernel, k, &w, init, max_iter, tol)?;
    finish_nc(a, k, run, shift)
}

/// Multistart normalized cut with the same seeded-starts contract as
/// [`kernel_kmeans_multistart`]. Selection is by normalized cut energy of
/// the original matrix.
pub fn normalized_cut_multistart(
    a: &KernelMatrix,
    k: usize,
    restarts: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    seeded: &[Partition],
) -> Result<NormalizedCutOutput> {
    let (kernel, w, shift) = nc_reduction(a)?;
    let run = kernel_kmeans_multistart(&kernel, k, &w, restarts, seed, max_iter, tol, seeded)?;
    finish_nc(a, k, run, shift)
}

/// Builds the weighted kernel K-means instance equivalent to normalized
/// cut: degree-normalized affinity, weights w = d, and a diagonal shift
/// delta/d_p when the normalized matrix is not positive semidefinite.
fn nc_reduction(a: &KernelMatrix) -> Result<(KernelMatrix, WeightVector, Option<f64>)> {
    let degrees = node_degrees(a);
    if degrees.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(
            "normalized cut needs positive node degrees".into(),
        ));
    }
    let normalized = normalize_affinity(a)?;
    let w = WeightVector::new(degrees.clone())?;

    // PSD test in the weighted inner product: min eig of W^1/2 Ahat W^1/2.
    let n = a.n();
    let mut m = ndarray::Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            m[[p, q]] = (degrees[p] * degrees[q]).sqrt() * normalized.entry(p, q);
        }
    }
    let min_eig = crate::linalg::min_eigenvalue(&m);
    if min_eig < -1e-10 {
        let delta = -min_eig * (1.0 + 1e-9) + 1e-15;
        let mut shifted = normalized.matrix().clone();
        for p in 0..n {
            shifted[[p, p]] += delta / degrees[p];
        }
        Ok((KernelMatrix::precomputed(shifted, true)?, w, Some(delta)))
    } else {
        Ok((normalized, w, None))
    }
}

fn finish_nc(
    a: &KernelMatrix,
    k: usize,
    run: KernelKMeansOutput,
    shift: Option<f64>,
) -> Result<NormalizedCutOutput> {
    let offset = shift.map_or(0.0, |d| d * k as f64);
    let trace = run.trace.iter().map(|e| e + offset).collect();
    let energy = nc_energy(a, &run.partition)?;
    Ok(NormalizedCutOutput {
        partition: run.partition,
        energy,
        trace,
        iterations: run.iterations,
        reseeds: run.reseeds,
        shift,
    })
}

/// Plain Lloyd K-means on raw feature vectors; the energy is the within-
/// cluster sum of squared errors.
pub fn basic_kmeans(
    data: &DataSet,
    k: usize,
    init: &Init,
    max_iter: usize,
    tol: f64,
) -> Result<(Partition, EnergyReport)> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let dim = data.dim();
    let mut assignment = match init {
        Init::Labels(part) => {
            if part.n() != n || part.k() != k {
                return Err(Error::Dimension(
                    "label init does not match data or k".into(),
                ));
            }
            part.assignment().to_vec()
        }
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n).map(|_| rng.random_range(0..k)).collect()
        }
        Init::PlusPlus { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let centers = plus_plus_feature_centers(data, k, &mut rng);
            (0..n)
                .map(|p| nearest_feature_center(data, &centers, p))
                .collect()
        }
    };
    repair_feature_clusters(data, k, &mut assignment);

    let mut energy = f64::INFINITY;
    for _ in 0..max_iter {
        let means = cluster_means(data, k, &assignment);
        let mut next = Vec::with_capacity(n);
        for p in 0..n {
            let mut best = (f64::INFINITY, 0usize);
            for (c, mean) in means.iter().enumerate() {
                let d2: f64 = (0..dim)
                    .map(|j| (data.points()[[p, j]] - mean[j]).powi(2))
                    .sum();
                if d2 < best.0 {
                    best = (d2, c);
                }
            }
            next.push(best.1);
        }
        let unchanged = next == assignment;
        assignment = next;
        repair_feature_clusters(data, k, &mut assignment);
        let new_energy = sse(data, k, &assignment);
        let improvement = (energy - new_energy).abs();
        energy = new_energy;
        if unchanged || improvement <= tol * energy.abs().max(1.0) {
            break;
        }
    }

    let partition = Partition::new(assignment, k)?;
    let means = cluster_means(data, k, partition.assignment());
    let mut per_cluster = vec![0.0; k];
    for p in 0..n {
        let c = partition.cluster(p);
        per_cluster[c] += (0..dim)
            .map(|j| (data.points()[[p, j]] - means[c][j]).powi(2))
            .sum::<f64>();
    }
    let value = per_cluster.iter().sum();
    Ok((
        partition,
        EnergyReport {
            criterion: Criterion::KMeans,
            value,
            per_cluster,
        },
    ))
}

fn initial_assignment(
    a: &KernelMatrix,
    k: usize,
    w: &WeightVector,
    init: &Init,
) -> Result<Vec<usize>> {
    let n = a.n();
    match init {
        Init::Labels(part) => {
            if part.n() != n {
                return Err(Error::Dimension(
                    "label init length does not match matrix".into(),
                ));
            }
            if part.k() != k {
                return Err(Error::InvalidArgument(format!(
                    "label init has k = {} but the run asked for k = {k}",
                    part.k()
                )));
            }
            Ok(part.assignment().to_vec())
        }
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok((0..n).map(|_| rng.random_range(0..k)).collect())
        }
        Init::PlusPlus { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let centers = plus_plus_kernel_centers(a, k, w, &mut rng);
            Ok((0..n)
                .map(|p| {
                    let mut best = (f64::INFINITY, 0usize);
                    for (c, &center) in centers.iter().enumerate() {
                        let d2 = kernel_point_dist_sq(a, p, center);
                        if d2 < best.0 {
                            best = (d2, c);
                        }
                    }
                    best.1
                })
                .collect())
        }
    }
}

/// Squared embedding distance between two points, clamped at zero for
/// indefinite matrices.
fn kernel_point_dist_sq(a: &KernelMatrix, p: usize, q: usize) -> f64 {
    (a.entry(p, p) + a.entry(q, q) - 2.0 * a.entry(p, q)).max(0.0)
}

fn plus_plus_kernel_centers(
    a: &KernelMatrix,
    k: usize,
    w: &WeightVector,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = a.n();
    let mut centers = Vec::with_capacity(k);
    centers.push(sample_weighted(w.values(), rng));
    let mut min_d2: Vec<f64> = (0..n)
        .map(|p| kernel_point_dist_sq(a, p, centers[0]))
        .collect();
    while centers.len() < k {
        let scores: Vec<f64> = (0..n).map(|p| w[p] * min_d2[p]).collect();
        let total: f64 = scores.iter().sum();
        let next = if total > 0.0 {
            sample_weighted(&scores, rng)
        } else {
            // all remaining points coincide with centers; fall back to
            // weight-proportional sampling
            sample_weighted(w.values(), rng)
        };
        centers.push(next);
        for p in 0..n {
            min_d2[p] = min_d2[p].min(kernel_point_dist_sq(a, p, next));
        }
    }
    centers
}

fn sample_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random_range(0.0..1.0) * total;
    for (i, &v) in weights.iter().enumerate() {
        target -= v;
        if target <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn stats_of(
    a: &KernelMatrix,
    w: &WeightVector,
    assignment: &[usize],
    k: usize,
) -> Result<ClusterStats> {
    let part = Partition::new(assignment.to_vec(), k)?;
    ClusterStats::compute(a, w, &part)
}

fn weighted_aa_value(
    a: &KernelMatrix,
    w: &WeightVector,
    assignment: &[usize],
    k: usize,
) -> Result<f64> {
    let part = Partition::new(assignment.to_vec(), k)?;
    Ok(super::weighted_aa_energy(a, w, &part)?.value)
}

/// Re-seeds each empty cluster with the point farthest from its current
/// centroid among clusters that can spare a member. Returns the number of
/// repairs.
fn fill_empty_clusters(
    a: &KernelMatrix,
    k: usize,
    w: &WeightVector,
    assignment: &mut [usize],
) -> Result<usize> {
    let n = assignment.len();
    let mut repairs = 0;
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let empty = match (0..k).find(|&c| counts[c] == 0) {
            Some(c) => c,
            None => break,
        };
        let stats = stats_of(a, w, assignment, k)?;
        let mut far: Option<(f64, usize)> = None;
        for p in 0..n {
            let c = assignment[p];
            if counts[c] <= 1 {
                continue;
            }
            let wk = stats.total_weight[c];
            let d2 = a.entry(p, p) - 2.0 * stats.point_to_cluster[[p, c]] / wk
                + stats.intra[c] / (wk * wk);
            if far.map_or(true, |(best, _)| d2 > best) {
                far = Some((d2, p));
            }
        }
        let (_, p) = far.ok_or_else(|| {
            Error::Energy("cannot repair empty cluster: no donor cluster".into())
        })?;
        assignment[p] = empty;
        repairs += 1;
    }
    Ok(repairs)
}

fn plus_plus_feature_centers(data: &DataSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.n();
    let dim = data.dim();
    let first = rng.random_range(0..n);
    let mut centers = vec![data.point(first).to_vec()];
    let mut min_d2: Vec<f64> = (0..n)
        .map(|p| {
            (0..dim)
                .map(|j| (data.points()[[p, j]] - centers[0][j]).powi(2))
                .sum()
        })
        .collect();
    while centers.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            sample_weighted(&min_d2, rng)
        } else {
            rng.random_range(0..n)
        };
        centers.push(data.point(next).to_vec());
        for p in 0..n {
            let d2: f64 = (0..dim)
                .map(|j| (data.points()[[p, j]] - data.points()[[next, j]]).powi(2))
                .sum();
            min_d2[p] = min_d2[p].min(d2);
        }
    }
    centers
}

fn nearest_feature_center(data: &DataSet, centers: &[Vec<f64>], p: usize) -> usize {
    let dim = data.dim();
    let mut best = (f64::INFINITY, 0usize);
    for (c, center) in centers.iter().enumerate() {
        let d2: f64 = (0..dim)
            .map(|j| (data.points()[[p, j]] - center[j]).powi(2))
            .sum();
        if d2 < best.0 {
            best = (d2, c);
        }
    }
    best.1
}

fn cluster_means(data: &DataSet, k: usize, assignment: &[usize]) -> Vec<Vec<f64>> {
    let dim = data.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for j in 0..dim {
            sums[c][j] += data.points()[[p, j]];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..dim {
                sums[c][j] /= counts[c] as f64;
            }
        }
    }
    sums
}

fn sse(data: &DataSet, k: usize, assignment: &[usize]) -> f64 {
    let means = cluster_means(data, k, assignment);
    let dim = data.dim();
    assignment
        .iter()
        .enumerate()
        .map(|(p, &c)| {
            (0..dim)
                .map(|j| (data.points()[[p, j]] - means[c][j]).powi(2))
                .sum::<f64>()
        })
        .sum()
}

fn repair_feature_clusters(data: &DataSet, k: usize, assignment: &mut [usize]) {
    let dim = data.dim();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let empty = match (0..k).find(|&c| counts[c] == 0) {
            Some(c) => c,
            None => return,
        };
        let means = cluster_means(data, k, assignment);
        let mut far: Option<(f64, usize)> = None;
        for p in 0..assignment.len() {
            let c = assignment[p];
            if counts[c] <= 1 {
                continue;
            }
            let d2: f64 = (0..dim)
                .map(|j| (data.points()[[p, j]] - means[c][j]).powi(2))
                .sum();
            if far.map_or(true, |(best, _)| d2 > best) {
                far = Some((d2, p));
            }
        }
        match far {
            Some((_, p)) => assignment[p] = empty,
            None => return,
        }
    }
}
