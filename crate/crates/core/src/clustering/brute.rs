//! Exhaustive optimizers for small instances, used as oracles against the
//! Lloyd-style solvers.

use super::{aa_energy, nc_energy, weighted_aa_energy, Criterion, EnergyReport};
use crate::dataset::{DataSet, Partition, WeightVector};
use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_ENUMERATED_PARTITIONS: u128 = 10_000_000;

/// Objective evaluated by [`brute_force_partition`].
pub enum BruteForceObjective<'a> {
    AverageAssociation(&'a KernelMatrix),
    WeightedAverageAssociation(&'a KernelMatrix, &'a WeightVector),
    NormalizedCut(&'a KernelMatrix),
    KMeans(&'a DataSet),
}

impl BruteForceObjective<'_> {
    fn n(&self) -> usize {
        match self {
            BruteForceObjective::AverageAssociation(a) => a.n(),
            BruteForceObjective::WeightedAverageAssociation(a, _) => a.n(),
            BruteForceObjective::NormalizedCut(a) => a.n(),
            BruteForceObjective::KMeans(d) => d.n(),
        }
    }

    fn eval(&self, part: &Partition) -> Result<EnergyReport> {
        match self {
            BruteForceObjective::AverageAssociation(a) => aa_energy(a, part),
            BruteForceObjective::WeightedAverageAssociation(a, w) => {
                weighted_aa_energy(a, w, part)
            }
            BruteForceObjective::NormalizedCut(a) => nc_energy(a, part),
            BruteForceObjective::KMeans(data) => kmeans_energy(data, part),
        }
    }
}

fn kmeans_energy(data: &DataSet, part: &Partition) -> Result<EnergyReport> {
    if part.n() != data.n() {
        return Err(Error::Dimension(
            "partition length does not match dataset".into(),
        ));
    }
    let dim = data.dim();
    let k = part.k();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for p in 0..data.n() {
        counts[part.cluster(p)] += 1;
        for j in 0..dim {
            sums[part.cluster(p)][j] += data.points()[[p, j]];
        }
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Energy("empty cluster in k-means energy".into()));
    }
    let mut per_cluster = vec![0.0; k];
    for p in 0..data.n() {
        let c = part.cluster(p);
        per_cluster[c] += (0..dim)
            .map(|j| (data.points()[[p, j]] - sums[c][j] / counts[c] as f64).powi(2))
            .sum::<f64>();
    }
    let value = per_cluster.iter().sum();
    Ok(EnergyReport {
        criterion: Criterion::KMeans,
        value,
        per_cluster,
    })
}

/// Stirling number of the second kind S(n, k), saturating at u128::MAX.
fn stirling2(n: usize, k: usize) -> u128 {
    if k == 0 {
        return (n == 0) as u128;
    }
    if k > n {
        return 0;
    }
    let mut row = vec![0u128; k + 1];
    row[0] = 1; // S(0, 0)
    for _ in 1..=n {
        for j in (1..=k).rev() {
            let below = row[j].saturating_mul(j as u128);
            row[j] = below.saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[k]
}

/// Exact global optimum over all partitions into exactly `k` nonempty
/// clusters, by restricted-growth-string enumeration. Ties in energy are
/// broken toward the lexicographically smallest canonical assignment.
/// Errors when more than 10^7 partitions would have to be visited.
pub fn brute_force_partition(
    objective: &BruteForceObjective<'_>,
    k: usize,
) -> Result<(Partition, EnergyReport)> {
    let n = objective.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if k == 1 {
        let part = Partition::new(vec![0; n], 1)?;
        let report = objective.eval(&part)?;
        return Ok((part, report));
    }
    let count = stirling2(n, k);
    if count > MAX_ENUMERATED_PARTITIONS {
        return Err(Error::TooLarge(format!(
            "{count} partitions of {n} points into {k} clusters exceed the 1e7 budget"
        )));
    }

    // Restricted growth strings: a[0] = 0, a[i] <= max(a[..i]) + 1 < k,
    // enumerated in lexicographic order so the first optimum found is the
    // canonical tie-break winner.
    let mut assignment = vec![0usize; n];
    let mut best: Option<(f64, Partition, EnergyReport)> = None;
    enumerate_rgs(&mut assignment, 1, 0, k, &mut |candidate| {
        let part = Partition::new(candidate.to_vec(), k)?;
        if part.has_empty_cluster() {
            return Ok(());
        }
        let report = objective.eval(&part)?;
        if best
            .as_ref()
            .map_or(true, |(value, _, _)| report.value < *value)
        {
            best = Some((report.value, part, report));
        }
        Ok(())
    })?;
    let (_, part, report) = best.expect("k <= n guarantees at least one partition");
    Ok((part, report))
}

fn enumerate_rgs(
    assignment: &mut Vec<usize>,
    pos: usize,
    max_used: usize,
    k: usize,
    visit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if pos == assignment.len() {
        return visit(assignment);
    }
    let limit = (max_used + 1).min(k - 1);
    for c in 0..=limit {
        assignment[pos] = c;
        enumerate_rgs(assignment, pos + 1, max_used.max(c), k, visit)?;
    }
    Ok(())
}

/// Search mode for [`dominant_subset`].
pub enum SubsetSearch {
    /// Exhaustive enumeration over all nonempty subsets (n <= 20).
    Brute,
    /// Steepest-descent add/remove moves from a random subset.
    LocalSearch { seed: u64 },
}

/// Minimizes the one-cluster average association -sum_{pq in S} A_pq / |S|
/// over nonempty subsets. Ties are broken toward smaller subsets, then
/// toward the subset containing the lowest indices.
pub fn dominant_subset(
    a: &KernelMatrix,
    mode: &SubsetSearch,
) -> Result<(Vec<usize>, EnergyReport)> {
    let n = a.n();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "dominant subset needs at least 2 points".into(),
        ));
    }
    let (mask, value) = match mode {
        SubsetSearch::Brute => {
            if n > 20 {
                return Err(Error::TooLarge(format!(
                    "brute subset search supports n <= 20, got {n}"
                )));
            }
            brute_subset(a)
        }
        SubsetSearch::LocalSearch { seed } => local_search_subset(a, *seed),
    };
    let subset: Vec<usize> = (0..n).filter(|&p| mask >> p & 1 == 1).collect();
    Ok((
        subset,
        EnergyReport {
            criterion: Criterion::DominantSet,
            value,
            per_cluster: vec![value],
        },
    ))
}

fn subset_energy(a: &KernelMatrix, mask: u32) -> f64 {
    let n = a.n();
    let mut intra = 0.0;
    let mut size = 0.0;
    for p in 0..n {
        if mask >> p & 1 == 0 {
            continue;
        }
        size += 1.0;
        for q in 0..n {
            if mask >> q & 1 == 1 {
                intra += a.entry(p, q);
            }
        }
    }
    -intra / size
}

fn better_subset(
    candidate: (f64, u32),
    incumbent: (f64, u32),
) -> bool {
    let (e_new, m_new) = candidate;
    let (e_old, m_old) = incumbent;
    if e_new != e_old {
        return e_new < e_old;
    }
    let pop_new = m_new.count_ones();
    let pop_old = m_old.count_ones();
    if pop_new != pop_old {
        return pop_new < pop_old;
    }
    // lowest-index preference: the lexicographically smaller index set has
    // the smaller mask value
    m_new < m_old
}

fn brute_subset(a: &KernelMatrix) -> (u32, f64) {
    let n = a.n();
    // Gray-code walk with incremental intra sums: flipping point p changes
    // the intra sum by +-(2 * r_p + A_pp) where r_p = sum_{q in S} A_pq.
    let mut in_set = vec![false; n];
    let mut row_sums = vec![0.0; n]; // r_p over current subset
    let mut intra = 0.0;
    let mut size = 0i64;
    let mut mask: u32 = 0;
    let mut best: Option<(f64, u32)> = None;

    let total: u64 = 1 << n;
    for step in 1..total {
        let flip = step.trailing_zeros() as usize;
        if in_set[flip] {
            intra -= 2.0 * row_sums[flip] - a.entry(flip, flip);
            size -= 1;
            in_set[flip] = false;
            mask &= !(1 << flip);
            for q in 0..n {
                row_sums[q] -= a.entry(q, flip);
            }
        } else {
            intra += 2.0 * row_sums[flip] + a.entry(flip, flip);
            size += 1;
            in_set[flip] = true;
            mask |= 1 << flip;
            for q in 0..n {
                row_sums[q] += a.entry(q, flip);
            }
        }
        if size == 0 {
            continue;
        }
        let energy = -intra / size as f64;
        if best.map_or(true, |inc| better_subset((energy, mask), inc)) {
            best = Some((energy, mask));
        }
    }
    let (energy, mask) = best.expect("n >= 2 guarantees nonempty subsets");
    (mask, energy)
}

fn local_search_subset(a: &KernelMatrix, seed: u64) -> (u32, f64) {
    let n = a.n();
    assert!(n <= 32, "local search subset mask limited to 32 points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask: u32 = 0;
    for p in 0..n {
        if rng.random_range(0..2) == 1 {
            mask |= 1 << p;
        }
    }
    if mask == 0 {
        mask = 1 << rng.random_range(0..n);
    }
    let mut energy = subset_energy(a, mask);
    loop {
        let mut improved = false;
        let mut best_move = (energy, mask);
        for p in 0..n {
            let candidate = mask ^ (1 << p);
            if candidate == 0 {
                continue;
            }
            let e = subset_energy(a, candidate);
            if better_subset((e, candidate), best_move) && e < energy {
                best_move = (e, candidate);
                improved = true;
            }
        }
        if !improved {
            break;
        }
        energy = best_move.0;
        mask = best_move.1;
    }
    (mask, energy)
}
