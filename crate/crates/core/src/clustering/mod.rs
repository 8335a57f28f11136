//! Pairwise clustering energies and their optimizers.
//!
//! Average association, its weighted form, and normalized cut are all read
//! off one set of per-cluster sufficient statistics ([`ClusterStats`]);
//! diagonal affinities A_pp are always included. The Lloyd-style optimizer
//! lives in [`lloyd`], exhaustive oracles in [`brute`], and the Gini /
//! histogram-split machinery in [`gini`].

mod brute;
mod gini;
mod lloyd;

pub use brute::{brute_force_partition, dominant_subset, BruteForceObjective, SubsetSearch};
pub use gini::{
    breiman_optimal_split, continuous_gini_energy, discrete_gini_energy, exhaustive_gini_split,
    gini_mode_verifier, BreimanSplit, GriddedDensity, Histogram, ModeVerifierReport,
};
pub use lloyd::{
    basic_kmeans, kernel_kmeans, kernel_kmeans_multistart, mode_ball_partition, normalized_cut,
    normalized_cut_multistart, single_linkage_partition, Init, KernelKMeansOutput,
    NormalizedCutOutput,
};

use serde::{Deserialize, Serialize};

use crate::dataset::{Partition, WeightVector};
use crate::error::{Error, Result};
use crate::kernels::{node_degrees, KernelMatrix};

/// Which objective an [`EnergyReport`] value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    AverageAssociation,
    WeightedAverageAssociation,
    NormalizedCut,
    KMeans,
    DominantSet,
    GiniDiscrete,
    GiniContinuous,
}

/// An energy value together with its per-cluster terms; the value is the
/// sum of the terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub criterion: Criterion,
    pub value: f64,
    pub per_cluster: Vec<f64>,
}

impl EnergyReport {
    fn from_terms(criterion: Criterion, per_cluster: Vec<f64>) -> Self {
        let value = per_cluster.iter().sum();
        Self {
            criterion,
            value,
            per_cluster,
        }
    }
}

/// Per-cluster sufficient statistics for pairwise energies:
/// total weight W_k, intra-cluster affinity I_k, and the point-to-cluster
/// sums c_pk = sum_{q in S^k} w_q A_pq.
#[derive(Debug, Clone)]
pub struct ClusterStats {
    pub total_weight: Vec<f64>,
    pub intra: Vec<f64>,
    pub point_to_cluster: ndarray::Array2<f64>,
}

impl ClusterStats {
    pub fn compute(a: &KernelMatrix, w: &WeightVector, part: &Partition) -> Result<Self> {
        let n = a.n();
        if part.n() != n || w.len() != n {
            return Err(Error::Dimension(format!(
                "matrix ({n}), weights ({}), partition ({}) sizes disagree",
                w.len(),
                part.n()
            )));
        }
        let k = part.k();
        let mut total_weight = vec![0.0; k];
        for p in 0..n {
            total_weight[part.cluster(p)] += w[p];
        }
        // row-parallel with sequential per-row accumulation: bit-identical
        // results for any thread count
        use rayon::prelude::*;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let mut row = vec![0.0; k];
                for q in 0..n {
                    row[part.cluster(q)] += w[q] * a.entry(p, q);
                }
                row
            })
            .collect();
        let mut point_to_cluster = ndarray::Array2::zeros((n, k));
        for (p, row) in rows.into_iter().enumerate() {
            for (c, v) in row.into_iter().enumerate() {
                point_to_cluster[[p, c]] = v;
            }
        }
        let mut intra = vec![0.0; k];
        for p in 0..n {
            intra[part.cluster(p)] += w[p] * point_to_cluster[[p, part.cluster(p)]];
        }
        Ok(Self {
            total_weight,
            intra,
            point_to_cluster,
        })
    }

    /// -sum_k I_k / W_k, the weighted average association value.
    pub fn weighted_aa_terms(&self) -> Result<Vec<f64>> {
        self.intra
            .iter()
            .zip(self.total_weight.iter())
            .enumerate()
            .map(|(k, (&i, &w))| {
                if w <= 0.0 {
                    Err(Error::Energy(format!(
                        "cluster {k} has nonpositive total weight {w}"
                    )))
                } else {
                    Ok(-i / w)
                }
            })
            .collect()
    }
}

/// Average association: -sum_k (sum_{pq in S^k} A_pq) / |S^k|, diagonal
/// terms included. Errors on empty clusters.
pub fn aa_energy(a: &KernelMatrix, part: &Partition) -> Result<EnergyReport> {
    let report = weighted_aa_energy(a, &WeightVector::uniform(a.n()), part)?;
    Ok(EnergyReport {
        criterion: Criterion::AverageAssociation,
        ..report
    })
}

/// Weighted average association:
/// -sum_k (sum_{pq in S^k} w_p w_q A_pq) / (sum_{p in S^k} w_p).
/// Reduces to [`aa_energy`] for unit weights.
pub fn weighted_aa_energy(
    a: &KernelMatrix,
    w: &WeightVector,
    part: &Partition,
) -> Result<EnergyReport> {
    let stats = ClusterStats::compute(a, w, part)?;
    let terms = stats.weighted_aa_terms()?;
    Ok(EnergyReport::from_terms(
        Criterion::WeightedAverageAssociation,
        terms,
    ))
}

/// Normalized cut: -sum_k (sum_{pq in S^k} A_pq) / (sum_{p in S^k} d_p)
/// with node degrees d_p = sum_q A_pq. For unit degrees this coincides
/// with average association.
pub fn nc_energy(a: &KernelMatrix, part: &Partition) -> Result<EnergyReport> {
    let degrees = node_degrees(a);
    let stats = ClusterStats::compute(a, &WeightVector::uniform(a.n()), part)?;
    let mut degree_sums = vec![0.0; part.k()];
    for p in 0..a.n() {
        degree_sums[part.cluster(p)] += degrees[p];
    }
    let terms: Vec<f64> = stats
        .intra
        .iter()
        .zip(degree_sums.iter())
        .enumerate()
        .map(|(k, (&i, &d))| {
            if d <= 0.0 {
                Err(Error::Energy(format!(
                    "cluster {k} has nonpositive total degree {d}"
                )))
            } else {
                Ok(-i / d)
            }
        })
        .collect::<Result<_>>()?;
    Ok(EnergyReport::from_terms(Criterion::NormalizedCut, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{replicate_by_weights, replicate_partition, DataSet};
    use crate::kernels::{gaussian_kernel_matrix, normalize_affinity, KernelMatrix};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> KernelMatrix {
        let mut m = Array2::zeros((n, n));
        for p in 0..n {
            for q in p..n {
                let v = rng.random_range(0.05..1.0);
                m[[p, q]] = v;
                m[[q, p]] = v;
            }
        }
        KernelMatrix::precomputed(m, true).unwrap()
    }

    fn random_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Partition {
        loop {
            let assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let part = Partition::new(assignment, k).unwrap();
            if !part.has_empty_cluster() {
                return part;
            }
        }
    }

    #[test]
    fn aa_identity_singletons() {
        let a = KernelMatrix::precomputed(Array2::eye(2), true).unwrap();
        let part = Partition::new(vec![0, 1], 2).unwrap();
        let report = aa_energy(&a, &part).unwrap();
        assert_abs_diff_eq!(report.value, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn aa_all_ones_is_minus_n() {
        let a = KernelMatrix::precomputed(Array2::ones((6, 6)), true).unwrap();
        for assignment in [vec![0, 0, 0, 1, 1, 1], vec![0, 1, 0, 1, 0, 1]] {
            let part = Partition::new(assignment, 2).unwrap();
            let report = aa_energy(&a, &part).unwrap();
            assert_abs_diff_eq!(report.value, -6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn aa_prefers_matched_split_on_line() {
        let data = DataSet::from_1d(&[0.0, 1.0, 10.0, 11.0], "line").unwrap();
        let a = gaussian_kernel_matrix(&data, 1.0).unwrap();
        let good = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let good_energy = aa_energy(&a, &good).unwrap().value;
        // all 7 bipartitions
        for mask in 1u32..7 {
            let assignment: Vec<usize> = (0..4)
                .map(|p| if p == 0 { 0 } else { ((mask >> (p - 1)) & 1) as usize })
                .collect();
            if assignment == good.assignment() {
                continue;
            }
            let part = Partition::new(assignment, 2).unwrap();
            if part.has_empty_cluster() {
                continue;
            }
            let e = aa_energy(&a, &part).unwrap().value;
            assert!(
                good_energy < e,
                "split {:?} has energy {e} <= {good_energy}",
                part.assignment()
            );
        }
    }

    #[test]
    fn aa_rejects_empty_cluster() {
        let a = KernelMatrix::precomputed(Array2::eye(3), true).unwrap();
        let part = Partition::new(vec![0, 0, 0], 2).unwrap();
        assert!(aa_energy(&a, &part).is_err());
    }

    #[test]
    fn weighted_aa_with_unit_weights_is_aa() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_symmetric(9, &mut rng);
        let part = random_partition(9, 3, &mut rng);
        let plain = aa_energy(&a, &part).unwrap();
        let weighted =
            weighted_aa_energy(&a, &WeightVector::uniform(9), &part).unwrap();
        assert_abs_diff_eq!(plain.value, weighted.value, epsilon = 1e-15);
    }

    #[test]
    fn integer_weights_match_replication() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..10 {
            let n = 7;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let data = DataSet::from_rows(&rows, None, "w").unwrap();
            let weights = WeightVector::new(
                (0..n).map(|_| rng.random_range(1..4) as f64).collect(),
            )
            .unwrap();
            let part = random_partition(n, 2, &mut rng);

            let sigma = 0.9;
            let a = gaussian_kernel_matrix(&data, sigma).unwrap();
            let weighted = weighted_aa_energy(&a, &weights, &part).unwrap().value;

            let replicated = replicate_by_weights(&data, &weights).unwrap();
            let rep_part = replicate_partition(&part, &weights).unwrap();
            let a_rep = gaussian_kernel_matrix(&replicated, sigma).unwrap();
            let plain = aa_energy(&a_rep, &rep_part).unwrap().value;
            assert!(
                (weighted - plain).abs() <= 1e-12 * plain.abs().max(1.0),
                "trial {trial}: {weighted} vs {plain}"
            );
        }
    }

    #[test]
    fn nc_identity_singletons() {
        let a = KernelMatrix::precomputed(Array2::eye(2), true).unwrap();
        let part = Partition::new(vec![0, 1], 2).unwrap();
        let report = nc_energy(&a, &part).unwrap();
        assert_abs_diff_eq!(report.value, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn nc_scales_as_aa_for_constant_degrees() {
        // symmetric matrix with constant row sums via diagonal adjustment
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let mut m = Array2::zeros((n, n));
        for p in 0..n {
            for q in (p + 1)..n {
                let v = rng.random_range(0.1..1.0);
                m[[p, q]] = v;
                m[[q, p]] = v;
            }
        }
        let target = 10.0;
        for p in 0..n {
            let off: f64 = (0..n).filter(|&q| q != p).map(|q| m[[p, q]]).sum();
            m[[p, p]] = target - off;
        }
        let a = KernelMatrix::precomputed(m, true).unwrap();
        for _ in 0..20 {
            let part = random_partition(n, 2, &mut rng);
            let nc = nc_energy(&a, &part).unwrap().value;
            let aa = aa_energy(&a, &part).unwrap().value;
            assert_abs_diff_eq!(nc, aa / target, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_aa_on_normalized_matrix_equals_nc() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_symmetric(10, &mut rng);
        let degrees = node_degrees(&a);
        let normalized = normalize_affinity(&a).unwrap();
        let w = WeightVector::new(degrees).unwrap();
        for _ in 0..20 {
            let part = random_partition(10, 3, &mut rng);
            let lhs = weighted_aa_energy(&normalized, &w, &part).unwrap().value;
            let rhs = nc_energy(&a, &part).unwrap().value;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn energies_invariant_under_cluster_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_symmetric(8, &mut rng);
        let part = random_partition(8, 3, &mut rng);
        let swapped: Vec<usize> = part
            .assignment()
            .iter()
            .map(|&c| match c {
                0 => 2,
                2 => 0,
                other => other,
            })
            .collect();
        let swapped = Partition::new(swapped, 3).unwrap();
        assert_abs_diff_eq!(
            aa_energy(&a, &part).unwrap().value,
            aa_energy(&a, &swapped).unwrap().value,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            nc_energy(&a, &part).unwrap().value,
            nc_energy(&a, &swapped).unwrap().value,
            epsilon = 1e-12
        );
    }

    #[test]
    fn report_value_is_sum_of_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_symmetric(9, &mut rng);
        let part = random_partition(9, 3, &mut rng);
        let report = nc_energy(&a, &part).unwrap();
        let sum: f64 = report.per_cluster.iter().sum();
        assert_abs_diff_eq!(report.value, sum, epsilon = 1e-12);
        assert_eq!(report.per_cluster.len(), 3);
    }
}
