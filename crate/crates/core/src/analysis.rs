//! Evaluation metrics and density-bias diagnostics.

use serde::{Deserialize, Serialize};

use crate::dataset::{DataSet, Partition};
use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::kernels::{node_degrees, KernelMatrix};

/// Normalized mutual information between two partitions in [0, 1],
/// normalized by the arithmetic mean of the entropies. When either
/// entropy is zero: 1 if both partitions are trivial and equal, 0
/// otherwise.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::Dimension(format!(
            "partitions have lengths {} and {}",
            a.n(),
            b.n()
        )));
    }
    let n = a.n() as f64;
    let mut joint = vec![vec![0.0f64; b.k()]; a.k()];
    for p in 0..a.n() {
        joint[a.cluster(p)][b.cluster(p)] += 1.0;
    }
    let pa: Vec<f64> = joint.iter().map(|row| row.iter().sum::<f64>() / n).collect();
    let pb: Vec<f64> = (0..b.k())
        .map(|j| joint.iter().map(|row| row[j]).sum::<f64>() / n)
        .collect();

    let entropy = |probs: &[f64]| -> f64 {
        probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    };
    let ha = entropy(&pa);
    let hb = entropy(&pb);
    if ha == 0.0 || hb == 0.0 {
        // zero-entropy convention
        let equal = a.assignment() == b.assignment();
        return Ok(if ha == 0.0 && hb == 0.0 && equal { 1.0 } else { 0.0 });
    }

    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let pij = c / n;
                mi += pij * (pij / (pa[i] * pb[j])).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

/// Spearman rank correlation. Tie-free inputs use the exact d^2 formula,
/// so identical orderings return exactly 1.0. Ties fall back to Pearson
/// correlation on mid-ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension("length mismatch".into()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 observations".into(),
        ));
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let tied = has_ties(a) || has_ties(b);
    if !tied {
        let d2: f64 = ra
            .iter()
            .zip(rb.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        return Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)));
    }
    let mean_a = ra.iter().sum::<f64>() / n;
    let mean_b = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.len() {
        let da = ra[i] - mean_a;
        let db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::InvalidArgument(
            "constant input has no rank correlation".into(),
        ));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = mid;
        }
        i = j + 1;
    }
    out
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Diagnostics for the density-mode isolation bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasReport {
    /// Index of the density argmax.
    pub mode_point_index: usize,
    /// Fraction of points in the smaller cluster (of the reported pair).
    pub minority_fraction: f64,
    /// True when the density argmax sits in the minority cluster.
    pub mode_in_minority: bool,
    /// Coefficient of variation of node degrees, when a kernel was given.
    pub degree_cv: Option<f64>,
    /// NMI against the provided reference partition, when given.
    pub nmi: Option<f64>,
}

/// Checks whether a partition isolates the density mode in a small
/// cluster. For k = 2 the partition is used directly; for k > 2 every
/// cluster pair is inspected on its own points and the strongest
/// isolation case is reported.
pub fn mode_isolation_report(
    part: &Partition,
    rho: &DensityField,
    a: Option<&KernelMatrix>,
    truth: Option<&Partition>,
) -> Result<BiasReport> {
    if part.n() != rho.len() {
        return Err(Error::Dimension(
            "partition and density field lengths differ".into(),
        ));
    }
    let degree_cv = a.map(|m| {
        let d = node_degrees(m);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64;
        var.sqrt() / mean
    });
    let nmi_value = truth.map(|t| nmi(part, t)).transpose()?;

    let report_for_pair = |ci: usize, cj: usize| -> Option<(f64, bool, usize)> {
        let members_i = part.members(ci);
        let members_j = part.members(cj);
        if members_i.is_empty() || members_j.is_empty() {
            return None;
        }
        let total = members_i.len() + members_j.len();
        let (minority, majority) = if members_i.len() <= members_j.len() {
            (&members_i, &members_j)
        } else {
            (&members_j, &members_i)
        };
        let fraction = minority.len() as f64 / total as f64;
        // density argmax within the pair's union
        let mode = minority
            .iter()
            .chain(majority.iter())
            .cloned()
            .max_by(|&x, &y| {
                rho.rho[x]
                    .partial_cmp(&rho.rho[y])
                    .expect("densities comparable")
                    .then(y.cmp(&x))
            })
            .expect("nonempty union");
        Some((fraction, minority.contains(&mode), mode))
    };

    let mut best: Option<(f64, bool, usize)> = None;
    for ci in 0..part.k() {
        for cj in (ci + 1)..part.k() {
            if let Some(candidate) = report_for_pair(ci, cj) {
                let better = match &best {
                    None => true,
                    // prefer pairs exhibiting isolation, then the smallest
                    // minority
                    Some(current) => match (candidate.1, current.1) {
                        (true, false) => true,
                        (false, true) => false,
                        _ => candidate.0 < current.0,
                    },
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
    }
    let (minority_fraction, mode_in_minority, _) =
        best.ok_or_else(|| Error::Energy("no nonempty cluster pair".into()))?;

    Ok(BiasReport {
        mode_point_index: rho.argmax(),
        minority_fraction,
        mode_in_minority,
        degree_cv,
        nmi: nmi_value,
    })
}

/// Diagnostics for the sparse-subset isolation bias of cut criteria.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseIsolationReport {
    /// True when the minority cluster is contained in the outlier set.
    pub isolation: bool,
    pub minority_size: usize,
    pub nmi: Option<f64>,
}

/// True isolation means the two-way partition's minority cluster consists
/// only of designated outliers.
pub fn sparse_isolation_report(
    part: &Partition,
    data: &DataSet,
    outlier_indices: &[usize],
    truth: Option<&Partition>,
) -> Result<SparseIsolationReport> {
    if part.k() != 2 {
        return Err(Error::InvalidArgument(
            "sparse isolation check needs k = 2".into(),
        ));
    }
    if part.n() != data.n() {
        return Err(Error::Dimension(
            "partition length does not match dataset".into(),
        ));
    }
    if let Some(&bad) = outlier_indices.iter().find(|&&i| i >= data.n()) {
        return Err(Error::InvalidArgument(format!(
            "outlier index {bad} out of range"
        )));
    }
    let minority = part.members(part.minority_cluster());
    let isolation = !minority.is_empty()
        && minority.iter().all(|p| outlier_indices.contains(p));
    let nmi_value = truth.map(|t| nmi(part, t)).transpose()?;
    Ok(SparseIsolationReport {
        isolation,
        minority_size: minority.len(),
        nmi: nmi_value,
    })
}
