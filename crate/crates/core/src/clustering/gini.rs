//! Gini impurity criteria: the discrete histogram form with its
//! closed-form optimal two-way split, the continuous form evaluated via
//! per-cluster Parzen estimates, and a gridded verifier for the
//! mode-isolation behavior of the continuous criterion.

use serde::{Deserialize, Serialize};

use super::{Criterion, EnergyReport};
use crate::dataset::{DataSet, Partition};
use crate::density::{parzen_density_at_data, BandwidthField};
use crate::error::{Error, Result};

/// A probability distribution over a finite label set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    probs: Vec<f64>,
}

impl Histogram {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty histogram".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "histogram probabilities must be nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "histogram sums to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative counts into a histogram.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("histogram has zero mass".into()));
        }
        Self::new(counts.iter().map(|&c| c / total).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the most probable bin; `true` when the mode is tied.
    pub fn mode(&self) -> (usize, bool) {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        let tie = self
            .probs
            .iter()
            .enumerate()
            .any(|(i, &p)| i != best && p == self.probs[best]);
        (best, tie)
    }
}

/// Discrete Gini criterion sum_k M_k * (1 - sum_l P(l|S^k)^2), where
/// `assignment[l]` maps bin l to a cluster and M_k is the cluster mass.
/// Every cluster must receive at least one bin of positive mass.
pub fn discrete_gini_energy(
    assignment: &[usize],
    k: usize,
    hist: &Histogram,
) -> Result<EnergyReport> {
    if assignment.len() != hist.len() {
        return Err(Error::Dimension(format!(
            "{} bin assignments for {} bins",
            assignment.len(),
            hist.len()
        )));
    }
    if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidArgument(format!(
            "cluster index {bad} out of range for k = {k}"
        )));
    }
    let mut mass = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for (l, &c) in assignment.iter().enumerate() {
        mass[c] += hist.probs()[l];
        sq[c] += hist.probs()[l] * hist.probs()[l];
    }
    let per_cluster: Vec<f64> = (0..k)
        .map(|c| {
            if mass[c] <= 0.0 {
                Err(Error::Energy(format!("cluster {c} has zero mass")))
            } else {
                // M * (1 - sum (P_l / M)^2) = M - sum P_l^2 / M
                Ok(mass[c] - sq[c] / mass[c])
            }
        })
        .collect::<Result<_>>()?;
    let value = per_cluster.iter().sum();
    Ok(EnergyReport {
        criterion: Criterion::GiniDiscrete,
        value,
        per_cluster,
    })
}

/// Closed-form optimal two-way split of a histogram: the mode bin against
/// everything else.
#[derive(Debug, Clone)]
pub struct BreimanSplit {
    /// Per-bin cluster assignment; the mode bin gets cluster 0.
    pub assignment: Vec<usize>,
    pub report: EnergyReport,
    /// Set when the mode was tied and the lowest-index mode was used.
    pub tie_flagged: bool,
}

/// The histogram-mode split, which minimizes the discrete Gini criterion
/// over all two-way splits of the label set.
pub fn breiman_optimal_split(hist: &Histogram) -> Result<BreimanSplit> {
    if hist.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 bins to split".into(),
        ));
    }
    let (mode, tie_flagged) = hist.mode();
    let assignment: Vec<usize> = (0..hist.len())
        .map(|l| if l == mode { 0 } else { 1 })
        .collect();
    let report = discrete_gini_energy(&assignment, 2, hist)?;
    Ok(BreimanSplit {
        assignment,
        report,
        tie_flagged,
    })
}

/// Exhaustive minimum of the discrete Gini criterion over all two-way
/// splits of the bin set. Independent of [`breiman_optimal_split`]; used
/// as its oracle. Limited to 24 bins.
pub fn exhaustive_gini_split(hist: &Histogram) -> Result<(Vec<usize>, EnergyReport)> {
    let bins = hist.len();
    if bins < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 bins to split".into(),
        ));
    }
    if bins > 24 {
        return Err(Error::TooLarge(format!(
            "exhaustive split over {bins} bins exceeds the 2^24 budget"
        )));
    }
    let mut best: Option<(f64, Vec<usize>, EnergyReport)> = None;
    // bin 0 pinned to cluster 0 to avoid the mirrored duplicates
    for mask in 1u32..(1 << (bins - 1)) {
        let assignment: Vec<usize> = (0..bins)
            .map(|l| {
                if l == 0 {
                    0
                } else {
                    (mask >> (l - 1) & 1) as usize
                }
            })
            .collect();
        let report = match discrete_gini_energy(&assignment, 2, hist) {
            Ok(r) => r,
            // zero-mass side: not a valid 2-way split
            Err(Error::Energy(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().map_or(true, |(v, _, _)| report.value < *v) {
            best = Some((report.value, assignment, report));
        }
    }
    let (_, assignment, report) =
        best.ok_or_else(|| Error::Energy("no valid two-way split".into()))?;
    Ok((assignment, report))
}

/// Continuous Gini energy via the Parzen route:
/// -sum_k sum_{p in S^k} P(f_p | S^k) with per-cluster kernel densities.
pub fn continuous_gini_energy(
    data: &DataSet,
    part: &Partition,
    bandwidth: &BandwidthField,
) -> Result<EnergyReport> {
    if part.n() != data.n() {
        return Err(Error::Dimension(
            "partition length does not match dataset".into(),
        ));
    }
    let mut per_cluster = Vec::with_capacity(part.k());
    for c in 0..part.k() {
        let members = part.members(c);
        if members.is_empty() {
            return Err(Error::Energy(format!("cluster {c} is empty")));
        }
        let rho = parzen_density_at_data(data, bandwidth, Some((part, c)))?;
        let total: f64 = members.iter().map(|&p| rho.rho[p]).sum();
        per_cluster.push(-total);
    }
    let value = per_cluster.iter().sum();
    Ok(EnergyReport {
        criterion: Criterion::GiniContinuous,
        value,
        per_cluster,
    })
}

/// A positive 1-D density sampled on a uniform grid, treated as a discrete
/// distribution for exact ratio arithmetic.
#[derive(Debug, Clone)]
pub struct GriddedDensity {
    /// Normalized density values (integrate to one over the grid).
    rho: Vec<f64>,
    /// Point masses pi_i = rho_i * dx (sum to one).
    pi: Vec<f64>,
}

impl GriddedDensity {
    /// Builds from raw nonnegative samples on a uniform grid of width
    /// `dx`; the density is normalized internally.
    pub fn new(raw: &[f64], dx: f64) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidArgument("grid too small".into()));
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument("dx must be positive".into()));
        }
        if raw.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "density samples must be nonnegative and finite".into(),
            ));
        }
        let total: f64 = raw.iter().map(|&v| v * dx).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("density has zero mass".into()));
        }
        let rho: Vec<f64> = raw.iter().map(|&v| v / total).collect();
        let pi: Vec<f64> = rho.iter().map(|&v| v * dx).collect();
        Ok(Self { rho, pi })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// E rho = integral of rho^2.
    pub fn expected_density(&self) -> f64 {
        self.pi
            .iter()
            .zip(self.rho.iter())
            .map(|(&m, &r)| m * r)
            .sum()
    }

    pub fn sup_density(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Upper bound E rho + sup rho on the two-cluster objective.
    pub fn bound(&self) -> f64 {
        self.expected_density() + self.sup_density()
    }

    /// Two-cluster objective L(s) = E[I rho]/E[I] + E[(1-I) rho]/(1-E[I])
    /// for the indicator `in_first`. Errors when either side has zero
    /// probability mass.
    pub fn objective(&self, in_first: &[bool]) -> Result<f64> {
        if in_first.len() != self.len() {
            return Err(Error::Dimension("indicator length mismatch".into()));
        }
        let mut mass1 = 0.0;
        let mut num1 = 0.0;
        let mut mass2 = 0.0;
        let mut num2 = 0.0;
        for i in 0..self.len() {
            if in_first[i] {
                mass1 += self.pi[i];
                num1 += self.pi[i] * self.rho[i];
            } else {
                mass2 += self.pi[i];
                num2 += self.pi[i] * self.rho[i];
            }
        }
        if !(mass1 > 0.0) || !(mass2 > 0.0) {
            return Err(Error::Energy(
                "both sides of the split need positive mass".into(),
            ));
        }
        Ok(num1 / mass1 + num2 / mass2)
    }

    /// Superlevel-set partition: cluster 1 where rho >= sup rho - eps.
    pub fn superlevel_partition(&self, eps: f64) -> Vec<bool> {
        let cut = self.sup_density() - eps;
        self.rho.iter().map(|&r| r >= cut).collect()
    }
}

/// Report of the gridded mode-isolation verifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeVerifierReport {
    /// (eps, L(s_eps)) for each evaluated superlevel width.
    pub levels: Vec<(f64, f64)>,
    pub max_objective: f64,
    /// E rho + sup rho.
    pub bound: f64,
    /// No evaluated partition exceeded the bound (beyond 1e-9).
    pub all_below_bound: bool,
    /// Best objective within `approach_tol` (relative) of the bound.
    pub approaches_bound: bool,
    /// Set for constant densities, where every split ties at 2 E rho.
    pub degenerate_constant: bool,
}

/// Evaluates the two-cluster objective on the family of superlevel-set
/// partitions s_eps and checks it against the E rho + sup rho bound:
/// every partition stays below the bound, and the family approaches it as
/// eps shrinks.
pub fn gini_mode_verifier(
    density: &GriddedDensity,
    epsilons: &[f64],
    approach_tol: f64,
) -> Result<ModeVerifierReport> {
    if epsilons.is_empty() {
        return Err(Error::InvalidArgument("no epsilon values given".into()));
    }
    let sup = density.sup_density();
    let min = density.rho.iter().cloned().fold(f64::MAX, f64::min);
    let degenerate_constant = (sup - min).abs() <= 1e-12 * sup.abs();

    let bound = density.bound();
    let mut levels = Vec::with_capacity(epsilons.len());
    let mut max_objective = f64::MIN;
    let mut all_below_bound = true;
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        let indicator = if degenerate_constant {
            // every superlevel set is the whole domain; any nontrivial
            // split ties, so evaluate a representative one
            (0..density.len()).map(|i| i < density.len() / 2).collect()
        } else {
            density.superlevel_partition(eps)
        };
        let value = match density.objective(&indicator) {
            Ok(v) => v,
            // an eps so small or large that one side is empty: skip
            Err(Error::Energy(_)) => continue,
            Err(e) => return Err(e),
        };
        if value > bound + 1e-9 {
            all_below_bound = false;
        }
        max_objective = max_objective.max(value);
        levels.push((eps, value));
    }
    if levels.is_empty() {
        return Err(Error::Energy(
            "no epsilon produced a valid two-sided split".into(),
        ));
    }
    let approaches_bound = max_objective >= bound * (1.0 - approach_tol);
    Ok(ModeVerifierReport {
        levels,
        max_objective,
        bound,
        all_below_bound,
        approaches_bound,
        degenerate_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::aa_energy;
    use crate::kernels::gaussian_kernel_matrix;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn discrete_gini_hand_example() {
        let hist = Histogram::new(vec![0.5, 0.3, 0.2]).unwrap();
        let report = discrete_gini_energy(&[0, 1, 1], 2, &hist).unwrap();
        // pure mode cluster contributes 0, the rest 0.5 * 0.48
        assert_abs_diff_eq!(report.value, 0.24, epsilon = 1e-12);
        assert_abs_diff_eq!(report.per_cluster[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_bin_cluster_is_pure() {
        let hist = Histogram::new(vec![0.1, 0.6, 0.3]).unwrap();
        let report = discrete_gini_energy(&[0, 1, 0], 2, &hist).unwrap();
        assert_abs_diff_eq!(report.per_cluster[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_histogram_single_cluster_impurity() {
        for m in [2usize, 5, 9] {
            let hist = Histogram::new(vec![1.0 / m as f64; m]).unwrap();
            let report = discrete_gini_energy(&vec![0; m], 1, &hist).unwrap();
            assert_abs_diff_eq!(report.value, 1.0 - 1.0 / m as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_mass_cluster_is_an_energy_error() {
        let hist = Histogram::new(vec![1.0, 0.0]).unwrap();
        match discrete_gini_energy(&[0, 1], 2, &hist) {
            Err(Error::Energy(_)) => {}
            other => panic!("expected energy error, got {other:?}"),
        }
    }

    #[test]
    fn breiman_split_examples() {
        let hist = Histogram::new(vec![0.5, 0.3, 0.2]).unwrap();
        let split = breiman_optimal_split(&hist).unwrap();
        assert_eq!(split.assignment, vec![0, 1, 1]);
        assert_abs_diff_eq!(split.report.value, 0.24, epsilon = 1e-12);
        assert!(!split.tie_flagged);

        let hist = Histogram::new(vec![0.9, 0.1]).unwrap();
        let split = breiman_optimal_split(&hist).unwrap();
        assert_abs_diff_eq!(split.report.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn breiman_tie_is_flagged() {
        let hist = Histogram::new(vec![0.4, 0.4, 0.2]).unwrap();
        let split = breiman_optimal_split(&hist).unwrap();
        assert!(split.tie_flagged);
        assert_eq!(split.assignment[0], 0);
    }

    #[test]
    fn closed_form_matches_exhaustive_on_random_histograms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..200 {
            let bins = rng.random_range(3..=12);
            let counts: Vec<f64> = (0..bins).map(|_| rng.random_range(0.01..1.0)).collect();
            let hist = Histogram::from_counts(&counts).unwrap();
            let closed = breiman_optimal_split(&hist).unwrap();
            let (_, exhaustive) = exhaustive_gini_split(&hist).unwrap();
            assert!(
                (closed.report.value - exhaustive.value).abs() <= 1e-12,
                "trial {trial}: closed {} vs exhaustive {}",
                closed.report.value,
                exhaustive.value
            );
        }
    }

    #[test]
    fn continuous_gini_coincident_pair() {
        let data = DataSet::from_1d(&[1.5, 1.5], "pair").unwrap();
        let part = Partition::trivial(2);
        let bw = BandwidthField::global_scalar(1.0, 2).unwrap();
        let report = continuous_gini_energy(&data, &part, &bw).unwrap();
        let expected = -2.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(report.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn continuous_gini_matches_aa_up_to_kernel_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = DataSet::from_1d(&xs, "rand").unwrap();
        let sigma = 0.4;
        let a = gaussian_kernel_matrix(&data, sigma).unwrap();
        let bw = BandwidthField::global_scalar(sigma, data.n()).unwrap();
        let norm_const = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
        for _ in 0..10 {
            let assignment: Vec<usize> = (0..40).map(|_| rng.random_range(0..2)).collect();
            let part = Partition::new(assignment, 2).unwrap();
            if part.has_empty_cluster() {
                continue;
            }
            let gini = continuous_gini_energy(&data, &part, &bw).unwrap().value;
            let aa = aa_energy(&a, &part).unwrap().value;
            assert!(
                (gini - aa * norm_const).abs() <= 1e-10 * (aa * norm_const).abs(),
                "{gini} vs {}",
                aa * norm_const
            );
        }
    }

    #[test]
    fn continuous_gini_ranks_like_aa_on_bimodal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = rand_distr::Normal::new(0.0, 0.3).unwrap();
        let xs: Vec<f64> = (0..300)
            .map(|i| {
                let center = if i % 2 == 0 { 0.0 } else { 4.0 };
                center + rand_distr::Distribution::sample(&normal, &mut rng)
            })
            .collect();
        let data = DataSet::from_1d(&xs, "bimodal").unwrap();
        let sigma = 0.15;
        let a = gaussian_kernel_matrix(&data, sigma).unwrap();
        let bw = BandwidthField::global_scalar(sigma, data.n()).unwrap();
        let mut gini_vals = Vec::new();
        let mut aa_vals = Vec::new();
        for _ in 0..50 {
            let assignment: Vec<usize> = (0..300).map(|_| rng.random_range(0..2)).collect();
            let part = Partition::new(assignment, 2).unwrap();
            if part.has_empty_cluster() {
                continue;
            }
            gini_vals.push(continuous_gini_energy(&data, &part, &bw).unwrap().value);
            aa_vals.push(aa_energy(&a, &part).unwrap().value);
        }
        let rho = crate::analysis::spearman(&gini_vals, &aa_vals).unwrap();
        assert!(rho >= 0.99, "spearman {rho}");
    }

    fn triangular_density(grid: usize) -> GriddedDensity {
        let dx = 1.0 / grid as f64;
        let raw: Vec<f64> = (0..grid)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                2.0 - (4.0 * x - 2.0).abs()
            })
            .map(|v| v.max(0.0))
            .collect();
        GriddedDensity::new(&raw, dx).unwrap()
    }

    #[test]
    fn verifier_triangular_density_approaches_bound() {
        let density = triangular_density(10_000);
        let epsilons: Vec<f64> = (0..20).map(|i| 2.0 * 0.5f64.powi(i)).collect();
        let report = gini_mode_verifier(&density, &epsilons, 0.02).unwrap();
        assert!(report.all_below_bound);
        assert!(
            report.approaches_bound,
            "max {} vs bound {}",
            report.max_objective, report.bound
        );
        // E rho = 4/3, sup rho = 2
        assert_abs_diff_eq!(report.bound, 4.0 / 3.0 + 2.0, epsilon = 1e-3);
    }

    #[test]
    fn verifier_flags_constant_density() {
        let density = GriddedDensity::new(&vec![1.0; 1000], 1e-3).unwrap();
        let report = gini_mode_verifier(&density, &[0.5, 0.1], 0.5).unwrap();
        assert!(report.degenerate_constant);
        for &(_, value) in &report.levels {
            assert_abs_diff_eq!(value, 2.0 * density.expected_density(), epsilon = 1e-9);
        }
    }

    #[test]
    fn ratio_mediant_inequality() {
        // a/b <= c/d implies a/b <= (a+c)/(b+d) <= c/d
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let mut a = rng.random_range(0.01..10.0);
            let mut b = rng.random_range(0.01..10.0);
            let mut c = rng.random_range(0.01..10.0);
            let mut d = rng.random_range(0.01..10.0);
            if a / b > c / d {
                std::mem::swap(&mut a, &mut c);
                std::mem::swap(&mut b, &mut d);
            }
            let mediant = (a + c) / (b + d);
            assert!(a / b <= mediant + 1e-12);
            assert!(mediant <= c / d + 1e-12);
        }
    }
}
