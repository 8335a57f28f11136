//! Density estimation, bandwidth rules, and density-equalizing weights.
//!
//! The central relation here is the density law sigma_p ∝ (tau(rho_p) /
//! rho_p)^(1/N): choosing a target density transform tau and a per-point
//! density estimate rho yields a locally adaptive bandwidth field. With
//! tau = const and a KNN density estimate this reduces to sigma_p ∝ R_p^K,
//! the classic nearest-neighbor bandwidth heuristic.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSet, Partition, WeightVector};
use crate::error::{Error, Result};

/// Which estimator produced a [`DensityField`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityEstimator {
    Parzen { bandwidth: String },
    Knn { k: usize },
}

/// Whether densities integrate to one (`Probability`) or are known only up
/// to a scale factor (`Physical`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityNormalization {
    Probability,
    Physical,
}

/// Per-point density estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityField {
    pub rho: Vec<f64>,
    pub estimator: DensityEstimator,
    pub normalization: DensityNormalization,
    /// Set when duplicate points produced infinite KNN densities.
    pub has_infinite: bool,
}

impl DensityField {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Index of the largest density, ties toward the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.rho.iter().enumerate() {
            if v > self.rho[best] {
                best = i;
            }
        }
        best
    }

    /// Replaces infinite entries by the largest finite value, preserving
    /// the ordering of the remaining points. Errors when no entry is
    /// finite or any is nonpositive.
    pub fn clamped(&self) -> Result<DensityField> {
        if self.rho.iter().any(|&v| v <= 0.0 || v.is_nan()) {
            return Err(Error::InvalidArgument(
                "densities must be positive".into(),
            ));
        }
        let max_finite = self
            .rho
            .iter()
            .cloned()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !max_finite.is_finite() {
            return Err(Error::InvalidArgument(
                "density field has no finite values".into(),
            ));
        }
        let rho = self
            .rho
            .iter()
            .map(|&v| if v.is_finite() { v } else { max_finite })
            .collect();
        Ok(DensityField {
            rho,
            estimator: self.estimator.clone(),
            normalization: self.normalization,
            has_infinite: false,
        })
    }

    /// Writes `index,value` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_indexed_csv(path, &self.rho)
    }
}

pub(crate) fn write_indexed_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    Ok(())
}

/// Per-point kernel bandwidths: isotropic scalars, one shared diagonal
/// matrix, or full per-point matrices.
#[derive(Debug, Clone)]
pub enum BandwidthField {
    /// sigma_p per point; Sigma_p = sigma_p^2 * I.
    Scalar(Vec<f64>),
    /// One diagonal bandwidth shared by all points; entries are the
    /// standard deviations sqrt(Sigma_ii).
    GlobalDiagonal { sdevs: Vec<f64>, n: usize },
    /// Full symmetric positive-definite matrix per point.
    Matrix(Vec<Array2<f64>>),
}

impl BandwidthField {
    /// One isotropic sigma shared by all points.
    pub fn global_scalar(sigma: f64, n: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {sigma}"
            )));
        }
        Ok(BandwidthField::Scalar(vec![sigma; n]))
    }

    pub fn per_point_scalar(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(
                "all bandwidths must be positive and finite".into(),
            ));
        }
        Ok(BandwidthField::Scalar(sigmas))
    }

    pub fn n_points(&self) -> usize {
        match self {
            BandwidthField::Scalar(s) => s.len(),
            BandwidthField::GlobalDiagonal { n, .. } => *n,
            BandwidthField::Matrix(m) => m.len(),
        }
    }

    /// True when every point shares the same bandwidth.
    pub fn is_global(&self) -> bool {
        match self {
            BandwidthField::Scalar(s) => s.windows(2).all(|w| w[0] == w[1]),
            BandwidthField::GlobalDiagonal { .. } => true,
            BandwidthField::Matrix(m) => m.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Scalar sigma at point `p` when the field is isotropic.
    pub fn scalar_at(&self, p: usize) -> Option<f64> {
        match self {
            BandwidthField::Scalar(s) => Some(s[p]),
            _ => None,
        }
    }

    /// det(Sigma_p)^(1/2), the kernel normalization volume at `p`.
    pub fn sqrt_det_at(&self, p: usize, dim: usize) -> Result<f64> {
        match self {
            BandwidthField::Scalar(s) => Ok(s[p].powi(dim as i32)),
            BandwidthField::GlobalDiagonal { sdevs, .. } => {
                check_dim(sdevs.len(), dim)?;
                Ok(sdevs.iter().product())
            }
            BandwidthField::Matrix(m) => {
                check_dim(m[p].nrows(), dim)?;
                let det = determinant(&m[p])?;
                if det <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "bandwidth matrix at point {p} is not positive definite"
                    )));
                }
                Ok(det.sqrt())
            }
        }
    }

    /// Quadratic form (x - y)^T Sigma_p^{-1} (x - y).
    pub fn mahalanobis_sq(
        &self,
        p: usize,
        x: ArrayView1<'_, f64>,
        y: ArrayView1<'_, f64>,
    ) -> Result<f64> {
        match self {
            BandwidthField::Scalar(s) => {
                let d2: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                Ok(d2 / (s[p] * s[p]))
            }
            BandwidthField::GlobalDiagonal { sdevs, .. } => {
                check_dim(sdevs.len(), x.len())?;
                Ok(x.iter()
                    .zip(y.iter())
                    .zip(sdevs.iter())
                    .map(|((a, b), sd)| {
                        let diff = (a - b) / sd;
                        diff * diff
                    })
                    .sum())
            }
            BandwidthField::Matrix(m) => {
                let inv = invert_spd(&m[p]).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "bandwidth matrix at point {p} is singular or not positive definite"
                    ))
                })?;
                let dim = x.len();
                check_dim(m[p].nrows(), dim)?;
                let diff: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
                let mut q = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        q += diff[i] * inv[[i, j]] * diff[j];
                    }
                }
                Ok(q)
            }
        }
    }

    /// Validates positivity / positive definiteness of every entry.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            BandwidthField::Scalar(s) => {
                if s.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "bandwidths must be positive and finite".into(),
                    ));
                }
            }
            BandwidthField::GlobalDiagonal { sdevs, .. } => {
                check_dim(sdevs.len(), dim)?;
                if sdevs.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "diagonal bandwidth entries must be positive".into(),
                    ));
                }
            }
            BandwidthField::Matrix(ms) => {
                for (p, m) in ms.iter().enumerate() {
                    check_dim(m.nrows(), dim)?;
                    if crate::linalg::max_abs_asymmetry(m) > 1e-12 {
                        return Err(Error::InvalidArgument(format!(
                            "bandwidth matrix at point {p} is not symmetric"
                        )));
                    }
                    if crate::linalg::min_eigenvalue(m) <= 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "bandwidth matrix at point {p} is not positive definite"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes `index,value` CSV for scalar fields; diagonal and matrix
    /// fields store the per-point sqrt determinant as a summary value.
    pub fn write_csv(&self, path: &Path, dim: usize) -> Result<()> {
        let values: Vec<f64> = match self {
            BandwidthField::Scalar(s) => s.clone(),
            _ => (0..self.n_points())
                .map(|p| self.sqrt_det_at(p, dim).map(|v| v.powf(1.0 / dim as f64)))
                .collect::<Result<_>>()?,
        };
        write_indexed_csv(path, &values)
    }
}

fn check_dim(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "bandwidth dimension {got} does not match data dimension {want}"
        )));
    }
    Ok(())
}

fn determinant(m: &Array2<f64>) -> Result<f64> {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |r, c| m[[r, c]]);
    Ok(dm.determinant())
}

fn invert_spd(m: &Array2<f64>) -> Option<Array2<f64>> {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |r, c| m[[r, c]]);
    let chol = nalgebra::Cholesky::new(dm)?;
    let inv = chol.inverse();
    let mut out = Array2::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            out[[r, c]] = inv[(r, c)];
        }
    }
    Some(out)
}

/// Target density transform tau(rho) for the density law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityTransform {
    /// tau(rho) = rho, which recovers a fixed bandwidth.
    Identity,
    /// tau(rho) = const, full density equalization.
    Constant,
    /// tau(rho) = (1/alpha) * log(1 + alpha * rho), compresses dense areas.
    Log { alpha: f64 },
}

impl DensityTransform {
    pub fn apply(&self, rho: f64) -> Result<f64> {
        match self {
            DensityTransform::Identity => Ok(rho),
            DensityTransform::Constant => Ok(1.0),
            DensityTransform::Log { alpha } => {
                if !(*alpha > 0.0) {
                    return Err(Error::InvalidArgument("alpha must be > 0".into()));
                }
                Ok((1.0 + alpha * rho).ln() / alpha)
            }
        }
    }
}

/// Scott's rule-of-thumb diagonal bandwidth: sqrt(Sigma_ii) = r_i / n^(1/(N+4))
/// with r_i the sample standard deviation of feature i.
pub fn scott_bandwidth(data: &DataSet) -> Result<BandwidthField> {
    if data.n() < 2 {
        return Err(Error::InvalidArgument(
            "Scott's rule needs at least 2 points".into(),
        ));
    }
    let shrink = (data.n() as f64).powf(1.0 / (data.dim() as f64 + 4.0));
    let mut sdevs = Vec::with_capacity(data.dim());
    for (i, r) in data.feature_sdevs().into_iter().enumerate() {
        if r <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "feature {i} has zero variance; bandwidth would be degenerate"
            )));
        }
        sdevs.push(r / shrink);
    }
    Ok(BandwidthField::GlobalDiagonal {
        sdevs,
        n: data.n(),
    })
}

/// Isotropic scalar reduction of Scott's rule: the geometric mean of the
/// per-dimension Scott standard deviations (preserves the bandwidth
/// ellipsoid volume).
pub fn scott_scalar_bandwidth(data: &DataSet) -> Result<f64> {
    match scott_bandwidth(data)? {
        BandwidthField::GlobalDiagonal { sdevs, .. } => {
            let log_mean =
                sdevs.iter().map(|v| v.ln()).sum::<f64>() / sdevs.len() as f64;
            Ok(log_mean.exp())
        }
        _ => unreachable!("scott_bandwidth returns a global diagonal"),
    }
}

/// Gaussian Parzen estimate P(x | S) = (1/|S|) * sum_{q in S} k(x, f_q)
/// with k(x, y) = (2 pi)^(-N/2) |Sigma|^(-1/2) exp(-(x-y)^T Sigma^{-1} (x-y) / 2).
///
/// `cluster` restricts the sum to one cluster of a partition; by default
/// the whole dataset is used. When the bandwidth field is per-point, the
/// bump centered at f_q uses Sigma_q.
pub fn parzen_density(
    data: &DataSet,
    bandwidth: &BandwidthField,
    cluster: Option<(&Partition, usize)>,
    query: &[Vec<f64>],
) -> Result<DensityField> {
    bandwidth.validate(data.dim())?;
    if bandwidth.n_points() != data.n() {
        return Err(Error::Dimension(format!(
            "bandwidth field has {} entries for {} points",
            bandwidth.n_points(),
            data.n()
        )));
    }
    let support: Vec<usize> = match cluster {
        Some((part, c)) => {
            if part.n() != data.n() {
                return Err(Error::Dimension(
                    "partition length does not match dataset".into(),
                ));
            }
            let members = part.members(c);
            if members.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "cluster {c} is empty"
                )));
            }
            members
        }
        None => (0..data.n()).collect(),
    };

    let dim = data.dim();
    let norm_base = (2.0 * std::f64::consts::PI).powf(-(dim as f64) / 2.0);
    let mut rho = Vec::with_capacity(query.len());
    for x in query {
        if x.len() != dim {
            return Err(Error::Dimension(format!(
                "query point has dimension {}, expected {dim}",
                x.len()
            )));
        }
        let xv = ndarray::ArrayView1::from(x.as_slice());
        let mut sum = 0.0;
        for &q in &support {
            let quad = bandwidth.mahalanobis_sq(q, xv, data.point(q))?;
            let vol = bandwidth.sqrt_det_at(q, dim)?;
            sum += norm_base / vol * (-0.5 * quad).exp();
        }
        rho.push(sum / support.len() as f64);
    }
    Ok(DensityField {
        rho,
        estimator: DensityEstimator::Parzen {
            bandwidth: if bandwidth.is_global() {
                "global".into()
            } else {
                "per-point".into()
            },
        },
        normalization: DensityNormalization::Probability,
        has_infinite: false,
    })
}

/// Parzen estimate evaluated at every data point of `data` itself.
pub fn parzen_density_at_data(
    data: &DataSet,
    bandwidth: &BandwidthField,
    cluster: Option<(&Partition, usize)>,
) -> Result<DensityField> {
    let query: Vec<Vec<f64>> = (0..data.n())
        .map(|p| data.point(p).to_vec())
        .collect();
    parzen_density(data, bandwidth, cluster, &query)
}

/// Exact K-th nearest-neighbor distances, self excluded, ties broken by
/// point index.
pub fn knn_radius(data: &DataSet, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k >= data.n() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < n, got k = {k}, n = {}",
            data.n()
        )));
    }
    let d2 = crate::linalg::pairwise_sq_dists(data.points());
    let mut radii = Vec::with_capacity(data.n());
    for p in 0..data.n() {
        let mut neighbors: Vec<(f64, usize)> = (0..data.n())
            .filter(|&q| q != p)
            .map(|q| (d2[[p, q]], q))
            .collect();
        neighbors.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        radii.push(neighbors[k - 1].0.sqrt());
    }
    Ok(radii)
}

/// Index sets of the K nearest neighbors of each point (self excluded,
/// ties broken by point index).
pub fn knn_indices(data: &DataSet, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k >= data.n() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < n, got k = {k}, n = {}",
            data.n()
        )));
    }
    let d2 = crate::linalg::pairwise_sq_dists(data.points());
    let mut out = Vec::with_capacity(data.n());
    for p in 0..data.n() {
        let mut neighbors: Vec<(f64, usize)> = (0..data.n())
            .filter(|&q| q != p)
            .map(|q| (d2[[p, q]], q))
            .collect();
        neighbors.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        out.push(neighbors[..k].iter().map(|&(_, q)| q).collect());
    }
    Ok(out)
}

/// KNN density rho_p = K / (n * (R_p^K)^N). The unit-ball volume factor is
/// fixed to one, so the field is flagged `Physical`. Duplicate points with
/// R = 0 produce +inf densities and set `has_infinite`.
pub fn knn_density(data: &DataSet, k: usize) -> Result<DensityField> {
    let radii = knn_radius(data, k)?;
    let n = data.n() as f64;
    let dim = data.dim() as i32;
    let mut has_infinite = false;
    let rho = radii
        .iter()
        .map(|&r| {
            if r == 0.0 {
                has_infinite = true;
                f64::INFINITY
            } else {
                k as f64 / (n * r.powi(dim))
            }
        })
        .collect();
    Ok(DensityField {
        rho,
        estimator: DensityEstimator::Knn { k },
        normalization: DensityNormalization::Physical,
        has_infinite,
    })
}

/// Adaptive bandwidths from the density law sigma_p = c * (tau(rho_p) /
/// rho_p)^(1/N), with the scale c fixed so the median sigma equals
/// `reference_sigma` (callers usually pass the Scott scalar bandwidth).
/// Infinite densities are clamped to the largest finite value first.
pub fn adaptive_bandwidth(
    rho: &DensityField,
    tau: &DensityTransform,
    n_dims: usize,
    reference_sigma: f64,
) -> Result<BandwidthField> {
    if !(reference_sigma > 0.0) || !reference_sigma.is_finite() {
        return Err(Error::InvalidArgument(
            "reference bandwidth must be positive".into(),
        ));
    }
    if n_dims == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let rho = rho.clamped()?;
    let raw: Vec<f64> = rho
        .rho
        .iter()
        .map(|&r| tau.apply(r).map(|t| (t / r).powf(1.0 / n_dims as f64)))
        .collect::<Result<_>>()?;
    let med = median(&raw);
    if !(med > 0.0) || !med.is_finite() {
        return Err(Error::InvalidArgument(
            "degenerate bandwidth scale from density field".into(),
        ));
    }
    let c = reference_sigma / med;
    BandwidthField::per_point_scalar(raw.iter().map(|&v| c * v).collect())
}

/// Density-equalizing weights w_p = (1/rho_p) / mean(1/rho); the mean
/// weight is one. Infinite densities are clamped first.
pub fn equalization_weights(rho: &DensityField) -> Result<WeightVector> {
    let rho = rho.clamped()?;
    let inv: Vec<f64> = rho.rho.iter().map(|&r| 1.0 / r).collect();
    let mean = inv.iter().sum::<f64>() / inv.len() as f64;
    WeightVector::new(inv.iter().map(|&v| v / mean).collect())
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_two_moons, DensityProfile};
    use approx::assert_abs_diff_eq;

    #[test]
    fn scott_matches_hand_value_in_1d() {
        // 32 points with sample std exactly 2: +-a with a^2 = 4 * 31 / 32.
        let a = (4.0 * 31.0 / 32.0f64).sqrt();
        let xs: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { a } else { -a }).collect();
        let data = DataSet::from_1d(&xs, "pm").unwrap();
        match scott_bandwidth(&data).unwrap() {
            BandwidthField::GlobalDiagonal { sdevs, .. } => {
                assert_abs_diff_eq!(sdevs[0], 1.0, epsilon = 1e-12);
            }
            _ => panic!("expected diagonal"),
        }
    }

    #[test]
    fn scott_rejects_single_point_and_zero_variance() {
        let one = DataSet::from_1d(&[1.0], "one").unwrap();
        assert!(scott_bandwidth(&one).is_err());
        let flat = DataSet::from_rows(
            &[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0]],
            None,
            "flat",
        )
        .unwrap();
        assert!(scott_bandwidth(&flat).is_err());
    }

    #[test]
    fn scott_2d_formula() {
        // 64 points, sample sdevs (1, 3): expect 64^(-1/6) and 3 * 64^(-1/6).
        let mut rows = Vec::new();
        let a1 = (63.0 / 64.0f64).sqrt();
        let a2 = 3.0 * a1;
        for i in 0..64 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(vec![s * a1, s * a2]);
        }
        let data = DataSet::from_rows(&rows, None, "r13").unwrap();
        let shrink = 64.0f64.powf(1.0 / 6.0);
        match scott_bandwidth(&data).unwrap() {
            BandwidthField::GlobalDiagonal { sdevs, .. } => {
                assert_abs_diff_eq!(sdevs[0], 1.0 / shrink, epsilon = 1e-12);
                assert_abs_diff_eq!(sdevs[1], 3.0 / shrink, epsilon = 1e-12);
            }
            _ => panic!("expected diagonal"),
        }
    }

    #[test]
    fn parzen_at_single_point_is_gaussian_peak() {
        let data = DataSet::from_1d(&[0.0], "single").unwrap();
        let bw = BandwidthField::global_scalar(1.0, 1).unwrap();
        let rho = parzen_density(&data, &bw, None, &[vec![0.0]]).unwrap();
        assert_abs_diff_eq!(
            rho.rho[0],
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn parzen_far_pair_halves_the_peak() {
        let data = DataSet::from_1d(&[0.0, 1e9], "far").unwrap();
        let bw = BandwidthField::global_scalar(2.0, 2).unwrap();
        let rho = parzen_density(&data, &bw, None, &[vec![0.0]]).unwrap();
        let expected = 0.5 * (1.0 / (2.0 * std::f64::consts::PI).sqrt()) / 2.0;
        assert_abs_diff_eq!(rho.rho[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn parzen_is_consistent_on_normal_sample() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..100).map(|_| normal.sample(&mut rng)).collect();
        let data = DataSet::from_1d(&xs, "normal").unwrap();
        let bw = scott_bandwidth(&data).unwrap();
        let rho = parzen_density(&data, &bw, None, &[vec![0.0]]).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!(
            (rho.rho[0] - peak).abs() < 0.1,
            "estimate {} too far from {peak}",
            rho.rho[0]
        );
    }

    #[test]
    fn knn_radius_line_examples() {
        let data = DataSet::from_1d(&[0.0, 1.0, 3.0], "line").unwrap();
        assert_eq!(knn_radius(&data, 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(knn_radius(&data, 2).unwrap(), vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn knn_radius_duplicates_are_zero() {
        let data = DataSet::from_1d(&[2.0, 2.0, 5.0], "dup").unwrap();
        let r = knn_radius(&data, 1).unwrap();
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn knn_density_line_example() {
        let data = DataSet::from_1d(&[0.0, 1.0, 2.0, 4.0], "line4").unwrap();
        let rho = knn_density(&data, 1).unwrap();
        assert_eq!(rho.rho, vec![0.25, 0.25, 0.25, 0.125]);
        assert_eq!(rho.normalization, DensityNormalization::Physical);
    }

    #[test]
    fn knn_density_two_points_symmetric() {
        let data = DataSet::from_1d(&[0.0, 3.0], "pair").unwrap();
        let rho = knn_density(&data, 1).unwrap();
        assert_abs_diff_eq!(rho.rho[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.rho[1], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn knn_density_duplicates_flagged_infinite() {
        let data = DataSet::from_1d(&[1.0, 1.0, 4.0], "dup").unwrap();
        let rho = knn_density(&data, 1).unwrap();
        assert!(rho.has_infinite);
        assert!(rho.rho[0].is_infinite());
        let clamped = rho.clamped().unwrap();
        assert!(clamped.rho.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn adaptive_bandwidth_quarter_power() {
        let rho = DensityField {
            rho: vec![1.0, 16.0],
            estimator: DensityEstimator::Knn { k: 1 },
            normalization: DensityNormalization::Physical,
            has_infinite: false,
        };
        // median of raw (1, 0.5) is 0.75; anchoring the median there keeps
        // c = 1 so the first sigma is exactly 1.
        let bw = adaptive_bandwidth(&rho, &DensityTransform::Constant, 4, 0.75).unwrap();
        match bw {
            BandwidthField::Scalar(s) => {
                assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(s[1], 0.5, epsilon = 1e-12);
            }
            _ => panic!("expected scalar field"),
        }
    }

    #[test]
    fn identity_transform_recovers_fixed_bandwidth() {
        let rho = DensityField {
            rho: vec![0.5, 2.0, 7.0],
            estimator: DensityEstimator::Knn { k: 2 },
            normalization: DensityNormalization::Physical,
            has_infinite: false,
        };
        let bw = adaptive_bandwidth(&rho, &DensityTransform::Identity, 2, 0.3).unwrap();
        match bw {
            BandwidthField::Scalar(s) => {
                for &v in &s {
                    assert_abs_diff_eq!(v, 0.3, epsilon = 1e-12);
                }
            }
            _ => panic!("expected scalar field"),
        }
    }

    #[test]
    fn constant_transform_tracks_knn_radius() {
        let (data, _) =
            generate_two_moons(60, 0.05, DensityProfile::Graded { ratio: 8.0 }, 3).unwrap();
        let k = 5;
        let rho = knn_density(&data, k).unwrap();
        let radii = knn_radius(&data, k).unwrap();
        let bw = adaptive_bandwidth(&rho, &DensityTransform::Constant, data.dim(), 1.0).unwrap();
        let sigmas = match bw {
            BandwidthField::Scalar(s) => s,
            _ => panic!("expected scalar field"),
        };
        let c0 = sigmas[0] / radii[0];
        for p in 0..data.n() {
            let c = sigmas[p] / radii[p];
            assert!(
                (c - c0).abs() <= 1e-9 * c0.abs(),
                "sigma/radius not constant: {c} vs {c0}"
            );
        }
    }

    #[test]
    fn equalization_weights_examples() {
        let rho = DensityField {
            rho: vec![2.0, 4.0],
            estimator: DensityEstimator::Knn { k: 1 },
            normalization: DensityNormalization::Physical,
            has_infinite: false,
        };
        let w = equalization_weights(&rho).unwrap();
        assert_abs_diff_eq!(w[0], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.mean(), 1.0, epsilon = 1e-12);

        let uniform = DensityField {
            rho: vec![3.0; 5],
            estimator: DensityEstimator::Knn { k: 1 },
            normalization: DensityNormalization::Physical,
            has_infinite: false,
        };
        let w = equalization_weights(&uniform).unwrap();
        for p in 0..5 {
            assert_abs_diff_eq!(w[p], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_density_is_flat_after_equalization() {
        let (data, _) =
            generate_two_moons(100, 0.05, DensityProfile::Graded { ratio: 10.0 }, 7).unwrap();
        let rho = knn_density(&data, 10).unwrap();
        let w = equalization_weights(&rho).unwrap();
        let weighted: Vec<f64> = rho
            .rho
            .iter()
            .enumerate()
            .map(|(p, &r)| w[p] * r)
            .collect();
        let max = weighted.iter().cloned().fold(f64::MIN, f64::max);
        let min = weighted.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 1.5, "weighted density ratio {}", max / min);
    }

    #[test]
    fn zero_density_is_rejected() {
        let rho = DensityField {
            rho: vec![0.0, 1.0],
            estimator: DensityEstimator::Knn { k: 1 },
            normalization: DensityNormalization::Physical,
            has_infinite: false,
        };
        assert!(equalization_weights(&rho).is_err());
        assert!(adaptive_bandwidth(&rho, &DensityTransform::Constant, 2, 1.0).is_err());
    }

    #[test]
    fn graded_moons_have_graded_knn_density() {
        let (data, _) =
            generate_two_moons(200, 0.05, DensityProfile::Graded { ratio: 10.0 }, 7).unwrap();
        let rho = knn_density(&data, 10).unwrap();
        // decile means within moon 0
        let mut moon0: Vec<f64> = rho.rho[..200].to_vec();
        moon0.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let low: f64 = moon0[..20].iter().sum::<f64>() / 20.0;
        let high: f64 = moon0[180..].iter().sum::<f64>() / 20.0;
        assert!(
            high / low >= 5.0,
            "decile density ratio {} below 5",
            high / low
        );
    }

    #[test]
    fn uniform_moons_have_matched_radii() {
        let (data, _) = generate_two_moons(200, 0.05, DensityProfile::Uniform, 7).unwrap();
        let radii = knn_radius(&data, 10).unwrap();
        let m0: f64 = radii[..200].iter().sum::<f64>() / 200.0;
        let m1: f64 = radii[200..].iter().sum::<f64>() / 200.0;
        let ratio = m0 / m1;
        assert!(
            (0.8..=1.25).contains(&ratio),
            "per-moon radius ratio {ratio}"
        );
    }
}
