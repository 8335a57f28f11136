//! Distance-matrix machinery: the additive-constant shift that makes an
//! arbitrary symmetric dissimilarity Euclidean, explicit coordinate
//! recovery, classical MDS projections, and the distance modifications
//! induced by adaptive kernels and degree normalization.
//!
//! Matrices store *squared* distances. Squares are what every consumer
//! reads (Gaussian kernels, centered Gram matrices), and the
//! degree-normalization modification can push individual squared entries
//! below zero; those matrices are tagged [`DistanceKind::NcModified`] and
//! only their centered spectrum is ever used.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::DataSet;
use crate::density::BandwidthField;
use crate::error::{Error, Result};
use crate::kernels::{node_degrees, KernelMatrix};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Squared Euclidean distances of observed points.
    EuclideanInput,
    /// Symmetrized two-sided Mahalanobis distances from adaptive
    /// bandwidth fields.
    GeodesicProxy,
    /// Degree-normalization modified distances; entries may be negative.
    NcModified,
}

/// Symmetric squared-distance matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    d2: Array2<f64>,
    kind: DistanceKind,
}

impl DistanceMatrix {
    pub fn from_squared(d2: Array2<f64>, kind: DistanceKind) -> Result<Self> {
        if d2.nrows() != d2.ncols() {
            return Err(Error::Dimension("distance matrix must be square".into()));
        }
        if linalg::max_abs_asymmetry(&d2) > 1e-12 {
            return Err(Error::InvalidArgument(
                "distance matrix must be symmetric".into(),
            ));
        }
        for p in 0..d2.nrows() {
            if d2[[p, p]] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {p} is {}, expected 0",
                    d2[[p, p]]
                )));
            }
        }
        if kind != DistanceKind::NcModified && d2.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "negative squared distances are only allowed for the modified kind".into(),
            ));
        }
        if d2.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "distance matrix has non-finite entries".into(),
            ));
        }
        Ok(Self { d2, kind })
    }

    /// Pairwise squared Euclidean distances of a dataset.
    pub fn from_points(data: &DataSet) -> Self {
        Self {
            d2: linalg::pairwise_sq_dists(data.points()),
            kind: DistanceKind::EuclideanInput,
        }
    }

    /// Pairwise squared Euclidean distances of arbitrary coordinates.
    pub fn from_coords(coords: &Array2<f64>) -> Self {
        Self {
            d2: linalg::pairwise_sq_dists(coords.view()),
            kind: DistanceKind::EuclideanInput,
        }
    }

    pub fn n(&self) -> usize {
        self.d2.nrows()
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// Squared distances.
    pub fn squared(&self) -> &Array2<f64> {
        &self.d2
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "kind": "distance_squared",
            "distance_kind": self.kind,
        });
        crate::matrix_io::write_matrix(path, &self.d2, meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (d2, meta) = crate::matrix_io::read_matrix(path)?;
        if meta.get("kind").and_then(|v| v.as_str()) != Some("distance_squared") {
            return Err(Error::Format {
                row: 0,
                message: "sidecar does not describe a distance matrix".into(),
            });
        }
        let kind = meta
            .get("distance_kind")
            .cloned()
            .map(serde_json::from_value)
            .transpose()?
            .unwrap_or(DistanceKind::EuclideanInput);
        Self::from_squared(d2, kind)
    }
}

/// Smallest h >= 0 (within `tol`) such that the shifted squared distances
/// d2_pq + h^2 [p != q] double-center to a positive semidefinite Gram
/// matrix, found by bisection against an eigenvalue oracle. The bracket
/// upper bound comes from the most negative centered eigenvalue at h = 0.
pub fn additive_constant(d: &DistanceMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let is_psd = |h: f64| -> f64 { linalg::min_eigenvalue(&centered_gram(d, h)) };

    let lambda0 = is_psd(0.0);
    if lambda0 >= -tol {
        return Ok(0.0);
    }
    // On the centered subspace the shift adds h^2/2 to every eigenvalue,
    // so h^2 = -2 lambda0 certainly suffices; widen slightly for rounding.
    let mut hi = (-2.0 * lambda0).sqrt() * 1.001 + tol;
    let mut attempts = 0;
    while is_psd(hi) < -tol {
        hi *= 2.0;
        attempts += 1;
        if attempts > 60 {
            return Err(Error::Domain(
                "additive constant bracket failed to certify".into(),
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_psd(mid) >= -tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// -1/2 J (D2 + h^2 (ones - I)) J.
pub fn centered_gram(d: &DistanceMatrix, h: f64) -> Array2<f64> {
    let n = d.n();
    let mut shifted = d.squared().clone();
    if h != 0.0 {
        let h2 = h * h;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    shifted[[p, q]] += h2;
                }
            }
        }
    }
    linalg::double_center(&shifted)
}

/// Explicit Euclidean coordinates realizing a (shifted) distance matrix.
#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    /// n x n_prime coordinates.
    pub coords: Array2<f64>,
    /// Additive constant applied to off-diagonal squared distances.
    pub h: f64,
    /// Number of retained embedding dimensions.
    pub n_prime: usize,
    /// max |reconstructed^2 - target^2| / max target^2.
    pub max_residual: f64,
    /// Eigenvalue tolerance used for the additive-constant search.
    pub h_tol: f64,
}

impl EmbeddingResult {
    /// The dataset spanned by the embedded coordinates.
    pub fn as_dataset(&self, name: &str) -> Result<DataSet> {
        DataSet::new(self.coords.clone(), None, name)
    }
}

/// Shifts the matrix by its additive constant and factorizes the centered
/// Gram matrix into coordinates. Negative eigenvalues within the clip
/// tolerance are zeroed; the rest must be nonnegative thanks to the shift.
pub fn euclidean_embedding(d: &DistanceMatrix) -> Result<EmbeddingResult> {
    let scale = d
        .squared()
        .iter()
        .cloned()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let h_tol = 1e-9 * scale;
    let h = additive_constant(d, h_tol)?;
    let gram = centered_gram(d, h);
    let (values, vectors) = linalg::symmetric_eigen(&gram);
    let lambda_max = values.iter().cloned().fold(0.0f64, f64::max);
    let clip = 1e-12 * lambda_max.max(1.0);

    let kept: Vec<usize> = (0..values.len()).filter(|&i| values[i] > clip).collect();
    let n = d.n();
    let n_prime = kept.len();
    let mut coords = Array2::zeros((n, n_prime));
    for (j, &i) in kept.iter().enumerate() {
        let root = values[i].sqrt();
        for p in 0..n {
            coords[[p, j]] = vectors[[p, i]] * root;
        }
    }

    // residual against the h-shifted targets
    let mut worst = 0.0f64;
    let mut target_scale = 0.0f64;
    for p in 0..n {
        for q in 0..n {
            let target = d.squared()[[p, q]] + if p != q { h * h } else { 0.0 };
            let mut recon = 0.0;
            for j in 0..n_prime {
                let diff = coords[[p, j]] - coords[[q, j]];
                recon += diff * diff;
            }
            worst = worst.max((recon - target).abs());
            target_scale = target_scale.max(target.abs());
        }
    }
    let max_residual = worst / target_scale.max(1e-300);

    Ok(EmbeddingResult {
        coords,
        h,
        n_prime,
        max_residual,
        h_tol,
    })
}

/// Symmetrized two-sided Mahalanobis distances
/// d2_pq = ((f_p - f_q)^T Sigma_p^{-1} (f_p - f_q) +
///          (f_p - f_q)^T Sigma_q^{-1} (f_p - f_q)) / 2.
///
/// exp(-d2_pq / 2) is the geometric mean of the two one-sided adaptive
/// Gaussian responses, so this matrix is the log-domain counterpart of
/// the symmetrized adaptive kernel.
pub fn geodesic_proxy_distances(data: &DataSet, bw: &BandwidthField) -> Result<DistanceMatrix> {
    bw.validate(data.dim())?;
    if bw.n_points() != data.n() {
        return Err(Error::Dimension(format!(
            "bandwidth field has {} entries for {} points",
            bw.n_points(),
            data.n()
        )));
    }
    let n = data.n();
    let mut d2 = Array2::zeros((n, n));
    for p in 0..n {
        for q in (p + 1)..n {
            let qp = bw.mahalanobis_sq(p, data.point(p), data.point(q))?;
            let qq = bw.mahalanobis_sq(q, data.point(p), data.point(q))?;
            let v = 0.5 * (qp + qq);
            d2[[p, q]] = v;
            d2[[q, p]] = v;
        }
    }
    DistanceMatrix::from_squared(d2, DistanceKind::GeodesicProxy)
}

/// Distance modification equivalent to degree normalization of a Gaussian
/// affinity: d2_pq + 2 sigma^2 log(deg_p deg_q) off the diagonal, so that
/// exp(-modified / (2 sigma^2)) reproduces A_pq / (deg_p deg_q) exactly.
/// Entries can turn negative when deg_p deg_q < 1; a warning is logged
/// since the downstream additive constant absorbs them.
pub fn density_inversion_distances(
    data: &DataSet,
    a: &KernelMatrix,
    sigma: f64,
) -> Result<DistanceMatrix> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if a.n() != data.n() {
        return Err(Error::Dimension(
            "kernel matrix size does not match dataset".into(),
        ));
    }
    let degrees = node_degrees(a);
    if let Some(&bad) = degrees.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "degrees must be positive, found {bad}"
        )));
    }
    let n = data.n();
    let base = linalg::pairwise_sq_dists(data.points());
    let mut d2 = Array2::zeros((n, n));
    let mut saw_negative = false;
    for p in 0..n {
        for q in (p + 1)..n {
            let v = base[[p, q]] + 2.0 * sigma * sigma * (degrees[p] * degrees[q]).ln();
            if v < 0.0 {
                saw_negative = true;
            }
            d2[[p, q]] = v;
            d2[[q, p]] = v;
        }
    }
    if saw_negative {
        log::warn!(
            "degree products below 1 produced negative modified squared distances; \
             the additive constant will absorb them"
        );
    }
    DistanceMatrix::from_squared(d2, DistanceKind::NcModified)
}

/// Which implicit density transform family to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionCurve {
    /// Degree normalization only:
    /// tau(x) = x eps^N / (eps^2 + h^2 + 4 sigma^2 log x)^(n_bar / 2).
    NormalizationOnly,
    /// Degree normalization plus degree weights (one extra factor x).
    NormalizationWithWeights,
}

/// Parameters of the transform curves; node degrees are modeled as
/// proportional to density, so the curve argument x stands for both.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurveParams {
    pub sigma: f64,
    pub h: f64,
    pub n_dim: usize,
    pub n_bar: f64,
    pub eps: f64,
}

/// Sampled transform curve with its interior extrema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSamples {
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    /// (x, tau(x)) at strict interior local minima.
    pub minima: Vec<(f64, f64)>,
    /// (x, tau(x)) at strict interior local maxima.
    pub maxima: Vec<(f64, f64)>,
}

/// Samples an implicit density-transform curve on `x_grid` and locates
/// interior extrema. Errors when the grid leaves the domain (x <= 0 or a
/// nonpositive denominator base).
pub fn density_transform_curves(
    curve: InversionCurve,
    params: &CurveParams,
    x_grid: &[f64],
) -> Result<CurveSamples> {
    if x_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 grid points".into(),
        ));
    }
    if !(params.sigma > 0.0) || !(params.eps > 0.0) || !(params.n_bar > 0.0) || params.h < 0.0 {
        return Err(Error::InvalidArgument(
            "curve parameters must be positive (h may be zero)".into(),
        ));
    }
    let c = params.eps * params.eps + params.h * params.h;
    let a = 4.0 * params.sigma * params.sigma;
    let scale = params.eps.powi(params.n_dim as i32);
    let mut tau = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        if !(x > 0.0) {
            return Err(Error::Domain(format!(
                "curve argument must be positive, got {x}"
            )));
        }
        let base = c + a * x.ln();
        if !(base > 0.0) {
            return Err(Error::Domain(format!(
                "denominator base {base} is nonpositive at x = {x}"
            )));
        }
        let numerator = match curve {
            InversionCurve::NormalizationOnly => x,
            InversionCurve::NormalizationWithWeights => x * x,
        };
        tau.push(numerator * scale / base.powf(params.n_bar / 2.0));
    }

    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    for i in 1..(x_grid.len() - 1) {
        if tau[i] < tau[i - 1] && tau[i] < tau[i + 1] {
            minima.push((x_grid[i], tau[i]));
        }
        if tau[i] > tau[i - 1] && tau[i] > tau[i + 1] {
            maxima.push((x_grid[i], tau[i]));
        }
    }
    Ok(CurveSamples {
        x: x_grid.to_vec(),
        tau,
        minima,
        maxima,
    })
}

/// Logarithmically spaced grid on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi > lo) || points < 2 {
        return Err(Error::InvalidArgument(
            "log grid needs 0 < lo < hi and at least 2 points".into(),
        ));
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Classical MDS projection of a distance matrix: top-`dim` eigenpairs of
/// the centered Gram matrix. When fewer positive eigenvalues exist the
/// remaining axes are zero-padded and the flag is set. The sign of each
/// axis is fixed so its largest-magnitude coordinate is positive.
pub fn mds_project(d: &DistanceMatrix, dim: usize) -> Result<(Array2<f64>, bool)> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be >= 1".into()));
    }
    let gram = linalg::double_center(d.squared());
    let (values, vectors) = linalg::symmetric_eigen(&gram);
    let n = d.n();
    let mut coords = Array2::zeros((n, dim));
    let mut padded = false;
    for j in 0..dim {
        if j >= n || values[j] <= 0.0 {
            padded = true;
            continue;
        }
        let root = values[j].sqrt();
        for p in 0..n {
            coords[[p, j]] = vectors[[p, j]] * root;
        }
    }
    // deterministic sign convention
    for j in 0..dim {
        let mut arg = 0;
        for p in 0..n {
            if coords[[p, j]].abs() > coords[[arg, j]].abs() {
                arg = p;
            }
        }
        if coords[[arg, j]] < 0.0 {
            for p in 0..n {
                coords[[p, j]] = -coords[[p, j]];
            }
        }
    }
    Ok((coords, padded))
}

/// MDS of already-embedded coordinates (projection to `dim` axes).
pub fn mds_project_embedding(e: &EmbeddingResult, dim: usize) -> Result<(Array2<f64>, bool)> {
    mds_project(&DistanceMatrix::from_coords(&e.coords), dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_two_moons, DensityProfile};
    use crate::density::{adaptive_bandwidth, knn_density, DensityTransform};
    use crate::kernels::{gaussian_kernel_matrix, normalize_affinity};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn star_distance() -> DistanceMatrix {
        // center at distance 1 from three points mutually at distance 2;
        // the three outer points alone need circumradius 2/sqrt(3) > 1,
        // so no Euclidean realization exists without a shift.
        let mut d2 = Array2::zeros((4, 4));
        for i in 1..4 {
            d2[[0, i]] = 1.0;
            d2[[i, 0]] = 1.0;
        }
        for i in 1..4 {
            for j in (i + 1)..4 {
                d2[[i, j]] = 4.0;
                d2[[j, i]] = 4.0;
            }
        }
        DistanceMatrix::from_squared(d2, DistanceKind::EuclideanInput).unwrap()
    }

    #[test]
    fn collinear_points_need_no_shift() {
        let data = DataSet::from_1d(&[0.0, 1.0, 2.0], "line").unwrap();
        let d = DistanceMatrix::from_points(&data);
        let h = additive_constant(&d, 1e-9).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn star_needs_positive_shift_and_it_is_minimal() {
        let d = star_distance();
        let tol = 1e-9;
        let h = additive_constant(&d, tol).unwrap();
        assert!(h > 0.0, "expected a positive shift");
        assert!(linalg::min_eigenvalue(&centered_gram(&d, h)) >= -tol);
        let smaller = (h - 10.0 * tol).max(0.0);
        assert!(linalg::min_eigenvalue(&centered_gram(&d, smaller)) < -tol);
    }

    #[test]
    fn equilateral_triangle_embeds_in_the_plane() {
        let mut d2 = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    d2[[i, j]] = 1.0;
                }
            }
        }
        let d = DistanceMatrix::from_squared(d2, DistanceKind::EuclideanInput).unwrap();
        let e = euclidean_embedding(&d).unwrap();
        assert_eq!(e.h, 0.0);
        assert_eq!(e.n_prime, 2);
        for p in 0..3 {
            for q in (p + 1)..3 {
                let dist: f64 = (0..e.n_prime)
                    .map(|j| (e.coords[[p, j]] - e.coords[[q, j]]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert_abs_diff_eq!(dist, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn two_points_embed_directly() {
        let mut d2 = Array2::zeros((2, 2));
        d2[[0, 1]] = 25.0;
        d2[[1, 0]] = 25.0;
        let d = DistanceMatrix::from_squared(d2, DistanceKind::EuclideanInput).unwrap();
        let e = euclidean_embedding(&d).unwrap();
        assert_eq!(e.h, 0.0);
        let dist = ((e.coords[[0, 0]] - e.coords[[1, 0]]).powi(2)).sqrt();
        assert_abs_diff_eq!(dist, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn reembedding_euclidean_distances_is_a_projection() {
        let (data, _) = generate_two_moons(20, 0.05, DensityProfile::Uniform, 11).unwrap();
        let d = DistanceMatrix::from_points(&data);
        let e = euclidean_embedding(&d).unwrap();
        assert_eq!(e.h, 0.0);
        assert!(e.max_residual <= 1e-6);
        assert!(e.n_prime <= data.n() - 1);
    }

    #[test]
    fn geodesic_proxy_reduces_to_scaled_euclidean() {
        let data = DataSet::from_1d(&[0.0, 1.0, 3.0], "line").unwrap();
        let sigma = 0.5;
        let bw = BandwidthField::global_scalar(sigma, 3).unwrap();
        let d = geodesic_proxy_distances(&data, &bw).unwrap();
        assert_abs_diff_eq!(d.squared()[[0, 1]], (1.0 / sigma).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(
            d.squared()[[1, 2]],
            (2.0 / sigma).powi(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn geodesic_proxy_pair_mixed_sigmas() {
        let data = DataSet::from_1d(&[0.0, 2.0], "pair").unwrap();
        let bw = BandwidthField::per_point_scalar(vec![1.0, 2.0]).unwrap();
        let d = geodesic_proxy_distances(&data, &bw).unwrap();
        assert_abs_diff_eq!(d.squared()[[0, 1]], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_proxy_matches_adaptive_kernel_geometric_mean() {
        let (data, _) =
            generate_two_moons(15, 0.05, DensityProfile::Graded { ratio: 5.0 }, 2).unwrap();
        let rho = knn_density(&data, 4).unwrap();
        let bw = adaptive_bandwidth(&rho, &DensityTransform::Constant, 2, 0.3).unwrap();
        let d = geodesic_proxy_distances(&data, &bw).unwrap();
        // exp(-d2/2) equals the geometric mean of the two one-sided kernels
        for p in 0..data.n() {
            for q in 0..data.n() {
                if p == q {
                    continue;
                }
                let kp = (-0.5
                    * bw.mahalanobis_sq(p, data.point(p), data.point(q)).unwrap())
                .exp();
                let kq = (-0.5
                    * bw.mahalanobis_sq(q, data.point(p), data.point(q)).unwrap())
                .exp();
                let expected = (kp * kq).sqrt();
                let got = (-0.5 * d.squared()[[p, q]]).exp();
                assert!(
                    (got - expected).abs() <= 1e-12,
                    "mismatch at ({p},{q}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn inversion_distances_identity_cases() {
        // unit degrees leave distances untouched
        let data = DataSet::from_1d(&[0.0, 100.0], "far").unwrap();
        let a = gaussian_kernel_matrix(&data, 0.1).unwrap(); // degrees ~ 1
        let d = density_inversion_distances(&data, &a, 0.1).unwrap();
        assert_abs_diff_eq!(d.squared()[[0, 1]], 100.0 * 100.0, epsilon = 1e-9);
    }

    #[test]
    fn inversion_distances_all_ones_kernel() {
        let data = DataSet::from_1d(&[0.0, 0.0], "same").unwrap();
        let a = crate::kernels::KernelMatrix::precomputed(Array2::ones((2, 2)), true).unwrap();
        let sigma = 0.7;
        let d = density_inversion_distances(&data, &a, sigma).unwrap();
        assert_abs_diff_eq!(
            d.squared()[[0, 1]],
            2.0 * sigma * sigma * 4.0f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn inversion_distances_reproduce_normalized_affinity() {
        let (data, _) =
            generate_two_moons(20, 0.05, DensityProfile::Graded { ratio: 5.0 }, 6).unwrap();
        let sigma = 0.3;
        let a = gaussian_kernel_matrix(&data, sigma).unwrap();
        let norm = normalize_affinity(&a).unwrap();
        let d = density_inversion_distances(&data, &a, sigma).unwrap();
        for p in 0..data.n() {
            for q in 0..data.n() {
                if p == q {
                    continue;
                }
                let rebuilt = (-d.squared()[[p, q]] / (2.0 * sigma * sigma)).exp();
                assert!(
                    (rebuilt - norm.entry(p, q)).abs()
                        <= 1e-12 * norm.entry(p, q).abs().max(1e-30),
                    "mismatch at ({p},{q})"
                );
            }
        }
    }

    #[test]
    fn curve_families_have_interior_minima() {
        // x / (1 + log x)^10 on (1, 1e6): minimum at x = e^9
        let params = CurveParams {
            sigma: 0.5,
            h: 0.0,
            n_dim: 1,
            n_bar: 20.0,
            eps: 1.0,
        };
        let grid = log_grid(1.0001, 1e6, 4000).unwrap();
        let unweighted =
            density_transform_curves(InversionCurve::NormalizationOnly, &params, &grid).unwrap();
        assert_eq!(unweighted.minima.len(), 1);
        let x_star = unweighted.minima[0].0;
        assert!(
            (x_star.ln() - 9.0).abs() < 0.05,
            "minimum at log x = {}",
            x_star.ln()
        );

        let weighted =
            density_transform_curves(InversionCurve::NormalizationWithWeights, &params, &grid)
                .unwrap();
        assert_eq!(weighted.minima.len(), 1);
        assert!(
            (weighted.minima[0].0.ln() - 4.0).abs() < 0.05,
            "minimum at log x = {}",
            weighted.minima[0].0.ln()
        );
    }

    #[test]
    fn curve_minimum_grows_with_embedding_dimension() {
        let grid = log_grid(1.0001, 1e6, 4000).unwrap();
        let mut previous = 0.0;
        for n_bar in [4.0, 8.0, 16.0] {
            let params = CurveParams {
                sigma: 0.5,
                h: 0.0,
                n_dim: 1,
                n_bar,
                eps: 1.0,
            };
            let samples =
                density_transform_curves(InversionCurve::NormalizationOnly, &params, &grid)
                    .unwrap();
            assert_eq!(samples.minima.len(), 1, "n_bar = {n_bar}");
            let x_star = samples.minima[0].0;
            assert!(x_star > previous, "x* not increasing at n_bar = {n_bar}");
            previous = x_star;
        }
    }

    #[test]
    fn curve_rejects_domain_violations() {
        let params = CurveParams {
            sigma: 0.5,
            h: 0.0,
            n_dim: 1,
            n_bar: 20.0,
            eps: 1.0,
        };
        assert!(matches!(
            density_transform_curves(
                InversionCurve::NormalizationOnly,
                &params,
                &[-1.0, 1.0, 2.0]
            ),
            Err(Error::Domain(_))
        ));
        // base 1 + 1 * ln(x) <= 0 for x <= exp(-1)
        assert!(matches!(
            density_transform_curves(
                InversionCurve::NormalizationOnly,
                &params,
                &[1e-3, 1.0, 2.0]
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mds_preserves_triangle() {
        let mut d2 = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    d2[[i, j]] = 1.0;
                }
            }
        }
        let d = DistanceMatrix::from_squared(d2, DistanceKind::EuclideanInput).unwrap();
        let (coords, padded) = mds_project(&d, 2).unwrap();
        assert!(!padded);
        for p in 0..3 {
            for q in (p + 1)..3 {
                let dist: f64 = (0..2)
                    .map(|j| (coords[[p, j]] - coords[[q, j]]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert_abs_diff_eq!(dist, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mds_to_one_dimension_loses_the_square() {
        let square = array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let d = DistanceMatrix::from_coords(&square);
        let (coords, _) = mds_project(&d, 1).unwrap();
        let mut residual = 0.0f64;
        for p in 0..4 {
            for q in (p + 1)..4 {
                let recon = (coords[[p, 0]] - coords[[q, 0]]).powi(2);
                residual += (recon - d.squared()[[p, q]]).abs();
            }
        }
        assert!(residual > 0.1, "1-D projection cannot be exact");
    }

    #[test]
    fn mds_pads_missing_dimensions() {
        let data = DataSet::from_1d(&[0.0, 1.0, 2.0], "line").unwrap();
        let d = DistanceMatrix::from_points(&data);
        let (coords, padded) = mds_project(&d, 3).unwrap();
        assert!(padded);
        for p in 0..3 {
            assert_eq!(coords[[p, 2]], 0.0);
        }
    }

    #[test]
    fn distance_matrix_file_roundtrip() {
        let data = DataSet::from_1d(&[0.0, 1.5, 4.0], "line").unwrap();
        let d = DistanceMatrix::from_points(&data);
        let dir = std::env::temp_dir();
        let path = dir.join(format!("kclust-dist-{}.bin", rand::random::<u64>()));
        d.save(&path).unwrap();
        let back = DistanceMatrix::load(&path).unwrap();
        assert_eq!(back.squared(), d.squared());
        assert_eq!(back.kind(), d.kind());
        std::fs::remove_file(&path).ok();
        std::fs::remove_file(crate::matrix_io::sidecar_path(&path)).ok();
    }

    #[test]
    fn additive_constant_monotone_under_uniform_inflation() {
        // adding a constant to all off-diagonal squared entries cannot
        // increase the required shift
        let d = star_distance();
        let h = additive_constant(&d, 1e-9).unwrap();
        let mut inflated = d.squared().clone();
        for p in 0..4 {
            for q in 0..4 {
                if p != q {
                    inflated[[p, q]] += 0.5;
                }
            }
        }
        let d_inflated =
            DistanceMatrix::from_squared(inflated, DistanceKind::EuclideanInput).unwrap();
        let h_inflated = additive_constant(&d_inflated, 1e-9).unwrap();
        assert!(h_inflated <= h + 1e-6);
    }
}
