//! Affinity-matrix construction: fixed and adaptive Gaussians, the
//! Zelnik-Manor/Perona product kernel, KNN kernels, node degrees, degree
//! normalization, and positive-semidefiniteness diagnostics.
//!
//! Raw row-dependent kernels (adaptive Gaussian, KNN) are symmetrized by
//! the arithmetic mean; pairwise clustering energies only read the
//! symmetric part, which the mean preserves exactly.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::DataSet;
use crate::density::BandwidthField;
use crate::error::{Error, Result};
use crate::linalg;

/// Provenance of a kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    GaussianFixed { sigma: f64 },
    GaussianAdaptive,
    Zmp,
    Knn { k: usize, symmetrize: bool },
    Precomputed,
    Normalized { base: Box<KernelSpec>, degrees: Vec<f64> },
}

/// A pairwise affinity matrix with provenance.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    a: Array2<f64>,
    spec: KernelSpec,
    symmetric: bool,
    psd_certificate: Option<f64>,
}

impl KernelMatrix {
    /// Wraps a precomputed affinity matrix.
    pub fn precomputed(a: Array2<f64>, symmetric: bool) -> Result<Self> {
        Self::validate(a, KernelSpec::Precomputed, symmetric)
    }

    fn validate(a: Array2<f64>, spec: KernelSpec, symmetric: bool) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "affinity matrix must be square, got {} x {}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "affinity matrix has non-finite entries".into(),
            ));
        }
        if symmetric && linalg::max_abs_asymmetry(&a) > 1e-12 {
            return Err(Error::InvalidArgument(
                "matrix flagged symmetric exceeds the 1e-12 asymmetry budget".into(),
            ));
        }
        Ok(Self {
            a,
            spec,
            symmetric,
            psd_certificate: None,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn entry(&self, p: usize, q: usize) -> f64 {
        self.a[[p, q]]
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Minimum eigenvalue recorded by the last [`check_psd`] call.
    pub fn psd_certificate(&self) -> Option<f64> {
        self.psd_certificate
    }

    pub fn set_psd_certificate(&mut self, min_eig: f64) {
        self.psd_certificate = Some(min_eig);
    }

    /// Saves the matrix in the binary-plus-sidecar format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "kind": "kernel",
            "symmetric": self.symmetric,
            "spec": self.spec,
        });
        crate::matrix_io::write_matrix(path, &self.a, meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (a, meta) = crate::matrix_io::read_matrix(path)?;
        if meta.get("kind").and_then(|v| v.as_str()) != Some("kernel") {
            return Err(Error::Format {
                row: 0,
                message: "sidecar does not describe a kernel matrix".into(),
            });
        }
        let symmetric = meta
            .get("symmetric")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        let spec = meta
            .get("spec")
            .cloned()
            .map(serde_json::from_value)
            .transpose()?
            .unwrap_or(KernelSpec::Precomputed);
        Self::validate(a, spec, symmetric)
    }
}

/// Fixed Gaussian affinity A_pq = exp(-|f_p - f_q|^2 / (2 sigma^2)),
/// unit diagonal.
pub fn gaussian_kernel_matrix(data: &DataSet, sigma: f64) -> Result<KernelMatrix> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let d2 = linalg::pairwise_sq_dists(data.points());
    let denom = 2.0 * sigma * sigma;
    let a = d2.mapv(|v| (-v / denom).exp());
    KernelMatrix::validate(a, KernelSpec::GaussianFixed { sigma }, true)
}

/// Adaptive non-normalized Gaussian: the raw kernel
/// kappa_pq = exp(-(f_p - f_q)^T Sigma_p^{-1} (f_p - f_q) / 2) is
/// row-dependent, so the output is the symmetrization (kappa + kappa^T)/2
/// with unit diagonal. Reduces exactly to the fixed Gaussian for a
/// constant scalar field.
pub fn adaptive_gaussian_kernel_matrix(
    data: &DataSet,
    bw: &BandwidthField,
) -> Result<KernelMatrix> {
    bw.validate(data.dim())?;
    if bw.n_points() != data.n() {
        return Err(Error::Dimension(format!(
            "bandwidth field has {} entries for {} points",
            bw.n_points(),
            data.n()
        )));
    }
    let n = data.n();
    let mut a = Array2::zeros((n, n));
    for p in 0..n {
        a[[p, p]] = 1.0;
        for q in 0..n {
            if p == q {
                continue;
            }
            let quad = bw.mahalanobis_sq(p, data.point(p), data.point(q))?;
            a[[p, q]] = (-0.5 * quad).exp();
        }
    }
    // (kappa + kappa^T) / 2
    for p in 0..n {
        for q in (p + 1)..n {
            let mean = 0.5 * (a[[p, q]] + a[[q, p]]);
            a[[p, q]] = mean;
            a[[q, p]] = mean;
        }
    }
    KernelMatrix::validate(a, KernelSpec::GaussianAdaptive, true)
}

/// Zelnik-Manor/Perona kernel A_pq = exp(-|f_p - f_q|^2 / (2 sigma_p
/// sigma_q)); symmetric by construction. The usual choice for sigma_p is
/// the K-th nearest-neighbor radius.
pub fn zmp_kernel_matrix(data: &DataSet, sigmas: &BandwidthField) -> Result<KernelMatrix> {
    let s = match sigmas {
        BandwidthField::Scalar(s) => s,
        _ => {
            return Err(Error::InvalidArgument(
                "the product kernel needs a per-point scalar bandwidth field".into(),
            ))
        }
    };
    if s.len() != data.n() {
        return Err(Error::Dimension(format!(
            "bandwidth field has {} entries for {} points",
            s.len(),
            data.n()
        )));
    }
    if s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let d2 = linalg::pairwise_sq_dists(data.points());
    let n = data.n();
    let mut a = Array2::zeros((n, n));
    for p in 0..n {
        a[[p, p]] = 1.0;
        for q in (p + 1)..n {
            let v = (-d2[[p, q]] / (2.0 * s[p] * s[q])).exp();
            a[[p, q]] = v;
            a[[q, p]] = v;
        }
    }
    KernelMatrix::validate(a, KernelSpec::Zmp, true)
}

/// KNN kernel u_pq = [q among the K nearest neighbors of p], self
/// excluded, ties broken by point index. With `symmetrize` the output is
/// (u + u^T)/2 with the diagonal set to one; otherwise the raw asymmetric
/// 0/1 matrix is returned (zero diagonal).
pub fn knn_kernel_matrix(data: &DataSet, k: usize, symmetrize: bool) -> Result<KernelMatrix> {
    let neighbors = crate::density::knn_indices(data, k)?;
    let n = data.n();
    let mut u = Array2::zeros((n, n));
    for (p, nbrs) in neighbors.iter().enumerate() {
        for &q in nbrs {
            u[[p, q]] = 1.0;
        }
    }
    if !symmetrize {
        return KernelMatrix::validate(u, KernelSpec::Knn { k, symmetrize }, false);
    }
    let mut a = Array2::zeros((n, n));
    for p in 0..n {
        a[[p, p]] = 1.0;
        for q in (p + 1)..n {
            let mean = 0.5 * (u[[p, q]] + u[[q, p]]);
            a[[p, q]] = mean;
            a[[q, p]] = mean;
        }
    }
    KernelMatrix::validate(a, KernelSpec::Knn { k, symmetrize }, true)
}

/// Node degrees d_p = sum_q A_pq (row sums, diagonal included).
pub fn node_degrees(a: &KernelMatrix) -> Vec<f64> {
    (0..a.n()).map(|p| a.matrix().row(p).sum()).collect()
}

/// Degree normalization A_pq / (d_p d_q). The degrees used are recorded in
/// the output spec. All degrees must be positive.
pub fn normalize_affinity(a: &KernelMatrix) -> Result<KernelMatrix> {
    let degrees = node_degrees(a);
    if let Some(&bad) = degrees.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "degree normalization needs positive degrees, found {bad}"
        )));
    }
    let n = a.n();
    let mut out = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            out[[p, q]] = a.entry(p, q) / (degrees[p] * degrees[q]);
        }
    }
    KernelMatrix::validate(
        out,
        KernelSpec::Normalized {
            base: Box::new(a.spec().clone()),
            degrees,
        },
        a.is_symmetric(),
    )
}

/// Result of a positive-semidefiniteness check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub psd: bool,
    pub tol: f64,
}

/// Smallest eigenvalue of a symmetric kernel matrix and whether it clears
/// `-tol`. Asymmetric input is rejected.
pub fn check_psd(a: &KernelMatrix, tol: f64) -> Result<PsdReport> {
    if !a.is_symmetric() || linalg::max_abs_asymmetry(a.matrix()) > 1e-12 {
        return Err(Error::InvalidArgument(
            "psd check needs a symmetric matrix".into(),
        ));
    }
    let min_eigenvalue = linalg::min_eigenvalue(a.matrix());
    Ok(PsdReport {
        min_eigenvalue,
        psd: min_eigenvalue >= -tol,
        tol,
    })
}
