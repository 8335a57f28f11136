//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

/// Squared Euclidean distances between all row pairs of `points` (n × d).
/// Rows are computed independently in parallel (thread count follows
/// RAYON_NUM_THREADS), so the result is bit-identical regardless of pool
/// size.
pub fn pairwise_sq_dists(points: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = points.nrows();
    let d = points.ncols();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            (0..n)
                .map(|q| {
                    let mut s = 0.0;
                    for j in 0..d {
                        let diff = points[[p, j]] - points[[q, j]];
                        s += diff * diff;
                    }
                    s
                })
                .collect()
        })
        .collect();
    let mut d2 = Array2::zeros((n, n));
    for (p, row) in rows.into_iter().enumerate() {
        for (q, v) in row.into_iter().enumerate() {
            d2[[p, q]] = v;
        }
    }
    d2
}

/// Largest absolute entry of `m - m^T`.
pub fn max_abs_asymmetry(m: &Array2<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..m.nrows() {
        for q in (p + 1)..m.ncols() {
            worst = worst.max((m[[p, q]] - m[[q, p]]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order with the matching eigenvectors
/// as columns of the second result.
pub fn symmetric_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let dm = DMatrix::from_fn(n, n, |r, c| m[[r, c]]);
    let eig = dm.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });

    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = eig.eigenvectors[(row, i)];
        }
    }
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |r, c| m[[r, c]]);
    let eig = dm.symmetric_eigenvalues();
    eig.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Double centering: -1/2 * J * m * J with J = I - (1/n) * ones.
///
/// Applied to a matrix of squared distances this yields the Gram matrix of
/// a centered point configuration whenever one exists.
pub fn double_center(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|p| m.row(p).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut out = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            out[[p, q]] = -0.5 * (m[[p, q]] - row_means[p] - row_means[q] + grand);
        }
    }
    out
}

/// 2 × 2 rotation applied in the (i, j) coordinate plane of a d-dimensional
/// space; used by tests to build random rigid motions.
pub fn plane_rotation(dim: usize, i: usize, j: usize, angle: f64) -> Array2<f64> {
    let mut r = Array2::eye(dim);
    r[[i, i]] = angle.cos();
    r[[j, j]] = angle.cos();
    r[[i, j]] = -angle.sin();
    r[[j, i]] = angle.sin();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal_matrix() {
        let m = array![[3.0, 0.0], [0.0, -1.0]];
        let (vals, vecs) = symmetric_eigen(&m);
        assert_abs_diff_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], -1.0, epsilon = 1e-12);
        // reconstruct
        for p in 0..2 {
            for q in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += vals[k] * vecs[[p, k]] * vecs[[q, k]];
                }
                assert_abs_diff_eq!(s, m[[p, q]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn min_eig_of_exchange_matrix() {
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        assert_abs_diff_eq!(min_eigenvalue(&m), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn double_center_kills_constant_offsets() {
        // Squared distances of collinear points are invariant to centering
        // conventions: B reproduces inner products of centered coordinates.
        let pts = array![[0.0], [1.0], [2.0]];
        let d2 = pairwise_sq_dists(pts.view());
        let b = double_center(&d2);
        // Gram of centered coords (-1, 0, 1)
        let expected = array![[1.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 1.0]];
        for p in 0..3 {
            for q in 0..3 {
                assert_abs_diff_eq!(b[[p, q]], expected[[p, q]], epsilon = 1e-12);
            }
        }
    }
}
