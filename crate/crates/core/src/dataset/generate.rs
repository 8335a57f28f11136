//! Synthetic geometries used by the bias experiments.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataSet, Partition};
use crate::error::{Error, Result};

/// How points are spread along each moon arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    /// Even arc-length spacing.
    Uniform,
    /// Smoothly graded spacing; the densest arc segment is `ratio` times
    /// denser than the sparsest. Requires ratio > 1.
    Graded { ratio: f64 },
}

/// Two interleaved half-circle clusters ("two moons"), ground truth k = 2.
///
/// With the graded profile, arc positions come from warping a parameter
/// grid u in [1/2, 1] through u^gamma, which concentrates points toward
/// one end of each arc while keeping the spacing smooth. The first moon's
/// gamma is set so the spacing between its densest and sparsest sampled
/// segments equals `ratio` exactly; the second moon is graded at
/// sqrt(ratio), so the dataset has a single globally densest head while
/// both tails share the same sparsest spacing. Fully deterministic for a
/// fixed seed.
pub fn generate_two_moons(
    n_per_moon: usize,
    noise: f64,
    profile: DensityProfile,
    seed: u64,
) -> Result<(DataSet, Partition)> {
    if n_per_moon < 2 {
        return Err(Error::InvalidArgument(
            "n_per_moon must be at least 2".into(),
        ));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::InvalidArgument("noise must be >= 0".into()));
    }
    let gammas = match profile {
        DensityProfile::Uniform => [1.0, 1.0],
        DensityProfile::Graded { ratio } => {
            if !(ratio > 1.0) {
                return Err(Error::InvalidArgument(
                    "graded ratio must be > 1".into(),
                ));
            }
            // Spacing dt/du = gamma * u^(gamma-1) on the grid
            // u_i = 1/2 + (i + 1/2) / (2n), so the endpoint spacing ratio
            // is (u_last / u_first)^(gamma-1).
            let u_first = 0.5 + 0.25 / n_per_moon as f64;
            let u_last = 0.5 + (n_per_moon as f64 - 0.5) / (2.0 * n_per_moon as f64);
            let gamma = |r: f64| 1.0 + r.ln() / (u_last / u_first).ln();
            [gamma(ratio), gamma(ratio.sqrt())]
        }
    };

    let n = 2 * n_per_moon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid std dev");
    let mut points: Array2<f64> = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);

    for (moon, &gamma) in gammas.iter().enumerate() {
        for i in 0..n_per_moon {
            let u = if gamma == 1.0 {
                (i as f64 + 0.5) / n_per_moon as f64
            } else {
                0.5 + (i as f64 + 0.5) / (2.0 * n_per_moon as f64)
            };
            let theta = std::f64::consts::PI * u.powf(gamma);
            let (mut x, mut y) = if moon == 0 {
                (theta.cos(), theta.sin())
            } else {
                (1.0 - theta.cos(), 0.5 - theta.sin())
            };
            if noise > 0.0 {
                x += gauss.sample(&mut rng);
                y += gauss.sample(&mut rng);
            }
            let row = moon * n_per_moon + i;
            points[[row, 0]] = x;
            points[[row, 1]] = y;
            labels.push(moon);
        }
    }

    let data = DataSet::new(points, Some(labels.clone()), "two-moons")?;
    let truth = Partition::new(labels, 2)?;
    Ok((data, truth))
}

/// Two dense Gaussian blobs plus a tight group of far-away outliers.
///
/// `n_dense` points are drawn per blob. The outliers are placed together at
/// a distance of at least `separation` times the blob diameter from every
/// blob point and occupy the last `n_outliers` indices of the returned
/// dataset. Ground-truth labels assign each outlier to its nearest blob.
pub fn generate_clusters_with_outliers(
    n_dense: usize,
    n_outliers: usize,
    separation: f64,
    seed: u64,
) -> Result<(DataSet, Partition)> {
    if n_dense < 4 {
        return Err(Error::InvalidArgument("n_dense must be at least 4".into()));
    }
    if !separation.is_finite() || separation <= 0.0 {
        return Err(Error::InvalidArgument("separation must be > 0".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blob_noise = Normal::new(0.0, 0.3).expect("valid std dev");
    let centers = [(0.0, 0.0), (2.0, 0.0)];
    let n = 2 * n_dense + n_outliers;
    let mut points: Array2<f64> = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);

    for (blob, &(cx, cy)) in centers.iter().enumerate() {
        for i in 0..n_dense {
            let row = blob * n_dense + i;
            points[[row, 0]] = cx + blob_noise.sample(&mut rng);
            points[[row, 1]] = cy + blob_noise.sample(&mut rng);
            labels.push(blob);
        }
    }

    if n_outliers > 0 {
        let n_blob = 2 * n_dense;
        let mut diameter = 0.0f64;
        for p in 0..n_blob {
            for q in (p + 1)..n_blob {
                let d2 = (points[[p, 0]] - points[[q, 0]]).powi(2)
                    + (points[[p, 1]] - points[[q, 1]]).powi(2);
                diameter = diameter.max(d2);
            }
        }
        let diameter = diameter.sqrt();
        let centroid = (
            points.column(0).iter().take(n_blob).sum::<f64>() / n_blob as f64,
            points.column(1).iter().take(n_blob).sum::<f64>() / n_blob as f64,
        );
        let hull_radius = (0..n_blob)
            .map(|p| {
                ((points[[p, 0]] - centroid.0).powi(2) + (points[[p, 1]] - centroid.1).powi(2))
                    .sqrt()
            })
            .fold(0.0f64, f64::max);

        // The group center sits just beyond the blob hull: the triangle
        // inequality then puts every jittered outlier at least
        // separation * diameter away from all blob points, and no farther
        // than necessary.
        let angle: f64 = rng.random_range(0.25..0.45) * std::f64::consts::PI;
        let radius = hull_radius + (separation + 0.08) * diameter;
        let gx = centroid.0 + radius * angle.cos();
        let gy = centroid.1 + radius * angle.sin();
        for j in 0..n_outliers {
            let row = n_blob + j;
            let jitter = 0.03 * diameter;
            points[[row, 0]] = gx + rng.random_range(-jitter..jitter);
            points[[row, 1]] = gy + rng.random_range(-jitter..jitter);

            let mut best = (f64::INFINITY, 0usize);
            for blob in 0..2 {
                for i in 0..n_dense {
                    let src = blob * n_dense + i;
                    let d2 = (points[[row, 0]] - points[[src, 0]]).powi(2)
                        + (points[[row, 1]] - points[[src, 1]]).powi(2);
                    if d2 < best.0 {
                        best = (d2, blob);
                    }
                }
            }
            labels.push(best.1);
        }
    }

    let data = DataSet::new(points, Some(labels.clone()), "blobs-with-outliers")?;
    let truth = Partition::new(labels, 2)?;
    Ok((data, truth))
}
