//! Property tests for the geometric and symmetry invariants.

use kclust::analysis::nmi;
use kclust::dataset::{DataSet, Partition};
use kclust::density::knn_density;
use kclust::kernels::{gaussian_kernel_matrix, node_degrees, normalize_affinity, KernelMatrix};
use ndarray::Array2;
use proptest::prelude::*;

fn arbitrary_points(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-10.0f64..10.0, 2),
        n..=n,
    )
}

fn distinct(points: &[Vec<f64>]) -> bool {
    for (i, a) in points.iter().enumerate() {
        for b in points.iter().skip(i + 1) {
            if (a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6 {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_density_is_rigid_motion_invariant(
        points in arbitrary_points(12).prop_filter("distinct points", |p| distinct(p)),
        angle in 0.0f64..std::f64::consts::TAU,
        tx in -5.0f64..5.0,
        ty in -5.0f64..5.0,
    ) {
        let data = DataSet::from_rows(&points, None, "p").unwrap();
        let moved: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                vec![
                    angle.cos() * p[0] - angle.sin() * p[1] + tx,
                    angle.sin() * p[0] + angle.cos() * p[1] + ty,
                ]
            })
            .collect();
        let data_moved = DataSet::from_rows(&moved, None, "p2").unwrap();
        let rho = knn_density(&data, 3).unwrap();
        let rho_moved = knn_density(&data_moved, 3).unwrap();
        for (a, b) in rho.rho.iter().zip(rho_moved.rho.iter()) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn knn_density_scales_inversely_with_volume(
        points in arbitrary_points(10).prop_filter("distinct points", |p| distinct(p)),
        lambda in 0.5f64..3.0,
    ) {
        let data = DataSet::from_rows(&points, None, "p").unwrap();
        let scaled: Vec<Vec<f64>> = points
            .iter()
            .map(|p| vec![lambda * p[0], lambda * p[1]])
            .collect();
        let data_scaled = DataSet::from_rows(&scaled, None, "p2").unwrap();
        let rho = knn_density(&data, 3).unwrap();
        let rho_scaled = knn_density(&data_scaled, 3).unwrap();
        // x -> lambda x multiplies densities by lambda^-N with N = 2
        for (a, b) in rho.rho.iter().zip(rho_scaled.rho.iter()) {
            let expected = a * lambda.powi(-2);
            prop_assert!((b - expected).abs() <= 1e-9 * expected.abs(), "{b} vs {expected}");
        }
    }

    #[test]
    fn nmi_is_symmetric_and_relabel_invariant(
        labels_a in prop::collection::vec(0usize..3, 30),
        labels_b in prop::collection::vec(0usize..3, 30),
    ) {
        let a = Partition::new(labels_a.clone(), 3).unwrap();
        let b = Partition::new(labels_b, 3).unwrap();
        let ab = nmi(&a, &b).unwrap();
        let ba = nmi(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);

        let relabeled = Partition::new(
            labels_a.iter().map(|&c| (c + 1) % 3).collect(),
            3,
        )
        .unwrap();
        let rb = nmi(&relabeled, &b).unwrap();
        prop_assert!((ab - rb).abs() <= 1e-12);
    }

    #[test]
    fn degree_normalization_preserves_symmetry_and_positivity(
        points in arbitrary_points(9).prop_filter("distinct points", |p| distinct(p)),
        sigma in 0.2f64..2.0,
    ) {
        let data = DataSet::from_rows(&points, None, "p").unwrap();
        let a = gaussian_kernel_matrix(&data, sigma).unwrap();
        let normalized = normalize_affinity(&a).unwrap();
        prop_assert!(normalized.is_symmetric());
        // far pairs may underflow to an exact zero
        prop_assert!(normalized.matrix().iter().all(|&v| v >= 0.0));
        // degrees of the normalized matrix match the stated identity
        let d = node_degrees(&a);
        let dn = node_degrees(&normalized);
        for p in 0..a.n() {
            let expected: f64 = (0..a.n()).map(|q| a.entry(p, q) / d[q]).sum::<f64>() / d[p];
            prop_assert!((dn[p] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}

#[test]
fn precomputed_matrices_reject_asymmetry_claims() {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = 1.0;
    assert!(KernelMatrix::precomputed(m, true).is_err());
}
