//! Point sets, partitions, per-point weights, and synthetic generators.

mod generate;
mod io;

pub use generate::{generate_clusters_with_outliers, generate_two_moons, DensityProfile};
pub use io::{load_dataset, load_labels, save_dataset, save_labels, Format};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// A finite set of feature vectors with optional ground-truth labels.
#[derive(Debug, Clone)]
pub struct DataSet {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
    name: String,
}

impl DataSet {
    /// Builds a dataset from an n × d matrix of feature vectors.
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>, name: &str) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "dataset '{name}' must have n >= 1 points of dimension >= 1, got {} x {}",
                points.nrows(),
                points.ncols()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dataset '{name}' contains non-finite coordinates"
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != points.nrows() {
                return Err(Error::Dimension(format!(
                    "dataset '{name}': {} labels for {} points",
                    l.len(),
                    points.nrows()
                )));
            }
        }
        Ok(Self {
            points,
            labels,
            name: name.to_string(),
        })
    }

    /// Convenience constructor from row vectors; every row must have the
    /// same length.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>, name: &str) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension(format!("dataset '{name}' is empty")));
        }
        let dim = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Dimension(format!(
                    "dataset '{name}': row {i} has width {} but row 0 has width {dim}",
                    r.len()
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
        let points = Array2::from_shape_vec((rows.len(), dim), flat)
            .expect("row widths were checked above");
        Self::new(points, labels, name)
    }

    /// 1-D dataset from a slice of coordinates.
    pub fn from_1d(xs: &[f64], name: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Self::from_rows(&rows, None, name)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, p: usize) -> ArrayView1<'_, f64> {
        self.points.row(p)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ground-truth labels as a partition, when present.
    pub fn truth_partition(&self) -> Option<Partition> {
        let labels = self.labels.as_ref()?;
        let k = labels.iter().max().map_or(1, |m| m + 1);
        Partition::new(labels.clone(), k).ok()
    }

    /// Largest pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for p in 0..self.n() {
            for q in (p + 1)..self.n() {
                let d2: f64 = (0..self.dim())
                    .map(|j| (self.points[[p, j]] - self.points[[q, j]]).powi(2))
                    .sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Per-dimension sample standard deviations (n - 1 denominator).
    pub fn feature_sdevs(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.dim())
            .map(|j| {
                let col = self.points.column(j);
                let mean = col.sum() / n;
                let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
                if self.n() > 1 {
                    (ss / (n - 1.0)).sqrt()
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Assignment of each point to one of `k` clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidArgument("empty partition".into()));
        }
        if let Some(&bad) = assignment.iter().find(|&&a| a >= k) {
            return Err(Error::InvalidArgument(format!(
                "cluster index {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { assignment, k })
    }

    /// Every point in a single cluster.
    pub fn trivial(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            k: 1,
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster(&self, p: usize) -> usize {
        self.assignment[p]
    }

    /// Point indices belonging to cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.n()).filter(|&p| self.assignment[p] == c).collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Empty clusters are permitted by the representation but flagged here.
    pub fn has_empty_cluster(&self) -> bool {
        self.cluster_sizes().iter().any(|&s| s == 0)
    }

    /// Index (in [0, k)) of the smallest cluster, ties toward the lower index.
    pub fn minority_cluster(&self) -> usize {
        let sizes = self.cluster_sizes();
        (0..self.k)
            .min_by_key(|&c| (sizes[c], c))
            .expect("k >= 1")
    }
}

/// Nonnegative per-point weights; at least one must be positive.
#[derive(Debug, Clone)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and >= 0".into(),
            ));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn uniform(n: usize) -> Self {
        Self { w: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn mean(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, p: usize) -> &f64 {
        &self.w[p]
    }
}

/// Replaces each point `p` by `w_p` copies at the same location, preserving
/// the order of first occurrence. Weights must be positive integers.
pub fn replicate_by_weights(data: &DataSet, w: &WeightVector) -> Result<DataSet> {
    if w.len() != data.n() {
        return Err(Error::Dimension(format!(
            "{} weights for {} points",
            w.len(),
            data.n()
        )));
    }
    let mut counts = Vec::with_capacity(data.n());
    for (p, &v) in w.values().iter().enumerate() {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight {v} at point {p} is not a positive integer"
            )));
        }
        counts.push(v as usize);
    }
    let n_out: usize = counts.iter().sum();
    let mut points = Array2::zeros((n_out, data.dim()));
    let mut labels = data.labels().map(|_| Vec::with_capacity(n_out));
    let mut row = 0;
    for p in 0..data.n() {
        for _ in 0..counts[p] {
            points.row_mut(row).assign(&data.point(p));
            if let (Some(out), Some(src)) = (labels.as_mut(), data.labels()) {
                out.push(src[p]);
            }
            row += 1;
        }
    }
    DataSet::new(points, labels, &format!("{}-replicated", data.name()))
}

/// Maps a partition of the original points onto the replicated dataset
/// produced by [`replicate_by_weights`] with the same weights.
pub fn replicate_partition(part: &Partition, w: &WeightVector) -> Result<Partition> {
    if w.len() != part.n() {
        return Err(Error::Dimension(format!(
            "{} weights for {} points",
            w.len(),
            part.n()
        )));
    }
    let mut assignment = Vec::new();
    for p in 0..part.n() {
        let copies = w[p] as usize;
        for _ in 0..copies {
            assignment.push(part.cluster(p));
        }
    }
    Partition::new(assignment, part.k())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn replicate_copies_points_in_order() {
        let data = DataSet::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0]], None, "ab").unwrap();
        let w = WeightVector::new(vec![2.0, 1.0]).unwrap();
        let out = replicate_by_weights(&data, &w).unwrap();
        assert_eq!(out.n(), 3);
        assert_eq!(out.points(), array![[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]].view());
    }

    #[test]
    fn replicate_with_unit_weights_is_identity() {
        let data = DataSet::from_rows(&[vec![0.5], vec![-1.0], vec![3.0]], None, "d").unwrap();
        let out = replicate_by_weights(&data, &WeightVector::uniform(3)).unwrap();
        assert_eq!(out.points(), data.points());
    }

    #[test]
    fn replicate_sums_weights() {
        let data =
            DataSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], None, "abc").unwrap();
        let w = WeightVector::new(vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(replicate_by_weights(&data, &w).unwrap().n(), 6);
    }

    #[test]
    fn replicate_rejects_fractional_or_zero_weights() {
        let data = DataSet::from_rows(&[vec![0.0], vec![1.0]], None, "d").unwrap();
        for bad in [vec![0.0, 1.0], vec![1.5, 1.0]] {
            let w = WeightVector::new(bad).unwrap();
            assert!(replicate_by_weights(&data, &w).is_err());
        }
    }

    #[test]
    fn partition_rejects_out_of_range_labels() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
        assert!(Partition::new(vec![0, 1], 2).is_ok());
    }

    #[test]
    fn minority_cluster_breaks_ties_low() {
        let p = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(p.minority_cluster(), 0);
    }
}
