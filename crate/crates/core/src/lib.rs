//! Kernel clustering toolkit.
//!
//! Pairwise kernel clustering criteria (kernel K-means / average
//! association, normalized cut, dominant sets, Gini) share a sensitivity
//! to non-uniform data density: with small fixed bandwidths they isolate
//! either the density mode or the sparsest points. This crate provides
//! the criteria and optimizers together with the density machinery that
//! diagnoses and removes those biases:
//!
//! - [`dataset`]: point sets, partitions, weights, synthetic generators;
//! - [`density`]: Parzen and KNN estimators, Scott's rule, the density
//!   law linking adaptive bandwidths to density transforms, and
//!   density-equalizing weights;
//! - [`kernels`]: fixed and locally adaptive affinity matrices, node
//!   degrees, degree normalization, PSD diagnostics;
//! - [`clustering`]: energies (average association, weighted AA,
//!   normalized cut, K-means, dominant set, Gini), Lloyd-style
//!   optimizers, and exhaustive oracles;
//! - [`embedding`]: the additive-constant Euclidean embedding behind
//!   adaptive kernels, classical MDS, and density-inversion diagnostics;
//! - [`analysis`]: NMI, rank correlation, and bias reports.

pub mod analysis;
pub mod clustering;
pub mod dataset;
pub mod density;
pub mod embedding;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod matrix_io;

pub use analysis::{nmi, spearman, BiasReport, SparseIsolationReport};
pub use clustering::{Criterion, EnergyReport};
pub use dataset::{DataSet, DensityProfile, Partition, WeightVector};
pub use density::{BandwidthField, DensityField, DensityTransform};
pub use embedding::{DistanceKind, DistanceMatrix, EmbeddingResult};
pub use error::{Error, Result};
pub use kernels::{KernelMatrix, KernelSpec};
