//! Local geometry: exact kNN graphs, neighbourhood covariance eigenvalues and
//! the linearity / planarity / scatterness descriptors.

mod cache;
mod eigen3;
mod features;
mod knn;

pub use cache::{read_feature_cache, write_feature_cache};
pub use eigen3::symmetric_eigenvalues_3x3;
pub use features::{
    compute_features, covariance_eigenvalues, geometric_distance, geometric_features,
    GeometricFeatureSet, DEGENERATE_EPS,
};
pub use knn::{knn, NeighborGraph};

/// Neighbourhood size used for features and graphs unless configured otherwise.
pub const DEFAULT_K: usize = 10;
