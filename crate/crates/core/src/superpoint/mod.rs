//! Super-point generation and the simulated majority-label annotator.

mod affinity;
mod fiedler;
mod labeling;
mod ncut;
mod partition;

pub use affinity::{build_affinity, AffinityGraph, AffinityParams};
pub use labeling::{assign_majority_label, noise_rate, OracleLabel};
pub use ncut::{normalized_cut, normalized_cut_levels, normalized_cut_with, split_once, NcutConfig};
pub use partition::{read_partition, write_partition, SuperPointPartition};

use crate::error::Result;
use crate::geomfeat::{compute_features, knn, GeometricFeatureSet, NeighborGraph};
use crate::pcio::PointCloud;

/// Super-points per shape unless configured otherwise.
pub const DEFAULT_SHAPE_CLUSTERS: usize = 500;
/// Super-points per scene block unless configured otherwise.
pub const DEFAULT_BLOCK_CLUSTERS: usize = 1000;

/// Clusters one cloud at several granularities from a single recursive
/// bisection run. `ks` need not be sorted; output follows its order.
pub fn superpoint_levels(
    cloud: &PointCloud,
    graph: &NeighborGraph,
    feats: &GeometricFeatureSet,
    params: &AffinityParams,
    ks: &[usize],
    seed: u64,
) -> Result<Vec<SuperPointPartition>> {
    let affinity = build_affinity(cloud, feats, graph, params)?;
    normalized_cut_levels(&affinity, ks, seed, &NcutConfig::default())
}

/// kNN graph, descriptors and a `k_clusters`-way partition for one cloud.
pub fn superpoints(
    cloud: &PointCloud,
    k: usize,
    params: &AffinityParams,
    k_clusters: usize,
    seed: u64,
) -> Result<SuperPointPartition> {
    let graph = knn(cloud, k.max(params.k_graph))?;
    let feats = compute_features(cloud, &graph)?;
    let mut levels = superpoint_levels(cloud, &graph, &feats, params, &[k_clusters], seed)?;
    Ok(levels.pop().unwrap())
}
