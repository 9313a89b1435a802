//! Fixtures shared by the benchmarks.

use rand::Rng;
use spal_core::geomfeat::{compute_features, knn, GeometricFeatureSet, NeighborGraph};
use spal_core::model::ModelOutput;
use spal_core::pcio::{generate_synthetic, SynthSpec};
use spal_core::rng::stream;
use spal_core::superpoint::{build_affinity, AffinityGraph, AffinityParams};
use spal_core::PointCloud;

/// One synthetic airplane with `points` points.
pub fn airplane(points: usize) -> PointCloud {
    let ds = generate_synthetic(&SynthSpec::airplanes(1, points), 7).expect("synthetic airplane");
    ds.samples()[0].clone()
}

/// kNN graph and descriptors of `cloud` at k = 10.
pub fn neighbourhood(cloud: &PointCloud) -> (NeighborGraph, GeometricFeatureSet) {
    let g = knn(cloud, 10).expect("knn");
    let f = compute_features(cloud, &g).expect("features");
    (g, f)
}

/// Affinity graph of a synthetic airplane with default parameters.
pub fn affinity(points: usize) -> AffinityGraph {
    let c = airplane(points);
    let (g, f) = neighbourhood(&c);
    build_affinity(&c, &f, &g, &AffinityParams::default()).expect("affinity")
}

/// Row-stochastic `rows x cols` matrix in row-major order.
pub fn posteriors(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, &[]);
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| r.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        out.extend(raw.iter().map(|v| v / s));
    }
    out
}

/// A model output with random posteriors and features.
pub fn model_output(points: usize, classes: usize, dim: usize, seed: u64) -> ModelOutput {
    let mut r = stream(seed, &[1]);
    ModelOutput {
        posteriors: posteriors(points, classes, seed),
        features: (0..points * dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        num_classes: classes,
        feature_dim: dim,
    }
}
