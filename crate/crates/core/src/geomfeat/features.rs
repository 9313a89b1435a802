use rayon::prelude::*;

use super::eigen3::symmetric_eigenvalues_3x3;
use super::knn::NeighborGraph;
use crate::error::{Error, Result};
use crate::pcio::PointCloud;

/// Below this leading eigenvalue a neighbourhood is treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Per-point eigenvalues `(l1 >= l2 >= l3 >= 0)` and descriptors `(f1, f2, f3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricFeatureSet {
    pub eigenvalues: Vec<[f64; 3]>,
    pub features: Vec<[f64; 3]>,
}

impl GeometricFeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Eigenvalues of `(1/n) M^T M` where the rows of `M` are the offsets from
/// point `index` to its graph neighbours.
pub fn covariance_eigenvalues(cloud: &PointCloud, graph: &NeighborGraph, index: usize) -> [f64; 3] {
    let pts = cloud.points();
    let p = pts[index];
    let nb = graph.neighbors(index);
    let mut c = [0.0; 6];
    for &j in nb {
        let q = pts[j as usize];
        let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
        c[0] += d[0] * d[0];
        c[1] += d[0] * d[1];
        c[2] += d[0] * d[2];
        c[3] += d[1] * d[1];
        c[4] += d[1] * d[2];
        c[5] += d[2] * d[2];
    }
    let n = nb.len().max(1) as f64;
    for v in &mut c {
        *v /= n;
    }
    let mut eig = symmetric_eigenvalues_3x3(c);
    for v in &mut eig {
        *v = v.max(0.0);
    }
    eig
}

/// Linearity, planarity and scatterness from sorted eigenvalues.
///
/// A leading eigenvalue below [`DEGENERATE_EPS`] maps to pure scatter `(0, 0, 1)`.
pub fn geometric_features(eig: [f64; 3]) -> Result<[f64; 3]> {
    let [l1, l2, l3] = eig;
    if !(l1 >= l2 && l2 >= l3 && l3 >= 0.0) {
        return Err(Error::UnsortedEigenvalues(eig));
    }
    if l1 < DEGENERATE_EPS {
        return Ok([0.0, 0.0, 1.0]);
    }
    Ok([(l1 - l2) / l1, (l2 - l3) / l1, l3 / l1])
}

/// Euclidean distance between two descriptor vectors.
pub fn geometric_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Eigenvalues and descriptors for every point of the cloud.
pub fn compute_features(cloud: &PointCloud, graph: &NeighborGraph) -> Result<GeometricFeatureSet> {
    if graph.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "neighbor graph",
            got: graph.len(),
            expected: cloud.len(),
        });
    }
    let eigenvalues: Vec<[f64; 3]> = (0..cloud.len())
        .into_par_iter()
        .map(|i| covariance_eigenvalues(cloud, graph, i))
        .collect();
    let features = eigenvalues
        .iter()
        .map(|&e| geometric_features(e))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometricFeatureSet { eigenvalues, features })
}
