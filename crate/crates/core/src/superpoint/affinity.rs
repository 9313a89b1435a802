use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomfeat::{GeometricFeatureSet, NeighborGraph};
use crate::pcio::PointCloud;

fn default_k_graph() -> usize {
    10
}

fn default_gamma() -> f64 {
    0.1
}

/// Affinity construction parameters. Unset bandwidths use the median
/// heuristic: `sigma^2 = median(squared distance over retained edges) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityParams {
    #[serde(default = "default_k_graph")]
    pub k_graph: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub sigma_s: Option<f64>,
    #[serde(default)]
    pub sigma_g: Option<f64>,
    /// Weight of an optional RGB term; 0 disables it.
    #[serde(default)]
    pub color_weight: f64,
    #[serde(default)]
    pub sigma_c: Option<f64>,
}

impl Default for AffinityParams {
    fn default() -> Self {
        Self {
            k_graph: default_k_graph(),
            gamma: default_gamma(),
            sigma_s: None,
            sigma_g: None,
            color_weight: 0.0,
            sigma_c: None,
        }
    }
}

impl AffinityParams {
    pub fn with_gamma(gamma: f64) -> Self {
        Self { gamma, ..Self::default() }
    }
}

/// Sparse symmetric affinity matrix in CSR form (both directions stored, no
/// self-edges).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    /// Resolved spatial bandwidth.
    pub sigma_s: f64,
    /// Resolved descriptor bandwidth.
    pub sigma_g: f64,
    pub gamma: f64,
}

impl AffinityGraph {
    /// Builds a graph from undirected edges `(i, j, w)`, each pair listed once.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidArgument(format!("bad edge ({i}, {j}) for {n} nodes")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("edge ({i}, {j}) has weight {w}")));
            }
            directed.push((i as u32, j as u32, w));
            directed.push((j as u32, i as u32, w));
        }
        directed.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if directed.windows(2).any(|p| p[0].0 == p[1].0 && p[0].1 == p[1].1) {
            return Err(Error::InvalidArgument("duplicate edge".into()));
        }
        Ok(Self::from_sorted_directed(n, &directed, f64::NAN, f64::NAN, f64::NAN))
    }

    fn from_sorted_directed(n: usize, directed: &[(u32, u32, f64)], sigma_s: f64, sigma_g: f64, gamma: f64) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(i, _, _) in directed {
            offsets[i as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            n,
            offsets,
            targets: directed.iter().map(|e| e.1).collect(),
            weights: directed.iter().map(|e| e.2).collect(),
            sigma_s,
            sigma_g,
            gamma,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbour ids and weights of node `i`, ids ascending.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// Weight of edge `(i, j)`, 0 if absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (t, w) = self.row(i);
        t.binary_search(&(j as u32)).map_or(0.0, |k| w[k])
    }

    /// Each undirected edge once, as `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (t, w) = self.row(i);
            t.iter()
                .zip(w)
                .filter(move |(&j, _)| (j as usize) > i)
                .map(move |(&j, &w)| (i, j as usize, w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// `2 sigma^2` from an explicit bandwidth or the median heuristic.
fn two_sigma_sq(explicit: Option<f64>, sq: &mut [f64]) -> f64 {
    if let Some(s) = explicit {
        return 2.0 * s * s;
    }
    let med = median(sq);
    if med > 0.0 {
        return med;
    }
    // All retained distances zero: any positive bandwidth gives the same weights.
    sq.iter().copied().find(|&v| v > 0.0).unwrap_or(1.0)
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Affinities on the symmetric closure of the `k_graph`-NN graph:
/// `a_ij = exp(-|p_i - p_j|^2 / 2 sigma_s^2) + gamma * exp(-|g_i - g_j|^2 / 2 sigma_g^2)`.
pub fn build_affinity(
    cloud: &PointCloud,
    feats: &GeometricFeatureSet,
    graph: &NeighborGraph,
    params: &AffinityParams,
) -> Result<AffinityGraph> {
    if !(params.gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {}", params.gamma)));
    }
    if !(params.color_weight >= 0.0) {
        return Err(Error::InvalidArgument("color_weight must be >= 0".into()));
    }
    let n = cloud.len();
    if feats.len() != n || graph.len() != n {
        return Err(Error::LengthMismatch {
            what: "features / neighbor graph",
            got: feats.len().min(graph.len()),
            expected: n,
        });
    }
    if params.k_graph < 1 {
        return Err(Error::InvalidArgument("k_graph must be >= 1".into()));
    }
    let take = params.k_graph.min(graph.width());
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(n * take);
    for i in 0..n {
        for &j in &graph.neighbors(i)[..take] {
            let (a, b) = if (i as u32) < j { (i as u32, j) } else { (j, i as u32) };
            pairs.push((a, b));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let pts = cloud.points();
    let g = &feats.features;
    let mut ds: Vec<f64> = pairs.iter().map(|&(i, j)| sq_dist(&pts[i as usize], &pts[j as usize])).collect();
    let mut dg: Vec<f64> = pairs.iter().map(|&(i, j)| sq_dist(&g[i as usize], &g[j as usize])).collect();
    let colors = cloud.colors().filter(|_| params.color_weight > 0.0);
    let mut dc: Vec<f64> = match colors {
        Some(c) => pairs.iter().map(|&(i, j)| sq_dist(&c[i as usize], &c[j as usize])).collect(),
        None => Vec::new(),
    };
    let (ds_raw, dg_raw, dc_raw) = (ds.clone(), dg.clone(), dc.clone());
    let s2 = two_sigma_sq(params.sigma_s, &mut ds);
    let g2 = two_sigma_sq(params.sigma_g, &mut dg);
    let c2 = if colors.is_some() { two_sigma_sq(params.sigma_c, &mut dc) } else { 1.0 };

    let mut directed = Vec::with_capacity(pairs.len() * 2);
    for (e, &(i, j)) in pairs.iter().enumerate() {
        let mut w = (-ds_raw[e] / s2).exp() + params.gamma * (-dg_raw[e] / g2).exp();
        if colors.is_some() {
            w += params.color_weight * (-dc_raw[e] / c2).exp();
        }
        let w = w.max(f64::MIN_POSITIVE);
        directed.push((i, j, w));
        directed.push((j, i, w));
    }
    directed.sort_unstable_by_key(|&(i, j, _)| (i, j));
    Ok(AffinityGraph::from_sorted_directed(
        n,
        &directed,
        (s2 / 2.0).sqrt(),
        (g2 / 2.0).sqrt(),
        params.gamma,
    ))
}
