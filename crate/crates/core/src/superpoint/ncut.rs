//! Recursive two-way normalized cut.
//!
//! Connected components seed the cluster list. While fewer than `K` clusters
//! exist, the cluster with the most points (ties: smallest id) is bisected:
//! a disconnected cluster splits off its largest component (a zero cut),
//! otherwise the generalized Fiedler vector `D^{-1/2} z` is swept and the
//! threshold with the smallest Ncut value wins.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::affinity::AffinityGraph;
use super::fiedler::{fiedler_vector, FiedlerParams, LocalGraph};
use super::partition::SuperPointPartition;
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct NcutConfig {
    /// Subgraphs up to this size use a dense symmetric eigensolver.
    pub dense_max: usize,
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_matvecs: usize,
    /// Up to this size every gap of the sorted vector is a candidate threshold.
    pub all_gaps_max: usize,
    /// Candidate thresholds above `all_gaps_max`.
    pub quantiles: usize,
}

impl Default for NcutConfig {
    fn default() -> Self {
        Self {
            dense_max: 64,
            krylov_dim: 64,
            tol: 1e-8,
            max_matvecs: 5000,
            all_gaps_max: 2048,
            quantiles: 64,
        }
    }
}

impl NcutConfig {
    fn fiedler(&self) -> FiedlerParams {
        FiedlerParams {
            dense_max: self.dense_max.max(2),
            krylov_dim: self.krylov_dim,
            tol: self.tol,
            max_matvecs: self.max_matvecs,
        }
    }
}

/// `K`-way partition with the default solver settings.
pub fn normalized_cut(graph: &AffinityGraph, k: usize, seed: u64) -> Result<SuperPointPartition> {
    normalized_cut_with(graph, k, seed, &NcutConfig::default())
}

pub fn normalized_cut_with(
    graph: &AffinityGraph,
    k: usize,
    seed: u64,
    config: &NcutConfig,
) -> Result<SuperPointPartition> {
    Ok(normalized_cut_levels(graph, &[k], seed, config)?.pop().unwrap())
}

/// Partitions at several cluster counts from one bisection sequence. Each
/// coarser partition is refined by every finer one.
pub fn normalized_cut_levels(
    graph: &AffinityGraph,
    ks: &[usize],
    seed: u64,
    config: &NcutConfig,
) -> Result<Vec<SuperPointPartition>> {
    let n = graph.n();
    let kmax = ks.iter().copied().max().unwrap_or(0);
    if ks.iter().any(|&k| k < 1) {
        return Err(Error::InvalidArgument("cluster count must be >= 1".into()));
    }
    if kmax > n {
        return Err(Error::TooManyClusters { requested: kmax, available: n });
    }
    let mut scratch = vec![u32::MAX; n];
    let everything: Vec<u32> = (0..n as u32).collect();
    let whole = LocalGraph::induced(graph, &everything, &mut scratch);
    let mut clusters: Vec<Vec<u32>> = whole.components();
    drop(whole);
    let kmin = ks.iter().copied().min().unwrap_or(1);
    if clusters.len() > kmin {
        return Err(Error::TooManyComponents { components: clusters.len(), requested: kmin });
    }

    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by_key(|&i| ks[i]);
    let mut out: Vec<Option<SuperPointPartition>> = vec![None; ks.len()];
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        clusters.iter().enumerate().map(|(id, c)| (c.len(), Reverse(id))).collect();
    let fiedler = config.fiedler();
    let mut split_no = 0u64;
    for idx in order {
        let target = ks[idx];
        while clusters.len() < target {
            let (_, Reverse(id)) = heap.pop().expect("a splittable cluster exists while K <= n");
            let members = std::mem::take(&mut clusters[id]);
            let mut rng = stream(seed, &[split_no]);
            split_no += 1;
            let (a, b) = bisect(graph, &members, &mut scratch, &fiedler, config, &mut rng);
            heap.push((a.len(), Reverse(id)));
            heap.push((b.len(), Reverse(clusters.len())));
            clusters[id] = a;
            clusters.push(b);
        }
        out[idx] = Some(SuperPointPartition::from_members(n, clusters.clone()));
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

/// First bisection of the whole graph: the two sides (global ids) and the
/// Ncut value of the split.
pub fn split_once(graph: &AffinityGraph, seed: u64, config: &NcutConfig) -> Result<(Vec<u32>, Vec<u32>, f64)> {
    let n = graph.n();
    if n < 2 {
        return Err(Error::TooManyClusters { requested: 2, available: n });
    }
    let mut scratch = vec![u32::MAX; n];
    let members: Vec<u32> = (0..n as u32).collect();
    let (a, b) = bisect(graph, &members, &mut scratch, &config.fiedler(), config, &mut stream(seed, &[0]));
    let value = ncut_of(graph, &a);
    Ok((a, b, value))
}

fn ncut_of(graph: &AffinityGraph, side_a: &[u32]) -> f64 {
    let mut in_a = vec![false; graph.n()];
    for &i in side_a {
        in_a[i as usize] = true;
    }
    let (mut cut, mut vol_a, mut vol_b) = (0.0, 0.0, 0.0);
    for i in 0..graph.n() {
        let (t, w) = graph.row(i);
        for (&j, &wj) in t.iter().zip(w) {
            if in_a[i] {
                vol_a += wj;
                if !in_a[j as usize] {
                    cut += wj;
                }
            } else {
                vol_b += wj;
            }
        }
    }
    if cut == 0.0 {
        0.0
    } else {
        cut / vol_a + cut / vol_b
    }
}

fn bisect(
    graph: &AffinityGraph,
    members: &[u32],
    scratch: &mut [u32],
    fiedler: &FiedlerParams,
    config: &NcutConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<u32>, Vec<u32>) {
    debug_assert!(members.len() >= 2);
    let local = LocalGraph::induced(graph, members, scratch);
    let comps = local.components();
    let to_global = |ids: &[u32]| -> Vec<u32> {
        let mut g: Vec<u32> = ids.iter().map(|&l| local.nodes[l as usize]).collect();
        g.sort_unstable();
        g
    };
    if comps.len() > 1 {
        let largest = (0..comps.len())
            .max_by_key(|&c| (comps[c].len(), Reverse(c)))
            .unwrap();
        let rest: Vec<u32> = comps
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != largest)
            .flat_map(|(_, m)| m.iter().copied())
            .collect();
        return (to_global(&comps[largest]), to_global(&rest));
    }
    let m = local.len();
    if m == 2 {
        return (vec![members[0]], vec![members[1]]);
    }
    let z = fiedler_vector(&local, fiedler, rng);
    let y: Vec<f64> = z.iter().zip(&local.degree).map(|(v, d)| v / d.sqrt()).collect();
    let mut order: Vec<u32> = (0..m as u32).collect();
    order.sort_by(|&a, &b| y[a as usize].total_cmp(&y[b as usize]).then(a.cmp(&b)));
    let cut_at = best_sweep_position(&local, &order, config);
    let (a, b) = order.split_at(cut_at);
    (to_global(a), to_global(b))
}

/// Prefix length of `order` minimising `cut/vol(A) + cut/vol(B)`.
fn best_sweep_position(local: &LocalGraph, order: &[u32], config: &NcutConfig) -> usize {
    let m = order.len();
    let candidates: Vec<usize> = if m <= config.all_gaps_max {
        (1..m).collect()
    } else {
        let q = config.quantiles.max(1);
        let mut c: Vec<usize> = (1..=q).map(|i| (i * m) / (q + 1)).filter(|&t| t >= 1 && t < m).collect();
        c.dedup();
        c
    };
    let vol_total: f64 = local.degree.iter().sum();
    let mut in_a = vec![false; m];
    let (mut cut, mut vol_a) = (0.0f64, 0.0f64);
    let mut best = (f64::INFINITY, candidates[0]);
    let mut next = 0;
    for (t, &u) in order.iter().enumerate() {
        let (targets, weights) = local.row(u as usize);
        for (&v, &w) in targets.iter().zip(weights) {
            if in_a[v as usize] {
                cut -= w;
            } else {
                cut += w;
            }
        }
        in_a[u as usize] = true;
        vol_a += local.degree[u as usize];
        let size = t + 1;
        if next < candidates.len() && candidates[next] == size {
            next += 1;
            let c = cut.max(0.0);
            let value = c / vol_a + c / (vol_total - vol_a);
            if value < best.0 {
                best = (value, size);
            }
        }
        if next == candidates.len() {
            break;
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> AffinityGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        AffinityGraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn k_one_and_k_n() {
        let g = path(9);
        let one = normalized_cut(&g, 1, 0).unwrap();
        assert_eq!(one.k(), 1);
        let all = normalized_cut(&g, 9, 0).unwrap();
        assert_eq!(all.k(), 9);
        assert!(all.clusters().all(|c| c.len() == 1));
        assert!(matches!(normalized_cut(&g, 10, 0), Err(Error::TooManyClusters { .. })));
    }

    #[test]
    fn path_splits_in_the_middle() {
        let p = normalized_cut(&path(10), 2, 0).unwrap();
        assert_eq!(p.members(0), &[0, 1, 2, 3, 4]);
        assert_eq!(p.members(1), &[5, 6, 7, 8, 9]);
    }

    #[test]
    fn components_become_clusters() {
        let g = AffinityGraph::from_edges(5, &[(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let p = normalized_cut(&g, 2, 0).unwrap();
        assert_eq!(p.members(0), &[0, 1]);
        assert_eq!(p.members(1), &[2, 3, 4]);
        assert!(matches!(normalized_cut(&g, 1, 0), Err(Error::TooManyComponents { .. })));
        let iso = AffinityGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(normalized_cut(&iso, 3, 0).unwrap().k(), 3);
    }

    #[test]
    fn levels_are_nested_and_match_single_runs() {
        let n = 150;
        let edges: Vec<_> = (0..n)
            .flat_map(|i| [(i, (i + 1) % n, 1.0 + (i % 7) as f64 * 0.1), (i, (i + 5) % n, 0.3)])
            .collect();
        let g = AffinityGraph::from_edges(n, &edges).unwrap();
        let cfg = NcutConfig { dense_max: 16, ..Default::default() };
        let levels = normalized_cut_levels(&g, &[40, 5, 12], 3, &cfg).unwrap();
        assert_eq!(levels[0].k(), 40);
        assert_eq!(levels[1].k(), 5);
        for (fine, coarse) in [(&levels[0], &levels[2]), (&levels[2], &levels[1])] {
            for c in fine.clusters() {
                let parent = coarse.cluster_of(c[0] as usize);
                assert!(c.iter().all(|&i| coarse.cluster_of(i as usize) == parent));
            }
        }
        assert_eq!(levels[2], normalized_cut_with(&g, 12, 3, &cfg).unwrap());
    }
}
