//! Fiedler vectors of the symmetric normalized Laplacian
//! `L = I - D^{-1/2} W D^{-1/2}` on induced subgraphs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::affinity::AffinityGraph;

/// Induced subgraph on a member set, with local node numbering.
pub(crate) struct LocalGraph {
    pub nodes: Vec<u32>,
    pub offsets: Vec<usize>,
    pub targets: Vec<u32>,
    pub weights: Vec<f64>,
    pub degree: Vec<f64>,
}

impl LocalGraph {
    /// `scratch` must hold `u32::MAX` for every node on entry; it is restored on exit.
    pub fn induced(graph: &AffinityGraph, members: &[u32], scratch: &mut [u32]) -> Self {
        for (l, &g) in members.iter().enumerate() {
            scratch[g as usize] = l as u32;
        }
        let mut offsets = Vec::with_capacity(members.len() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut degree = Vec::with_capacity(members.len());
        for &g in members {
            let (t, w) = graph.row(g as usize);
            let mut d = 0.0;
            for (&j, &wj) in t.iter().zip(w) {
                let l = scratch[j as usize];
                if l != u32::MAX {
                    targets.push(l);
                    weights.push(wj);
                    d += wj;
                }
            }
            degree.push(d);
            offsets.push(targets.len());
        }
        for &g in members {
            scratch[g as usize] = u32::MAX;
        }
        Self { nodes: members.to_vec(), offsets, targets, weights, degree }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    /// Connected components as lists of local ids, ordered by smallest id.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let n = self.len();
        let mut comp = vec![u32::MAX; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != u32::MAX {
                continue;
            }
            let id = out.len() as u32;
            let mut members = vec![s as u32];
            comp[s] = id;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.row(u).0 {
                    if comp[v as usize] == u32::MAX {
                        comp[v as usize] = id;
                        members.push(v);
                        stack.push(v as usize);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// `y = D^{-1/2} W D^{-1/2} x`.
    fn normalized_matvec(&self, inv_sqrt_d: &[f64], x: &[f64], y: &mut [f64]) {
        for i in 0..self.len() {
            let (t, w) = self.row(i);
            let mut acc = 0.0;
            for (&j, &wj) in t.iter().zip(w) {
                acc += wj * inv_sqrt_d[j as usize] * x[j as usize];
            }
            y[i] = acc * inv_sqrt_d[i];
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FiedlerParams {
    pub dense_max: usize,
    pub krylov_dim: usize,
    pub tol: f64,
    pub max_matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Eigenvector of the second-smallest eigenvalue of `L` for a connected
/// subgraph with all degrees positive.
pub(crate) fn fiedler_vector(g: &LocalGraph, params: &FiedlerParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = g.len();
    let inv_sqrt_d: Vec<f64> = g.degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    if n <= params.dense_max {
        return dense_fiedler(g, &inv_sqrt_d);
    }
    lanczos_fiedler(g, &inv_sqrt_d, params, rng)
}

fn dense_fiedler(g: &LocalGraph, inv_sqrt_d: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut lap = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let (t, w) = g.row(i);
        for (&j, &wj) in t.iter().zip(w) {
            lap[(i, j as usize)] -= wj * inv_sqrt_d[i] * inv_sqrt_d[j as usize];
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    eig.eigenvectors.column(order[1]).iter().copied().collect()
}

/// Largest eigenpair of `N = D^{-1/2} W D^{-1/2}` orthogonal to its known top
/// eigenvector `D^{1/2} 1`, by explicitly restarted Lanczos with full
/// reorthogonalization. That eigenvector of `N` is the Fiedler vector of `L`.
fn lanczos_fiedler(g: &LocalGraph, inv_sqrt_d: &[f64], params: &FiedlerParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = g.len();
    let mut top: Vec<f64> = g.degree.iter().map(|d| d.sqrt()).collect();
    normalize(&mut top);

    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let m = params.krylov_dim.min(n - 1).max(2);
    let mut matvecs = 0usize;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    loop {
        let c = dot(&start, &top);
        axpy(-c, &top, &mut start);
        if normalize(&mut start) == 0.0 {
            start = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            continue;
        }
        basis.clear();
        basis.push(start.clone());
        let mut alphas = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        let mut breakdown = false;
        for j in 0..m {
            g.normalized_matvec(inv_sqrt_d, &basis[j], &mut w);
            matvecs += 1;
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            let alpha = dot(&w, &basis[j]);
            axpy(-alpha, &basis[j], &mut w);
            for _ in 0..2 {
                let c = dot(&w, &top);
                axpy(-c, &top, &mut w);
                for q in &basis {
                    let c = dot(&w, q);
                    axpy(-c, q, &mut w);
                }
            }
            alphas.push(alpha);
            let beta = dot(&w, &w).sqrt();
            betas.push(beta);
            if beta < 1e-12 {
                breakdown = true;
                break;
            }
            if j + 1 < m {
                basis.push(w.iter().map(|v| v / beta).collect());
            }
        }
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let best = (0..k)
            .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap();
        let s = eig.eigenvectors.column(best);
        let mut ritz = vec![0.0; n];
        for (i, q) in basis.iter().enumerate().take(k) {
            axpy(s[i], q, &mut ritz);
        }
        normalize(&mut ritz);
        let residual = (betas[k - 1] * s[k - 1]).abs();
        if breakdown || residual <= params.tol || matvecs >= params.max_matvecs {
            return ritz;
        }
        start = ritz;
    }
}
