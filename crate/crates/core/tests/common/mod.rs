//! Independent reference implementations used only by the integration tests.
//! None of them calls into the algorithms they check.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
}

/// Neighbours of every point by full sort on `(distance, index)`.
pub fn brute_knn(points: &[[f64; 3]], k: usize) -> Vec<Vec<u32>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = (0..3).map(|a| (points[i][a] - points[j][a]).powi(2)).sum();
                    (d, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            others.iter().take(k).map(|&(_, j)| j as u32).collect()
        })
        .collect()
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations, sorted descending.
pub fn jacobi_eigenvalues_3x3(m: [[f64; 3]; 3]) -> [f64; 3] {
    let mut a = m;
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a;
            for k in 0..3 {
                b[k][p] = c * a[k][p] - s * a[k][q];
                b[k][q] = s * a[k][p] + c * a[k][q];
            }
            let mut r = b;
            for k in 0..3 {
                r[p][k] = c * b[p][k] - s * b[q][k];
                r[q][k] = s * b[p][k] + c * b[q][k];
            }
            a = r;
        }
    }
    let mut e = [a[0][0], a[1][1], a[2][2]];
    e.sort_by(|x, y| y.partial_cmp(x).unwrap());
    e
}

/// Singular values of a row-major `rows x cols` matrix by one-sided Jacobi.
pub fn jacobi_singular_values(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut cols_v: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| data[r * cols + c]).collect()).collect();
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = cols_v[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols_v[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols_v[p].iter().zip(&cols_v[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (x, y) = (cols_v[p][r], cols_v[q][r]);
                    cols_v[p][r] = c * x - s * y;
                    cols_v[q][r] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols_v.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// `cut/vol(A) + cut/vol(B)` for the side mask `in_a` of a dense weight matrix.
pub fn ncut_value(w: &[Vec<f64>], in_a: &[bool]) -> f64 {
    let n = w.len();
    let (mut cut, mut va, mut vb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if in_a[i] {
                va += w[i][j];
            } else {
                vb += w[i][j];
            }
            if in_a[i] && !in_a[j] {
                cut += w[i][j];
            }
        }
    }
    cut / va + cut / vb
}

/// Minimum Ncut over every bipartition into two non-empty sides.
pub fn exhaustive_min_ncut(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mut best = f64::INFINITY;
    // Node n-1 is fixed on side B, so each bipartition is visited once.
    for mask in 1u32..(1 << (n - 1)) {
        let in_a: Vec<bool> = (0..n).map(|i| i < n - 1 && mask & (1 << i) != 0).collect();
        best = best.min(ncut_value(w, &in_a));
    }
    best
}

/// Per-class IoU from an explicit confusion matrix; `None` where the class
/// appears in neither input.
pub fn confusion_iou(pred: &[u32], gt: &[u32], c: usize) -> (f64, Vec<Option<f64>>) {
    let mut m = vec![vec![0u64; c]; c];
    for (&p, &g) in pred.iter().zip(gt) {
        m[g as usize][p as usize] += 1;
    }
    let per: Vec<Option<f64>> = (0..c)
        .map(|k| {
            let row: u64 = m[k].iter().sum();
            let col: u64 = (0..c).map(|r| m[r][k]).sum();
            let denom = row + col - m[k][k];
            (denom > 0).then(|| m[k][k] as f64 / denom as f64)
        })
        .collect();
    let present: Vec<f64> = per.iter().flatten().copied().collect();
    (present.iter().sum::<f64>() / present.len() as f64, per)
}

/// Indices of the `k` largest values, ties to the smaller key, by full sort.
pub fn top_k_by_sort(values: &[f64], keys: &[u64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(keys[a].cmp(&keys[b])));
    idx.truncate(k);
    idx
}

/// Minimum Euclidean distance by exhaustive scan.
pub fn min_distance(candidate: &[f64], set: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for s in set {
        let d = candidate.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d < best {
            best = d;
        }
    }
    best
}

/// Row-major random posterior matrix with rows on the simplex.
pub fn random_posteriors(rng: &mut ChaCha8Rng, rows: usize, c: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * c);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.01..1.0f64)).collect();
        let s: f64 = raw.iter().sum();
        out.extend(raw.iter().map(|v| v / s));
    }
    out
}

/// Gaussian affinities between random planar points: two loose blobs with
/// random spread, fully connected.
pub fn random_dense_graph(r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = r.random_range(10..=12);
    let sep = r.random_range(0.5..2.5);
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let cx = if i % 2 == 0 { 0.0 } else { sep };
            [cx + r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]
        })
        .collect();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d2 = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
                w[i][j] = (-d2).exp();
            }
        }
    }
    w
}

pub mod acquisition;
