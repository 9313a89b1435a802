mod common;

use common::{jacobi_singular_values, random_posteriors, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use spal_core::geomfeat::{compute_features, knn};
use spal_core::model::{
    augment_points, deviation_matrix, nuclear_loss, nuclear_loss_gradient, read_checkpoint, total_loss, train,
    write_checkpoint, ModelOutput, ModelSpec, SampleContext, TrainConfig, TrainItem,
};
use spal_core::superpoint::SuperPointPartition;
use spal_core::PointCloud;

fn matrix(data: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

#[test]
fn nuclear_value_matches_jacobi_svd() {
    let mut r = rng(41);
    for _ in 0..300 {
        let rows = r.random_range(1..30);
        let cols = r.random_range(2..8);
        let data = random_posteriors(&mut r, rows, cols);
        let want: f64 = jacobi_singular_values(&data, rows, cols).iter().sum::<f64>() / rows as f64;
        let got = nuclear_loss(&matrix(&data, rows, cols));
        assert!((got - want).abs() < 1e-8, "{rows}x{cols}: {got} vs {want}");
    }
}

#[test]
fn nuclear_gradient_matches_central_differences() {
    let mut r = rng(42);
    let mut checked = 0;
    while checked < 100 {
        let rows = r.random_range(4..20);
        let cols = r.random_range(2..6);
        let data = random_posteriors(&mut r, rows, cols);
        let sv = jacobi_singular_values(&data, rows, cols);
        if *sv.last().unwrap() <= 1e-3 {
            continue;
        }
        checked += 1;
        let f = matrix(&data, rows, cols);
        let g = nuclear_loss_gradient(&f);
        let h = 1e-5;
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = f.clone();
                plus[(i, j)] += h;
                let mut minus = f.clone();
                minus[(i, j)] -= h;
                let fd = (nuclear_loss(&plus) - nuclear_loss(&minus)) / (2.0 * h);
                assert!((fd - g[(i, j)]).abs() < 1e-4, "entry ({i},{j}): {fd} vs {}", g[(i, j)]);
            }
        }
    }
}

#[test]
fn nuclear_bounds_by_frobenius_norm() {
    let mut r = rng(43);
    for _ in 0..1000 {
        let rows = r.random_range(1..25);
        let cols = r.random_range(2..7);
        let data = random_posteriors(&mut r, rows, cols);
        let fro = data.iter().map(|v| v * v).sum::<f64>().sqrt();
        let l = nuclear_loss(&matrix(&data, rows, cols));
        let n = rows as f64;
        assert!(fro / n <= l + 1e-12);
        assert!(l <= (cols as f64).sqrt() * fro / n + 1e-12);
    }
}

#[test]
fn identical_rows_have_rank_one_loss() {
    let row = [0.7, 0.2, 0.1];
    for n in 1..10 {
        let data: Vec<f64> = (0..n).flat_map(|_| row).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let l = nuclear_loss(&matrix(&data, n, 3));
        assert!((l - norm / (n as f64).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn total_loss_combines_terms() {
    let out = ModelOutput {
        posteriors: vec![0.5, 0.5, 0.9, 0.1, 0.2, 0.8, 0.2, 0.8],
        features: vec![0.0; 4],
        num_classes: 2,
        feature_dim: 1,
    };
    let p = SuperPointPartition::from_assignment(vec![0, 0, 1, 1]).unwrap();
    let ce_only = total_loss(&out, &[(0, 0), (1, 0)], &p, 0.0).unwrap();
    assert!((ce_only - (2f64.ln() + -(0.9f64.ln())) / 2.0).abs() < 1e-12);
    let with_nc = total_loss(&out, &[(0, 0), (1, 0)], &p, 1.0).unwrap();
    let nc = (jacobi_singular_values(&out.posteriors[..4], 2, 2).iter().sum::<f64>() / 2.0
        + jacobi_singular_values(&out.posteriors[4..], 2, 2).iter().sum::<f64>() / 2.0)
        / 2.0;
    assert!((with_nc - ce_only - nc).abs() < 1e-10);
}

fn toy_cloud(n: usize) -> PointCloud {
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            if i % 2 == 0 { [t - 0.5, 0.0, 0.3 * (7.0 * t).sin()] } else { [t - 0.5, 0.4, 0.0] }
        })
        .collect();
    let labels = (0..n).map(|i| (i % 2) as u32).collect();
    PointCloud::new("toy", pts, None, labels, None).unwrap()
}

#[test]
fn training_fits_a_separable_toy_and_is_reproducible() {
    let c = toy_cloud(80);
    let g = knn(&c, 8).unwrap();
    let f = compute_features(&c, &g).unwrap();
    let ctx = SampleContext { points: c.points(), colors: None, geometric: &f.features, neighbors: &g };
    let targets: Vec<(u32, u32)> = (0..80).step_by(3).map(|i| (i as u32, c.labels()[i])).collect();
    let item = TrainItem { ctx, targets, partition: None, labeled_clusters: vec![] };
    let cfg = TrainConfig { epochs: 150, batch_size: 1, augment: false, seed: 5, ..Default::default() };
    let spec = ModelSpec::mlp(&[16]);
    let mut a = spec.build(2, 1).unwrap();
    let stats = train(a.as_mut(), std::slice::from_ref(&item), &cfg).unwrap();
    assert!(stats.final_loss < 0.2, "loss {}", stats.final_loss);
    let acc = a.forward(&ctx).unwrap().predictions().iter().zip(c.labels()).filter(|(p, l)| p == l).count();
    assert!(acc >= 72, "accuracy {acc}/80");
    let mut b = spec.build(2, 1).unwrap();
    train(b.as_mut(), std::slice::from_ref(&item), &cfg).unwrap();
    assert_eq!(a.params(), b.params());

    let restored = read_checkpoint(&write_checkpoint(a.as_ref())).unwrap();
    assert_eq!(restored.params(), a.params());
    assert_eq!(restored.forward(&ctx).unwrap(), a.forward(&ctx).unwrap());
}

#[test]
fn consistency_term_reduces_within_superpoint_spread() {
    let c = toy_cloud(60);
    let g = knn(&c, 6).unwrap();
    let f = compute_features(&c, &g).unwrap();
    let ctx = SampleContext { points: c.points(), colors: None, geometric: &f.features, neighbors: &g };
    let part = SuperPointPartition::from_assignment((0..60).map(|i| (i % 2) as u32 * 6 + (i / 10) as u32).collect()).unwrap();
    let spread = |lambda: f64| {
        let item = TrainItem { ctx, targets: vec![(0, 0), (1, 1)], partition: Some(&part), labeled_clusters: vec![] };
        let cfg = TrainConfig { epochs: 60, batch_size: 1, augment: false, lambda_nc: lambda, ..Default::default() };
        let mut m = ModelSpec::mlp(&[16]).build(2, 9).unwrap();
        train(m.as_mut(), &[item], &cfg).unwrap();
        spal_core::harness::superpoint_posterior_variance(&m.forward(&ctx).unwrap(), &part).unwrap()
    };
    assert!(spread(1.0) < spread(0.0));
}

#[test]
fn model_spec_text_forms() {
    let s: ModelSpec = "mlp:32,16+color".parse().unwrap();
    assert_eq!(s, ModelSpec::Mlp { hidden: vec![32, 16], use_color: true, neighbor_pooling: true });
    assert_eq!(s.to_string().parse::<ModelSpec>().unwrap(), s);
    let j: ModelSpec = r#"{"kind":"mlp","hidden":[8]}"#.parse().unwrap();
    assert_eq!(j, ModelSpec::mlp(&[8]));
    assert!("cnn:3".parse::<ModelSpec>().is_err());
    assert!("mlp:0".parse::<ModelSpec>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nuclear_loss_ignores_row_order(rows in 1usize..12, cols in 2usize..5, seed in 0u64..10_000) {
        let mut r = rng(seed);
        let data = random_posteriors(&mut r, rows, cols);
        let mut shuffled: Vec<f64> = Vec::new();
        for i in (0..rows).rev() {
            shuffled.extend_from_slice(&data[i * cols..(i + 1) * cols]);
        }
        let a = nuclear_loss(&matrix(&data, rows, cols));
        let b = nuclear_loss(&matrix(&shuffled, rows, cols));
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn deviation_matrices_keep_orientation(seed in 0u64..10_000, g_std in 0.0f64..0.5) {
        let mut r = rng(seed);
        let t = deviation_matrix(g_std, &mut r).unwrap();
        let det = t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1])
            - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
            + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0]);
        prop_assert!(det > 0.1);
    }

    #[test]
    fn zero_deviation_only_mirrors(seed in 0u64..1000, axis in 0usize..3) {
        let pts = vec![[0.1, -0.2, 0.3], [1.0, 2.0, -3.0]];
        let out = augment_points(&pts, 0.0, Some(axis), &mut rng(seed)).unwrap();
        for (p, q) in pts.iter().zip(&out) {
            for a in 0..3 {
                if a == axis { prop_assert!(q[a] == p[a] || q[a] == -p[a]); } else { prop_assert_eq!(q[a], p[a]); }
            }
        }
    }
}
