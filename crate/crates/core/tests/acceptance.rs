//! Acceptance suite. Runs every criterion at its stated scale and tolerance
//! and prints one PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! Run with `cargo test -p spal-core --test acceptance`. Criterion numbers
//! given as arguments restrict the run, e.g. `-- 1 2 10`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::acquisition::{check_against_oracle, op, run_budget_sequence};
use common::{
    brute_knn, confusion_iou, exhaustive_min_ncut, jacobi_singular_values, ncut_value, random_cloud,
    random_dense_graph, random_posteriors, rng, top_k_by_sort,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestCaseError, TestRunner};
use rand::Rng;
use rayon::prelude::*;
use spal_core::acquisition::{select_query, AcquisitionScore, Granularity, LabelPool, UnitCatalog, UnitId};
use spal_core::geomfeat::{compute_features, knn};
use spal_core::harness::{
    load_data, mean_std, miou, pooled_standard_error, run_experiment, run_prepared, sweep, ExperimentConfig,
    PreparedData, Report, Strategy, SweepAxis,
};
use spal_core::model::{nuclear_loss, nuclear_loss_gradient, ModelSpec};
use spal_core::pcio::{generate_synthetic, SynthSpec};
use spal_core::superpoint::{noise_rate, split_once, superpoint_levels, AffinityGraph, AffinityParams, NcutConfig};
use spal_core::PointCloud;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cloud(points: Vec<[f64; 3]>) -> PointCloud {
    let n = points.len();
    PointCloud::new("c", points, None, vec![0; n], None).unwrap()
}

fn eigen_feature_identity() -> Outcome {
    let mut r = rng(1001);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 1000 {
        let n = r.random_range(20..=120);
        let k = r.random_range(3..=15);
        let mut pts = random_cloud(&mut r, n);
        // Squashed clouds give linear and planar neighbourhoods too.
        let squash = [1.0, r.random_range(0.0..1.0), r.random_range(0.0..0.05)];
        pts.iter_mut().for_each(|p| (0..3).for_each(|a| p[a] *= squash[a]));
        let c = cloud(pts);
        let f = compute_features(&c, &knn(&c, k).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for v in f.features.iter().take(1000 - checked) {
            worst = worst.max((v.iter().sum::<f64>() - 1.0).abs());
            ensure(v.iter().all(|x| (0.0..=1.0).contains(x)), || format!("feature outside [0,1]: {v:?}"))?;
            checked += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("|f1+f2+f3-1| reached {worst:e}"))?;
    Ok(format!("{checked} neighbourhoods, max |sum-1| = {worst:.1e}"))
}

fn knn_oracle() -> Outcome {
    let mut r = rng(1002);
    for case in 0..50 {
        let n = r.random_range(2..=200);
        let k = r.random_range(1..=10);
        let mut pts = random_cloud(&mut r, n);
        if case % 4 == 0 {
            pts.iter_mut().for_each(|p| p.iter_mut().for_each(|v| *v = (*v * 2.0).round()));
        }
        let g = knn(&cloud(pts.clone()), k).map_err(|e| e.to_string())?;
        let want = brute_knn(&pts, k);
        for (i, row) in want.iter().enumerate() {
            ensure(g.neighbors(i) == &row[..], || format!("cloud {case} (n={n}, k={k}) differs at point {i}"))?;
        }
    }
    Ok("50 clouds identical to brute force".into())
}

fn to_graph(w: &[Vec<f64>]) -> AffinityGraph {
    let n = w.len();
    let edges: Vec<(usize, usize, f64)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (i, j, w[i][j])).collect();
    AffinityGraph::from_edges(n, &edges).unwrap()
}

fn ncut_oracle() -> Outcome {
    let mut r = rng(1003);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let w = random_dense_graph(&mut r);
        let (a, _, value) = split_once(&to_graph(&w), case, &NcutConfig::default()).map_err(|e| e.to_string())?;
        let mut in_a = vec![false; w.len()];
        a.iter().for_each(|&i| in_a[i as usize] = true);
        let recomputed = ncut_value(&w, &in_a);
        ensure((recomputed - value).abs() < 1e-9, || format!("graph {case}: reported {value}, actual {recomputed}"))?;
        let best = exhaustive_min_ncut(&w);
        let rel = (recomputed - best) / best;
        worst = worst.max(rel);
        ensure(rel <= 0.05, || format!("graph {case}: Ncut {recomputed:.5} vs optimum {best:.5}"))?;
    }
    Ok(format!("20 graphs, worst excess over optimum {:.2}%", 100.0 * worst))
}

const NOISE_KS: [usize; 5] = [50, 100, 200, 500, 1000];

/// Noise rate at each K for one synthetic dataset and one γ.
fn noise_by_k(seed: u64, gamma: f64) -> Result<Vec<f64>, String> {
    let ds = generate_synthetic(&SynthSpec::airplanes(50, 2048), seed).map_err(|e| e.to_string())?;
    let params = AffinityParams::with_gamma(gamma);
    let levels: Vec<Vec<_>> = ds
        .samples()
        .par_iter()
        .enumerate()
        .map(|(s, c)| {
            let g = knn(c, params.k_graph)?;
            let f = compute_features(c, &g)?;
            superpoint_levels(c, &g, &f, &params, &NOISE_KS, seed * 1000 + s as u64)
        })
        .collect::<spal_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    (0..NOISE_KS.len())
        .map(|j| {
            let parts: Vec<_> = levels.iter().map(|l| l[j].clone()).collect();
            noise_rate(ds.samples(), &parts).map_err(|e| e.to_string())
        })
        .collect()
}

fn noise_trends() -> Outcome {
    let mut mean = [[0.0; 5]; 2];
    for seed in 0..5 {
        for (gi, gamma) in [0.0, 0.1].into_iter().enumerate() {
            for (j, v) in noise_by_k(seed, gamma)?.into_iter().enumerate() {
                mean[gi][j] += v / 5.0;
            }
        }
    }
    let table: Vec<String> = NOISE_KS
        .iter()
        .enumerate()
        .map(|(j, k)| format!("K={k} {:.4}/{:.4}", mean[0][j], mean[1][j]))
        .collect();
    let detail = format!("noise gamma=0/0.1: {}", table.join(", "));
    let monotone = mean.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
    let geometric_helps = (0..5).all(|j| mean[1][j] < mean[0][j]);
    ensure(monotone, || format!("(a) not non-increasing in K; {detail}"))?;
    ensure(geometric_helps, || format!("(b) gamma=0.1 not lower at every K; {detail}"))?;
    Ok(detail)
}

fn nuclear_loss_checks() -> Outcome {
    let mut r = rng(1005);
    let mut checked = 0;
    let mut worst_grad: f64 = 0.0;
    while checked < 100 {
        let rows = r.random_range(4..20);
        let cols = r.random_range(2..6);
        let data = random_posteriors(&mut r, rows, cols);
        if *jacobi_singular_values(&data, rows, cols).last().unwrap() <= 1e-3 {
            continue;
        }
        checked += 1;
        let f = DMatrix::from_row_slice(rows, cols, &data);
        let g = nuclear_loss_gradient(&f);
        for i in 0..rows {
            for j in 0..cols {
                let (mut plus, mut minus) = (f.clone(), f.clone());
                plus[(i, j)] += 1e-5;
                minus[(i, j)] -= 1e-5;
                let fd = (nuclear_loss(&plus) - nuclear_loss(&minus)) / 2e-5;
                worst_grad = worst_grad.max((fd - g[(i, j)]).abs());
            }
        }
    }
    ensure(worst_grad < 1e-4, || format!("gradient error {worst_grad:e}"))?;
    let mut worst_value: f64 = 0.0;
    for _ in 0..1000 {
        let rows = r.random_range(1..30);
        let cols = r.random_range(2..8);
        let data = random_posteriors(&mut r, rows, cols);
        let l = nuclear_loss(&DMatrix::from_row_slice(rows, cols, &data));
        let want = jacobi_singular_values(&data, rows, cols).iter().sum::<f64>() / rows as f64;
        worst_value = worst_value.max((l - want).abs());
        let n = rows as f64;
        let fro = data.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(fro / n <= l + 1e-12 && l <= (cols as f64).sqrt() * fro / n + 1e-12, || {
            format!("bounds violated: {} <= {l} <= {}", fro / n, (cols as f64).sqrt() * fro / n)
        })?;
    }
    ensure(worst_value < 1e-8, || format!("value error {worst_value:e}"))?;
    Ok(format!("max gradient error {worst_grad:.1e}, max value error {worst_value:.1e}, bounds on 1000"))
}

fn acquisition_checks() -> Outcome {
    for seed in 0..5 {
        check_against_oracle(Granularity::SuperPoint, 5, 60, 40, seed);
        check_against_oracle(Granularity::Point, 4, 50, 10, 100 + seed);
        check_against_oracle(Granularity::Shape, 12, 30, 5, 200 + seed);
    }
    let mut r = rng(1006);
    let pts: Vec<[f64; 3]> = (0..200).map(|i| [i as f64, 0.0, 0.0]).collect();
    let clouds = vec![cloud(pts)];
    let parts = vec![spal_core::superpoint::SuperPointPartition::from_assignment((0..200).collect()).unwrap()];
    let cat = UnitCatalog::new(Granularity::SuperPoint, &clouds, Some(&parts), vec![0], None).unwrap();
    for trial in 0..50 {
        let values: Vec<f64> = (0..200).map(|_| (r.random_range(0.0..1.0f64) * 30.0).round() / 30.0).collect();
        let scores: Vec<AcquisitionScore> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| AcquisitionScore { unit: UnitId::new(0, i), d: 0.0, e: 0.0, s: 0.0, combined: v, raw: [0.0; 3] })
            .collect();
        let k = 1 + trial % 20;
        let mut pool = LabelPool::new(Granularity::SuperPoint, 1000);
        let picked = select_query(&scores, k, &mut pool, &cat).map_err(|e| e.to_string())?;
        let keys: Vec<u64> = (0..200).collect();
        let want: Vec<UnitId> = top_k_by_sort(&values, &keys, k).into_iter().map(|i| UnitId::new(0, i)).collect();
        ensure(picked == want, || format!("select_query differs from full sort in trial {trial}"))?;
    }
    let mut runner = TestRunner::new(RunnerConfig { cases: 10_000, failure_persistence: None, ..RunnerConfig::default() });
    let strategy = (0u8..3, 0usize..60, prop::collection::vec(op(), 1..30));
    runner
        .run(&strategy, |(g, budget, ops)| run_budget_sequence(g, budget, &ops).map_err(TestCaseError::fail))
        .map_err(|e| format!("budget ledger: {e}"))?;
    Ok("scores match oracles at 3 granularities, top-k equals full sort, 10000 budget sequences".into())
}

/// 40 airplane shapes of 512 points, 128 super-points each, MLP trained for 60 epochs.
fn benchmark_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.synthetic = Some(SynthSpec::airplanes(40, 512));
    cfg.k_clusters = 128;
    cfg.train.epochs = 60;
    cfg.seeds = (0..5).collect();
    cfg
}

fn final_mean(report: &Report, strategy: Strategy) -> (Vec<f64>, f64) {
    let v = report.final_miou("", strategy);
    let m = mean_std(&v).0;
    (v, m)
}

fn al_effectiveness() -> Outcome {
    let mut cfg = benchmark_config();
    cfg.init_budget = Some(40);
    cfg.milestones = Some(vec![768]);
    let prep = PreparedData::new(load_data(&cfg).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
    let run = |granularity, strategy| {
        run_prepared(&prep, &ExperimentConfig { granularity, strategy, ..cfg.clone() }).map_err(|e| e.to_string())
    };
    let (ours, ours_m) = final_mean(&run(Granularity::SuperPoint, Strategy::Ours)?, Strategy::Ours);
    let (sp_rand, sp_rand_m) = final_mean(&run(Granularity::SuperPoint, Strategy::Random)?, Strategy::Random);
    let (shape_rand, shape_rand_m) = final_mean(&run(Granularity::Shape, Strategy::Random)?, Strategy::Random);
    let se1 = pooled_standard_error(&ours, &sp_rand);
    let se2 = pooled_standard_error(&sp_rand, &shape_rand);
    let detail = format!(
        "mIoU ours {ours_m:.4}, sp-random {sp_rand_m:.4}, shape-random {shape_rand_m:.4}; margins {:.4} (se {se1:.4}), {:.4} (se {se2:.4})",
        ours_m - sp_rand_m,
        sp_rand_m - shape_rand_m
    );
    ensure(ours_m - sp_rand_m > se1, || format!("ours vs random: {detail}"))?;
    ensure(sp_rand_m - shape_rand_m > se2, || format!("super-point vs shape: {detail}"))?;
    Ok(detail)
}

fn consistency_ablation() -> Outcome {
    let mut cfg = benchmark_config();
    cfg.init_budget = Some(40);
    cfg.milestones = Some(vec![1600]);
    let prep = PreparedData::new(load_data(&cfg).map_err(|e| e.to_string())?, &cfg).map_err(|e| e.to_string())?;
    let report = sweep(&prep, &cfg, SweepAxis::LambdaNc, &[0.0, 1.0]).map_err(|e| e.to_string())?;
    let var = |label: &str| report.final_values(label, Strategy::Ours, |r| r.sp_variance);
    let (v0, v1) = (var("lambda_nc=0"), var("lambda_nc=1"));
    let m0 = report.final_miou("lambda_nc=0", Strategy::Ours);
    let m1 = report.final_miou("lambda_nc=1", Strategy::Ours);
    let (mean0, _) = mean_std(&m0);
    let (mean1, sd1) = mean_std(&m1);
    let se1 = sd1 / (m1.len() as f64).sqrt();
    let detail = format!(
        "variance {:.5} -> {:.5}, mIoU {mean0:.4} -> {mean1:.4} (se {se1:.4})",
        mean_std(&v0).0,
        mean_std(&v1).0
    );
    ensure(v0.len() == 5 && v1.len() == 5, || format!("expected 5 paired seeds; {detail}"))?;
    ensure(v1.iter().zip(&v0).all(|(a, b)| a < b), || format!("variance not lower on every seed: {v0:?} vs {v1:?}"))?;
    ensure(mean1 >= mean0 - se1, || format!("mIoU dropped by more than one se; {detail}"))?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.data.synthetic = Some(SynthSpec::airplanes(10, 128));
    cfg.k_clusters = 32;
    cfg.model = ModelSpec::mlp(&[16]);
    cfg.train.epochs = 5;
    cfg.init_budget = Some(8);
    cfg.milestones = Some(vec![20, 40]);
    cfg.n_query = Some(6);
    cfg.seeds = vec![0, 1, 2];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        run_experiment(&cfg).and_then(|r| r.write_to(&out)).map_err(|e| e.to_string())?;
        files.push(std::fs::read(out.join("report.csv")).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], || "report.csv differs between identical runs".into())?;
    Ok(format!("two runs, {} identical CSV bytes", files[0].len()))
}

fn miou_oracle() -> Outcome {
    let m = miou(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).map_err(|e| e.to_string())?;
    ensure(m.per_class == vec![Some(0.5), Some(2.0 / 3.0)] && (m.miou - 7.0 / 12.0).abs() < 1e-15, || {
        format!("4-point example gave {m:?}")
    })?;
    let mut r = rng(1010);
    for case in 0..50 {
        let c = r.random_range(2..8);
        let n = r.random_range(1..=300);
        let gt: Vec<u32> = (0..n).map(|_| r.random_range(0..c as u32)).collect();
        let pred: Vec<u32> = gt.iter().map(|&g| if r.random_bool(0.5) { g } else { r.random_range(0..c as u32) }).collect();
        let (want, want_per) = confusion_iou(&pred, &gt, c);
        let got = miou(&pred, &gt, c).map_err(|e| e.to_string())?;
        ensure(got.miou == want && got.per_class == want_per, || format!("case {case}: {} vs {want}", got.miou))?;
    }
    Ok("4-point example and 50 random cases exact".into())
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "eigen-feature identity", limit: Duration::from_secs(1), check: eigen_feature_identity },
        Criterion { id: 2, name: "kNN oracle equivalence", limit: Duration::from_secs(5), check: knn_oracle },
        Criterion { id: 3, name: "Ncut oracle", limit: Duration::from_secs(30), check: ncut_oracle },
        Criterion { id: 4, name: "noise-rate trends", limit: Duration::from_secs(600), check: noise_trends },
        Criterion { id: 5, name: "nuclear loss", limit: Duration::from_secs(10), check: nuclear_loss_checks },
        Criterion { id: 6, name: "acquisition correctness", limit: Duration::from_secs(30), check: acquisition_checks },
        Criterion { id: 7, name: "AL effectiveness trend", limit: Duration::from_secs(1800), check: al_effectiveness },
        Criterion { id: 8, name: "consistency-loss ablation", limit: Duration::from_secs(1200), check: consistency_ablation },
        Criterion { id: 9, name: "determinism", limit: Duration::from_secs(120), check: determinism },
        Criterion { id: 10, name: "mIoU hand oracle", limit: Duration::from_secs(1), check: miou_oracle },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), c.limit.as_secs());
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("over time; {d}")),
            Err(e) => (false, e),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {:<27} {}  [{timing}] {detail}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
