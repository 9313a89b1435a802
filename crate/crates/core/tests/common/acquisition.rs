//! Exhaustive acquisition oracles and the randomized budget-ledger check.

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spal_core::acquisition::{
    oracle_label, score_candidates, select_query, select_random, AcquisitionScore, Granularity, LabelPool, ScoreConfig,
    UnitCatalog, UnitId,
};
use spal_core::model::ModelOutput;
use spal_core::superpoint::SuperPointPartition;
use spal_core::{Error, PointCloud};

use super::{min_distance, random_posteriors, rng};

fn ensure(ok: bool, msg: &str) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.to_string()) }
}

pub struct World {
    pub clouds: Vec<PointCloud>,
    pub parts: Vec<SuperPointPartition>,
    pub outputs: Vec<Option<ModelOutput>>,
}

pub const C: usize = 4;
pub const DIM: usize = 3;

pub fn world(r: &mut ChaCha8Rng, samples: usize, points: usize, clusters: usize) -> World {
    let mut clouds = Vec::new();
    let mut parts = Vec::new();
    let mut outputs = Vec::new();
    for s in 0..samples {
        let pts: Vec<[f64; 3]> = (0..points).map(|i| [i as f64, s as f64, 0.0]).collect();
        let labels: Vec<u32> = (0..points).map(|_| r.random_range(0..C as u32)).collect();
        clouds.push(PointCloud::new(format!("s{s}"), pts, None, labels, None).unwrap());
        // Every cluster gets at least one point.
        let mut assign: Vec<u32> = (0..points).map(|i| (i % clusters) as u32).collect();
        for a in assign.iter_mut().skip(clusters) {
            *a = r.random_range(0..clusters as u32);
        }
        parts.push(SuperPointPartition::from_assignment(assign).unwrap());
        outputs.push(Some(ModelOutput {
            posteriors: random_posteriors(r, points, C),
            features: (0..points * DIM).map(|_| r.random_range(-1.0..1.0)).collect(),
            num_classes: C,
            feature_dim: DIM,
        }));
    }
    World { clouds, parts, outputs }
}

pub fn my_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum()
}

fn pooled(o: &ModelOutput, members: &[u32], max: bool) -> Vec<f64> {
    let mut acc = vec![if max { f64::NEG_INFINITY } else { 0.0 }; DIM];
    for &i in members {
        for d in 0..DIM {
            let v = o.features[i as usize * DIM + d];
            acc[d] = if max { acc[d].max(v) } else { acc[d] + v };
        }
    }
    if !max {
        acc.iter_mut().for_each(|v| *v /= members.len() as f64);
    }
    acc
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect()
}

fn members_of(w: &World, g: Granularity, u: UnitId) -> Vec<u32> {
    match g {
        Granularity::Point => vec![u.index],
        Granularity::SuperPoint => w.parts[u.sample as usize].members(u.index as usize).to_vec(),
        Granularity::Shape => (0..w.clouds[u.sample as usize].len() as u32).collect(),
    }
}

/// Raw D, E, S of every unlabeled unit computed from scratch.
pub fn oracle_scores(w: &World, g: Granularity, pool: &LabelPool, all_units: &[UnitId]) -> Vec<(UnitId, [f64; 3])> {
    let out = |s: u32| w.outputs[s as usize].as_ref().unwrap();
    // Labeled rows: one pooled row per point / super-point, every point row per shape.
    let rows_of = |u: UnitId| -> Vec<Vec<f64>> {
        let m = members_of(w, g, u);
        match g {
            Granularity::Shape => m.iter().map(|&i| pooled(out(u.sample), &[i], false)).collect(),
            _ => vec![pooled(out(u.sample), &m, false)],
        }
    };
    let labeled_rows: Vec<Vec<f64>> = pool.units().flat_map(rows_of).collect();
    let mut labeled_samples: Vec<u32> = pool.units().map(|u| u.sample).collect();
    labeled_samples.dedup();
    let shape_feat = |s: u32| pooled(out(s), &(0..w.clouds[s as usize].len() as u32).collect::<Vec<_>>(), true);
    let labeled_shapes: Vec<Vec<f64>> = labeled_samples.iter().map(|&s| shape_feat(s)).collect();
    all_units
        .iter()
        .filter(|u| !pool.is_labeled(**u))
        .map(|&u| {
            let rows = rows_of(u);
            let d = rows.iter().map(|r| min_distance(r, &labeled_rows)).sum::<f64>() / rows.len() as f64;
            let m = members_of(w, g, u);
            let e = m.iter().map(|&i| my_entropy(out(u.sample).posterior(i as usize))).sum::<f64>() / m.len() as f64;
            let s = min_distance(&shape_feat(u.sample), &labeled_shapes);
            (u, [d, e, s])
        })
        .collect()
}

pub fn check_against_oracle(g: Granularity, samples: usize, points: usize, clusters: usize, seed: u64) {
    let mut r = rng(seed);
    let w = world(&mut r, samples, points, clusters);
    let cands: Vec<usize> = (0..samples).collect();
    let cat = UnitCatalog::new(g, &w.clouds, Some(&w.parts), cands, None).unwrap();
    let units: Vec<UnitId> = cat.units().collect();
    let mut pool = LabelPool::new(g, usize::MAX / 2);
    let n_label = (units.len() / 5).max(1);
    for _ in 0..n_label {
        let u = units[r.random_range(0..units.len())];
        if !pool.is_labeled(u) {
            oracle_label(&mut pool, &cat, u).unwrap();
        }
    }
    let cfg = ScoreConfig { beta: 0.3, delta: 0.7, ..ScoreConfig::default() };
    let got = score_candidates(&cat, &pool, &w.outputs, &cfg).unwrap();
    let want = oracle_scores(&w, g, &pool, &units);
    assert!(got.len() <= 200 || g == Granularity::Point);
    assert_eq!(got.len(), want.len());
    for (a, (u, raw)) in got.iter().zip(&want) {
        assert_eq!(a.unit, *u);
        for t in 0..3 {
            assert!((a.raw[t] - raw[t]).abs() < 1e-12, "{g} {u} term {t}: {} vs {}", a.raw[t], raw[t]);
        }
    }
    let cols: Vec<Vec<f64>> = (0..3).map(|t| normalize(&want.iter().map(|(_, r)| r[t]).collect::<Vec<_>>())).collect();
    for (j, a) in got.iter().enumerate() {
        let combined = 0.7 * cols[0][j] + 0.3 * cols[1][j] + 0.7 * cols[2][j];
        assert!((a.combined - combined).abs() < 1e-12);
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    Raise(usize),
    Random(usize),
    Top(usize, u64),
    Label(usize),
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..40).prop_map(Op::Raise),
        (1usize..6).prop_map(Op::Random),
        ((1usize..6), any::<u64>()).prop_map(|(n, s)| Op::Top(n, s)),
        (0usize..200).prop_map(Op::Label),
    ]
}

/// Applies a random operation sequence and checks the ledger after each step.
pub fn run_budget_sequence(granularity: u8, budget: usize, ops: &[Op]) -> Result<(), String> {
    let g = [Granularity::Point, Granularity::SuperPoint, Granularity::Shape][granularity as usize % 3];
    let mut r = rng(budget as u64);
    let w = world(&mut r, 3, 12, 4);
    let cat = UnitCatalog::new(g, &w.clouds, Some(&w.parts), vec![0, 1, 2], None).unwrap();
    let units: Vec<UnitId> = cat.units().collect();
    let mut pool = LabelPool::new(g, budget);
    for o in ops {
        let before = pool.spent();
        match *o {
            Op::Raise(extra) => pool.set_budget(pool.budget() + extra).unwrap(),
            Op::Random(n) => {
                let _ = select_random(n, &mut pool, &cat, &mut r);
            }
            Op::Top(n, s) => {
                let mut sr = rng(s);
                let scores: Vec<AcquisitionScore> =
                    units.iter().map(|&u| AcquisitionScore { unit: u, d: 0.0, e: 0.0, s: 0.0, combined: sr.random(), raw: [0.0; 3] }).collect();
                let _ = select_query(&scores, n, &mut pool, &cat);
            }
            Op::Label(i) => {
                let u = units[i % units.len()];
                let was = pool.is_labeled(u);
                match oracle_label(&mut pool, &cat, u) {
                    Ok(cost) => ensure(cost == cat.cost(u), "charged cost differs from click cost")?,
                    Err(Error::AlreadyLabeled(_)) => ensure(was, "relabel error on an unlabeled unit")?,
                    Err(Error::BudgetExceeded { cost, remaining }) => ensure(cost > remaining, "spurious budget error")?,
                    Err(e) => return Err(e.to_string()),
                }
            }
        }
        ensure(pool.spent() <= pool.budget(), "spent exceeds budget")?;
        ensure(pool.spent() >= before, "spent decreased")?;
        let charged: usize = pool.units().map(|u| cat.cost(u)).sum();
        ensure(charged == pool.spent(), "ledger total differs from the sum of unit costs")?;
    }
    Ok(())
}

