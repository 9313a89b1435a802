use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Granularity, LabelPool, UnitCatalog, UnitId};
use crate::error::{Error, Result};
use crate::model::ModelOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingMode {
    Mean,
    Max,
}

impl std::str::FromStr for PoolingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "avg" => Ok(PoolingMode::Mean),
            "max" => Ok(PoolingMode::Max),
            other => Err(Error::InvalidArgument(format!("unknown pooling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub beta: f64,
    pub delta: f64,
    /// Min-max normalise D, E and S over the candidate pool before combining.
    pub normalize: bool,
    pub superpoint_pooling: PoolingMode,
    pub shape_pooling: PoolingMode,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            beta: 0.25,
            delta: 1.0,
            normalize: true,
            superpoint_pooling: PoolingMode::Mean,
            shape_pooling: PoolingMode::Max,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Per-candidate terms as combined (normalised when configured) plus the raw
/// values. Infinite raw values (nothing labelled yet) contribute zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionScore {
    pub unit: UnitId,
    pub d: f64,
    pub e: f64,
    pub s: f64,
    pub combined: f64,
    pub raw: [f64; 3],
}

/// Componentwise mean or max of the member rows of an `N x dim` matrix.
pub fn pooled_feature(features: &[f64], dim: usize, members: &[u32], mode: PoolingMode) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::EmptyMembers);
    }
    let row = |i: u32| &features[i as usize * dim..(i as usize + 1) * dim];
    let mut out = row(members[0]).to_vec();
    for &i in &members[1..] {
        for (o, &v) in out.iter_mut().zip(row(i)) {
            match mode {
                PoolingMode::Mean => *o += v,
                PoolingMode::Max => *o = o.max(v),
            }
        }
    }
    if mode == PoolingMode::Mean {
        let n = members.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest Euclidean distance to any labelled feature; `+inf` for an empty set.
pub fn diversity_score(candidate: &[f64], labeled: &[Vec<f64>]) -> f64 {
    labeled.iter().map(|l| sq_dist(candidate, l)).fold(f64::INFINITY, f64::min).sqrt()
}

/// The same distance rule between pooled shape features.
pub fn shape_diversity_score(shape_feature: &[f64], labeled_shape_features: &[Vec<f64>]) -> f64 {
    diversity_score(shape_feature, labeled_shape_features)
}

/// `-sum p ln p`, with `0 ln 0 = 0`.
pub fn entropy(posterior: &[f64]) -> f64 {
    -posterior.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Mean point entropy over `members`.
pub fn uncertainty_score(output: &ModelOutput, members: &[u32]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyMembers);
    }
    Ok(members.iter().map(|&i| entropy(output.posterior(i as usize))).sum::<f64>() / members.len() as f64)
}

/// `(1 - beta) D + beta E + delta S`.
pub fn al_score(d: f64, e: f64, s: f64, beta: f64, delta: f64) -> f64 {
    (1.0 - beta) * d + beta * e + delta * s
}

/// Scores for every unlabelled unit of `catalog` under the current model
/// outputs. `outputs[s]` must be present for every candidate sample `s`.
pub fn score_candidates(
    catalog: &UnitCatalog,
    pool: &LabelPool,
    outputs: &[Option<ModelOutput>],
    cfg: &ScoreConfig,
) -> Result<Vec<AcquisitionScore>> {
    Ok(Scorer::new(catalog, pool, outputs, cfg)?.scores())
}

/// Candidate state for one selection round. Diversity is tracked per probe
/// row (one per point or super-point, every point for a shape, whose D is the
/// mean over its points) so that it can be lowered incrementally when
/// selection is greedy.
#[derive(Debug, Clone)]
pub struct Scorer {
    cfg: ScoreConfig,
    dim: usize,
    units: Vec<UnitId>,
    active: Vec<bool>,
    probe_start: Vec<usize>,
    probes: Vec<f64>,
    probe_min: Vec<f64>,
    e_raw: Vec<f64>,
    s_raw: Vec<f64>,
}

impl Scorer {
    pub fn new(
        catalog: &UnitCatalog,
        pool: &LabelPool,
        outputs: &[Option<ModelOutput>],
        cfg: &ScoreConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let out = |s: usize| -> Result<&ModelOutput> {
            outputs
                .get(s)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::InvalidArgument(format!("no model output for sample {s}")))
        };
        let mut dim = None;
        for s in catalog.samples() {
            let o = out(s)?;
            if o.len() != catalog.clouds()[s].len() {
                return Err(Error::LengthMismatch { what: "model output", got: o.len(), expected: catalog.clouds()[s].len() });
            }
            if *dim.get_or_insert(o.feature_dim) != o.feature_dim {
                return Err(Error::FeatureDimMismatch { expected: dim.unwrap(), got: o.feature_dim });
            }
        }
        let dim = dim.ok_or(Error::EmptyPool)?;

        // Rows representing one unit for the diversity term.
        let probe_rows = |unit: UnitId| -> Result<Vec<f64>> {
            let o = out(unit.sample as usize)?;
            let members = catalog.members(unit);
            match catalog.granularity() {
                Granularity::Point => Ok(o.feature(unit.index as usize).to_vec()),
                Granularity::SuperPoint => pooled_feature(&o.features, dim, &members, cfg.superpoint_pooling),
                Granularity::Shape => Ok(o.features.clone()),
            }
        };

        let mut labeled = Vec::new();
        for u in pool.units() {
            if catalog.check(u).is_ok() {
                labeled.extend(probe_rows(u)?);
            }
        }
        let mut shape_feats: Vec<Option<Vec<f64>>> = vec![None; catalog.clouds().len()];
        for s in catalog.samples().chain(pool.labeled_samples()) {
            if shape_feats[s].is_none() {
                if let Some(o) = outputs.get(s).and_then(Option::as_ref) {
                    let all: Vec<u32> = (0..o.len() as u32).collect();
                    shape_feats[s] = Some(pooled_feature(&o.features, dim, &all, cfg.shape_pooling)?);
                }
            }
        }
        let labeled_shapes: Vec<&[f64]> =
            pool.labeled_samples().filter_map(|s| shape_feats.get(s)?.as_deref()).collect();

        let units: Vec<UnitId> = catalog.units().filter(|u| !pool.is_labeled(*u)).collect();
        if units.is_empty() {
            return Err(Error::EmptyPool);
        }
        let per_unit: Vec<(Vec<f64>, f64)> = units
            .par_iter()
            .map(|&u| -> Result<(Vec<f64>, f64)> {
                let e = uncertainty_score(out(u.sample as usize)?, &catalog.members(u))?;
                Ok((probe_rows(u)?, e))
            })
            .collect::<Result<_>>()?;
        let mut probe_start = Vec::with_capacity(units.len() + 1);
        let mut probes = Vec::new();
        let mut e_raw = Vec::with_capacity(units.len());
        probe_start.push(0);
        for (rows, e) in per_unit {
            probes.extend(rows);
            probe_start.push(probes.len() / dim);
            e_raw.push(e);
        }
        let probe_min: Vec<f64> = probes
            .par_chunks(dim)
            .map(|p| labeled.chunks(dim).map(|l| sq_dist(p, l)).fold(f64::INFINITY, f64::min).sqrt())
            .collect();
        let s_raw = units
            .iter()
            .map(|u| {
                let f = shape_feats[u.sample as usize].as_deref().expect("candidate shapes have features");
                labeled_shapes.iter().map(|l| sq_dist(f, l)).fold(f64::INFINITY, f64::min).sqrt()
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            dim,
            active: vec![true; units.len()],
            units,
            probe_start,
            probes,
            probe_min,
            e_raw,
            s_raw,
        })
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, k: usize) -> UnitId {
        self.units[k]
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    fn d_raw(&self, k: usize) -> f64 {
        let m = &self.probe_min[self.probe_start[k]..self.probe_start[k + 1]];
        m.iter().sum::<f64>() / m.len() as f64
    }

    /// Scores of the still-active candidates, in candidate (unit id) order.
    pub fn scores(&self) -> Vec<AcquisitionScore> {
        let idx: Vec<usize> = (0..self.units.len()).filter(|&k| self.active[k]).collect();
        let d: Vec<f64> = idx.iter().map(|&k| self.d_raw(k)).collect();
        let e: Vec<f64> = idx.iter().map(|&k| self.e_raw[k]).collect();
        let s: Vec<f64> = idx.iter().map(|&k| self.s_raw[k]).collect();
        let (dn, en, sn) = (self.prepare(&d), self.prepare(&e), self.prepare(&s));
        idx.iter()
            .enumerate()
            .map(|(j, &k)| AcquisitionScore {
                unit: self.units[k],
                d: dn[j],
                e: en[j],
                s: sn[j],
                combined: al_score(dn[j], en[j], sn[j], self.cfg.beta, self.cfg.delta),
                raw: [d[j], e[j], s[j]],
            })
            .collect()
    }

    fn prepare(&self, v: &[f64]) -> Vec<f64> {
        if v.iter().any(|x| !x.is_finite()) {
            return vec![0.0; v.len()];
        }
        if !self.cfg.normalize {
            return v.to_vec();
        }
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return vec![0.0; v.len()];
        }
        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
    }

    /// Marks candidate `k` as labelled: it leaves the candidate set and its
    /// rows join the labelled features used by the diversity term.
    pub fn mark_labeled(&mut self, k: usize) {
        self.active[k] = false;
        let dim = self.dim;
        let rows = self.probes[self.probe_start[k] * dim..self.probe_start[k + 1] * dim].to_vec();
        let probes = &self.probes;
        self.probe_min.par_iter_mut().enumerate().for_each(|(p, m)| {
            let row = &probes[p * dim..(p + 1) * dim];
            for l in rows.chunks(dim) {
                *m = m.min(sq_dist(row, l).sqrt());
            }
        });
    }
}
