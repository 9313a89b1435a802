use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::augment::augment_points;
use super::loss::{gather_rows, nuclear_loss_and_gradient, POSTERIOR_FLOOR};
use super::{ModelOutput, SampleContext, SegmentationModel};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::superpoint::SuperPointPartition;

/// Which super-points contribute to the consistency term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuclearScope {
    #[default]
    All,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Whole samples per optimiser step.
    pub batch_size: usize,
    pub lambda_nc: f64,
    pub nuclear_scope: NuclearScope,
    pub augment: bool,
    pub g_std: f64,
    pub mirror_axis: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 0.01,
            batch_size: 4,
            lambda_nc: 1.0,
            nuclear_scope: NuclearScope::All,
            augment: true,
            g_std: 0.05,
            mirror_axis: Some(0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_nc >= 0.0) {
            return Err(Error::Config(format!("lambda_nc must be >= 0, got {}", self.lambda_nc)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.g_std >= 0.0) {
            return Err(Error::Config("g_std must be >= 0".into()));
        }
        if matches!(self.mirror_axis, Some(a) if a > 2) {
            return Err(Error::Config("mirror_axis must be 0, 1 or 2".into()));
        }
        Ok(())
    }
}

/// One training sample: model inputs, its labeled points and optionally its
/// super-points for the consistency term.
#[derive(Debug, Clone)]
pub struct TrainItem<'a> {
    pub ctx: SampleContext<'a>,
    /// `(point index, class)` pairs.
    pub targets: Vec<(u32, u32)>,
    pub partition: Option<&'a SuperPointPartition>,
    /// Per-cluster flag, consulted only with [`NuclearScope::Unlabeled`].
    pub labeled_clusters: Vec<bool>,
}

impl TrainItem<'_> {
    fn scoped_clusters(&self, scope: NuclearScope) -> impl Iterator<Item = &[u32]> {
        let p = self.partition;
        let flags = &self.labeled_clusters;
        p.into_iter().flat_map(move |p| {
            p.clusters()
                .enumerate()
                .filter(move |(c, _)| scope == NuclearScope::All || !flags.get(*c).copied().unwrap_or(false))
                .map(|(_, m)| m)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub epochs: usize,
    pub steps: usize,
    /// Mean batch loss of the last epoch.
    pub final_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Adam on mean cross-entropy over each batch's labeled points plus
/// `lambda_nc` times the mean nuclear loss over the batch's super-points.
/// Samples are reshuffled every epoch; all randomness derives from `cfg.seed`.
pub fn train(model: &mut dyn SegmentationModel, items: &[TrainItem], cfg: &TrainConfig) -> Result<TrainStats> {
    cfg.validate()?;
    if items.iter().all(|it| it.targets.is_empty()) {
        return Err(Error::NoLabels);
    }
    let c = model.num_classes();
    for it in items {
        if let Some(&(i, y)) = it.targets.iter().find(|&&(i, y)| i as usize >= it.ctx.len() || y as usize >= c) {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes: c,
                context: format!("target point {i} of {}", it.ctx.len()),
            });
        }
        if let Some(p) = it.partition {
            if p.len() != it.ctx.len() {
                return Err(Error::LengthMismatch { what: "partition", got: p.len(), expected: it.ctx.len() });
            }
        }
    }
    let n_params = model.params().len();
    let mut adam = Adam { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 };
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut steps = 0;
    let mut final_loss = f64::NAN;
    let use_nc = cfg.lambda_nc > 0.0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream(cfg.seed, &[1, epoch as u64]));
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let n_lab: usize = batch.iter().map(|&b| items[b].targets.len()).sum();
            let n_sp: usize = if use_nc {
                batch.iter().map(|&b| items[b].scoped_clusters(cfg.nuclear_scope).count()).sum()
            } else {
                0
            };
            if n_lab == 0 && n_sp == 0 {
                continue;
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &b in batch {
                let item = &items[b];
                let augmented;
                let mut ctx = item.ctx;
                if cfg.augment {
                    let mut rng = stream(cfg.seed, &[2, epoch as u64, b as u64]);
                    augmented = augment_points(ctx.points, cfg.g_std, cfg.mirror_axis, &mut rng)?;
                    ctx.points = &augmented;
                }
                let mut loss = |out: &ModelOutput| -> Result<(f64, Vec<f64>)> {
                    let mut value = 0.0;
                    let mut d = vec![0.0; out.posteriors.len()];
                    if n_lab > 0 {
                        let scale = 1.0 / n_lab as f64;
                        for &(i, y) in &item.targets {
                            let p = out.posterior(i as usize)[y as usize];
                            value -= p.max(POSTERIOR_FLOOR).ln() * scale;
                            if p > POSTERIOR_FLOOR {
                                d[i as usize * c + y as usize] -= scale / p;
                            }
                        }
                    }
                    if n_sp > 0 {
                        let scale = cfg.lambda_nc / n_sp as f64;
                        for members in item.scoped_clusters(cfg.nuclear_scope) {
                            let (l, g) = nuclear_loss_and_gradient(&gather_rows(out, members));
                            value += l * scale;
                            for (r, &i) in members.iter().enumerate() {
                                for k in 0..c {
                                    d[i as usize * c + k] += g[(r, k)] * scale;
                                }
                            }
                        }
                    }
                    Ok((value, d))
                };
                batch_loss += model.accumulate_gradient(&ctx, &mut loss, &mut grad)?;
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, loss: batch_loss });
            }
            adam.step(model.params_mut(), &grad, cfg.learning_rate);
            steps += 1;
            epoch_loss += batch_loss;
            batches += 1;
        }
        final_loss = epoch_loss / batches.max(1) as f64;
        log::debug!("epoch {epoch}: loss {final_loss:.5}");
    }
    Ok(TrainStats { epochs: cfg.epochs, steps, final_loss })
}
