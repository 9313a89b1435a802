use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::{Granularity, PoolingMode, ScoreConfig};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, NuclearScope, TrainConfig};
use crate::pcio::{Format, SynthSpec};
use crate::superpoint::AffinityParams;

/// Selection rule applied at every milestone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    /// Diversity only (`beta = 0`, `delta = 0`).
    #[serde(alias = "core-set")]
    Coreset,
    /// Entropy only (`beta = 1`, `delta = 0`).
    Entropy,
    /// Diversity, entropy and shape diversity with the configured weights.
    #[default]
    Ours,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Random, Strategy::Coreset, Strategy::Entropy, Strategy::Ours];

    pub fn needs_model(self) -> bool {
        self != Strategy::Random
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Coreset => "coreset",
            Strategy::Entropy => "entropy",
            Strategy::Ours => "ours",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "coreset" | "core-set" => Ok(Strategy::Coreset),
            "entropy" => Ok(Strategy::Entropy),
            "ours" => Ok(Strategy::Ours),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Where the samples come from. Exactly one of `path` and `synthetic` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory (with manifest) or single sample file.
    pub path: Option<PathBuf>,
    pub format: Format,
    pub num_classes: Option<usize>,
    /// Rescale loaded samples into a unit box.
    pub normalize: bool,
    pub synthetic: Option<SynthSpec>,
    pub synthetic_seed: u64,
    /// Directory of precomputed `<id>.part` files; computed on demand otherwise.
    pub partitions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub nuclear_scope: NuclearScope,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self { epochs: t.epochs, learning_rate: t.learning_rate, batch_size: t.batch_size, nuclear_scope: t.nuclear_scope }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSettings {
    pub enabled: bool,
    pub g_std: f64,
    pub mirror: bool,
    pub mirror_axis: usize,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        Self { enabled: true, g_std: 0.05, mirror: true, mirror_axis: 0 }
    }
}

/// One active-learning experiment, read from TOML.
///
/// ```toml
/// seeds = [0, 1, 2]
/// granularity = "superpoint"
/// strategy = "ours"
/// K = 64
/// milestones = [200, 400]
/// init_budget = 100
///
/// [data.synthetic]
/// num_classes = 4
/// family = { kind = "airplane", count = 30, points = 512 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub granularity: Granularity,
    pub strategy: Strategy,
    pub beta: f64,
    pub delta: f64,
    pub lambda_nc: f64,
    pub gamma: f64,
    /// Neighbours for descriptors and the affinity graph.
    pub k: usize,
    /// Super-points per sample, clamped to the sample size.
    #[serde(rename = "K", alias = "k_clusters")]
    pub k_clusters: usize,
    /// Ascending click totals; unset means 1/2/5/10/20% of all training points.
    pub milestones: Option<Vec<usize>>,
    /// Clicks spent on the random initial pool; unset means 0.5% of all training points.
    pub init_budget: Option<usize>,
    pub seeds: Vec<u64>,
    /// Units per query; unset selects each milestone gap in one batch.
    pub n_query: Option<usize>,
    pub greedy_recompute: bool,
    pub normalize_scores: bool,
    pub superpoint_pooling: PoolingMode,
    pub shape_pooling: PoolingMode,
    /// Click cost of a whole shape; unset charges one click per point.
    pub shape_cost: Option<usize>,
    /// Also report the per-shape averaged mIoU.
    pub instance_miou: bool,
    pub partition_seed: u64,
    pub model: ModelSpec,
    pub train: TrainSettings,
    pub augment: AugmentSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sc = ScoreConfig::default();
        Self {
            data: DataConfig::default(),
            granularity: Granularity::SuperPoint,
            strategy: Strategy::Ours,
            beta: sc.beta,
            delta: sc.delta,
            lambda_nc: 1.0,
            gamma: 0.1,
            k: 10,
            k_clusters: crate::superpoint::DEFAULT_SHAPE_CLUSTERS,
            milestones: None,
            init_budget: None,
            seeds: vec![0, 1, 2, 3, 4],
            n_query: None,
            greedy_recompute: false,
            normalize_scores: sc.normalize,
            superpoint_pooling: sc.superpoint_pooling,
            shape_pooling: sc.shape_pooling,
            shape_cost: None,
            instance_miou: false,
            partition_seed: 0,
            model: ModelSpec::default(),
            train: TrainSettings::default(),
            augment: AugmentSettings::default(),
        }
    }
}

/// Fractions of the total click count used when no schedule is configured.
pub const DEFAULT_INIT_FRACTION: f64 = 0.005;
pub const DEFAULT_MILESTONE_FRACTIONS: [f64; 5] = [0.01, 0.02, 0.05, 0.10, 0.20];

/// Resolved click schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub init_budget: usize,
    pub milestones: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative data path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.path, &mut cfg.data.partitions].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), Some(_)) => return bad("set only one of data.path and data.synthetic".into()),
            (None, None) => return bad("data.path or data.synthetic is required".into()),
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        for (name, v) in [("delta", self.delta), ("lambda_nc", self.lambda_nc), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.k < 1 || self.k_clusters < 1 {
            return bad("k and K must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.n_query == Some(0) {
            return bad("n_query must be >= 1".into());
        }
        if let Some(m) = &self.milestones {
            check_schedule(self.init_budget.unwrap_or(0), m)?;
        }
        self.model.validate()?;
        self.train_config(0).validate()?;
        Ok(())
    }

    /// Concrete schedule for a training pool of `total_clicks` points.
    pub fn schedule(&self, total_clicks: usize) -> Result<Schedule> {
        let frac = |f: f64| (f * total_clicks as f64).round() as usize;
        let milestones = match &self.milestones {
            Some(m) => m.clone(),
            None => {
                let mut out: Vec<usize> = Vec::new();
                for f in DEFAULT_MILESTONE_FRACTIONS {
                    let v = frac(f).max(out.last().map_or(1, |l| l + 1));
                    out.push(v);
                }
                out
            }
        };
        let init_budget = self.init_budget.unwrap_or_else(|| frac(DEFAULT_INIT_FRACTION).min(milestones[0] - 1));
        check_schedule(init_budget, &milestones)?;
        Ok(Schedule { init_budget, milestones })
    }

    pub fn score_config(&self, strategy: Strategy) -> ScoreConfig {
        let (beta, delta) = match strategy {
            Strategy::Coreset => (0.0, 0.0),
            Strategy::Entropy => (1.0, 0.0),
            Strategy::Random | Strategy::Ours => (self.beta, self.delta),
        };
        ScoreConfig {
            beta,
            delta,
            normalize: self.normalize_scores,
            superpoint_pooling: self.superpoint_pooling,
            shape_pooling: self.shape_pooling,
        }
    }

    pub fn affinity(&self) -> AffinityParams {
        AffinityParams { k_graph: self.k, gamma: self.gamma, ..AffinityParams::default() }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            lambda_nc: self.lambda_nc,
            nuclear_scope: self.train.nuclear_scope,
            augment: self.augment.enabled,
            g_std: self.augment.g_std,
            mirror_axis: self.augment.mirror.then_some(self.augment.mirror_axis),
            seed,
        }
    }
}

fn check_schedule(init: usize, milestones: &[usize]) -> Result<()> {
    if milestones.is_empty() {
        return Err(Error::Config("milestones must not be empty".into()));
    }
    if milestones.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("milestones must be strictly ascending: {milestones:?}")));
    }
    if init >= milestones[0] {
        return Err(Error::Config(format!(
            "init_budget {init} must be below the first milestone {}",
            milestones[0]
        )));
    }
    Ok(())
}

/// Hyperparameter varied by [`super::sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Beta,
    Delta,
    LambdaNc,
    #[serde(rename = "K")]
    K,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Delta => "delta",
            SweepAxis::LambdaNc => "lambda_nc",
            SweepAxis::K => "K",
        }
    }

    /// `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        match self {
            SweepAxis::Beta => out.beta = value,
            SweepAxis::Delta => out.delta = value,
            SweepAxis::LambdaNc => out.lambda_nc = value,
            SweepAxis::K => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("K must be a positive integer, got {value}")));
                }
                out.k_clusters = value as usize;
            }
        }
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepAxis::Beta),
            "delta" => Ok(SweepAxis::Delta),
            "lambda_nc" | "lambda-nc" | "lambda" => Ok(SweepAxis::LambdaNc),
            "K" | "k" | "k_clusters" => Ok(SweepAxis::K),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}
