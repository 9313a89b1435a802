//! Segmentation model contract, the built-in per-point MLP, the training loss
//! and the training loop.

mod augment;
mod checkpoint;
mod loss;
mod mlp;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use augment::{augment, augment_points, deviation_matrix};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{cross_entropy, nuclear_loss, nuclear_loss_and_gradient, nuclear_loss_gradient, total_loss, SINGULAR_EPS};
pub use mlp::Mlp;
pub use train::{train, NuclearScope, TrainConfig, TrainItem, TrainStats};

use crate::error::{Error, Result};
use crate::geomfeat::NeighborGraph;
use crate::pcio::Point3;

/// Everything a per-point model may read about one sample. Labels are
/// deliberately absent.
#[derive(Debug, Clone, Copy)]
pub struct SampleContext<'a> {
    pub points: &'a [Point3],
    pub colors: Option<&'a [Point3]>,
    /// Per-point linearity / planarity / scatterness.
    pub geometric: &'a [[f64; 3]],
    pub neighbors: &'a NeighborGraph,
}

impl SampleContext<'_> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Posteriors `f` (`N x C`) and penultimate features `phi` (`N x d`), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub posteriors: Vec<f64>,
    pub features: Vec<f64>,
    pub num_classes: usize,
    pub feature_dim: usize,
}

impl ModelOutput {
    pub fn len(&self) -> usize {
        if self.num_classes == 0 {
            0
        } else {
            self.posteriors.len() / self.num_classes
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn posterior(&self, i: usize) -> &[f64] {
        &self.posteriors[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Arg-max class per point, ties to the smaller class.
    pub fn predictions(&self) -> Vec<u32> {
        (0..self.len())
            .map(|i| {
                let row = self.posterior(i);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect()
    }
}

/// Loss callback used by [`SegmentationModel::accumulate_gradient`]: given the
/// forward output, returns the loss and `dL/dposteriors` (`N x C`).
pub type LossFn<'a> = dyn FnMut(&ModelOutput) -> Result<(f64, Vec<f64>)> + 'a;

/// A per-point segmentation network with a flat parameter vector.
pub trait SegmentationModel: Send + Sync {
    fn spec(&self) -> ModelSpec;
    fn num_classes(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, ctx: &SampleContext) -> Result<ModelOutput>;
    /// Runs forward, evaluates `loss`, and adds `dL/dparams` into `grad`.
    fn accumulate_gradient(&self, ctx: &SampleContext, loss: &mut LossFn, grad: &mut [f64]) -> Result<f64>;
}

/// Architecture description of a model, stored in checkpoints and configs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        use_color: bool,
        #[serde(default = "yes")]
        neighbor_pooling: bool,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn yes() -> bool {
    true
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Mlp { hidden: default_hidden(), use_color: false, neighbor_pooling: true }
    }
}

impl ModelSpec {
    pub fn mlp(hidden: &[usize]) -> Self {
        ModelSpec::Mlp { hidden: hidden.to_vec(), use_color: false, neighbor_pooling: true }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Mlp { hidden, .. } => {
                if hidden.is_empty() || hidden.contains(&0) {
                    return Err(Error::InvalidArgument("hidden widths must be non-empty and >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Fresh model with random hidden layers and a zero output layer.
    pub fn build(&self, num_classes: usize, seed: u64) -> Result<Box<dyn SegmentationModel>> {
        self.validate()?;
        if num_classes < 1 {
            return Err(Error::InvalidArgument("num_classes must be >= 1".into()));
        }
        match self {
            ModelSpec::Mlp { .. } => Ok(Box::new(Mlp::new(self.clone(), num_classes, seed)?)),
        }
    }
}

/// Compact form `mlp:64,64`, with optional `+color` and `+nopool` flags.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let mut parts = s.split('+');
        let head = parts.next().unwrap_or_default();
        let (kind, widths) = head.split_once(':').unwrap_or((head, "64,64"));
        if kind != "mlp" {
            return Err(Error::Config(format!("unknown model kind {kind:?}")));
        }
        let hidden = widths
            .split(',')
            .map(|w| w.trim().parse::<usize>().map_err(|e| Error::Config(format!("bad width {w:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let (mut use_color, mut neighbor_pooling) = (false, true);
        for flag in parts {
            match flag {
                "color" => use_color = true,
                "nopool" => neighbor_pooling = false,
                other => return Err(Error::Config(format!("unknown model flag {other:?}"))),
            }
        }
        let spec = ModelSpec::Mlp { hidden, use_color, neighbor_pooling };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Mlp { hidden, use_color, neighbor_pooling } => {
                let w: Vec<String> = hidden.iter().map(usize::to_string).collect();
                write!(f, "mlp:{}", w.join(","))?;
                if *use_color {
                    f.write_str("+color")?;
                }
                if !neighbor_pooling {
                    f.write_str("+nopool")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_strings_roundtrip() {
        for s in ["mlp:64,64", "mlp:8+color", "mlp:16,4+nopool", "mlp:3+color+nopool"] {
            let spec: ModelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!("mlp".parse::<ModelSpec>().unwrap(), ModelSpec::default());
        assert!("mlp:0".parse::<ModelSpec>().is_err());
        assert!("cnn:4".parse::<ModelSpec>().is_err());
        let json = serde_json::to_string(&ModelSpec::mlp(&[5])).unwrap();
        assert_eq!(json.parse::<ModelSpec>().unwrap(), ModelSpec::mlp(&[5]));
    }
}
