//! Click-cost accounting, acquisition scores and budgeted query selection.

mod catalog;
mod pool;
mod scores;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use catalog::{click_cost, UnitCatalog};
pub use pool::{oracle_label, read_pool, write_pool, LabelPool, LabeledUnit, UnitLabels, POOL_HEADER};
pub use scores::{
    al_score, diversity_score, entropy, pooled_feature, score_candidates, shape_diversity_score,
    uncertainty_score, AcquisitionScore, PoolingMode, ScoreConfig, Scorer,
};
pub use select::{rank_candidates, select_greedy, select_query, select_random};

use crate::error::Error;

/// The unit of selection and labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Point,
    #[serde(alias = "super-point", alias = "super_point")]
    SuperPoint,
    Shape,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "point" => Ok(Self::Point),
            "superpoint" | "super-point" | "super_point" => Ok(Self::SuperPoint),
            "shape" => Ok(Self::Shape),
            other => Err(Error::UnknownGranularity(other.to_string())),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Point => "point",
            Self::SuperPoint => "superpoint",
            Self::Shape => "shape",
        })
    }
}

/// A point, super-point or whole sample, addressed by dataset sample index and
/// an index within the sample (always 0 for shapes). Orders by sample first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitId {
    pub sample: u32,
    pub index: u32,
}

impl UnitId {
    pub fn new(sample: usize, index: usize) -> Self {
        Self { sample: sample as u32, index: index as u32 }
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sample, self.index)
    }
}
