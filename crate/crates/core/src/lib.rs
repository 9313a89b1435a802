//! Super-point active learning for point-cloud semantic segmentation.
//!
//! The crate is organised along the pipeline:
//!
//! * [`pcio`]: point-cloud data model, file formats, synthetic shapes, scene blocks.
//! * [`geomfeat`]: exact kNN graphs, local covariance eigenvalues and the
//!   linearity / planarity / scatterness descriptors.
//! * [`superpoint`]: affinity graphs, recursive normalized-cut clustering and
//!   majority-label oracle bookkeeping.
//! * [`model`]: the pluggable segmentation model contract, a built-in per-point
//!   MLP, cross-entropy plus nuclear-norm consistency training and augmentation.
//! * [`acquisition`]: click-cost accounting, diversity / entropy / shape-diversity
//!   scoring and budgeted query selection.
//! * [`harness`]: the end-to-end active-learning loop, metrics, sweeps and reports.

pub mod acquisition;
pub mod error;
pub mod geomfeat;
pub mod harness;
pub mod model;
pub mod pcio;
pub mod rng;
pub mod superpoint;

pub use error::{Error, Result};
pub use pcio::{Dataset, PointCloud, Split};

pub mod prelude {
    pub use crate::acquisition::{
        AcquisitionScore, Granularity, LabelPool, ScoreConfig, UnitCatalog, UnitId,
    };
    pub use crate::error::{Error, Result};
    pub use crate::geomfeat::{GeometricFeatureSet, NeighborGraph};
    pub use crate::harness::{ExperimentConfig, Report, Strategy};
    pub use crate::model::{ModelOutput, ModelSpec, SampleContext, SegmentationModel, TrainConfig};
    pub use crate::pcio::{Dataset, PointCloud, Split};
    pub use crate::superpoint::{AffinityGraph, AffinityParams, SuperPointPartition};
}
