//! Point-cloud data model, on-disk formats, synthetic shapes and scene blocks.

mod binary;
mod blocks;
mod manifest;
pub mod synth;
mod text;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blocks::split_blocks;
pub use manifest::{load_dataset, save_dataset, Manifest, ManifestEntry, MANIFEST_FILE};
pub use synth::{generate_synthetic, Primitive, SynthPart, SynthSample, SynthSpec};
pub use text::{parse_text_sample, write_text_sample};
pub use binary::{read_binary_sample, write_binary_sample, BINARY_MAGIC};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Binary,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Binary => "spal",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(Format::Text),
            "binary" | "bin" | "spal" => Ok(Format::Binary),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// One shape or scene block. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    id: String,
    points: Vec<Point3>,
    colors: Option<Vec<Point3>>,
    labels: Vec<u32>,
    category: Option<u32>,
}

impl PointCloud {
    pub fn new(
        id: impl Into<String>,
        points: Vec<Point3>,
        colors: Option<Vec<Point3>>,
        labels: Vec<u32>,
        category: Option<u32>,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "sample id {id:?} must be non-empty without whitespace"
            )));
        }
        if points.is_empty() {
            return Err(Error::EmptySample(id));
        }
        if labels.len() != points.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                got: labels.len(),
                expected: points.len(),
            });
        }
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(Error::LengthMismatch {
                    what: "colors",
                    got: c.len(),
                    expected: points.len(),
                });
            }
            if c.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!(
                    "{id}: color components must lie in [0, 1]"
                )));
            }
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{id}: non-finite coordinate")));
        }
        Ok(Self {
            id,
            points,
            colors,
            labels,
            category,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[Point3]> {
        self.colors.as_deref()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn category(&self) -> Option<u32> {
        self.category
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same sample with replaced coordinates (labels and colors kept).
    pub fn with_points(&self, points: Vec<Point3>) -> Result<Self> {
        Self::new(
            self.id.clone(),
            points,
            self.colors.clone(),
            self.labels.clone(),
            self.category,
        )
    }

    /// Same sample with replaced labels.
    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Self> {
        Self::new(
            self.id.clone(),
            self.points.clone(),
            self.colors.clone(),
            labels,
            self.category,
        )
    }

    /// Gathers the given point indices (repeats allowed) into a new sample.
    pub fn gather(&self, id: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let colors = self
            .colors
            .as_ref()
            .map(|c| indices.iter().map(|&i| c[i]).collect());
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(id, points, colors, labels, self.category)
    }

    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Centers the bounding box at the origin and scales its longest side to 1.
    pub fn normalized_unit_box(&self) -> Self {
        let (lo, hi) = self.bounding_box();
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let scale = if extent > 0.0 { 1.0 / extent } else { 1.0 };
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let points = self
            .points
            .iter()
            .map(|p| {
                [
                    (p[0] - center[0]) * scale,
                    (p[1] - center[1]) * scale,
                    (p[2] - center[2]) * scale,
                ]
            })
            .collect();
        Self {
            points,
            ..self.clone()
        }
    }
}

/// A collection of samples sharing one class vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<PointCloud>,
    splits: Vec<Split>,
    num_classes: usize,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        samples: Vec<PointCloud>,
        splits: Vec<Split>,
        num_classes: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be >= 1".into()));
        }
        if splits.len() != samples.len() {
            return Err(Error::LengthMismatch {
                what: "splits",
                got: splits.len(),
                expected: samples.len(),
            });
        }
        if let Some(names) = &class_names {
            if names.len() != num_classes {
                return Err(Error::LengthMismatch {
                    what: "class_names",
                    got: names.len(),
                    expected: num_classes,
                });
            }
        }
        let mut seen = HashSet::new();
        for s in &samples {
            if !seen.insert(s.id()) {
                return Err(Error::DuplicateId(s.id().to_string()));
            }
            if let Some(&label) = s.labels().iter().find(|&&l| l as usize >= num_classes) {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes,
                    context: s.id().to_string(),
                });
            }
        }
        Ok(Self {
            samples,
            splits,
            num_classes,
            class_names,
        })
    }

    /// All samples in the training split.
    pub fn train_only(samples: Vec<PointCloud>, num_classes: usize) -> Result<Self> {
        let splits = vec![Split::Train; samples.len()];
        Self::new(samples, splits, num_classes, None)
    }

    pub fn samples(&self) -> &[PointCloud] {
        &self.samples
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_points(&self) -> usize {
        self.samples.iter().map(PointCloud::len).sum()
    }

    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = &PointCloud> {
        self.samples
            .iter()
            .zip(&self.splits)
            .filter(move |(_, s)| **s == split)
            .map(|(c, _)| c)
    }

    /// Sub-dataset holding only the given split.
    pub fn subset(&self, split: Split) -> Result<Self> {
        let samples: Vec<_> = self.iter_split(split).cloned().collect();
        let splits = vec![split; samples.len()];
        Self::new(samples, splits, self.num_classes, self.class_names.clone())
    }

    /// Every sample mapped through [`PointCloud::normalized_unit_box`].
    pub fn normalized(&self) -> Self {
        Self {
            samples: self.samples.iter().map(PointCloud::normalized_unit_box).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".into())
}
