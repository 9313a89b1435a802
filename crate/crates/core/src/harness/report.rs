use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Strategy;
use super::experiment::PreparedData;
use super::metrics::mean_std;
use crate::acquisition::Granularity;
use crate::error::Result;

/// Version of the CSV column layout and the JSON summary schema.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One evaluated milestone of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Sweep value or run name; empty for a plain run.
    pub label: String,
    pub strategy: Strategy,
    pub granularity: Granularity,
    pub seed: u64,
    pub milestone: usize,
    pub spent: usize,
    pub labeled_units: usize,
    pub miou: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub instance_miou: Option<f64>,
    /// Fraction of labeled points whose recorded label differs from the truth.
    pub label_noise: f64,
    /// Majority-label noise of the training partitions.
    pub partition_noise: f64,
    /// Mean within-super-point posterior spread on the test split.
    pub sp_variance: f64,
    /// Selection, training and evaluation time of this milestone. Kept out of
    /// the CSV so that reports of identical runs compare byte for byte.
    pub wall_time_s: f64,
}

/// Rows of one or more runs plus the class vocabulary they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub num_classes: usize,
    pub class_names: Option<Vec<String>>,
    pub rows: Vec<ReportRow>,
}

/// Aggregate over seeds of one `(label, strategy, granularity, milestone)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub strategy: Strategy,
    pub granularity: Granularity,
    pub milestone: usize,
    pub seeds: usize,
    pub spent_mean: f64,
    pub labeled_units_mean: f64,
    pub miou_mean: f64,
    pub miou_std: f64,
    pub instance_miou_mean: Option<f64>,
    pub label_noise_mean: f64,
    pub partition_noise_mean: f64,
    pub sp_variance_mean: f64,
    pub wall_time_mean_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub class_names: Option<Vec<String>>,
    pub groups: Vec<SummaryRow>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

impl Report {
    pub fn new(prep: &PreparedData, rows: Vec<ReportRow>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            num_classes: prep.num_classes(),
            class_names: prep.dataset.class_names().map(<[String]>::to_vec),
            rows,
        }
    }

    /// Appends the rows of another report over the same classes.
    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }

    fn class_column(&self, c: usize) -> String {
        match &self.class_names {
            Some(names) => format!("iou_{}", names[c]),
            None => format!("iou_{c}"),
        }
    }

    /// CSV with one row per (label, strategy, seed, milestone). Columns:
    /// `label, strategy, granularity, seed, milestone, spent, labeled_units,
    /// miou, instance_miou, label_noise, partition_noise, sp_variance`, then
    /// one IoU column per class. Missing values are empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "label",
            "strategy",
            "granularity",
            "seed",
            "milestone",
            "spent",
            "labeled_units",
            "miou",
            "instance_miou",
            "label_noise",
            "partition_noise",
            "sp_variance",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((0..self.num_classes).map(|c| self.class_column(c)));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.label.clone(),
                r.strategy.to_string(),
                r.granularity.to_string(),
                r.seed.to_string(),
                r.milestone.to_string(),
                r.spent.to_string(),
                r.labeled_units.to_string(),
                fmt_f(r.miou),
                r.instance_miou.map(fmt_f).unwrap_or_default(),
                fmt_f(r.label_noise),
                fmt_f(r.partition_noise),
                fmt_f(r.sp_variance),
            ];
            rec.extend(r.per_class_iou.iter().map(|v| v.map(fmt_f).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Groups in order of first appearance.
    pub fn summary(&self) -> Summary {
        let mut keys: Vec<(&str, Strategy, Granularity, usize)> = Vec::new();
        for r in &self.rows {
            let key = (r.label.as_str(), r.strategy, r.granularity, r.milestone);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let groups = keys
            .into_iter()
            .map(|(label, strategy, granularity, milestone)| {
                let rows: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.label == label && r.strategy == strategy && r.granularity == granularity && r.milestone == milestone
                    })
                    .collect();
                let mious: Vec<f64> = rows.iter().map(|r| r.miou).collect();
                let (miou_mean, miou_std) = mean_std(&mious);
                let inst: Vec<f64> = rows.iter().filter_map(|r| r.instance_miou).collect();
                SummaryRow {
                    label: label.to_string(),
                    strategy,
                    granularity,
                    milestone,
                    seeds: rows.len(),
                    spent_mean: mean(rows.iter().map(|r| r.spent as f64)),
                    labeled_units_mean: mean(rows.iter().map(|r| r.labeled_units as f64)),
                    miou_mean,
                    miou_std,
                    instance_miou_mean: (!inst.is_empty()).then(|| mean(inst.into_iter())),
                    label_noise_mean: mean(rows.iter().map(|r| r.label_noise)),
                    partition_noise_mean: mean(rows.iter().map(|r| r.partition_noise)),
                    sp_variance_mean: mean(rows.iter().map(|r| r.sp_variance)),
                    wall_time_mean_s: mean(rows.iter().map(|r| r.wall_time_s)),
                }
            })
            .collect();
        Summary { schema_version: self.schema_version, class_names: self.class_names.clone(), groups }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }

    /// Writes `report.csv` and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;
        Ok(())
    }

    /// Per-seed mIoU at the last milestone of the rows matching `label` and `strategy`.
    pub fn final_miou(&self, label: &str, strategy: Strategy) -> Vec<f64> {
        self.final_values(label, strategy, |r| r.miou)
    }

    /// Per-seed value at the last milestone of the matching rows, in row order.
    pub fn final_values(&self, label: &str, strategy: Strategy, value: impl Fn(&ReportRow) -> f64) -> Vec<f64> {
        let matching = || self.rows.iter().filter(|r| r.label == label && r.strategy == strategy);
        let Some(last) = matching().map(|r| r.milestone).max() else {
            return Vec::new();
        };
        matching().filter(|r| r.milestone == last).map(value).collect()
    }
}
