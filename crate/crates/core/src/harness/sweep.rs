use rayon::prelude::*;

use super::config::{ExperimentConfig, SweepAxis};
use super::experiment::{run_plan, PreparedData, RunPlan};
use super::report::Report;
use crate::error::{Error, Result};

/// Row label of one sweep value, e.g. `delta=0.5`.
pub fn sweep_label(axis: SweepAxis, value: f64) -> String {
    format!("{axis}={value}")
}

/// One run per value of `axis`, all with the same seeds. Partitions are
/// recomputed only when the axis is `K`.
pub fn sweep(prep: &PreparedData, cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Report> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs: Vec<ExperimentConfig> = values.iter().map(|&v| axis.apply(cfg, v)).collect::<Result<_>>()?;
    let parts: Vec<Vec<_>> = configs
        .par_iter()
        .zip(values)
        .map(|(c, &v)| {
            let repartitioned;
            let data = if axis == SweepAxis::K {
                repartitioned = prep.repartition(c)?;
                &repartitioned
            } else {
                prep
            };
            let plan = RunPlan { label: sweep_label(axis, v), strategy: c.strategy, selector: &c.model, trainee: &c.model };
            run_plan(data, c, &plan)
        })
        .collect::<Result<_>>()?;
    Ok(Report::new(prep, parts.into_iter().flatten().collect()))
}
