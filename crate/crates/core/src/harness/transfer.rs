use super::config::{ExperimentConfig, Strategy};
use super::experiment::{run_plan, PreparedData, RunPlan};
use super::report::Report;
use crate::error::Result;
use crate::model::ModelSpec;

pub const TRANSFER_LABEL: &str = "transfer";
pub const BASELINE_LABEL: &str = "random";

/// Pools chosen with `selector` under `cfg.strategy`, then trained and
/// evaluated with `trainee`; rows labeled `transfer`. Rows labeled `random`
/// train `trainee` on randomly selected pools with the same seeds.
pub fn transfer(prep: &PreparedData, cfg: &ExperimentConfig, selector: &ModelSpec, trainee: &ModelSpec) -> Result<Report> {
    selector.validate()?;
    trainee.validate()?;
    let chosen = RunPlan { label: TRANSFER_LABEL.into(), strategy: cfg.strategy, selector, trainee };
    let random = RunPlan { label: BASELINE_LABEL.into(), strategy: Strategy::Random, selector: trainee, trainee };
    let mut rows = run_plan(prep, cfg, &chosen)?;
    rows.extend(run_plan(prep, cfg, &random)?);
    Ok(Report::new(prep, rows))
}
