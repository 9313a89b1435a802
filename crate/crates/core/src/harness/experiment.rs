use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Strategy};
use super::metrics::{instance_miou, miou, superpoint_posterior_variance, Miou};
use super::report::{Report, ReportRow};
use crate::acquisition::{
    score_candidates, select_greedy, select_query, select_random, LabelPool, Scorer, UnitCatalog,
};
use crate::error::{Error, Result};
use crate::geomfeat::{compute_features, knn, GeometricFeatureSet, NeighborGraph};
use crate::model::{train, ModelOutput, ModelSpec, SampleContext, SegmentationModel, TrainItem};
use crate::pcio::{self, generate_synthetic, Dataset, Split};
use crate::rng::{derive_seed, stream};
use crate::superpoint::{build_affinity, normalized_cut, noise_rate, read_partition, SuperPointPartition};

const TAG_INIT: u64 = 0x494e4954;
const TAG_SELECT: u64 = 0x53454c;
const TAG_MODEL: u64 = 0x4d4f44;
const TAG_TRAIN: u64 = 0x5452;

/// Loads or generates the dataset named by `cfg.data`.
pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    if let Some(spec) = &cfg.data.synthetic {
        return generate_synthetic(spec, cfg.data.synthetic_seed);
    }
    let path = cfg.data.path.as_ref().ok_or_else(|| Error::Config("no data source".into()))?;
    let ds = pcio::load_dataset(path, cfg.data.format, cfg.data.num_classes)?;
    Ok(if cfg.data.normalize { ds.normalized() } else { ds })
}

/// A dataset with everything the loop needs precomputed: kNN graphs,
/// geometric descriptors and one super-point partition per sample.
/// Experiments additionally require non-empty train and test splits.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub graphs: Vec<NeighborGraph>,
    pub features: Vec<GeometricFeatureSet>,
    pub partitions: Vec<SuperPointPartition>,
    train: Vec<usize>,
    test: Vec<usize>,
}

/// kNN graph and descriptors of every sample.
pub fn neighborhoods(dataset: &Dataset, k: usize) -> Result<(Vec<NeighborGraph>, Vec<GeometricFeatureSet>)> {
    let pairs: Vec<(NeighborGraph, GeometricFeatureSet)> = dataset
        .samples()
        .par_iter()
        .map(|c| {
            let g = knn(c, k)?;
            let f = compute_features(c, &g)?;
            Ok((g, f))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Partitions every sample into `min(K, N)` super-points.
pub fn compute_partitions(
    dataset: &Dataset,
    graphs: &[NeighborGraph],
    features: &[GeometricFeatureSet],
    cfg: &ExperimentConfig,
) -> Result<Vec<SuperPointPartition>> {
    let params = cfg.affinity();
    (0..dataset.len())
        .into_par_iter()
        .map(|s| {
            let cloud = &dataset.samples()[s];
            let a = build_affinity(cloud, &features[s], &graphs[s], &params)?;
            normalized_cut(&a, cfg.k_clusters.min(cloud.len()), derive_seed(cfg.partition_seed, &[s as u64]))
        })
        .collect()
}

/// Reads `<dir>/<sample id>.part` for every sample.
pub fn load_partitions(dir: &Path, dataset: &Dataset) -> Result<Vec<SuperPointPartition>> {
    dataset
        .samples()
        .iter()
        .map(|c| {
            let path = dir.join(format!("{}.part", c.id()));
            read_partition(&std::fs::read_to_string(&path)?, c.len())
        })
        .collect()
}

impl PreparedData {
    /// Computes graphs and descriptors, then loads partitions from
    /// `cfg.data.partitions` or clusters on demand.
    pub fn new(dataset: Dataset, cfg: &ExperimentConfig) -> Result<Self> {
        let (graphs, features) = neighborhoods(&dataset, cfg.k)?;
        let partitions = match &cfg.data.partitions {
            Some(dir) => load_partitions(dir, &dataset)?,
            None => compute_partitions(&dataset, &graphs, &features, cfg)?,
        };
        Self::from_parts(dataset, graphs, features, partitions)
    }

    pub fn from_parts(
        dataset: Dataset,
        graphs: Vec<NeighborGraph>,
        features: Vec<GeometricFeatureSet>,
        partitions: Vec<SuperPointPartition>,
    ) -> Result<Self> {
        let n = dataset.len();
        for (what, len) in [("graphs", graphs.len()), ("features", features.len()), ("partitions", partitions.len())] {
            if len != n {
                return Err(Error::LengthMismatch { what, got: len, expected: n });
            }
        }
        for (s, c) in dataset.samples().iter().enumerate() {
            if graphs[s].len() != c.len() || features[s].len() != c.len() || partitions[s].len() != c.len() {
                return Err(Error::LengthMismatch {
                    what: "per-sample precomputation",
                    got: partitions[s].len(),
                    expected: c.len(),
                });
            }
        }
        let by_split = |want: Split| -> Vec<usize> {
            dataset.splits().iter().enumerate().filter(|(_, &s)| s == want).map(|(i, _)| i).collect()
        };
        let (train, test) = (by_split(Split::Train), by_split(Split::Test));
        Ok(Self { dataset, graphs, features, partitions, train, test })
    }

    /// Same samples and descriptors with partitions recomputed for `cfg`.
    pub fn repartition(&self, cfg: &ExperimentConfig) -> Result<Self> {
        let partitions = compute_partitions(&self.dataset, &self.graphs, &self.features, cfg)?;
        Self::from_parts(self.dataset.clone(), self.graphs.clone(), self.features.clone(), partitions)
    }

    pub fn train_samples(&self) -> &[usize] {
        &self.train
    }

    pub fn test_samples(&self) -> &[usize] {
        &self.test
    }

    pub fn num_classes(&self) -> usize {
        self.dataset.num_classes()
    }

    pub fn context(&self, s: usize) -> SampleContext<'_> {
        let c = &self.dataset.samples()[s];
        SampleContext {
            points: c.points(),
            colors: c.colors(),
            geometric: &self.features[s].features,
            neighbors: &self.graphs[s],
        }
    }

    /// Catalog over the training split; test samples are never candidates.
    pub fn catalog(&self, cfg: &ExperimentConfig) -> Result<UnitCatalog<'_>> {
        UnitCatalog::new(
            cfg.granularity,
            self.dataset.samples(),
            Some(&self.partitions),
            self.train.clone(),
            cfg.shape_cost,
        )
    }

    /// Majority-label noise of the training partitions.
    pub fn partition_noise(&self) -> Result<f64> {
        let clouds: Vec<_> = self.train.iter().map(|&s| self.dataset.samples()[s].clone()).collect();
        let parts: Vec<_> = self.train.iter().map(|&s| self.partitions[s].clone()).collect();
        noise_rate(&clouds, &parts)
    }
}

/// Training items for every sample holding at least one label. A
/// super-point counts as labeled when any of its points carries a label.
pub fn train_items<'a>(
    prep: &'a PreparedData,
    catalog: &UnitCatalog,
    pool: &LabelPool,
    with_partitions: bool,
) -> Vec<TrainItem<'a>> {
    let mut samples: Vec<usize> = pool.labeled_samples().collect();
    samples.sort_unstable();
    samples.dedup();
    samples
        .into_iter()
        .map(|s| {
            let targets = pool.targets(s, catalog);
            let partition = &prep.partitions[s];
            let mut labeled_clusters = vec![false; partition.k()];
            for &(i, _) in &targets {
                labeled_clusters[partition.cluster_of(i as usize)] = true;
            }
            TrainItem {
                ctx: prep.context(s),
                targets,
                partition: with_partitions.then_some(partition),
                labeled_clusters,
            }
        })
        .collect()
}

/// A freshly initialised model trained on the current pool; untrained when
/// the pool is empty.
pub fn fit_model(
    prep: &PreparedData,
    catalog: &UnitCatalog,
    pool: &LabelPool,
    spec: &ModelSpec,
    cfg: &ExperimentConfig,
    seed: u64,
    round: u64,
) -> Result<Box<dyn SegmentationModel>> {
    let mut model = spec.build(prep.num_classes(), derive_seed(seed, &[TAG_MODEL, round]))?;
    let items = train_items(prep, catalog, pool, cfg.lambda_nc > 0.0);
    if items.iter().any(|it| !it.targets.is_empty()) {
        let stats = train(model.as_mut(), &items, &cfg.train_config(derive_seed(seed, &[TAG_TRAIN, round])))?;
        log::debug!("seed {seed} round {round}: {} items, final loss {:.4}", items.len(), stats.final_loss);
    }
    Ok(model)
}

/// Model outputs for `samples`, indexed by dataset sample.
pub fn model_outputs(
    prep: &PreparedData,
    model: &dyn SegmentationModel,
    samples: &[usize],
) -> Result<Vec<Option<ModelOutput>>> {
    let computed: Vec<(usize, ModelOutput)> = samples
        .par_iter()
        .map(|&s| Ok((s, model.forward(&prep.context(s))?)))
        .collect::<Result<_>>()?;
    let mut out = vec![None; prep.dataset.len()];
    for (s, o) in computed {
        out[s] = Some(o);
    }
    Ok(out)
}

/// Test-split quality of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub miou: Miou,
    pub instance_miou: f64,
    pub sp_variance: f64,
}

/// Evaluates on the test split; the only place test labels are read.
pub fn evaluate_model(prep: &PreparedData, model: &dyn SegmentationModel) -> Result<Evaluation> {
    evaluate_samples(prep, model, &prep.test)
}

/// Evaluation over an arbitrary set of samples.
pub fn evaluate_samples(prep: &PreparedData, model: &dyn SegmentationModel, samples: &[usize]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluation samples"));
    }
    let outputs = model_outputs(prep, model, samples)?;
    let c = prep.num_classes();
    let mut preds = Vec::new();
    let mut gt = Vec::new();
    let mut per_shape = Vec::with_capacity(samples.len());
    let mut variance = 0.0;
    for &s in samples {
        let out = outputs[s].as_ref().expect("output computed for every test sample");
        let p = out.predictions();
        let labels = prep.dataset.samples()[s].labels();
        preds.extend_from_slice(&p);
        gt.extend_from_slice(labels);
        per_shape.push((p, labels));
        variance += superpoint_posterior_variance(out, &prep.partitions[s])?;
    }
    let shapes: Vec<(&[u32], &[u32])> = per_shape.iter().map(|(p, g)| (p.as_slice(), *g)).collect();
    Ok(Evaluation {
        miou: miou(&preds, &gt, c)?,
        instance_miou: instance_miou(&shapes, c)?,
        sp_variance: variance / samples.len() as f64,
    })
}

/// The strategy-independent random initial pool of one seed.
pub fn initial_pool(catalog: &UnitCatalog, init_budget: usize, seed: u64) -> Result<LabelPool> {
    let mut pool = LabelPool::new(catalog.granularity(), init_budget);
    if init_budget >= catalog.min_cost() {
        select_random(usize::MAX, &mut pool, catalog, &mut stream(seed, &[TAG_INIT]))?;
    }
    Ok(pool)
}

/// Fills the pool up to its budget using `strategy`, querying in batches of
/// `cfg.n_query` units and refitting the selector between batches.
fn fill_to_budget(
    prep: &PreparedData,
    catalog: &UnitCatalog,
    pool: &mut LabelPool,
    cfg: &ExperimentConfig,
    plan: &RunPlan,
    seed: u64,
    round: u64,
    selector: &mut Option<Box<dyn SegmentationModel>>,
) -> Result<()> {
    let n_query = cfg.n_query.unwrap_or(usize::MAX);
    let score_cfg = cfg.score_config(plan.strategy);
    for step in 0u64.. {
        if pool.len() >= catalog.unit_count() || pool.remaining() < catalog.min_cost() {
            break;
        }
        let picked = if plan.strategy == Strategy::Random {
            select_random(n_query, pool, catalog, &mut stream(seed, &[TAG_SELECT, round, step]))?
        } else {
            if step > 0 {
                *selector = Some(fit_model(prep, catalog, pool, plan.selector, cfg, seed, 1000 * round + step)?);
            }
            let model = selector.as_deref().expect("selector trained before selection");
            let outputs = model_outputs(prep, model, &prep.train)?;
            if cfg.greedy_recompute {
                let mut scorer = Scorer::new(catalog, pool, &outputs, &score_cfg)?;
                select_greedy(&mut scorer, n_query, pool, catalog)?
            } else {
                let scores = score_candidates(catalog, pool, &outputs, &score_cfg)?;
                select_query(&scores, n_query, pool, catalog)?
            }
        };
        if picked.is_empty() || cfg.n_query.is_none() {
            break;
        }
    }
    Ok(())
}

/// Which models drive selection and final training, and the row label.
#[derive(Debug, Clone)]
pub struct RunPlan<'a> {
    pub label: String,
    pub strategy: Strategy,
    pub selector: &'a ModelSpec,
    pub trainee: &'a ModelSpec,
}

fn run_seed(prep: &PreparedData, cfg: &ExperimentConfig, plan: &RunPlan, seed: u64) -> Result<Vec<ReportRow>> {
    let catalog = prep.catalog(cfg)?;
    let schedule = cfg.schedule(catalog.total_points())?;
    let last = *schedule.milestones.last().unwrap();
    if last < catalog.min_cost() {
        return Err(Error::BudgetTooSmall { budget: last, min_cost: catalog.min_cost() });
    }
    let partition_noise = prep.partition_noise()?;
    let mut pool = initial_pool(&catalog, schedule.init_budget, seed)?;
    let same_model = plan.selector == plan.trainee;
    let mut selector = if plan.strategy.needs_model() {
        Some(fit_model(prep, &catalog, &pool, plan.selector, cfg, seed, 0)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(schedule.milestones.len());
    for (m, &milestone) in schedule.milestones.iter().enumerate() {
        let started = Instant::now();
        let round = m as u64 + 1;
        pool.set_budget(milestone)?;
        fill_to_budget(prep, &catalog, &mut pool, cfg, plan, seed, round, &mut selector)?;
        let reads = catalog.outside_label_reads();
        if reads > 0 {
            return Err(Error::TestLabelAccess(reads));
        }
        let model = fit_model(prep, &catalog, &pool, plan.trainee, cfg, seed, round)?;
        let eval = evaluate_model(prep, model.as_ref())?;
        let (noisy, total) = pool.label_noise(&catalog);
        if plan.strategy.needs_model() {
            selector = Some(if same_model {
                model
            } else {
                fit_model(prep, &catalog, &pool, plan.selector, cfg, seed, round)?
            });
        }
        log::info!(
            "{} {} seed {seed}: milestone {milestone}, spent {}, mIoU {:.4}",
            plan.label,
            plan.strategy,
            pool.spent(),
            eval.miou.miou
        );
        rows.push(ReportRow {
            label: plan.label.clone(),
            strategy: plan.strategy,
            granularity: cfg.granularity,
            seed,
            milestone,
            spent: pool.spent(),
            labeled_units: pool.len(),
            miou: eval.miou.miou,
            per_class_iou: eval.miou.per_class,
            instance_miou: cfg.instance_miou.then_some(eval.instance_miou),
            label_noise: if total == 0 { 0.0 } else { noisy as f64 / total as f64 },
            partition_noise,
            sp_variance: eval.sp_variance,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// Runs `plan` for every configured seed; rows come back ordered by seed
/// position, then milestone.
pub fn run_plan(prep: &PreparedData, cfg: &ExperimentConfig, plan: &RunPlan) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    if prep.test.is_empty() {
        return Err(Error::MissingTestSplit);
    }
    if prep.train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let per_seed: Vec<Vec<ReportRow>> =
        cfg.seeds.par_iter().map(|&seed| run_seed(prep, cfg, plan, seed)).collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// [`run_experiment`] on already prepared data.
pub fn run_prepared(prep: &PreparedData, cfg: &ExperimentConfig) -> Result<Report> {
    let plan = RunPlan { label: String::new(), strategy: cfg.strategy, selector: &cfg.model, trainee: &cfg.model };
    Ok(Report::new(prep, run_plan(prep, cfg, &plan)?))
}

/// The full active-learning loop for every seed in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let prep = PreparedData::new(load_data(cfg)?, cfg)?;
    run_prepared(&prep, cfg)
}
