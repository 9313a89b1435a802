use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spal_core::acquisition::{
    read_pool, score_candidates, select_greedy, select_query, write_pool, Granularity, LabelPool, PoolingMode,
    ScoreConfig, Scorer,
};
use spal_core::geomfeat::{compute_features, knn, write_feature_cache};
use spal_core::harness::{
    evaluate_samples, initial_pool, load_data, model_outputs, run_prepared, sweep, train_items, transfer,
    ExperimentConfig, PreparedData, Report, SweepAxis,
};
use spal_core::model::{read_checkpoint, train, write_checkpoint, ModelSpec, NuclearScope, TrainConfig};
use spal_core::pcio::{generate_synthetic, load_dataset, save_dataset, split_blocks, Format, SynthSpec};
use spal_core::superpoint::{noise_rate, write_partition, SuperPointPartition};
use spal_core::Dataset;

#[derive(Parser)]
#[command(name = "spal", version, about = "Super-point active learning for point-cloud segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a TOML or JSON spec.
    GenSynth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Cut one scene file into fixed-size blocks.
    SplitBlocks {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        block_size: f64,
        #[arg(long)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long, default_value = "text")]
        format: Format,
    },
    /// Write per-sample geometric feature caches (`<id>.feat`).
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition every sample into super-points (`<id>.part`).
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 500)]
        k_clusters: usize,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the majority-label noise rate of a set of partitions.
    NoiseRate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        partitions: PathBuf,
    },
    /// Write a randomly initialised label pool.
    InitPool {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        partitions: Option<PathBuf>,
        #[arg(long, default_value = "superpoint")]
        granularity: Granularity,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the labels of a pool and write a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        partitions: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        lambda_nc: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "mlp:64,64")]
        model: ModelSpec,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Score unlabeled units with a trained model and add the best to a pool.
    Select {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        partitions: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long)]
        n_query: usize,
        /// Raise the pool budget to this many clicks before selecting.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        greedy_recompute: bool,
        #[arg(long)]
        raw_scores: bool,
        #[arg(long, default_value = "mean")]
        superpoint_pooling: PoolingMode,
        #[arg(long, default_value = "max")]
        shape_pooling: PoolingMode,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Where to write the updated pool; defaults to overwriting `--pool`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report mIoU of a checkpoint on the test split (all samples if none).
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        partitions: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Run the active-learning loop described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Repeat a run for several values of one hyperparameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Select with one model, train and evaluate another.
    Transfer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        selector: ModelSpec,
        #[arg(long)]
        trainee: ModelSpec,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory with a manifest, or a single sample file.
    #[arg(long = "data", visible_alias = "in")]
    path: PathBuf,
    #[arg(long, default_value = "text")]
    format: Format,
    #[arg(long)]
    num_classes: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.path, self.format, self.num_classes)
            .with_context(|| format!("loading {}", self.path.display()))
    }

    /// Loads the data with neighbourhoods and partitions. Without a
    /// partition directory every point is its own super-point.
    fn prepare(&self, partitions: Option<&Path>, k: usize) -> Result<PreparedData> {
        let dataset = self.load()?;
        let mut cfg = ExperimentConfig::default();
        cfg.data.path = Some(self.path.clone());
        cfg.k = k;
        match partitions {
            Some(dir) => {
                cfg.data.partitions = Some(dir.to_path_buf());
                Ok(PreparedData::new(dataset, &cfg)?)
            }
            None => {
                let (graphs, features) = spal_core::harness::neighborhoods(&dataset, k)?;
                let singletons = dataset
                    .samples()
                    .iter()
                    .map(|c| SuperPointPartition::from_assignment((0..c.len() as u32).collect()))
                    .collect::<spal_core::Result<Vec<_>>>()?;
                Ok(PreparedData::from_parts(dataset, graphs, features, singletons)?)
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long)]
    no_augment: bool,
    #[arg(long, default_value_t = 0.05)]
    g_std: f64,
    /// Restrict the consistency term to super-points without labels.
    #[arg(long)]
    unlabeled_only: bool,
}

fn sample_ids(dataset: &Dataset) -> Vec<&str> {
    dataset.samples().iter().map(|c| c.id()).collect()
}

fn read_pool_file(path: &Path, dataset: &Dataset) -> Result<LabelPool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading pool {}", path.display()))?;
    Ok(read_pool(&text, &sample_ids(dataset))?)
}

fn load_model(path: &Path) -> Result<Box<dyn spal_core::model::SegmentationModel>> {
    let bytes = fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(read_checkpoint(&bytes)?)
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn prepare_experiment(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let prep = PreparedData::new(load_data(cfg)?, cfg)?;
    log::info!(
        "{} samples ({} train, {} test), partition noise {:.2}%",
        prep.dataset.len(),
        prep.train_samples().len(),
        prep.test_samples().len(),
        100.0 * prep.partition_noise()?
    );
    Ok(prep)
}

fn finish_report(report: &Report, out: &Path) -> Result<()> {
    report.write_to(out)?;
    println!("{:<14} {:<9} {:<10} {:>9} {:>9} {:>8} {:>8}", "label", "strategy", "unit", "milestone", "spent", "mIoU", "std");
    for g in report.summary().groups {
        println!(
            "{:<14} {:<9} {:<10} {:>9} {:>9.0} {:>8.4} {:>8.4}",
            if g.label.is_empty() { "-" } else { &g.label },
            g.strategy.to_string(),
            g.granularity.to_string(),
            g.milestone,
            g.spent_mean,
            g.miou_mean,
            g.miou_std
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn read_synth_spec(path: &Path) -> Result<SynthSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenSynth { spec, seed, out, format } => {
            let ds = generate_synthetic(&read_synth_spec(&spec)?, seed)?;
            save_dataset(&ds, &out, format)?;
            println!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::SplitBlocks { input, block_size, points, out, seed, num_classes, format } => {
            let scene = load_dataset(&input, format, num_classes)?;
            let [cloud] = scene.samples() else { bail!("{} holds more than one sample", input.display()) };
            let blocks = split_blocks(cloud, block_size, points, seed, scene.num_classes())?;
            save_dataset(&blocks, &out, format)?;
            println!("wrote {} blocks to {}", blocks.len(), out.display());
        }
        Command::Features { data, k, out } => {
            let ds = data.load()?;
            fs::create_dir_all(&out)?;
            for c in ds.samples() {
                let f = compute_features(c, &knn(c, k)?)?;
                fs::write(out.join(format!("{}.feat", c.id())), write_feature_cache(&f))?;
            }
            println!("wrote {} feature files to {}", ds.len(), out.display());
        }
        Command::Cluster { data, k_clusters, gamma, k, seed, out } => {
            let ds = data.load()?;
            let cfg = ExperimentConfig { k, gamma, k_clusters, partition_seed: seed, ..Default::default() };
            let (graphs, features) = spal_core::harness::neighborhoods(&ds, k)?;
            let parts = spal_core::harness::compute_partitions(&ds, &graphs, &features, &cfg)?;
            fs::create_dir_all(&out)?;
            for (c, p) in ds.samples().iter().zip(&parts) {
                fs::write(out.join(format!("{}.part", c.id())), write_partition(p))?;
            }
            println!("noise rate {:.4}%", 100.0 * noise_rate(ds.samples(), &parts)?);
        }
        Command::NoiseRate { data, partitions } => {
            let ds = data.load()?;
            let parts = spal_core::harness::load_partitions(&partitions, &ds)?;
            println!("{:.4}%", 100.0 * noise_rate(ds.samples(), &parts)?);
        }
        Command::InitPool { data, partitions, granularity, budget, seed, out } => {
            if granularity == Granularity::SuperPoint && partitions.is_none() {
                bail!("super-point pools need --partitions");
            }
            let prep = data.prepare(partitions.as_deref(), 10)?;
            let cfg = ExperimentConfig { granularity, ..Default::default() };
            let catalog = prep.catalog(&cfg)?;
            let pool = initial_pool(&catalog, budget, seed)?;
            fs::write(&out, write_pool(&pool, &sample_ids(&prep.dataset)))?;
            println!("{} units, {} of {budget} clicks", pool.len(), pool.spent());
        }
        Command::Train { data, pool, partitions, lambda_nc, seed, out, model, train: t, k } => {
            let prep = data.prepare(partitions.as_deref(), k)?;
            let pool = read_pool_file(&pool, &prep.dataset)?;
            if pool.granularity() == Granularity::SuperPoint && partitions.is_none() {
                bail!("a super-point pool needs --partitions");
            }
            if lambda_nc > 0.0 && partitions.is_none() {
                bail!("--lambda-nc > 0 needs --partitions");
            }
            let cfg = ExperimentConfig { granularity: pool.granularity(), ..Default::default() };
            let catalog = prep.catalog(&cfg)?;
            let items = train_items(&prep, &catalog, &pool, lambda_nc > 0.0);
            if items.is_empty() {
                bail!("the pool holds no labels");
            }
            let train_cfg = TrainConfig {
                epochs: t.epochs,
                learning_rate: t.learning_rate,
                batch_size: t.batch_size,
                lambda_nc,
                nuclear_scope: if t.unlabeled_only { NuclearScope::Unlabeled } else { NuclearScope::All },
                augment: !t.no_augment,
                g_std: t.g_std,
                seed,
                ..TrainConfig::default()
            };
            let mut m = model.build(prep.num_classes(), seed)?;
            let stats = train(m.as_mut(), &items, &train_cfg)?;
            fs::write(&out, write_checkpoint(m.as_ref()))?;
            println!("trained on {} samples, final loss {:.4}; wrote {}", items.len(), stats.final_loss, out.display());
        }
        Command::Select {
            model,
            pool: pool_path,
            data,
            partitions,
            beta,
            delta,
            n_query,
            budget,
            greedy_recompute,
            raw_scores,
            superpoint_pooling,
            shape_pooling,
            k,
            out,
        } => {
            let prep = data.prepare(partitions.as_deref(), k)?;
            let mut pool = read_pool_file(&pool_path, &prep.dataset)?;
            if pool.granularity() == Granularity::SuperPoint && partitions.is_none() {
                bail!("a super-point pool needs --partitions");
            }
            if let Some(b) = budget {
                pool.set_budget(b)?;
            }
            let cfg = ExperimentConfig { granularity: pool.granularity(), ..Default::default() };
            let catalog = prep.catalog(&cfg)?;
            let m = load_model(&model)?;
            let outputs = model_outputs(&prep, m.as_ref(), prep.train_samples())?;
            let score_cfg = ScoreConfig { beta, delta, normalize: !raw_scores, superpoint_pooling, shape_pooling };
            let picked = if greedy_recompute {
                select_greedy(&mut Scorer::new(&catalog, &pool, &outputs, &score_cfg)?, n_query, &mut pool, &catalog)?
            } else {
                select_query(&score_candidates(&catalog, &pool, &outputs, &score_cfg)?, n_query, &mut pool, &catalog)?
            };
            let ids = sample_ids(&prep.dataset);
            for u in &picked {
                println!("{} {}", ids[u.sample as usize], u.index);
            }
            let out = out.unwrap_or(pool_path);
            fs::write(&out, write_pool(&pool, &ids))?;
            println!("selected {} units; {} of {} clicks spent", picked.len(), pool.spent(), pool.budget());
        }
        Command::Eval { model, data, partitions, k } => {
            let prep = data.prepare(partitions.as_deref(), k)?;
            let m = load_model(&model)?;
            let all: Vec<usize> = (0..prep.dataset.len()).collect();
            let samples = if prep.test_samples().is_empty() { &all[..] } else { prep.test_samples() };
            let e = evaluate_samples(&prep, m.as_ref(), samples)?;
            println!("samples {}", samples.len());
            println!("mIoU {:.4}", e.miou.miou);
            println!("instance mIoU {:.4}", e.instance_miou);
            let names = prep.dataset.class_names();
            for (c, iou) in e.miou.per_class.iter().enumerate() {
                let name = names.map_or_else(|| c.to_string(), |n| n[c].clone());
                match iou {
                    Some(v) => println!("  {name:<12} {v:.4}"),
                    None => println!("  {name:<12} -"),
                }
            }
            if partitions.is_some() {
                println!("super-point posterior variance {:.5}", e.sp_variance);
            }
        }
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let prep = prepare_experiment(&cfg)?;
            finish_report(&run_prepared(&prep, &cfg)?, &out)?;
        }
        Command::Sweep { config, axis, values, out } => {
            let cfg = load_config(&config)?;
            let prep = prepare_experiment(&cfg)?;
            finish_report(&sweep(&prep, &cfg, axis, &values)?, &out)?;
        }
        Command::Transfer { config, selector, trainee, out } => {
            let cfg = load_config(&config)?;
            let prep = prepare_experiment(&cfg)?;
            finish_report(&transfer(&prep, &cfg, &selector, &trainee)?, &out)?;
        }
    }
    Ok(())
}
