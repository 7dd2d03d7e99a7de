use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dnas_core::exhaustive::{grid_search, GridResult, GridSpec};
use dnas_core::experiment::call_seeds;
use dnas_core::trainer::{TrainSpec, TrainerKind};
use dnas_core::{Algorithm, NasConfig};
use serde::Serialize;

use crate::data::training_set;
use crate::{ensure_dir, write_json, Parallelism};

#[derive(Debug, Clone, Args)]
pub struct ExhaustiveArgs {
    /// Hidden-neuron counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    pub neurons: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub du: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub dy: Vec<usize>,
    /// Trainings per architecture from independent random weights.
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long)]
    pub trainer: Option<TrainerKind>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Learning data set CSV (default: the bundled learning set).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `key=value` file for fitness weights, weight range and training.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub parallelism: Parallelism,
    #[arg(long, default_value = "out-grid")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct GridSummary<'a> {
    grid: &'a GridSpec,
    train: &'a TrainSpec,
    seed: u64,
    dataset: &'a str,
    trainings: usize,
    winner_layers: &'a [usize],
    winner_du: usize,
    winner_dy: usize,
    winner_fitness: f64,
    winner_mean_error: f64,
}

fn grid_csv(res: &GridResult) -> String {
    let mut s = String::from("neurons,du,dy,fitness,mean_error,diverged\n");
    for e in &res.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.architecture.neuron_count(),
            e.architecture.du,
            e.architecture.dy,
            e.record.fitness,
            e.record.mean_error,
            e.record.diverged
        );
    }
    s
}

pub(crate) fn exhaustive(args: &ExhaustiveArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let mut text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            text.push_str("\nalgorithm=exhaustive\n");
            NasConfig::parse_kv_named(&text, &path.display().to_string())?
        }
        None => NasConfig::preset(Algorithm::Exhaustive),
    };
    if let Some(k) = args.trainer {
        cfg.train.kind = k;
    }
    if let Some(e) = args.max_epochs {
        cfg.train.max_epochs = e;
    }
    cfg.seed = args.seed;
    cfg.validate()?;
    let grid = GridSpec {
        neurons: args.neurons.clone(),
        du: args.du.clone(),
        dy: args.dy.clone(),
        restarts: args.restarts,
    };
    let dataset = training_set(args.dataset.as_deref().or(cfg.dataset.as_deref().map(Path::new)))?;
    let res = args
        .parallelism
        .install(|| grid_search(&grid, &cfg.train, &cfg, &dataset, call_seeds(cfg.seed, 0)))??;

    ensure_dir(&args.out)?;
    std::fs::write(args.out.join("grid.csv"), grid_csv(&res))
        .with_context(|| format!("writing {}", args.out.join("grid.csv").display()))?;
    let best = res.best();
    write_json(
        args.out.join("summary.json"),
        &GridSummary {
            grid: &grid,
            train: &cfg.train,
            seed: cfg.seed,
            dataset: &dataset.name,
            trainings: res.trainings,
            winner_layers: &best.architecture.layers,
            winner_du: best.architecture.du,
            winner_dy: best.architecture.dy,
            winner_fitness: best.record.fitness,
            winner_mean_error: best.record.mean_error,
        },
    )?;
    std::fs::write(args.out.join("winner.json"), best.genome.to_json()? + "\n")
        .with_context(|| format!("writing {}", args.out.join("winner.json").display()))?;

    println!("{:>7} {:>4} {:>4} {:>10} {:>12}", "neurons", "du", "dy", "fitness", "mean_error");
    for (i, e) in res.entries.iter().enumerate() {
        println!(
            "{:>7} {:>4} {:>4} {:>10.5} {:>12.6}{}",
            e.architecture.neuron_count(),
            e.architecture.du,
            e.architecture.dy,
            e.record.fitness,
            e.record.mean_error,
            if i == res.winner { "  *" } else { "" }
        );
    }
    println!("{} trainings", res.trainings);
    Ok(())
}
