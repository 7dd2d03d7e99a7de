use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dnas_core::algorithms::GenerationStats;
use dnas_core::experiment::{run_experiment, CallFailure, Experiment, IndicatorSummary};
use dnas_core::trainer::TrainerKind;
use dnas_core::{Algorithm, NasConfig};
use serde::{Deserialize, Serialize};

use crate::data::training_set;
use crate::{ensure_dir, write_json, Parallelism};

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// dnas1, dnas2, dnas3 or dnas4.
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Named parameter preset (`dnas3`, `full-dnas3`, ...).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// `key=value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Learning data set CSV (default: the bundled learning set).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub calls: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pop_size: Option<usize>,
    #[arg(long)]
    pub max_nin_lay: Option<usize>,
    #[arg(long)]
    pub trainer: Option<TrainerKind>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Override any parameter by name, e.g. `--set pMutW=0.3`. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(flatten)]
    pub parallelism: Parallelism,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl RunArgs {
    /// Config file (or preset), then the dedicated flags, then `--set`.
    pub fn resolve_config(&self) -> Result<NasConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let mut text =
                    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                if let Some(a) = self.algorithm {
                    text.push_str(&format!("\nalgorithm={a}\n"));
                }
                NasConfig::parse_kv_named(&text, &path.display().to_string())?
            }
            (None, Some(name)) => {
                let mut cfg = NasConfig::named_preset(name)?;
                if let Some(a) = self.algorithm {
                    cfg.algorithm = a;
                }
                cfg
            }
            (None, None) => NasConfig::preset(self.algorithm.unwrap_or(Algorithm::Dnas3)),
        };
        if let Some(v) = self.calls {
            cfg.calls = v;
        }
        if let Some(v) = self.generations {
            cfg.generations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.pop_size {
            cfg.pop_size = v;
        }
        if let Some(v) = self.max_nin_lay {
            cfg.max_nin_lay = v;
        }
        if let Some(v) = self.trainer {
            cfg.train.kind = v;
        }
        if let Some(v) = self.max_epochs {
            cfg.train.max_epochs = v;
        }
        if let Some(p) = &self.dataset {
            cfg.dataset = Some(p.display().to_string());
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| dnas_core::Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSummary {
    pub call: usize,
    pub best_fitness: f64,
    pub mean_error: f64,
    pub neurons: usize,
    pub layers: Vec<usize>,
    pub du: usize,
    pub dy: usize,
    pub trainer: Option<TrainerKind>,
    pub generations: usize,
}

/// Everything `run` reports except wall-clock times, so it is a pure
/// function of the configuration and data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: NasConfig,
    pub dataset: String,
    pub summary: IndicatorSummary,
    pub calls: Vec<CallSummary>,
    pub failures: Vec<CallFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub mean_call_seconds: f64,
    pub call_seconds: Vec<(usize, f64)>,
}

impl RunSummary {
    pub fn from_experiment(exp: &Experiment) -> Self {
        let calls = exp
            .runs
            .iter()
            .map(|(c, r)| CallSummary {
                call: *c,
                best_fitness: r.best_record.fitness,
                mean_error: r.best_record.mean_error,
                neurons: r.best.neuron_count(),
                layers: r.best.architecture().layers,
                du: r.best.du,
                dy: r.best.dy,
                trainer: r.best_trainer,
                generations: r.generations.len(),
            })
            .collect();
        Self {
            config: exp.config.clone(),
            dataset: exp.dataset.clone(),
            summary: exp.summary.clone(),
            calls,
            failures: exp.failures.clone(),
        }
    }
}

fn generations_csv(exp: &Experiment) -> String {
    let mut s = String::from("call,generation,best_fitness,mean_fitness,mean_error,population,best_neurons,dominated\n");
    for (c, r) in &exp.runs {
        for GenerationStats {
            generation,
            best_fitness,
            mean_fitness,
            mean_error,
            population,
            best_neurons,
            dominated,
        } in &r.generations
        {
            let _ = writeln!(
                s,
                "{c},{generation},{best_fitness},{mean_fitness},{mean_error},{population},{best_neurons},{dominated}"
            );
        }
    }
    s
}

fn histogram_csv(summary: &IndicatorSummary) -> String {
    let mut s = String::from("neurons,count\n");
    for (n, k) in &summary.neuron_histogram {
        let _ = writeln!(s, "{n},{k}");
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve_config()?;
    if cfg.algorithm == Algorithm::Exhaustive {
        return Err(dnas_core::Error::Config("use the `exhaustive` command for the grid baseline".into()).into());
    }
    let dataset = training_set(cfg.dataset.as_deref().map(Path::new))?;
    let started = std::time::Instant::now();
    let exp = args.parallelism.install(|| run_experiment(&cfg, &dataset))??;
    let total_seconds = started.elapsed().as_secs_f64();

    ensure_dir(&args.out)?;
    let summary = RunSummary::from_experiment(&exp);
    write_json(args.out.join("summary.json"), &summary)?;
    write_text(&args.out.join("generations.csv"), &generations_csv(&exp))?;
    write_text(&args.out.join("histogram.csv"), &histogram_csv(&exp.summary))?;
    write_text(&args.out.join("config.txt"), &cfg.to_kv())?;
    for (c, r) in &exp.runs {
        write_text(&args.out.join(format!("call_{c}_best.json")), &(r.best.to_json()? + "\n"))?;
    }
    let call_seconds: Vec<(usize, f64)> = exp.runs.iter().map(|(c, r)| (*c, r.wall_clock_seconds)).collect();
    let timing = Timing {
        total_seconds,
        mean_call_seconds: call_seconds.iter().map(|(_, t)| t).sum::<f64>() / call_seconds.len() as f64,
        call_seconds,
    };
    write_json(args.out.join("timing.json"), &timing)?;

    for f in &exp.failures {
        eprintln!("call {} failed: {}", f.call, f.message);
    }
    crate::report::print_summary(&summary, Some(&timing));
    Ok(())
}
