use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dnas_core::dataset::load_csv;
use dnas_core::experiment::{verify as verify_genome, Verification};
use dnas_core::fitness::FitnessWeights;
use dnas_core::plant::{
    bundled_datasets, bundled_schedule, generate_dataset, Noise, Schedule, SurrogatePlantParams, BUNDLED,
    BUNDLED_DURATION,
};
use dnas_core::rng::SeedStream;
use dnas_core::{Dataset, Error, Genome};

use crate::{ensure_dir, write_json};

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
    /// A bundled programme (learning, verification1, verification2) or a
    /// `time,position` CSV file. All three bundled sets when omitted.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Data set name for a schedule file (default: its file stem).
    #[arg(long)]
    pub name: Option<String>,
    /// Simulated time (s).
    #[arg(long, default_value_t = BUNDLED_DURATION)]
    pub duration: f64,
    /// Sampling period (s).
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    /// Standard deviation of Gaussian noise added to the output.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Seed of the noise stream.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn resolve_schedule(arg: &str, name: Option<&str>) -> Result<(String, Schedule)> {
    if let Some(s) = bundled_schedule(arg) {
        return Ok((name.unwrap_or(arg).to_string(), s));
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("`{arg}` is neither a bundled schedule ({}) nor a readable file", BUNDLED.join(", ")))?;
    let schedule = Schedule::parse(&text, arg)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".into());
    Ok((name.map(str::to_string).unwrap_or(stem), schedule))
}

pub(crate) fn generate(args: &GenerateArgs) -> Result<()> {
    let params = SurrogatePlantParams::default();
    let names: Vec<String> = match &args.schedule {
        Some(s) => vec![s.clone()],
        None => BUNDLED.iter().map(|s| s.to_string()).collect(),
    };
    let mut sets = Vec::with_capacity(names.len());
    for (i, spec) in names.iter().enumerate() {
        let (name, schedule) = resolve_schedule(spec, args.name.as_deref())?;
        let mut rng = SeedStream::new(args.seed).rng(&[i as u64]);
        let noise = (args.noise > 0.0).then_some(Noise {
            std_dev: args.noise,
            rng: &mut rng,
        });
        sets.push(generate_dataset(&params, &schedule, args.duration, args.period, &name, noise)?);
    }
    ensure_dir(&args.out)?;
    for d in &sets {
        let path = args.out.join(format!("{}.csv", d.name));
        d.save(&path).with_context(|| format!("writing {}", path.display()))?;
        println!("{} ({} samples)", path.display(), d.len());
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Genome JSON written by `run` or `exhaustive`.
    #[arg(long)]
    pub genome: PathBuf,
    /// Data set CSVs; the bundled verification sets when omitted.
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub(crate) fn verify(args: &VerifyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.genome).with_context(|| format!("reading {}", args.genome.display()))?;
    let genome = Genome::from_json(&text).with_context(|| format!("genome {}", args.genome.display()))?;
    let sets: Vec<Dataset> = if args.datasets.is_empty() {
        bundled_datasets(&SurrogatePlantParams::default())?
            .into_iter()
            .filter(|d| d.name != "learning")
            .collect()
    } else {
        args.datasets
            .iter()
            .map(|p| load_csv(p).with_context(|| format!("dataset {}", p.display())))
            .collect::<Result<_>>()?
    };
    let weights = FitnessWeights::default();
    let rows: Vec<Verification> = sets
        .iter()
        .map(|d| verify_genome(&genome, d, &weights))
        .collect::<Result<_, Error>>()?;
    println!("{:<16} {:>12} {:>12} {:>10}", "dataset", "mean_error", "max_error", "fitness");
    for r in &rows {
        println!(
            "{:<16} {:>12.6} {:>12.6} {:>10.5}{}",
            r.dataset,
            r.mean_error,
            r.max_abs_error,
            r.fitness,
            if r.diverged { "  diverged" } else { "" }
        );
    }
    if let Some(out) = &args.out {
        write_json(out.clone(), &rows)?;
    }
    Ok(())
}

/// The data set a search trains on: `path` when given, the bundled learning
/// set otherwise.
pub(crate) fn training_set(path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(p) => load_csv(p).with_context(|| format!("dataset {}", p.display())),
        None => Ok(bundled_datasets(&SurrogatePlantParams::default())?
            .into_iter()
            .find(|d| d.name == "learning")
            .expect("bundled learning set")),
    }
}
