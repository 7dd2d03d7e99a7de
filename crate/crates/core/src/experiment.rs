//! Repeated independent calls of a search and their summary indicators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algorithms::{run, RunResult};
use crate::config::NasConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fitness::{fitness, mean_error, FitnessWeights};
use crate::genome::{simulate_closed_loop, Genome};
use crate::rng::{phase, SeedStream};

/// Seed stream of call `call` under master seed `seed`.
pub fn call_seeds(seed: u64, call: usize) -> SeedStream {
    SeedStream::new(seed).child(&[phase::CALL, call as u64])
}

/// Median of a non-empty sample; the mean of the two middle values for an
/// even count.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Indicators over the best individuals of all calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub calls: usize,
    pub median_best_fitness: f64,
    pub mean_best_fitness: f64,
    pub median_mean_error: f64,
    pub mean_mean_error: f64,
    pub median_neurons: f64,
    pub mean_neurons: f64,
    pub mean_du: f64,
    pub mean_dy: f64,
    /// Hidden-neuron count of each call's best individual.
    pub neuron_histogram: BTreeMap<usize, usize>,
}

impl IndicatorSummary {
    pub fn from_runs(runs: &[RunResult]) -> Self {
        let n = runs.len() as f64;
        let best_fitness: Vec<f64> = runs.iter().map(|r| r.best_record.fitness).collect();
        let errors: Vec<f64> = runs.iter().map(|r| r.best_record.mean_error).collect();
        let neurons: Vec<f64> = runs.iter().map(|r| r.best.neuron_count() as f64).collect();
        let mut neuron_histogram = BTreeMap::new();
        for r in runs {
            *neuron_histogram.entry(r.best.neuron_count()).or_insert(0) += 1;
        }
        Self {
            calls: runs.len(),
            median_best_fitness: median(&best_fitness),
            mean_best_fitness: best_fitness.iter().sum::<f64>() / n,
            median_mean_error: median(&errors),
            mean_mean_error: errors.iter().sum::<f64>() / n,
            median_neurons: median(&neurons),
            mean_neurons: neurons.iter().sum::<f64>() / n,
            mean_du: runs.iter().map(|r| r.best.du as f64).sum::<f64>() / n,
            mean_dy: runs.iter().map(|r| r.best.dy as f64).sum::<f64>() / n,
            neuron_histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallFailure {
    pub call: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub config: NasConfig,
    pub dataset: String,
    /// Over completed calls only.
    pub summary: IndicatorSummary,
    /// Completed calls as `(call index, result)`.
    pub runs: Vec<(usize, RunResult)>,
    pub failures: Vec<CallFailure>,
}

/// Runs `config.calls` independent searches, call `c` seeded by
/// [`call_seeds`]`(config.seed, c)`.
///
/// A failing call is recorded and the others carry on; the experiment fails
/// only when the configuration is invalid or every call failed.
pub fn run_experiment(config: &NasConfig, dataset: &Dataset) -> Result<Experiment> {
    config.validate()?;
    dataset.validate()?;
    if config.calls == 0 {
        return Err(Error::Config("calls must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(config.calls);
    let mut failures = Vec::new();
    for c in 0..config.calls {
        match run(config, dataset, call_seeds(config.seed, c)) {
            Ok(r) => runs.push((c, r)),
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => failures.push(CallFailure {
                call: c,
                message: e.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        return Err(Error::Contract(format!(
            "all {} calls failed; first: {}",
            config.calls, failures[0].message
        )));
    }
    let completed: Vec<RunResult> = runs.iter().map(|(_, r)| r.clone()).collect();
    Ok(Experiment {
        config: config.clone(),
        dataset: dataset.name.clone(),
        summary: IndicatorSummary::from_runs(&completed),
        runs,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub dataset: String,
    pub mean_error: f64,
    pub max_abs_error: f64,
    pub fitness: f64,
    pub diverged: bool,
}

/// Closed-loop check of a genome on one data set.
pub fn verify(genome: &Genome, dataset: &Dataset, weights: &FitnessWeights) -> Result<Verification> {
    genome.validate()?;
    if dataset.len() <= genome.du.max(genome.dy) {
        return Err(Error::Contract(format!(
            "dataset `{}` has {} samples but the genome delays reach {}",
            dataset.name,
            dataset.len(),
            genome.du.max(genome.dy)
        )));
    }
    Ok(match simulate_closed_loop(genome, &dataset.inputs, dataset.nominal()) {
        Ok(y) => {
            let e = mean_error(&y, &dataset.targets).expect("dataset lengths validated");
            let max_abs_error = y
                .iter()
                .zip(&dataset.targets)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Verification {
                dataset: dataset.name.clone(),
                mean_error: e,
                max_abs_error,
                fitness: fitness(e, genome.neuron_count(), genome.delay_sum(), weights),
                diverged: false,
            }
        }
        Err(_) => Verification {
            dataset: dataset.name.clone(),
            mean_error: f64::MAX,
            max_abs_error: f64::MAX,
            fitness: crate::fitness::DIVERGED_FITNESS,
            diverged: true,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn verify_rejects_short_sets_and_matches_training_record() {
        use crate::fitness::evaluate;
        use crate::genome::{Architecture, Nominal};
        let g = Genome::random(&Architecture::new(vec![2], 4, 1), -1.0, 1.0, &mut SeedStream::new(2).rng(&[]));
        let w = FitnessWeights::default();
        let short = Dataset::new("short", vec![0.0; 4], vec![1.0; 4], Nominal { input: 0.0, output: 1.0 }, 1.0).unwrap();
        assert!(matches!(verify(&g, &short, &w), Err(Error::Contract(_))));
        let d = Dataset::new(
            "d",
            (0..20).map(|k| (k as f64 * 0.3).sin()).collect(),
            vec![1.0; 20],
            Nominal { input: 0.0, output: 1.0 },
            1.0,
        )
        .unwrap();
        let v = verify(&g, &d, &w).unwrap();
        let rec = evaluate(&g, &d, &w);
        assert_eq!(v.mean_error, rec.mean_error);
        assert_eq!(v.fitness, rec.fitness);
    }

    #[test]
    fn call_streams_differ() {
        assert_ne!(call_seeds(1, 0), call_seeds(1, 1));
        assert_ne!(call_seeds(1, 0), call_seeds(2, 0));
        assert_eq!(call_seeds(5, 3), call_seeds(5, 3));
    }
}
