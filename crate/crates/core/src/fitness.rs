//! Response error and the size-penalised fitness function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::genome::{simulate_closed_loop, Genome};

/// Fitness assigned to individuals whose closed-loop response blew up.
pub const DIVERGED_FITNESS: f64 = -1.0e6;

/// `f = baseline - p1 * e - p2 * N - p3 * D`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub baseline: f64,
    /// Weight of the mean absolute response error.
    pub p1: f64,
    /// Penalty per hidden neuron.
    pub p2: f64,
    /// Penalty per delay level.
    pub p3: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self {
            baseline: 10.0,
            p1: 1.0,
            p2: 0.01,
            p3: 0.0001,
        }
    }
}

impl FitnessWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p1", self.p1), ("p2", self.p2), ("p3", self.p3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name}={v} must be a non-negative number")));
            }
        }
        if !self.baseline.is_finite() {
            return Err(Error::Config("fitness baseline must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub fitness: f64,
    pub mean_error: f64,
    pub neuron_count: usize,
    pub delay_sum: usize,
    pub diverged: bool,
}

impl FitnessRecord {
    pub fn diverged(neuron_count: usize, delay_sum: usize) -> Self {
        Self {
            fitness: DIVERGED_FITNESS,
            mean_error: f64::MAX,
            neuron_count,
            delay_sum,
            diverged: true,
        }
    }
}

/// Mean absolute difference between two equally long sequences.
pub fn mean_error(response: &[f64], target: &[f64]) -> Result<f64> {
    if response.len() != target.len() {
        return Err(Error::Contract(format!(
            "response has {} samples, target {}",
            response.len(),
            target.len()
        )));
    }
    if response.is_empty() {
        return Err(Error::Contract("mean error of empty sequences".into()));
    }
    let sum: f64 = response.iter().zip(target).map(|(y, r)| (y - r).abs()).sum();
    Ok(sum / response.len() as f64)
}

pub fn fitness(mean_error: f64, neuron_count: usize, delay_sum: usize, w: &FitnessWeights) -> f64 {
    w.baseline - w.p1 * mean_error - w.p2 * neuron_count as f64 - w.p3 * delay_sum as f64
}

/// Closed-loop evaluation of one genome.
pub fn evaluate(genome: &Genome, dataset: &Dataset, weights: &FitnessWeights) -> FitnessRecord {
    let n = genome.neuron_count();
    let d = genome.delay_sum();
    match simulate_closed_loop(genome, &dataset.inputs, dataset.nominal()) {
        Ok(y) => {
            let e = mean_error(&y, &dataset.targets).expect("dataset lengths validated");
            if e.is_finite() {
                FitnessRecord {
                    fitness: fitness(e, n, d, weights),
                    mean_error: e,
                    neuron_count: n,
                    delay_sum: d,
                    diverged: false,
                }
            } else {
                FitnessRecord::diverged(n, d)
            }
        }
        Err(_) => FitnessRecord::diverged(n, d),
    }
}

/// Evaluates genomes in parallel; records come back in input order.
pub fn evaluate_population(genomes: &[Genome], dataset: &Dataset, weights: &FitnessWeights) -> Vec<FitnessRecord> {
    genomes
        .par_iter()
        .map(|g| evaluate(g, dataset, weights))
        .collect()
}
