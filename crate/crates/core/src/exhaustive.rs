//! Brute-force baseline: train every architecture of a small grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NasConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fitness::{evaluate, FitnessRecord};
use crate::genome::{Architecture, Genome};
use crate::operators::rank_order;
use crate::rng::{phase, SeedStream};
use crate::trainer::{train, TrainSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Single-hidden-layer sizes to try.
    pub neurons: Vec<usize>,
    pub du: Vec<usize>,
    pub dy: Vec<usize>,
    /// Trainings from independent random weights per architecture.
    pub restarts: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            neurons: vec![1, 2, 3],
            du: vec![1, 5, 10],
            dy: vec![1, 5, 10],
            restarts: 3,
        }
    }
}

impl GridSpec {
    pub fn architectures(&self) -> Vec<Architecture> {
        let mut out = Vec::with_capacity(self.neurons.len() * self.du.len() * self.dy.len());
        for &n in &self.neurons {
            for &du in &self.du {
                for &dy in &self.dy {
                    out.push(Architecture::new(vec![n], du, dy));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons.is_empty() || self.du.is_empty() || self.dy.is_empty() {
            return Err(Error::Config("grid axes must not be empty".into()));
        }
        if self.neurons.contains(&0) {
            return Err(Error::Config("grid neuron counts must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("grid restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub architecture: Architecture,
    pub record: FitnessRecord,
    pub genome: Genome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    /// Index of the fittest entry; ties go to the earlier (smaller) one.
    pub winner: usize,
    /// Number of trainings performed.
    pub trainings: usize,
}

impl GridResult {
    pub fn best(&self) -> &GridEntry {
        &self.entries[self.winner]
    }
}

/// Trains every grid architecture `restarts` times with `spec` and keeps the
/// fittest closed-loop result of each.
pub fn grid_search(
    grid: &GridSpec,
    spec: &TrainSpec,
    config: &NasConfig,
    dataset: &Dataset,
    seeds: SeedStream,
) -> Result<GridResult> {
    grid.validate()?;
    spec.validate()?;
    dataset.validate()?;
    let archs = grid.architectures();
    let jobs: Vec<(usize, usize)> = (0..archs.len())
        .flat_map(|a| (0..grid.restarts).map(move |r| (a, r)))
        .collect();
    let results: Vec<(usize, Genome, FitnessRecord)> = jobs
        .par_iter()
        .map(|&(a, r)| {
            let mut rng = seeds.rng(&[phase::GRID, a as u64, r as u64]);
            let g = Genome::random(&archs[a], config.min_w, config.max_w, &mut rng);
            match train(&g, dataset, spec) {
                Ok(out) if !out.diverged => {
                    let rec = evaluate(&out.genome, dataset, &config.fitness);
                    (a, out.genome, rec)
                }
                _ => (a, g.clone(), FitnessRecord::diverged(g.neuron_count(), g.delay_sum())),
            }
        })
        .collect();

    let mut entries: Vec<Option<GridEntry>> = vec![None; archs.len()];
    for (a, genome, record) in results {
        let better = entries[a].as_ref().is_none_or(|e| record.fitness > e.record.fitness);
        if better {
            entries[a] = Some(GridEntry {
                architecture: archs[a].clone(),
                record,
                genome,
            });
        }
    }
    let entries: Vec<GridEntry> = entries.into_iter().map(|e| e.expect("every architecture trained")).collect();
    let fitness: Vec<f64> = entries.iter().map(|e| e.record.fitness).collect();
    let winner = rank_order(&fitness)[0];
    Ok(GridResult {
        entries,
        winner,
        trainings: jobs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Algorithm;
    use crate::genome::Nominal;

    #[test]
    fn grid_enumeration() {
        let g = GridSpec::default();
        let a = g.architectures();
        assert_eq!(a.len(), 27);
        assert_eq!(a[0], Architecture::new(vec![1], 1, 1));
        assert_eq!(a[26], Architecture::new(vec![3], 10, 10));
        assert!(GridSpec { restarts: 0, ..GridSpec::default() }.validate().is_err());
    }

    #[test]
    fn tiny_grid_prefers_the_smaller_network_on_a_linear_plant() {
        let u: Vec<f64> = (0..150).map(|k| if (k / 25) % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let mut y = Vec::with_capacity(u.len());
        let mut prev = 1.0;
        for &x in &u {
            prev = 0.7 * prev + 0.3 * (1.0 + x);
            y.push(prev);
        }
        let d = Dataset::new("lin", u, y, Nominal { input: 0.0, output: 1.0 }, 1.0).unwrap();
        let grid = GridSpec {
            neurons: vec![1, 3],
            du: vec![1],
            dy: vec![1],
            restarts: 2,
        };
        let cfg = NasConfig::preset(Algorithm::Exhaustive);
        let spec = TrainSpec {
            max_epochs: 100,
            ..TrainSpec::default()
        };
        let res = grid_search(&grid, &spec, &cfg, &d, SeedStream::new(3)).unwrap();
        assert_eq!(res.entries.len(), 2);
        assert_eq!(res.trainings, 4);
        let max = res.entries.iter().map(|e| e.record.fitness).fold(f64::MIN, f64::max);
        assert_eq!(res.best().record.fitness, max);
        assert_eq!(res.best().architecture.layers, vec![1]);
        assert!(res.best().record.mean_error < 0.01);
    }
}
