//! The four search algorithms and the state they share.

mod evolution;
mod hybrid;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, NasConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fitness::FitnessRecord;
use crate::genome::{Architecture, Genome};
use crate::operators::rank_order;
use crate::rng::SeedStream;
use crate::trainer::TrainerKind;

pub use evolution::{run_dnas1, run_dnas2, run_dnas3};
pub use hybrid::{crossover_architecture, mutate_structure, run_dnas4, StructureFeature};

/// Species of an individual.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeciesKey {
    /// Hidden-neuron count (DNAS3).
    NeuronCount(usize),
    /// Layer sizes, delays and training method (DNAS4).
    FullArchitecture {
        architecture: Architecture,
        trainer: TrainerKind,
    },
}

impl SpeciesKey {
    pub fn neuron_count(genome: &Genome) -> Self {
        SpeciesKey::NeuronCount(genome.neuron_count())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DominationState {
    pub dominated: bool,
    pub dominant: Option<SpeciesKey>,
    /// One neuron fewer (absent for a one-neuron dominant species), one more.
    pub secondary: Vec<SpeciesKey>,
}

/// A species dominates when the `hm_best` fittest individuals all belong to
/// it. Fitness ties keep the earlier individual ahead.
pub fn detect_domination(fitness: &[f64], species: &[SpeciesKey], hm_best: usize) -> DominationState {
    assert_eq!(fitness.len(), species.len(), "one species key per individual");
    if hm_best == 0 || fitness.len() < hm_best {
        return DominationState::default();
    }
    let order = rank_order(fitness);
    let lead = &species[order[0]];
    if !order[..hm_best].iter().all(|&i| &species[i] == lead) {
        return DominationState::default();
    }
    let secondary = match lead {
        SpeciesKey::NeuronCount(n) => {
            let mut s = Vec::with_capacity(2);
            if *n > 1 {
                s.push(SpeciesKey::NeuronCount(n - 1));
            }
            s.push(SpeciesKey::NeuronCount(n + 1));
            s
        }
        SpeciesKey::FullArchitecture { .. } => Vec::new(),
    };
    DominationState {
        dominated: true,
        dominant: Some(lead.clone()),
        secondary,
    }
}

/// Population summary after one generation (generation 0 is the initial
/// population).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Mean of the individuals' mean errors, diverged individuals excluded.
    pub mean_error: f64,
    pub population: usize,
    pub best_neurons: usize,
    pub dominated: bool,
}

/// What happened inside one generation; kept for inspection, not serialised.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationTrace {
    pub generation: usize,
    pub dominated: bool,
    pub p_cross: f64,
    /// Species of both parents of every crossover.
    pub crossover_species: Vec<(SpeciesKey, SpeciesKey)>,
    pub survivors: Vec<SpeciesKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub generations: Vec<GenerationStats>,
    pub best: Genome,
    pub best_record: FitnessRecord,
    pub best_trainer: Option<TrainerKind>,
    /// Hidden-neuron count of the final population's individuals.
    pub neuron_histogram: BTreeMap<usize, usize>,
    pub mean_du: f64,
    pub mean_dy: f64,
    pub wall_clock_seconds: f64,
    #[serde(skip)]
    pub trace: Vec<GenerationTrace>,
}

/// One member of a population.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Member {
    pub genome: Genome,
    pub record: FitnessRecord,
    pub trainer: Option<TrainerKind>,
}

pub(crate) fn generation_stats(generation: usize, pop: &[Member], dominated: bool) -> GenerationStats {
    let best = &pop[rank_order(&fitness_of(pop))[0]];
    let mean_fitness = pop.iter().map(|m| m.record.fitness).sum::<f64>() / pop.len() as f64;
    let finite: Vec<f64> = pop
        .iter()
        .filter(|m| !m.record.diverged)
        .map(|m| m.record.mean_error)
        .collect();
    let mean_error = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GenerationStats {
        generation,
        best_fitness: best.record.fitness,
        mean_fitness,
        mean_error,
        population: pop.len(),
        best_neurons: best.genome.neuron_count(),
        dominated,
    }
}

pub(crate) fn fitness_of(pop: &[Member]) -> Vec<f64> {
    pop.iter().map(|m| m.record.fitness).collect()
}

pub(crate) fn finish(
    algorithm: Algorithm,
    pop: &[Member],
    generations: Vec<GenerationStats>,
    trace: Vec<GenerationTrace>,
    started: Instant,
) -> RunResult {
    let best = &pop[rank_order(&fitness_of(pop))[0]];
    let mut neuron_histogram = BTreeMap::new();
    for m in pop {
        *neuron_histogram.entry(m.genome.neuron_count()).or_insert(0) += 1;
    }
    let n = pop.len() as f64;
    RunResult {
        algorithm,
        generations,
        best: best.genome.clone(),
        best_record: best.record,
        best_trainer: best.trainer,
        neuron_histogram,
        mean_du: pop.iter().map(|m| m.genome.du as f64).sum::<f64>() / n,
        mean_dy: pop.iter().map(|m| m.genome.dy as f64).sum::<f64>() / n,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        trace,
    }
}

/// Runs the algorithm named by `config.algorithm` once.
pub fn run(config: &NasConfig, dataset: &Dataset, seeds: SeedStream) -> Result<RunResult> {
    match config.algorithm {
        Algorithm::Dnas1 => run_dnas1(config, dataset, seeds),
        Algorithm::Dnas2 => run_dnas2(config, dataset, seeds),
        Algorithm::Dnas3 => run_dnas3(config, dataset, seeds),
        Algorithm::Dnas4 => run_dnas4(config, dataset, seeds),
        Algorithm::Exhaustive => Err(Error::Config(
            "the exhaustive baseline is run through `exhaustive::grid_search`".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: &[usize]) -> Vec<SpeciesKey> {
        n.iter().map(|&n| SpeciesKey::NeuronCount(n)).collect()
    }

    #[test]
    fn domination_examples() {
        let f = [9.0, 8.0, 7.0, 6.0, 5.0, 4.0];
        let d = detect_domination(&f, &keys(&[3, 3, 3, 3, 3, 1]), 5);
        assert!(d.dominated);
        assert_eq!(d.dominant, Some(SpeciesKey::NeuronCount(3)));
        assert_eq!(d.secondary, keys(&[2, 4]));

        assert!(!detect_domination(&f, &keys(&[3, 3, 3, 3, 4, 3]), 5).dominated);

        let d = detect_domination(&f, &keys(&[1, 1, 1, 1, 1, 2]), 5);
        assert_eq!(d.secondary, keys(&[2]));

        assert!(!detect_domination(&f[..3], &keys(&[3, 3, 3]), 5).dominated);
    }

    #[test]
    fn domination_ties_prefer_earlier_individuals() {
        // two individuals share the 5th best fitness; the earlier one counts
        let f = [9.0, 9.0, 9.0, 9.0, 8.0, 8.0];
        assert!(detect_domination(&f, &keys(&[2, 2, 2, 2, 2, 7]), 5).dominated);
        assert!(!detect_domination(&f, &keys(&[2, 2, 2, 2, 7, 2]), 5).dominated);
    }
}
