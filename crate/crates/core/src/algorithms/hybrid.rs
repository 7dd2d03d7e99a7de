//! DNAS4: architectures evolve, weights are trained by gradient methods.

use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{finish, fitness_of, generation_stats, GenerationTrace, Member, RunResult, SpeciesKey};
use crate::config::{Algorithm, NasConfig};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::fitness::{evaluate, FitnessRecord};
use crate::genome::{Architecture, Genome};
use crate::operators::{cross_count, pair_parents, rank_order};
use crate::rng::{phase, SeedStream};
use crate::trainer::{train, TrainerKind};

/// The part of an individual a structure mutation changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StructureFeature {
    Layers,
    Neurons,
    Delays,
    Method,
}

fn step<R: Rng + ?Sized>(value: usize, max: usize, rng: &mut R) -> usize {
    if rng.random_bool(0.5) {
        (value + 1).min(max)
    } else {
        value.saturating_sub(1)
    }
}

/// Changes exactly one feature of an architecture/method pair.
///
/// Layer mutation inserts a layer of `1..=maxNinLay` neurons at a random
/// position or removes a random layer; it is only on offer when `maxLay > 1`.
/// Neuron mutation moves every layer one neuron up or down, a layer that
/// loses its last neuron disappears unless it is the only one. Delay mutation
/// moves each free delay one step, clamped to `[0, max]`. Method mutation
/// switches to one of the two other trainers.
pub fn mutate_structure<R: Rng + ?Sized>(
    arch: &Architecture,
    trainer: TrainerKind,
    cfg: &NasConfig,
    rng: &mut R,
) -> (Architecture, TrainerKind, StructureFeature) {
    let mut features = Vec::with_capacity(4);
    if cfg.max_lay > 1 {
        features.push(StructureFeature::Layers);
    }
    features.push(StructureFeature::Neurons);
    if cfg.du.is_none() || cfg.dy.is_none() {
        features.push(StructureFeature::Delays);
    }
    features.push(StructureFeature::Method);
    let feature = features[rng.random_range(0..features.len())];

    let mut a = arch.clone();
    let mut t = trainer;
    match feature {
        StructureFeature::Layers => {
            let insert = a.layers.len() == 1 || (a.layers.len() < cfg.max_lay && rng.random_bool(0.5));
            if insert {
                let at = rng.random_range(0..=a.layers.len());
                a.layers.insert(at, rng.random_range(1..=cfg.max_nin_lay));
            } else {
                let at = rng.random_range(0..a.layers.len());
                a.layers.remove(at);
            }
        }
        StructureFeature::Neurons => {
            let mut layers = Vec::with_capacity(a.layers.len());
            for &n in &a.layers {
                let n = step(n, cfg.max_nin_lay, rng);
                if n > 0 {
                    layers.push(n);
                }
            }
            if layers.is_empty() {
                layers.push(1);
            }
            a.layers = layers;
        }
        StructureFeature::Delays => {
            if cfg.du.is_none() {
                a.du = step(a.du, cfg.du_max, rng);
            }
            if cfg.dy.is_none() {
                a.dy = step(a.dy, cfg.dy_max, rng);
            }
        }
        StructureFeature::Method => {
            let others: Vec<TrainerKind> = TrainerKind::ALL.into_iter().filter(|&k| k != trainer).collect();
            t = others[rng.random_range(0..others.len())];
        }
    }
    (a, t, feature)
}

/// Layer count, per-layer neuron counts and delays crossed with a common
/// ratio `r`; a layer missing from one parent counts as zero neurons, and
/// layers left without neurons are dropped.
pub fn blend_architecture(a: &Architecture, b: &Architecture, r: f64) -> Architecture {
    let n_layers = cross_count(r, a.layers.len(), b.layers.len()).max(1);
    let mut layers: Vec<usize> = (0..n_layers)
        .map(|l| {
            cross_count(
                r,
                a.layers.get(l).copied().unwrap_or(0),
                b.layers.get(l).copied().unwrap_or(0),
            )
        })
        .filter(|&n| n > 0)
        .collect();
    if layers.is_empty() {
        layers.push(1);
    }
    Architecture::new(layers, cross_count(r, a.du, b.du), cross_count(r, a.dy, b.dy))
}

/// Structure crossover with the method inherited from either parent.
pub fn crossover_architecture<R: Rng + ?Sized>(
    a: (&Architecture, TrainerKind),
    b: (&Architecture, TrainerKind),
    rng: &mut R,
) -> (Architecture, TrainerKind) {
    let r: f64 = rng.random();
    let arch = blend_architecture(a.0, b.0, r);
    let trainer = if rng.random_bool(0.5) { a.1 } else { b.1 };
    (arch, trainer)
}

fn random_architecture<R: Rng + ?Sized>(cfg: &NasConfig, rng: &mut R) -> Architecture {
    let du = cfg.du.unwrap_or_else(|| if cfg.du_max == 0 { 0 } else { rng.random_range(1..=cfg.du_max) });
    let dy = cfg.dy.unwrap_or_else(|| if cfg.dy_max == 0 { 0 } else { rng.random_range(1..=cfg.dy_max) });
    let n_layers = rng.random_range(1..=cfg.max_lay);
    let layers = (0..n_layers).map(|_| rng.random_range(1..=cfg.max_nin_lay)).collect();
    Architecture::new(layers, du, dy)
}

/// Draws fresh weights, trains them and evaluates the result closed loop.
fn build(arch: &Architecture, trainer: TrainerKind, cfg: &NasConfig, dataset: &Dataset, seeds: SeedStream) -> Member {
    let genome = Genome::random(arch, cfg.min_w, cfg.max_w, &mut seeds.rng(&[]));
    let spec = cfg.train.with_kind(trainer);
    match train(&genome, dataset, &spec) {
        Ok(out) if !out.diverged => Member {
            record: evaluate(&out.genome, dataset, &cfg.fitness),
            genome: out.genome,
            trainer: Some(trainer),
        },
        _ => Member {
            record: FitnessRecord::diverged(genome.neuron_count(), genome.delay_sum()),
            genome,
            trainer: Some(trainer),
        },
    }
}

fn species(m: &Member) -> SpeciesKey {
    SpeciesKey::FullArchitecture {
        architecture: m.genome.architecture(),
        trainer: m.trainer.expect("hybrid members carry a trainer"),
    }
}

/// Best individual of each species, at most `pop_size` of them.
fn select(pool: Vec<Member>, pop_size: usize) -> Vec<Member> {
    let order = rank_order(&fitness_of(&pool));
    let mut seen = HashSet::new();
    let mut idx = Vec::with_capacity(pop_size);
    for i in order {
        if idx.len() == pop_size {
            break;
        }
        if seen.insert(species(&pool[i])) {
            idx.push(i);
        }
    }
    idx.sort_unstable();
    let mut mask = vec![false; pool.len()];
    idx.iter().for_each(|&i| mask[i] = true);
    pool.into_iter().zip(mask).filter(|(_, k)| *k).map(|(m, _)| m).collect()
}

enum Task {
    Fresh(Architecture, TrainerKind),
    Retrain(usize),
}

/// Hybrid search: every individual is an architecture plus a training method,
/// its weights obtained by training from random initial values.
///
/// Each generation applies structure mutation (probability `pMut`),
/// structure crossover (pool drawn with `pCross`) and retraining (probability
/// `pRetrain`; kept only when it improves fitness). Only the best individual
/// of each species survives selection, so the population size varies up to
/// `popSize`.
pub fn run_dnas4(cfg: &NasConfig, dataset: &Dataset, seeds: SeedStream) -> Result<RunResult> {
    cfg.validate()?;
    dataset.validate()?;
    let started = Instant::now();

    let init: Vec<(Architecture, TrainerKind)> = (0..cfg.pop_size)
        .map(|i| {
            let mut rng = seeds.rng(&[phase::INIT, i as u64]);
            let arch = random_architecture(cfg, &mut rng);
            let t = TrainerKind::ALL[rng.random_range(0..TrainerKind::ALL.len())];
            (arch, t)
        })
        .collect();
    let pop: Vec<Member> = init
        .par_iter()
        .enumerate()
        .map(|(i, (a, t))| build(a, *t, cfg, dataset, seeds.child(&[0, phase::TRAIN, i as u64])))
        .collect();
    let mut pop = select(pop, cfg.pop_size);
    let mut stats = vec![generation_stats(0, &pop, false)];
    let mut trace = Vec::with_capacity(cfg.generations);

    for generation in 1..=cfg.generations {
        let g = generation as u64;
        let mut tasks = Vec::new();
        for (i, m) in pop.iter().enumerate() {
            let mut rng = seeds.rng(&[g, phase::STRUCTURE, i as u64]);
            if rng.random_bool(cfg.p_mut) {
                let (a, t, _) = mutate_structure(&m.genome.architecture(), m.trainer.expect("trainer"), cfg, &mut rng);
                tasks.push(Task::Fresh(a, t));
            }
        }
        let keys: Vec<SpeciesKey> = pop.iter().map(species).collect();
        let pairs = pair_parents(pop.len(), cfg.p_cross, &mut seeds.rng(&[g, phase::PAIRING]));
        let mut gen_trace = GenerationTrace {
            generation,
            p_cross: cfg.p_cross,
            ..GenerationTrace::default()
        };
        for (k, &(a, b)) in pairs.iter().enumerate() {
            gen_trace.crossover_species.push((keys[a].clone(), keys[b].clone()));
            let pa = (&pop[a].genome.architecture(), pop[a].trainer.expect("trainer"));
            let pb = (&pop[b].genome.architecture(), pop[b].trainer.expect("trainer"));
            let (arch, t) = crossover_architecture(
                (pa.0, pa.1),
                (pb.0, pb.1),
                &mut seeds.rng(&[g, phase::CROSSOVER, k as u64]),
            );
            tasks.push(Task::Fresh(arch, t));
        }
        for i in 0..pop.len() {
            if seeds.rng(&[g, phase::RETRAIN, i as u64]).random_bool(cfg.p_retrain) {
                tasks.push(Task::Retrain(i));
            }
        }

        let built: Vec<Member> = tasks
            .par_iter()
            .enumerate()
            .map(|(k, task)| {
                let s = seeds.child(&[g, phase::TRAIN, k as u64]);
                match task {
                    Task::Fresh(a, t) => build(a, *t, cfg, dataset, s),
                    Task::Retrain(i) => build(
                        &pop[*i].genome.architecture(),
                        pop[*i].trainer.expect("trainer"),
                        cfg,
                        dataset,
                        s,
                    ),
                }
            })
            .collect();

        let mut fresh = Vec::with_capacity(built.len());
        for (task, m) in tasks.iter().zip(built) {
            match task {
                Task::Fresh(..) => fresh.push(m),
                Task::Retrain(i) => {
                    if m.record.fitness > pop[*i].record.fitness {
                        pop[*i] = m;
                    }
                }
            }
        }
        let mut pool = pop;
        pool.extend(fresh);
        pop = select(pool, cfg.pop_size);
        gen_trace.survivors = pop.iter().map(species).collect();
        trace.push(gen_trace);
        stats.push(generation_stats(generation, &pop, false));
    }
    Ok(finish(Algorithm::Dnas4, &pop, stats, trace, started))
}
