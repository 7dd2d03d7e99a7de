//! DNAS1 to DNAS3: weights and structure evolved together.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    detect_domination, finish, fitness_of, generation_stats, DominationState, GenerationTrace, Member, RunResult,
    SpeciesKey,
};
use crate::config::{Algorithm, NasConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fitness::{evaluate, FitnessWeights};
use crate::genome::{init_genome, Genome};
use crate::operators::{
    crossover_pair, delta_w, mutate_add_neurons, mutate_delays, mutate_delete_neurons, mutate_weights, pair_parents,
    rank_order, roulette_select_with_elitism, OperatorConfig,
};
use crate::rng::{phase, SeedStream};

/// Crossover probability after a domination episode ends.
pub const P_CROSS_AFTER_DOMINATION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Dnas1,
    Dnas2,
    Dnas3,
}

impl Variant {
    fn algorithm(self) -> Algorithm {
        match self {
            Variant::Dnas1 => Algorithm::Dnas1,
            Variant::Dnas2 => Algorithm::Dnas2,
            Variant::Dnas3 => Algorithm::Dnas3,
        }
    }

    fn mutates_delays(self) -> bool {
        self != Variant::Dnas1
    }

    fn deletes_neurons(self) -> bool {
        self == Variant::Dnas3
    }
}

/// Weights and neuron births evolve; delays stay at the configured constants.
pub fn run_dnas1(config: &NasConfig, dataset: &Dataset, seeds: SeedStream) -> Result<RunResult> {
    if config.du.is_none() || config.dy.is_none() {
        return Err(Error::Config("DNAS1 needs fixed du and dy".into()));
    }
    evolve(config, dataset, seeds, Variant::Dnas1)
}

/// DNAS1 plus delay mutation.
pub fn run_dnas2(config: &NasConfig, dataset: &Dataset, seeds: SeedStream) -> Result<RunResult> {
    evolve(config, dataset, seeds, Variant::Dnas2)
}

/// DNAS2 plus neuron deletion and species domination.
///
/// While the `hmBest` fittest individuals share one hidden-neuron count,
/// only that species and its two neighbours (one neuron fewer, one more)
/// survive, `hmBest` individuals each, and crossover happens within species
/// only. Once domination is lost the population is refilled to `popSize` by
/// mutating the survivors and the crossover probability drops to 0.2.
pub fn run_dnas3(config: &NasConfig, dataset: &Dataset, seeds: SeedStream) -> Result<RunResult> {
    evolve(config, dataset, seeds, Variant::Dnas3)
}

fn evaluate_all(genomes: Vec<Genome>, dataset: &Dataset, weights: &FitnessWeights) -> Vec<Member> {
    genomes
        .into_par_iter()
        .map(|genome| {
            let record = evaluate(&genome, dataset, weights);
            Member {
                genome,
                record,
                trainer: None,
            }
        })
        .collect()
}

/// Mutation magnitudes; diverged individuals get the largest one and do not
/// stretch the scale of the others.
fn deltas(pop: &[Member], ops: &OperatorConfig) -> Vec<f64> {
    let finite: Vec<usize> = (0..pop.len()).filter(|&i| !pop[i].record.diverged).collect();
    let d = delta_w(
        &finite.iter().map(|&i| pop[i].record.fitness).collect::<Vec<_>>(),
        ops.min_delta,
        ops.max_delta,
    );
    let mut out = vec![ops.max_delta; pop.len()];
    for (&i, v) in finite.iter().zip(d) {
        out[i] = v;
    }
    out
}

fn mutants(genome: &Genome, delta: f64, ops: &OperatorConfig, variant: Variant, seeds: SeedStream, tags: [u64; 2]) -> Vec<Genome> {
    let [g, t] = tags;
    let mut out = Vec::new();
    out.extend(mutate_weights(genome, delta, ops.p_mut_w, &mut seeds.rng(&[g, phase::MUT_WEIGHTS, t])));
    out.extend(mutate_add_neurons(
        genome,
        ops.p_mut_new_n,
        ops.min_w,
        ops.max_w,
        ops.max_nin_lay,
        &mut seeds.rng(&[g, phase::MUT_ADD, t]),
    ));
    if variant.deletes_neurons() {
        out.extend(mutate_delete_neurons(genome, ops.p_mut_del_n, &mut seeds.rng(&[g, phase::MUT_DELETE, t])));
    }
    if variant.mutates_delays() {
        out.extend(mutate_delays(
            genome,
            ops.p_mut_d,
            ops.min_w,
            ops.max_w,
            ops.du_max,
            ops.dy_max,
            &mut seeds.rng(&[g, phase::MUT_DELAYS, t]),
        ));
    }
    out
}

fn keep(pool: Vec<Member>, mut idx: Vec<usize>) -> Vec<Member> {
    idx.sort_unstable();
    let mut mask = vec![false; pool.len()];
    idx.iter().for_each(|&i| mask[i] = true);
    pool.into_iter().zip(mask).filter(|(_, k)| *k).map(|(m, _)| m).collect()
}

fn species_of(pop: &[Member]) -> Vec<SpeciesKey> {
    pop.iter().map(|m| SpeciesKey::neuron_count(&m.genome)).collect()
}

fn evolve(cfg: &NasConfig, dataset: &Dataset, seeds: SeedStream, variant: Variant) -> Result<RunResult> {
    cfg.validate()?;
    dataset.validate()?;
    let started = Instant::now();
    let ops = OperatorConfig::from(cfg);

    let init = (0..cfg.pop_size)
        .map(|i| init_genome(cfg, &mut seeds.rng(&[phase::INIT, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut pop = evaluate_all(init, dataset, &cfg.fitness);

    let mut dom = if variant == Variant::Dnas3 {
        detect_domination(&fitness_of(&pop), &species_of(&pop), cfg.hm_best)
    } else {
        DominationState::default()
    };
    let mut lost_domination = false;
    let mut stats = vec![generation_stats(0, &pop, dom.dominated)];
    let mut trace = Vec::with_capacity(cfg.generations);

    for generation in 1..=cfg.generations {
        let g = generation as u64;
        let p_cross = match (variant, dom.dominated, lost_domination) {
            (Variant::Dnas3, true, _) => 1.0,
            (Variant::Dnas3, false, true) => P_CROSS_AFTER_DOMINATION,
            _ => cfg.p_cross,
        };
        let mut gen_trace = GenerationTrace {
            generation,
            dominated: dom.dominated,
            p_cross,
            ..GenerationTrace::default()
        };

        let d = deltas(&pop, &ops);
        let mut offspring: Vec<Genome> = pop
            .par_iter()
            .enumerate()
            .map(|(i, m)| mutants(&m.genome, d[i], &ops, variant, seeds, [g, i as u64]))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();

        let species = species_of(&pop);
        let pairs: Vec<(usize, usize)> = if dom.dominated {
            let mut groups: BTreeMap<&SpeciesKey, Vec<usize>> = BTreeMap::new();
            for (i, k) in species.iter().enumerate() {
                groups.entry(k).or_default().push(i);
            }
            groups
                .values()
                .enumerate()
                .flat_map(|(gi, members)| {
                    pair_parents(members.len(), p_cross, &mut seeds.rng(&[g, phase::PAIRING, gi as u64 + 1]))
                        .into_iter()
                        .map(|(a, b)| (members[a], members[b]))
                        .collect::<Vec<_>>()
                })
                .collect()
        } else {
            pair_parents(pop.len(), p_cross, &mut seeds.rng(&[g, phase::PAIRING, 0]))
        };
        for (k, &(a, b)) in pairs.iter().enumerate() {
            gen_trace.crossover_species.push((species[a].clone(), species[b].clone()));
            offspring.push(crossover_pair(
                &pop[a].genome,
                &pop[b].genome,
                ops.min_w,
                ops.max_w,
                &mut seeds.rng(&[g, phase::CROSSOVER, k as u64]),
            ));
        }

        let mut pool = pop;
        pool.extend(evaluate_all(offspring, dataset, &cfg.fitness));
        let fitness = fitness_of(&pool);

        pop = match variant {
            Variant::Dnas1 | Variant::Dnas2 => {
                let idx = roulette_select_with_elitism(
                    &fitness,
                    cfg.pop_size,
                    cfg.hm_best,
                    &mut seeds.rng(&[g, phase::SELECTION]),
                );
                keep(pool, idx)
            }
            Variant::Dnas3 => {
                let keys = species_of(&pool);
                let next_dom = detect_domination(&fitness, &keys, cfg.hm_best);
                let order = rank_order(&fitness);
                let idx = if next_dom.dominated {
                    let lead = next_dom.dominant.iter().chain(&next_dom.secondary);
                    lead.flat_map(|key| {
                        order
                            .iter()
                            .copied()
                            .filter(|&i| &keys[i] == key)
                            .take(cfg.hm_best)
                            .collect::<Vec<_>>()
                    })
                    .collect()
                } else {
                    if dom.dominated {
                        lost_domination = true;
                    }
                    order[..cfg.pop_size.min(order.len())].to_vec()
                };
                dom = next_dom;
                let mut next = keep(pool, idx);
                if !dom.dominated && next.len() < cfg.pop_size {
                    regrow(&mut next, cfg, &ops, dataset, seeds, g);
                }
                next
            }
        };
        gen_trace.survivors = species_of(&pop);
        trace.push(gen_trace);
        stats.push(generation_stats(generation, &pop, dom.dominated));
    }
    Ok(finish(variant.algorithm(), &pop, stats, trace, started))
}

/// Refills the population to `popSize` with mutants of its members, fittest
/// parents first.
fn regrow(pop: &mut Vec<Member>, cfg: &NasConfig, ops: &OperatorConfig, dataset: &Dataset, seeds: SeedStream, g: u64) {
    let order = rank_order(&fitness_of(pop));
    let d = deltas(pop, ops);
    let need = cfg.pop_size - pop.len();
    let mut fresh = Vec::with_capacity(need);
    let max_attempts = 50 * cfg.pop_size;
    let mut attempt = 0;
    while fresh.len() < need && attempt < max_attempts {
        let i = order[attempt % order.len()];
        let kids = mutants(&pop[i].genome, d[i], ops, Variant::Dnas3, seeds.child(&[phase::REGROW]), [g, attempt as u64]);
        fresh.extend(kids.into_iter().take(need - fresh.len()));
        attempt += 1;
    }
    pop.extend(evaluate_all(fresh, dataset, &cfg.fitness));
}
