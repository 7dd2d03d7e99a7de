//! Mutation, crossover and selection operators for evolving genomes whose
//! weights are searched directly (DNAS1 to DNAS3).
//!
//! Every operator takes its source genomes by reference and returns new
//! genomes. Each structural event (one added neuron, one deleted neuron, one
//! delay change) yields its own offspring.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::NasConfig;
use crate::genome::{uniform, ActivationKind, Genome, Neuron};

/// Below this spread of the fitness values every individual gets `minDelta`.
pub const DELTA_DEGENERATE_SPREAD: f64 = 1e-12;

/// Added to shifted fitness values so the worst candidate keeps a chance.
pub const ROULETTE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub p_mut_w: f64,
    pub p_mut_new_n: f64,
    pub p_mut_del_n: f64,
    pub p_mut_d: f64,
    pub p_cross: f64,
    pub min_delta: f64,
    pub max_delta: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub hm_best: usize,
    pub max_nin_lay: usize,
    pub du_max: usize,
    pub dy_max: usize,
}

impl From<&NasConfig> for OperatorConfig {
    fn from(c: &NasConfig) -> Self {
        Self {
            p_mut_w: c.p_mut_w,
            p_mut_new_n: c.p_mut_new_n,
            p_mut_del_n: c.p_mut_del_n,
            p_mut_d: c.p_mut_d,
            p_cross: c.p_cross,
            min_delta: c.min_delta,
            max_delta: c.max_delta,
            min_w: c.min_w,
            max_w: c.max_w,
            hm_best: c.hm_best,
            max_nin_lay: c.max_nin_lay,
            du_max: c.du.map_or(c.du_max, |d| d.max(c.du_max)),
            dy_max: c.dy.map_or(c.dy_max, |d| d.max(c.dy_max)),
        }
    }
}

/// Maps fitness values to weight-mutation magnitudes: the fittest individual
/// gets `min_delta`, the least fit `max_delta`, linearly in between.
pub fn delta_w(fitness: &[f64], min_delta: f64, max_delta: f64) -> Vec<f64> {
    let mut fit: Vec<f64> = fitness.iter().map(|f| -f).collect();
    let shift = fit.iter().copied().fold(f64::INFINITY, f64::min).abs();
    fit.iter_mut().for_each(|f| *f += shift);
    let min_fit = fit.iter().copied().fold(f64::INFINITY, f64::min);
    let max_fit = fit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = max_fit - min_fit;
    if !(spread >= DELTA_DEGENERATE_SPREAD) {
        return vec![min_delta; fitness.len()];
    }
    fit.iter()
        .map(|f| (max_delta - min_delta) * (f - min_fit) / spread + min_delta)
        .collect()
}

/// Shifts each weight, with probability `p_mut_w`, by `delta` in a random
/// direction. Returns `None` when no weight was selected.
pub fn mutate_weights<R: Rng + ?Sized>(genome: &Genome, delta: f64, p_mut_w: f64, rng: &mut R) -> Option<Genome> {
    let mut child = genome.clone();
    let mut mutated = false;
    for n in child.neurons_mut() {
        for w in &mut n.weights {
            if rng.random_bool(p_mut_w) {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                *w += sign * delta;
                mutated = true;
            }
        }
    }
    mutated.then_some(child)
}

fn fan_in(genome: &Genome, layer: usize) -> usize {
    if layer == 0 {
        genome.regressor_len()
    } else {
        genome.hidden_layers[layer - 1].len()
    }
}

/// Neurons reading the outputs of hidden layer `layer`.
fn consumers_mut(genome: &mut Genome, layer: usize) -> Vec<&mut Neuron> {
    if layer + 1 < genome.hidden_layers.len() {
        genome.hidden_layers[layer + 1].iter_mut().collect()
    } else {
        vec![&mut genome.output]
    }
}

/// Neuron birth: every free place of every hidden layer gets a new neuron
/// with probability `p_mut_new_n`; each birth is a separate offspring.
pub fn mutate_add_neurons<R: Rng + ?Sized>(
    genome: &Genome,
    p_mut_new_n: f64,
    min_w: f64,
    max_w: f64,
    max_nin_lay: usize,
    rng: &mut R,
) -> Vec<Genome> {
    let mut out = Vec::new();
    for layer in 0..genome.hidden_layers.len() {
        let size = genome.hidden_layers[layer].len();
        for _ in 0..max_nin_lay.saturating_sub(size) {
            if !rng.random_bool(p_mut_new_n) {
                continue;
            }
            let mut child = genome.clone();
            let neuron = Neuron::random(
                fan_in(genome, layer) + 1,
                ActivationKind::BipolarSigmoidHidden,
                min_w,
                max_w,
                rng,
            );
            child.hidden_layers[layer].push(neuron);
            for n in consumers_mut(&mut child, layer) {
                n.weights.insert(size, uniform(rng, min_w, max_w));
            }
            out.push(child);
        }
    }
    out
}

/// Neuron death: every hidden neuron dies with probability `p_mut_del_n`;
/// each death is a separate offspring. A layer's last neuron never dies.
pub fn mutate_delete_neurons<R: Rng + ?Sized>(genome: &Genome, p_mut_del_n: f64, rng: &mut R) -> Vec<Genome> {
    let mut out = Vec::new();
    for layer in 0..genome.hidden_layers.len() {
        let size = genome.hidden_layers[layer].len();
        for j in 0..size {
            if !rng.random_bool(p_mut_del_n) || size == 1 {
                continue;
            }
            let mut child = genome.clone();
            child.hidden_layers[layer].remove(j);
            for n in consumers_mut(&mut child, layer) {
                n.weights.remove(j);
            }
            out.push(child);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DelayKind {
    Input,
    Feedback,
}

fn shift_delay<R: Rng + ?Sized>(
    genome: &Genome,
    kind: DelayKind,
    up: bool,
    max: usize,
    min_w: f64,
    max_w: f64,
    rng: &mut R,
) -> Option<Genome> {
    let current = match kind {
        DelayKind::Input => genome.du,
        DelayKind::Feedback => genome.dy,
    };
    if (up && current >= max) || (!up && current == 0) {
        return None;
    }
    // first slot after the block being changed
    let block_end = match kind {
        DelayKind::Input => 1 + genome.du,
        DelayKind::Feedback => 1 + genome.du + genome.dy,
    };
    let mut child = genome.clone();
    for n in &mut child.hidden_layers[0] {
        if up {
            n.weights.insert(block_end, uniform(rng, min_w, max_w));
        } else {
            n.weights.remove(block_end - 1);
        }
    }
    let d = match kind {
        DelayKind::Input => &mut child.du,
        DelayKind::Feedback => &mut child.dy,
    };
    *d = if up { *d + 1 } else { *d - 1 };
    Some(child)
}

/// Delay mutation: `du` and `dy` are each selected with probability `p_mut_d`
/// and moved one step up or down; each change is a separate offspring.
pub fn mutate_delays<R: Rng + ?Sized>(
    genome: &Genome,
    p_mut_d: f64,
    min_w: f64,
    max_w: f64,
    du_max: usize,
    dy_max: usize,
    rng: &mut R,
) -> Vec<Genome> {
    let mut out = Vec::new();
    for (kind, max) in [(DelayKind::Input, du_max), (DelayKind::Feedback, dy_max)] {
        if rng.random_bool(p_mut_d) {
            let up = rng.random_bool(0.5);
            out.extend(shift_delay(genome, kind, up, max, min_w, max_w, rng));
        }
    }
    out
}

/// `round(r a + (1 - r) b)`, rounding halves away from zero.
pub fn cross_count(r: f64, a: usize, b: usize) -> usize {
    (r * a as f64 + (1.0 - r) * b as f64).round() as usize
}

/// `r a + (1 - r) b`, kept inside the closed interval spanned by `a` and `b`.
pub fn blend(r: f64, a: f64, b: f64) -> f64 {
    if a == b {
        return a;
    }
    (r * a + (1.0 - r) * b).clamp(a.min(b), a.max(b))
}

/// Where a child neuron (or input slot) comes from: parent, and position in
/// that parent's layer.
#[derive(Debug, Clone, Copy)]
struct Origin {
    parent: usize,
    layer: usize,
    index: usize,
}

fn first_layer_slots(child_du: usize, child_dy: usize, parents: [&Genome; 2]) -> Vec<Vec<Origin>> {
    let mut slots = Vec::with_capacity(1 + child_du + child_dy);
    for lag in 0..=child_du {
        let from = (0..2)
            .filter(|&p| lag <= parents[p].du)
            .map(|p| Origin {
                parent: p,
                layer: usize::MAX,
                index: lag,
            })
            .collect();
        slots.push(from);
    }
    for lag in 1..=child_dy {
        let from = (0..2)
            .filter(|&p| lag <= parents[p].dy)
            .map(|p| Origin {
                parent: p,
                layer: usize::MAX,
                index: parents[p].du + lag,
            })
            .collect();
        slots.push(from);
    }
    slots
}

fn build_neuron<R: Rng + ?Sized>(
    parents: [&Genome; 2],
    sources: &[(usize, &Neuron)],
    input_layer: usize,
    slots: &[Vec<Origin>],
    activation: ActivationKind,
    min_w: f64,
    max_w: f64,
    rng: &mut R,
) -> Neuron {
    let mut weights = Vec::with_capacity(slots.len() + 1);
    for slot in slots {
        let mut vals = [None, None];
        for &(p, neuron) in sources {
            let reads = if input_layer == usize::MAX {
                usize::MAX
            } else if input_layer == usize::MAX - 1 {
                // output neuron: reads the parent's last hidden layer
                parents[p].hidden_layers.len() - 1
            } else {
                input_layer
            };
            if let Some(o) = slot.iter().find(|o| o.parent == p && o.layer == reads) {
                vals[p] = Some(neuron.weights[o.index]);
            }
        }
        let w = match vals {
            [Some(a), Some(b)] => blend(rng.random(), a, b),
            [Some(a), None] | [None, Some(a)] => a,
            [None, None] => uniform(rng, min_w, max_w),
        };
        weights.push(w);
    }
    let bias = match sources {
        [(_, a), (_, b)] => blend(rng.random(), a.bias(), b.bias()),
        [(_, a)] => a.bias(),
        _ => unreachable!("a child neuron has one or two sources"),
    };
    weights.push(bias);
    Neuron::new(weights, activation)
}

/// Recombines two parents into one child.
///
/// Delays are crossed arithmetically with rounding. Neurons at positions
/// present in both parents are blended weight by weight, matching weights
/// that serve the same input; a weight present in only one parent is copied.
/// A neuron present in only one parent is copied with probability 1/2 and
/// appended after the child's last neuron. Input weights a child neuron
/// needs but neither source parent provides are drawn from `[min_w, max_w]`.
pub fn crossover_pair<R: Rng + ?Sized>(p1: &Genome, p2: &Genome, min_w: f64, max_w: f64, rng: &mut R) -> Genome {
    let parents = [p1, p2];
    let du = cross_count(rng.random(), p1.du, p2.du);
    let dy = cross_count(rng.random(), p1.dy, p2.dy);

    let mut slots = first_layer_slots(du, dy, parents);
    let mut input_layer = usize::MAX;
    let n_layers = p1.hidden_layers.len().max(p2.hidden_layers.len());
    let mut hidden_layers = Vec::with_capacity(n_layers);

    for l in 0..n_layers {
        let present: Vec<usize> = (0..2).filter(|&p| l < parents[p].hidden_layers.len()).collect();
        let mut members: Vec<Vec<Origin>> = Vec::new();
        if present.len() == 2 {
            let (a, b) = (p1.hidden_layers[l].len(), p2.hidden_layers[l].len());
            for j in 0..a.min(b) {
                members.push(vec![
                    Origin { parent: 0, layer: l, index: j },
                    Origin { parent: 1, layer: l, index: j },
                ]);
            }
            let longer = if a > b { 0 } else { 1 };
            for j in a.min(b)..a.max(b) {
                if rng.random_bool(0.5) {
                    members.push(vec![Origin { parent: longer, layer: l, index: j }]);
                }
            }
        } else {
            let p = present[0];
            for j in 0..parents[p].hidden_layers[l].len() {
                members.push(vec![Origin { parent: p, layer: l, index: j }]);
            }
        }

        let layer: Vec<Neuron> = members
            .iter()
            .map(|m| {
                let sources: Vec<(usize, &Neuron)> = m
                    .iter()
                    .map(|o| (o.parent, &parents[o.parent].hidden_layers[l][o.index]))
                    .collect();
                let reads = if l == 0 { usize::MAX } else { l - 1 };
                build_neuron(
                    parents,
                    &sources,
                    reads,
                    &slots,
                    ActivationKind::BipolarSigmoidHidden,
                    min_w,
                    max_w,
                    rng,
                )
            })
            .collect();
        hidden_layers.push(layer);
        slots = members;
        input_layer = l;
    }
    let _ = input_layer;

    let sources = [(0, &p1.output), (1, &p2.output)];
    let output = build_neuron(
        parents,
        &sources,
        usize::MAX - 1,
        &slots,
        ActivationKind::LinearOutput,
        min_w,
        max_w,
        rng,
    );
    Genome {
        hidden_layers,
        output,
        du,
        dy,
    }
}

/// Draws the parent pool (each index independently with `p_cross`) and pairs
/// it at random. An odd leftover stays unpaired.
pub fn pair_parents<R: Rng + ?Sized>(population: usize, p_cross: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut pool: Vec<usize> = (0..population).filter(|_| rng.random_bool(p_cross)).collect();
    pool.shuffle(rng);
    pool.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Indices sorted by decreasing fitness; ties keep their original order.
pub fn rank_order(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    idx
}

/// Elitist roulette over a `mu + lambda` pool.
///
/// The `hm_best` fittest candidates survive; the remaining `pop_size -
/// hm_best` places are drawn without replacement with probability
/// proportional to `fitness - min(fitness) + ROULETTE_EPSILON`. Returns the
/// surviving indices in ascending (pool) order.
pub fn roulette_select_with_elitism<R: Rng + ?Sized>(
    fitness: &[f64],
    pop_size: usize,
    hm_best: usize,
    rng: &mut R,
) -> Vec<usize> {
    if fitness.len() <= pop_size {
        return (0..fitness.len()).collect();
    }
    let order = rank_order(fitness);
    let elite = hm_best.min(pop_size);
    let mut chosen = vec![false; fitness.len()];
    for &i in &order[..elite] {
        chosen[i] = true;
    }
    let min = fitness.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = fitness.iter().map(|f| f - min + ROULETTE_EPSILON).collect();
    let mut remaining: f64 = (0..fitness.len()).filter(|&i| !chosen[i]).map(|i| weights[i]).sum();
    for _ in elite..pop_size {
        let mut target = rng.random::<f64>() * remaining;
        let mut pick = None;
        for i in 0..fitness.len() {
            if chosen[i] {
                continue;
            }
            pick = Some(i);
            if target < weights[i] {
                break;
            }
            target -= weights[i];
        }
        let i = pick.expect("pool larger than pop_size");
        chosen[i] = true;
        remaining -= weights[i];
    }
    (0..fitness.len()).filter(|&i| chosen[i]).collect()
}
