//! Recurrent network genome and closed-loop simulation.
//!
//! A genome is a layered perceptron with a single linear output neuron whose
//! first hidden layer reads a tapped delay line of the process input and of
//! the network's own past outputs:
//!
//! ```text
//! x(k) = [u(k), u(k-1), .., u(k-du), y(k-1), .., y(k-dy), 1]
//! ```
//!
//! The bias is stored as the last weight of every neuron.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::NasConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActivationKind {
    /// tanh, range (-1, 1).
    BipolarSigmoidHidden,
    LinearOutput,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, net: f64) -> f64 {
        match self {
            ActivationKind::BipolarSigmoidHidden => net.tanh(),
            ActivationKind::LinearOutput => net,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn derivative_at_output(self, out: f64) -> f64 {
        match self {
            ActivationKind::BipolarSigmoidHidden => 1.0 - out * out,
            ActivationKind::LinearOutput => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    /// Input weights followed by the bias.
    pub weights: Vec<f64>,
    pub activation: ActivationKind,
}

impl Neuron {
    pub fn new(weights: Vec<f64>, activation: ActivationKind) -> Self {
        Self {
            weights,
            activation,
        }
    }

    pub fn random<R: Rng + ?Sized>(
        n_weights: usize,
        activation: ActivationKind,
        min_w: f64,
        max_w: f64,
        rng: &mut R,
    ) -> Self {
        let weights = (0..n_weights).map(|_| uniform(rng, min_w, max_w)).collect();
        Self {
            weights,
            activation,
        }
    }

    pub fn bias(&self) -> f64 {
        *self.weights.last().expect("neuron has a bias slot")
    }

    pub fn input_weights(&self) -> &[f64] {
        &self.weights[..self.weights.len() - 1]
    }

    #[inline]
    fn net(&self, x: &[f64]) -> f64 {
        let (w, b) = self.weights.split_at(self.weights.len() - 1);
        debug_assert_eq!(w.len(), x.len());
        w.iter().zip(x).fold(b[0], |acc, (w, x)| acc + w * x)
    }
}

/// Uniform draw from `[lo, hi]`; collapses to `lo` for a degenerate range.
pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Structure of a network without its weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<usize>,
    pub du: usize,
    pub dy: usize,
}

impl Architecture {
    pub fn new(layers: Vec<usize>, du: usize, dy: usize) -> Self {
        Self { layers, du, dy }
    }

    pub fn regressor_len(&self) -> usize {
        1 + self.du + self.dy
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().sum()
    }
}

/// Number of weights (bias included) a neuron in `layer_index` needs.
///
/// Layers are numbered from 1; `layers.len() + 1` is the output layer.
pub fn required_weights(layer_index: usize, arch: &Architecture) -> Result<usize> {
    let n_layers = arch.layers.len();
    if layer_index == 0 || layer_index > n_layers + 1 {
        return Err(Error::Structure(format!(
            "layer index {layer_index} outside 1..={}",
            n_layers + 1
        )));
    }
    if layer_index == 1 {
        Ok(arch.regressor_len() + 1)
    } else {
        Ok(arch.layers[layer_index - 2] + 1)
    }
}

/// Values written into the delay lines before the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nominal {
    pub input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub hidden_layers: Vec<Vec<Neuron>>,
    pub output: Neuron,
    pub du: usize,
    pub dy: usize,
}

impl Genome {
    /// Genome with the given architecture and weights uniform in `[min_w, max_w]`.
    pub fn random<R: Rng + ?Sized>(arch: &Architecture, min_w: f64, max_w: f64, rng: &mut R) -> Self {
        let mut fan_in = arch.regressor_len();
        let mut hidden_layers = Vec::with_capacity(arch.layers.len());
        for &size in &arch.layers {
            let layer = (0..size)
                .map(|_| {
                    Neuron::random(fan_in + 1, ActivationKind::BipolarSigmoidHidden, min_w, max_w, rng)
                })
                .collect();
            hidden_layers.push(layer);
            fan_in = size;
        }
        let output = Neuron::random(fan_in + 1, ActivationKind::LinearOutput, min_w, max_w, rng);
        Self {
            hidden_layers,
            output,
            du: arch.du,
            dy: arch.dy,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self.hidden_layers.iter().map(Vec::len).collect(),
            du: self.du,
            dy: self.dy,
        }
    }

    /// Total number of hidden neurons.
    pub fn neuron_count(&self) -> usize {
        self.hidden_layers.iter().map(Vec::len).sum()
    }

    pub fn delay_sum(&self) -> usize {
        self.du + self.dy
    }

    pub fn regressor_len(&self) -> usize {
        1 + self.du + self.dy
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.is_empty() {
            return Err(Error::Structure("genome has no hidden layer".into()));
        }
        let arch = self.architecture();
        for (l, layer) in self.hidden_layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::Structure(format!("hidden layer {} is empty", l + 1)));
            }
            let need = required_weights(l + 1, &arch)?;
            for (j, n) in layer.iter().enumerate() {
                if n.activation != ActivationKind::BipolarSigmoidHidden {
                    return Err(Error::Structure(format!(
                        "hidden neuron {}/{} has activation {:?}",
                        l + 1,
                        j,
                        n.activation
                    )));
                }
                if n.weights.len() != need {
                    return Err(Error::Structure(format!(
                        "hidden neuron {}/{} has {} weights, expected {need}",
                        l + 1,
                        j,
                        n.weights.len()
                    )));
                }
            }
        }
        let need = required_weights(arch.layers.len() + 1, &arch)?;
        if self.output.activation != ActivationKind::LinearOutput {
            return Err(Error::Structure("output neuron must be linear".into()));
        }
        if self.output.weights.len() != need {
            return Err(Error::Structure(format!(
                "output neuron has {} weights, expected {need}",
                self.output.weights.len()
            )));
        }
        Ok(())
    }

    pub fn weight_count(&self) -> usize {
        self.neurons().map(|n| n.weights.len()).sum()
    }

    /// Hidden neurons layer by layer, then the output neuron.
    pub fn neurons(&self) -> impl Iterator<Item = &Neuron> {
        self.hidden_layers.iter().flatten().chain(std::iter::once(&self.output))
    }

    pub fn neurons_mut(&mut self) -> impl Iterator<Item = &mut Neuron> {
        self.hidden_layers
            .iter_mut()
            .flatten()
            .chain(std::iter::once(&mut self.output))
    }

    /// All weights in [`Genome::neurons`] order.
    pub fn flat_weights(&self) -> Vec<f64> {
        self.neurons().flat_map(|n| n.weights.iter().copied()).collect()
    }

    pub fn set_flat_weights(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.weight_count(), "flat weight length");
        let mut at = 0;
        for n in self.neurons_mut() {
            let len = n.weights.len();
            n.weights.copy_from_slice(&flat[at..at + len]);
            at += len;
        }
    }

    /// One forward pass for a prepared regressor `x`.
    pub fn forward(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        scratch.a.clear();
        scratch.a.extend_from_slice(x);
        for layer in &self.hidden_layers {
            scratch.b.clear();
            scratch
                .b
                .extend(layer.iter().map(|n| n.activation.apply(n.net(&scratch.a))));
            std::mem::swap(&mut scratch.a, &mut scratch.b);
        }
        self.output.activation.apply(self.output.net(&scratch.a))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a genome.
    pub fn from_json(text: &str) -> Result<Self> {
        let g: Genome = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }
}

/// Reusable buffers for [`Genome::forward`].
#[derive(Debug, Default)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Builds a random genome following the initialisation rule of the search.
///
/// Delays are pinned when the configuration fixes them, otherwise drawn from
/// `1..=max`. Every hidden layer gets `1..=maxNinLay` neurons.
pub fn init_genome<R: Rng + ?Sized>(config: &NasConfig, rng: &mut R) -> Result<Genome> {
    config.validate()?;
    let du = draw_delay(config.du, config.du_max, rng);
    let dy = draw_delay(config.dy, config.dy_max, rng);
    let layers = (0..config.max_lay)
        .map(|_| rng.random_range(1..=config.max_nin_lay))
        .collect();
    let arch = Architecture::new(layers, du, dy);
    Ok(Genome::random(&arch, config.min_w, config.max_w, rng))
}

fn draw_delay<R: Rng + ?Sized>(fixed: Option<usize>, max: usize, rng: &mut R) -> usize {
    match fixed {
        Some(d) => d,
        None if max == 0 => 0,
        None => rng.random_range(1..=max),
    }
}

/// Delay lines feeding the first hidden layer.
#[derive(Debug, Clone)]
pub struct SimState {
    /// u(k), u(k-1), .., u(k-du); front is the newest sample.
    input_history: VecDeque<f64>,
    /// y(k-1), .., y(k-dy).
    output_history: VecDeque<f64>,
}

impl SimState {
    pub fn new(du: usize, dy: usize, nominal: Nominal) -> Self {
        Self {
            input_history: std::iter::repeat_n(nominal.input, du + 1).collect(),
            output_history: std::iter::repeat_n(nominal.output, dy).collect(),
        }
    }

    pub fn push_input(&mut self, u: f64) {
        self.input_history.pop_back();
        self.input_history.push_front(u);
    }

    pub fn push_output(&mut self, y: f64) {
        if !self.output_history.is_empty() {
            self.output_history.pop_back();
            self.output_history.push_front(y);
        }
    }

    pub fn regressor(&self, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.input_history.iter().copied());
        buf.extend(self.output_history.iter().copied());
    }
}

/// Runs the network in closed loop over `inputs`, feeding back its own output.
pub fn simulate_closed_loop(genome: &Genome, inputs: &[f64], nominal: Nominal) -> Result<Vec<f64>> {
    if inputs.is_empty() {
        return Err(Error::Contract("closed-loop simulation needs at least one input sample".into()));
    }
    let mut state = SimState::new(genome.du, genome.dy, nominal);
    let mut x = Vec::with_capacity(genome.regressor_len());
    let mut scratch = Scratch::default();
    let mut out = Vec::with_capacity(inputs.len());
    for (k, &u) in inputs.iter().enumerate() {
        state.push_input(u);
        state.regressor(&mut x);
        let y = genome.forward(&x, &mut scratch);
        if !y.is_finite() {
            return Err(Error::Diverged { step: k });
        }
        state.push_output(y);
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Algorithm, NasConfig};
    use crate::rng::SeedStream;

    fn arch(layers: &[usize], du: usize, dy: usize) -> Architecture {
        Architecture::new(layers.to_vec(), du, dy)
    }

    #[test]
    fn required_weights_first_layer() {
        assert_eq!(required_weights(1, &arch(&[3], 5, 5)).unwrap(), 12);
        assert_eq!(required_weights(1, &arch(&[3], 0, 0)).unwrap(), 2);
    }

    #[test]
    fn required_weights_deeper_layers() {
        let a = arch(&[4, 2], 1, 1);
        assert_eq!(required_weights(2, &a).unwrap(), 5);
        assert_eq!(required_weights(3, &a).unwrap(), 3);
    }

    #[test]
    fn required_weights_out_of_range() {
        let a = arch(&[4], 1, 1);
        assert!(matches!(required_weights(0, &a), Err(Error::Structure(_))));
        assert!(matches!(required_weights(3, &a), Err(Error::Structure(_))));
    }

    #[test]
    fn init_pins_dnas1_delays() {
        let cfg = NasConfig::preset(Algorithm::Dnas1);
        for seed in 0..20 {
            let g = init_genome(&cfg, &mut SeedStream::new(seed).rng(&[])).unwrap();
            assert_eq!((g.du, g.dy), (5, 5));
            g.validate().unwrap();
            assert!((1..=cfg.max_nin_lay).contains(&g.neuron_count()));
        }
    }

    #[test]
    fn init_single_neuron_and_degenerate_weights() {
        let mut cfg = NasConfig::preset(Algorithm::Dnas2);
        cfg.max_nin_lay = 1;
        cfg.min_w = 0.5;
        cfg.max_w = 0.5;
        let g = init_genome(&cfg, &mut SeedStream::new(3).rng(&[])).unwrap();
        assert_eq!(g.neuron_count(), 1);
        assert!(g.flat_weights().iter().all(|&w| w == 0.5));
        assert!((1..=cfg.du_max).contains(&g.du));
    }

    #[test]
    fn init_rejects_bad_config() {
        let mut cfg = NasConfig::preset(Algorithm::Dnas2);
        cfg.max_nin_lay = 0;
        assert!(init_genome(&cfg, &mut SeedStream::new(3).rng(&[])).is_err());
    }

    #[test]
    fn zero_genome_outputs_zero() {
        let mut g = Genome::random(&arch(&[3], 2, 2), 0.0, 0.0, &mut SeedStream::new(0).rng(&[]));
        g.set_flat_weights(&vec![0.0; g.weight_count()]);
        let y = simulate_closed_loop(&g, &[0.3, -1.0, 2.0], Nominal { input: -1.098, output: 1.0 }).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn constant_propagation() {
        let g = Genome {
            hidden_layers: vec![vec![Neuron::new(vec![0.0, 0.0], ActivationKind::BipolarSigmoidHidden)]],
            output: Neuron::new(vec![1.0, 0.7], ActivationKind::LinearOutput),
            du: 0,
            dy: 0,
        };
        g.validate().unwrap();
        let y = simulate_closed_loop(&g, &[1.0, -2.0, 5.0, 0.0], Nominal { input: 0.0, output: 1.0 }).unwrap();
        assert_eq!(y, vec![0.7; 4]);
    }

    /// Two hidden neurons, du = dy = 1, five-sample step. The golden vector was
    /// produced by unrolling the recurrence by hand (see the inline oracle).
    #[test]
    fn hand_unrolled_step_response() {
        let g = Genome {
            hidden_layers: vec![vec![
                Neuron::new(vec![0.5, -0.25, 0.3, 0.1], ActivationKind::BipolarSigmoidHidden),
                Neuron::new(vec![-0.4, 0.2, 0.6, -0.05], ActivationKind::BipolarSigmoidHidden),
            ]],
            output: Neuron::new(vec![0.8, -0.3, 0.2], ActivationKind::LinearOutput),
            du: 1,
            dy: 1,
        };
        let u = [0.0, 1.0, 1.0, 1.0, 1.0];
        let nominal = Nominal { input: 0.0, output: 1.0 };

        // oracle: explicit recurrence, written independently of SimState
        let mut oracle = Vec::new();
        let (mut u_prev, mut y_prev) = (nominal.input, nominal.output);
        for &uk in &u {
            let h1 = (0.5 * uk - 0.25 * u_prev + 0.3 * y_prev + 0.1).tanh();
            let h2 = (-0.4 * uk + 0.2 * u_prev + 0.6 * y_prev - 0.05).tanh();
            let y = 0.8 * h1 - 0.3 * h2 + 0.2;
            oracle.push(y);
            u_prev = uk;
            y_prev = y;
        }

        let golden = [
            0.3538031064471094,
            0.7566027500501411,
            0.5560201625501549,
            0.5551595836341711,
            0.5551535037040591,
        ];
        let got = simulate_closed_loop(&g, &u, nominal).unwrap();
        for k in 0..5 {
            assert!((oracle[k] - golden[k]).abs() < 1e-14, "oracle {k}");
            assert!((got[k] - golden[k]).abs() < 1e-14, "sim {k}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let g = Genome {
            hidden_layers: vec![vec![Neuron::new(vec![1.0, 0.0], ActivationKind::BipolarSigmoidHidden)]],
            output: Neuron::new(vec![1.0, 0.0], ActivationKind::LinearOutput),
            du: 0,
            dy: 0,
        };
        let r = simulate_closed_loop(&g, &[0.0, f64::NAN], Nominal { input: 0.0, output: 0.0 });
        assert!(matches!(r, Err(Error::Diverged { step: 1 })));
    }

    #[test]
    fn empty_input_is_contract_error() {
        let g = Genome::random(&arch(&[1], 0, 0), -1.0, 1.0, &mut SeedStream::new(1).rng(&[]));
        assert!(matches!(
            simulate_closed_loop(&g, &[], Nominal { input: 0.0, output: 0.0 }),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = Genome::random(&arch(&[2, 3], 1, 2), -1.0, 1.0, &mut SeedStream::new(9).rng(&[]));
        let back = Genome::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);

        let mut bad = g.clone();
        bad.output.weights.pop();
        assert!(Genome::from_json(&serde_json::to_string(&bad).unwrap()).is_err());
    }
}
