//! Gradient training of a fixed architecture.
//!
//! Training is open loop: the delayed outputs in each regressor are taken
//! from the target sequence, so every sample is an independent one-step
//! prediction whose derivatives come from one reverse sweep through the
//! network. Fitness is still measured closed loop.

mod lm;
mod scg;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::genome::{Architecture, Genome, SimState};

pub use lm::{levenberg_marquardt, LeastSquares, LmOptions};
pub use scg::{scaled_conjugate_gradient, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainerKind {
    LevenbergMarquardt,
    /// Levenberg-Marquardt on the loss plus a fixed L2 weight penalty.
    BayesianRegularization,
    ScaledConjugateGradient,
}

impl TrainerKind {
    pub const ALL: [TrainerKind; 3] = [
        TrainerKind::LevenbergMarquardt,
        TrainerKind::BayesianRegularization,
        TrainerKind::ScaledConjugateGradient,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            TrainerKind::LevenbergMarquardt => "lm",
            TrainerKind::BayesianRegularization => "br",
            TrainerKind::ScaledConjugateGradient => "scg",
        }
    }
}

impl fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub kind: TrainerKind,
    pub max_epochs: usize,
    /// Training stops once the loss improved by less than this over the
    /// last [`STALL_WINDOW`] epochs.
    pub loss_tolerance: f64,
    pub damping_init: f64,
    pub l2_strength: f64,
}

pub const STALL_WINDOW: usize = 10;

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            kind: TrainerKind::LevenbergMarquardt,
            max_epochs: 200,
            loss_tolerance: 1e-9,
            damping_init: 1e-3,
            l2_strength: 1e-4,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(Error::Config("maxEpochs must be at least 1".into()));
        }
        if !(self.loss_tolerance > 0.0) {
            return Err(Error::Config("lossTolerance must be positive".into()));
        }
        if !(self.damping_init > 0.0 && self.damping_init.is_finite()) {
            return Err(Error::Config("dampingInit must be positive".into()));
        }
        if !(self.l2_strength >= 0.0 && self.l2_strength.is_finite()) {
            return Err(Error::Config("l2Strength must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_kind(&self, kind: TrainerKind) -> Self {
        Self { kind, ..self.clone() }
    }
}

/// Open-loop regression problem of one genome structure on one dataset.
///
/// Weights are handled in [`Genome::flat_weights`] order.
pub struct TeacherForcing<'a> {
    template: &'a Genome,
    /// One regressor per sample, row major.
    regressors: Vec<f64>,
    targets: &'a [f64],
}

impl<'a> TeacherForcing<'a> {
    pub fn new(genome: &'a Genome, dataset: &'a Dataset) -> Result<Self> {
        let n = dataset.len();
        if n <= genome.du.max(genome.dy) {
            return Err(Error::Contract(format!(
                "dataset `{}` has {n} samples, needs more than max(du, dy) = {}",
                dataset.name,
                genome.du.max(genome.dy)
            )));
        }
        let r = genome.regressor_len();
        let mut regressors = Vec::with_capacity(n * r);
        let mut state = SimState::new(genome.du, genome.dy, dataset.nominal());
        let mut x = Vec::with_capacity(r);
        for (&u, &t) in dataset.inputs.iter().zip(&dataset.targets) {
            state.push_input(u);
            state.regressor(&mut x);
            regressors.extend_from_slice(&x);
            state.push_output(t);
        }
        Ok(Self {
            template: genome,
            regressors,
            targets: &dataset.targets,
        })
    }

    pub fn samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_params(&self) -> usize {
        self.template.weight_count()
    }

    fn regressor(&self, k: usize) -> &[f64] {
        let r = self.template.regressor_len();
        &self.regressors[k * r..(k + 1) * r]
    }

    fn with_weights(&self, w: &[f64]) -> Genome {
        let mut g = self.template.clone();
        g.set_flat_weights(w);
        g
    }

    /// Mean squared one-step error.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let g = self.with_weights(w);
        let mut sweep = Sweep::new(&g);
        let sum: f64 = (0..self.samples())
            .map(|k| {
                let e = sweep.forward(&g, self.regressor(k)) - self.targets[k];
                e * e
            })
            .sum();
        sum / self.samples() as f64
    }

    /// Mean squared error and its gradient.
    pub fn loss_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let g = self.with_weights(w);
        let mut sweep = Sweep::new(&g);
        let mut row = vec![0.0; w.len()];
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut sum = 0.0;
        for k in 0..self.samples() {
            let e = sweep.jacobian_row(&g, self.regressor(k), &mut row) - self.targets[k];
            sum += e * e;
            for (gi, ri) in grad.iter_mut().zip(&row) {
                *gi += e * ri;
            }
        }
        let n = self.samples() as f64;
        grad.iter_mut().for_each(|v| *v *= 2.0 / n);
        sum / n
    }
}

impl LeastSquares for TeacherForcing<'_> {
    fn n_params(&self) -> usize {
        TeacherForcing::n_params(self)
    }

    fn n_residuals(&self) -> usize {
        self.samples()
    }

    fn residuals(&self, w: &[f64], r: &mut DVector<f64>) {
        let g = self.with_weights(w);
        let mut sweep = Sweep::new(&g);
        for k in 0..self.samples() {
            r[k] = sweep.forward(&g, self.regressor(k)) - self.targets[k];
        }
    }

    fn residuals_and_jacobian(&self, w: &[f64], r: &mut DVector<f64>, j: &mut DMatrix<f64>) {
        let g = self.with_weights(w);
        let mut sweep = Sweep::new(&g);
        let mut row = vec![0.0; w.len()];
        for k in 0..self.samples() {
            r[k] = sweep.jacobian_row(&g, self.regressor(k), &mut row) - self.targets[k];
            for (c, v) in row.iter().enumerate() {
                j[(k, c)] = *v;
            }
        }
    }
}

impl Objective for TeacherForcing<'_> {
    fn value(&self, w: &[f64]) -> f64 {
        self.loss(w)
    }

    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        self.loss_and_gradient(w, grad)
    }
}

/// Layer activations of one forward pass, kept for the reverse sweep.
struct Sweep {
    acts: Vec<Vec<f64>>,
    back: Vec<f64>,
    back_prev: Vec<f64>,
}

impl Sweep {
    fn new(g: &Genome) -> Self {
        let mut acts = vec![Vec::with_capacity(g.regressor_len())];
        acts.extend(g.hidden_layers.iter().map(|l| Vec::with_capacity(l.len())));
        Self {
            acts,
            back: Vec::new(),
            back_prev: Vec::new(),
        }
    }

    fn forward(&mut self, g: &Genome, x: &[f64]) -> f64 {
        self.acts[0].clear();
        self.acts[0].extend_from_slice(x);
        for (l, layer) in g.hidden_layers.iter().enumerate() {
            let (done, rest) = self.acts.split_at_mut(l + 1);
            let input = &done[l];
            let out = &mut rest[0];
            out.clear();
            out.extend(layer.iter().map(|n| {
                let (w, b) = n.weights.split_at(n.weights.len() - 1);
                n.activation
                    .apply(w.iter().zip(input).fold(b[0], |acc, (w, x)| acc + w * x))
            }));
        }
        let last = self.acts.last().expect("input activations");
        let (w, b) = g.output.weights.split_at(g.output.weights.len() - 1);
        g.output
            .activation
            .apply(w.iter().zip(last).fold(b[0], |acc, (w, x)| acc + w * x))
    }

    /// Output and its derivatives with respect to every weight.
    fn jacobian_row(&mut self, g: &Genome, x: &[f64], row: &mut [f64]) -> f64 {
        let y = self.forward(g, x);
        let n_layers = g.hidden_layers.len();
        let out_len = g.output.weights.len();
        let mut end = row.len();
        let out_slot = &mut row[end - out_len..end];
        let d_out = g.output.activation.derivative_at_output(y);
        for (s, a) in out_slot.iter_mut().zip(&self.acts[n_layers]) {
            *s = d_out * a;
        }
        out_slot[out_len - 1] = d_out;
        end -= out_len;

        // back[i] = dy / d(activation i of the layer being processed)
        self.back.clear();
        self.back
            .extend(g.output.input_weights().iter().map(|w| d_out * w));
        for l in (0..n_layers).rev() {
            let layer = &g.hidden_layers[l];
            let input = &self.acts[l];
            let outputs = &self.acts[l + 1];
            let fan = input.len() + 1;
            let start = end - fan * layer.len();
            self.back_prev.clear();
            self.back_prev.resize(input.len(), 0.0);
            for (j, n) in layer.iter().enumerate() {
                let delta = self.back[j] * n.activation.derivative_at_output(outputs[j]);
                let slot = &mut row[start + j * fan..start + (j + 1) * fan];
                for (s, a) in slot.iter_mut().zip(input) {
                    *s = delta * a;
                }
                slot[fan - 1] = delta;
                if l > 0 {
                    for (p, w) in self.back_prev.iter_mut().zip(n.input_weights()) {
                        *p += delta * w;
                    }
                }
            }
            std::mem::swap(&mut self.back, &mut self.back_prev);
            end = start;
        }
        debug_assert_eq!(end, 0);
        y
    }
}

/// Open-loop mean squared error of `genome` on `dataset` and its gradient,
/// aligned with [`Genome::flat_weights`].
pub fn teacher_forcing_loss_and_gradient(genome: &Genome, dataset: &Dataset) -> Result<(f64, Vec<f64>)> {
    let problem = TeacherForcing::new(genome, dataset)?;
    let w = genome.flat_weights();
    let mut grad = vec![0.0; w.len()];
    let loss = problem.loss_and_gradient(&w, &mut grad);
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub genome: Genome,
    /// Open-loop mean squared error of the returned weights.
    pub loss: f64,
    /// Loss before the first epoch.
    pub initial_loss: f64,
    pub epochs: usize,
    /// A non-finite loss was met; the best weights seen are returned.
    pub diverged: bool,
}

/// Improvement-stall test shared by the trainers: `history` holds the
/// objective after each epoch, initial value first.
pub(crate) fn stalled(history: &[f64], tolerance: f64) -> bool {
    history.len() > STALL_WINDOW && history[history.len() - 1 - STALL_WINDOW] - history[history.len() - 1] < tolerance
}

/// Trains the weights of `genome`; the architecture is left untouched.
pub fn train(genome: &Genome, dataset: &Dataset, spec: &TrainSpec) -> Result<TrainOutcome> {
    spec.validate()?;
    genome.validate()?;
    let problem = TeacherForcing::new(genome, dataset)?;
    let w0 = genome.flat_weights();
    let initial_loss = problem.loss(&w0);
    if !initial_loss.is_finite() {
        return Ok(TrainOutcome {
            genome: genome.clone(),
            loss: initial_loss,
            initial_loss,
            epochs: 0,
            diverged: true,
        });
    }
    if spec.loss_tolerance == f64::INFINITY {
        return Ok(TrainOutcome {
            genome: genome.clone(),
            loss: initial_loss,
            initial_loss,
            epochs: 0,
            diverged: false,
        });
    }
    let (w, epochs, diverged) = match spec.kind {
        TrainerKind::LevenbergMarquardt | TrainerKind::BayesianRegularization => {
            let l2 = if spec.kind == TrainerKind::BayesianRegularization {
                spec.l2_strength
            } else {
                0.0
            };
            let opts = LmOptions {
                max_epochs: spec.max_epochs,
                tolerance: spec.loss_tolerance,
                damping_init: spec.damping_init,
                l2,
            };
            let r = levenberg_marquardt(&problem, &w0, &opts);
            (r.params, r.epochs, r.diverged)
        }
        TrainerKind::ScaledConjugateGradient => {
            let r = scaled_conjugate_gradient(&problem, &w0, spec.max_epochs, spec.loss_tolerance);
            (r.params, r.epochs, r.diverged)
        }
    };
    let mut out = genome.clone();
    out.set_flat_weights(&w);
    Ok(TrainOutcome {
        loss: problem.loss(&w),
        genome: out,
        initial_loss,
        epochs,
        diverged,
    })
}

/// Draws weights uniformly from `[min_w, max_w]` for `arch` and trains them.
pub fn train_from_scratch<R: Rng + ?Sized>(
    arch: &Architecture,
    dataset: &Dataset,
    spec: &TrainSpec,
    min_w: f64,
    max_w: f64,
    rng: &mut R,
) -> Result<TrainOutcome> {
    let g = Genome::random(arch, min_w, max_w, rng);
    train(&g, dataset, spec)
}

/// Outcome of a generic optimiser run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub params: Vec<f64>,
    /// Objective after each epoch, the initial value first.
    pub history: Vec<f64>,
    pub epochs: usize,
    pub diverged: bool,
}
