//! Surrogate reactor used as a data source.
//!
//! One-group point kinetics with a lumped fuel-temperature feedback:
//!
//! ```text
//! dn/dt = ((rho - beta) n + beta c) / Lambda
//! dc/dt = lambda (n - c)
//! dT/dt = (n - 1 - T) / tau
//! rho   = alpha (z - z_nom) - gamma T
//! q     = 1 + T
//! ```
//!
//! `n` is neutron power, `c` the precursor concentration and `T` the fuel
//! temperature rise, all normalised so the nominal operating point is
//! `n = c = 1, T = 0`. The thermal power delivered to the coolant, `q`, is
//! the model output. Integration is fixed-step RK4.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::genome::Nominal;

/// Fully withdrawn rod position (m).
pub const ROD_MAX: f64 = 0.0;
/// Fully inserted rod position (m).
pub const ROD_MIN: f64 = -2.196;
pub const ROD_NOMINAL: f64 = -1.098;
/// Thermal power at the nominal operating point (W).
pub const NOMINAL_POWER_W: f64 = 3436.0e6;
/// Steady power reached with the rods fully withdrawn.
pub const POWER_CEILING: f64 = 1.184;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogatePlantParams {
    /// Rod reactivity worth (1/m).
    pub rod_worth: f64,
    /// Reactivity per unit of normalised fuel temperature rise.
    pub temperature_feedback: f64,
    pub beta: f64,
    /// Effective precursor decay constant (1/s).
    pub precursor_decay: f64,
    /// Prompt neutron generation time (s).
    pub generation_time: f64,
    /// Fuel-to-coolant heat transfer time constant (s).
    pub thermal_time_constant: f64,
    pub nominal_position: f64,
    pub nominal_power_w: f64,
    /// RK4 steps per sample.
    pub substeps: usize,
}

impl Default for SurrogatePlantParams {
    fn default() -> Self {
        // A full withdrawal (1.098 m above nominal) inserts 0.1 beta; the
        // feedback coefficient brings the steady power to POWER_CEILING there.
        let rod_worth = 0.1 * 0.0065 / 1.098;
        Self {
            rod_worth,
            temperature_feedback: rod_worth * (ROD_MAX - ROD_NOMINAL) / (POWER_CEILING - 1.0),
            beta: 0.0065,
            precursor_decay: 0.08,
            generation_time: 1.0e-4,
            thermal_time_constant: 4.0,
            nominal_position: ROD_NOMINAL,
            nominal_power_w: NOMINAL_POWER_W,
            substeps: 100,
        }
    }
}

impl SurrogatePlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Plant(format!("beta={} outside (0, 1)", self.beta)));
        }
        if !(self.generation_time > 0.0) {
            return Err(Error::Plant("generation time must be positive".into()));
        }
        if !(self.temperature_feedback >= 0.0) {
            return Err(Error::Plant("temperature feedback must be non-negative".into()));
        }
        if !(self.precursor_decay > 0.0 && self.thermal_time_constant > 0.0) {
            return Err(Error::Plant("time constants must be positive".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Plant("substeps must be positive".into()));
        }
        Ok(())
    }

    /// Steady normalised power for a constant rod position.
    pub fn steady_power(&self, position: f64) -> f64 {
        1.0 + self.rod_worth * (position - self.nominal_position) / self.temperature_feedback
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Start time (s).
    pub at: f64,
    /// Rod position (m).
    pub position: f64,
}

/// Piecewise-constant rod position programme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<Step>,
}

impl Schedule {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let s = Self { steps };
        s.validate()?;
        Ok(s)
    }

    /// Consecutive levels held for the given durations.
    pub fn from_levels(levels: &[(f64, f64)]) -> Self {
        let mut at = 0.0;
        let steps = levels
            .iter()
            .map(|&(hold, position)| {
                let s = Step { at, position };
                at += hold;
                s
            })
            .collect();
        Self { steps }
    }

    pub fn constant(position: f64) -> Self {
        Self {
            steps: vec![Step { at: 0.0, position }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .steps
            .first()
            .ok_or_else(|| Error::Plant("schedule has no steps".into()))?;
        if first.at != 0.0 {
            return Err(Error::Plant("schedule must start at t=0".into()));
        }
        for w in self.steps.windows(2) {
            if !(w[1].at > w[0].at) {
                return Err(Error::Plant(format!(
                    "step times must increase ({} then {})",
                    w[0].at, w[1].at
                )));
            }
        }
        for s in &self.steps {
            if !(s.at.is_finite() && (ROD_MIN..=ROD_MAX).contains(&s.position)) {
                return Err(Error::Plant(format!(
                    "rod position {} at t={} outside [{ROD_MIN}, {ROD_MAX}]",
                    s.position, s.at
                )));
            }
        }
        Ok(())
    }

    pub fn position_at(&self, t: f64) -> f64 {
        let i = self.steps.partition_point(|s| s.at <= t);
        self.steps[i.saturating_sub(1)].position
    }

    /// Parses `time,position` lines; `#` starts a comment.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.eq_ignore_ascii_case("time,position") {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message,
            };
            let (t, z) = line
                .split_once(',')
                .ok_or_else(|| err(format!("expected `time,position`, got `{line}`")))?;
            let at: f64 = t.trim().parse().map_err(|_| err(format!("bad time `{t}`")))?;
            let position: f64 = z.trim().parse().map_err(|_| err(format!("bad position `{z}`")))?;
            steps.push(Step { at, position });
        }
        Self::new(steps)
    }
}

/// The bundled programmes: one learning set and two verification sets.
pub fn bundled_schedule(name: &str) -> Option<Schedule> {
    let levels: &[(f64, f64)] = match name {
        "learning" => &[
            (250.0, -1.098),
            (250.0, -0.70),
            (250.0, -0.40),
            (250.0, -0.90),
            (250.0, -1.50),
            (250.0, -1.90),
            (250.0, -1.30),
            (250.0, -0.55),
            (250.0, -1.00),
            (250.0, -1.70),
            (250.0, -0.30),
            (250.0, -1.098),
        ],
        "verification1" => &[
            (300.0, -1.098),
            (300.0, -0.80),
            (300.0, -0.60),
            (300.0, -1.20),
            (300.0, -1.60),
            (300.0, -1.40),
            (300.0, -0.90),
            (300.0, -0.50),
            (300.0, -1.00),
            (300.0, -1.098),
        ],
        "verification2" => &[
            (200.0, -1.098),
            (400.0, -1.30),
            (350.0, -0.75),
            (300.0, -0.45),
            (400.0, -1.80),
            (250.0, -1.20),
            (400.0, -0.65),
            (300.0, -1.00),
            (400.0, -1.098),
        ],
        _ => return None,
    };
    Some(Schedule::from_levels(levels))
}

pub const BUNDLED: [&str; 3] = ["learning", "verification1", "verification2"];

/// Default length of the bundled data sets (s); with 1 s sampling, 3000 samples.
pub const BUNDLED_DURATION: f64 = 3000.0;

#[derive(Debug, Clone, Copy)]
struct State {
    n: f64,
    c: f64,
    temp: f64,
}

impl State {
    fn axpy(self, h: f64, d: State) -> State {
        State {
            n: self.n + h * d.n,
            c: self.c + h * d.c,
            temp: self.temp + h * d.temp,
        }
    }
}

fn derivative(p: &SurrogatePlantParams, z: f64, s: State) -> State {
    let rho = p.rod_worth * (z - p.nominal_position) - p.temperature_feedback * s.temp;
    State {
        n: ((rho - p.beta) * s.n + p.beta * s.c) / p.generation_time,
        c: p.precursor_decay * (s.n - s.c),
        temp: (s.n - 1.0 - s.temp) / p.thermal_time_constant,
    }
}

fn rk4(p: &SurrogatePlantParams, z: f64, s: State, h: f64) -> State {
    let k1 = derivative(p, z, s);
    let k2 = derivative(p, z, s.axpy(h / 2.0, k1));
    let k3 = derivative(p, z, s.axpy(h / 2.0, k2));
    let k4 = derivative(p, z, s.axpy(h, k3));
    State {
        n: s.n + h / 6.0 * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n),
        c: s.c + h / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
        temp: s.temp + h / 6.0 * (k1.temp + 2.0 * k2.temp + 2.0 * k3.temp + k4.temp),
    }
}

/// Optional additive Gaussian measurement noise on the scaled output.
pub struct Noise<'a, R: Rng> {
    pub std_dev: f64,
    pub rng: &'a mut R,
}

/// Simulates the plant under `schedule` and samples it every `sample_period`.
///
/// Sample `k` pairs the rod position applied over `[kT, (k+1)T)` with the
/// thermal power reached at the end of that interval.
pub fn generate_dataset<R: Rng>(
    params: &SurrogatePlantParams,
    schedule: &Schedule,
    duration: f64,
    sample_period: f64,
    name: &str,
    noise: Option<Noise<'_, R>>,
) -> Result<Dataset> {
    params.validate()?;
    schedule.validate()?;
    if !(sample_period > 0.0 && duration >= sample_period) {
        return Err(Error::Plant(format!(
            "need duration ({duration}) >= sample period ({sample_period}) > 0"
        )));
    }
    let n_samples = (duration / sample_period + 1e-9).floor() as usize;
    let h = sample_period / params.substeps as f64;
    let mut s = State {
        n: 1.0,
        c: 1.0,
        temp: 0.0,
    };
    let mut inputs = Vec::with_capacity(n_samples);
    let mut targets = Vec::with_capacity(n_samples);
    let mut noise = match noise {
        Some(Noise { std_dev, rng }) if std_dev > 0.0 => {
            let dist = Normal::new(0.0, std_dev).map_err(|e| Error::Plant(e.to_string()))?;
            Some((dist, rng))
        }
        _ => None,
    };
    for k in 0..n_samples {
        let z = schedule.position_at(k as f64 * sample_period);
        for _ in 0..params.substeps {
            s = rk4(params, z, s, h);
        }
        let power = 1.0 + s.temp;
        if !(s.n.is_finite() && power.is_finite()) || s.n > 10.0 || power > 10.0 {
            return Err(Error::Plant(format!(
                "power exceeded 10x nominal at t={}s (n={}, q={power})",
                (k + 1) as f64 * sample_period,
                s.n
            )));
        }
        let y = match noise.as_mut() {
            Some((dist, rng)) => power + dist.sample(*rng),
            None => power,
        };
        inputs.push(z);
        targets.push(y);
    }
    Dataset::new(
        name,
        inputs,
        targets,
        Nominal {
            input: params.nominal_position,
            output: 1.0,
        },
        sample_period,
    )
}

/// The three bundled data sets, noise free.
pub fn bundled_datasets(params: &SurrogatePlantParams) -> Result<Vec<Dataset>> {
    BUNDLED
        .iter()
        .map(|&name| {
            let schedule = bundled_schedule(name).expect("bundled schedule");
            generate_dataset::<rand_chacha::ChaCha8Rng>(params, &schedule, BUNDLED_DURATION, 1.0, name, None)
        })
        .collect()
}
