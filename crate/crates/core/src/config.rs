//! Search configuration.
//!
//! Parameters keep the symbol names of the original method description
//! (`maxNinLay`, `pMutW`, ...) in the flat `key=value` text format so a config
//! file can be checked against the reference parameter tables line by line.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::FitnessWeights;
use crate::trainer::{TrainSpec, TrainerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dnas1,
    Dnas2,
    Dnas3,
    Dnas4,
    Exhaustive,
}

impl Algorithm {
    pub const ALL_NAS: [Algorithm; 4] = [Algorithm::Dnas1, Algorithm::Dnas2, Algorithm::Dnas3, Algorithm::Dnas4];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dnas1 => "dnas1",
            Algorithm::Dnas2 => "dnas2",
            Algorithm::Dnas3 => "dnas3",
            Algorithm::Dnas4 => "dnas4",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dnas1" => Ok(Algorithm::Dnas1),
            "dnas2" => Ok(Algorithm::Dnas2),
            "dnas3" => Ok(Algorithm::Dnas3),
            "dnas4" => Ok(Algorithm::Dnas4),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Every tunable of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NasConfig {
    pub algorithm: Algorithm,
    /// Maximal number of hidden layers.
    pub max_lay: usize,
    /// Maximal number of neurons in a hidden layer.
    pub max_nin_lay: usize,
    /// Fixed input delay; `None` draws it from `1..=du_max`.
    pub du: Option<usize>,
    pub du_max: usize,
    pub dy: Option<usize>,
    pub dy_max: usize,
    pub pop_size: usize,
    pub p_cross: f64,
    pub fitness: FitnessWeights,
    pub min_delta: f64,
    pub max_delta: f64,
    pub p_mut_w: f64,
    /// Structure mutation probability (DNAS4).
    pub p_mut: f64,
    pub p_mut_new_n: f64,
    pub p_mut_d: f64,
    pub p_mut_del_n: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub hm_best: usize,
    pub p_retrain: f64,
    pub generations: usize,
    pub calls: usize,
    pub seed: u64,
    pub train: TrainSpec,
    pub dataset: Option<String>,
}

impl NasConfig {
    /// Method parameters of the reference experiment with a desk-sized budget
    /// (10 calls of 30 generations).
    pub fn preset(algorithm: Algorithm) -> Self {
        let (du, p_mut_d, p_mut_del_n, p_retrain) = match algorithm {
            Algorithm::Dnas1 => (Some(5), 0.0, 0.0, 0.0),
            Algorithm::Dnas2 => (None, 0.2, 0.0, 0.0),
            Algorithm::Dnas3 => (None, 0.2, 0.2, 0.0),
            Algorithm::Dnas4 => (None, 0.0, 0.0, 0.2),
            Algorithm::Exhaustive => (None, 0.0, 0.0, 0.0),
        };
        Self {
            algorithm,
            max_lay: 1,
            max_nin_lay: 20,
            du,
            du_max: 50,
            dy: du,
            dy_max: 50,
            pop_size: 50,
            p_cross: 0.8,
            fitness: FitnessWeights::default(),
            min_delta: 0.0001,
            max_delta: 0.1,
            p_mut_w: 0.2,
            p_mut: 0.2,
            p_mut_new_n: 0.2,
            p_mut_d,
            p_mut_del_n,
            min_w: -1.0,
            max_w: 1.0,
            hm_best: 5,
            p_retrain,
            generations: 30,
            calls: 10,
            seed: 1,
            train: TrainSpec::default(),
            dataset: None,
        }
    }

    /// Reference-scale presets (`full-dnas1` .. `full-dnas4`) and the desk
    /// presets (`dnas1` .. `dnas4`, `exhaustive`).
    pub fn named_preset(name: &str) -> Result<Self> {
        if let Some(alg) = name.strip_prefix("full-") {
            let algorithm: Algorithm = alg.parse()?;
            let mut cfg = Self::preset(algorithm);
            match algorithm {
                Algorithm::Dnas4 => {
                    cfg.calls = 46;
                    cfg.generations = 25;
                }
                Algorithm::Exhaustive => {
                    cfg.calls = 10;
                }
                _ => {
                    cfg.calls = 100;
                    cfg.generations = 100;
                }
            }
            Ok(cfg)
        } else {
            Ok(Self::preset(name.parse()?))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("pCross", self.p_cross),
            ("pMutW", self.p_mut_w),
            ("pMut", self.p_mut),
            ("pMutNewN", self.p_mut_new_n),
            ("pMutD", self.p_mut_d),
            ("pMutDelN", self.p_mut_del_n),
            ("pRetrain", self.p_retrain),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name}={p} is not a probability")));
            }
        }
        if self.max_lay < 1 {
            return Err(Error::Config("maxLay must be at least 1".into()));
        }
        if self.max_nin_lay < 1 {
            return Err(Error::Config("maxNinLay must be at least 1".into()));
        }
        if self.pop_size < 1 {
            return Err(Error::Config("popSize must be at least 1".into()));
        }
        if self.hm_best < 1 || self.hm_best > self.pop_size {
            return Err(Error::Config(format!(
                "hmBest={} must lie in 1..=popSize ({})",
                self.hm_best, self.pop_size
            )));
        }
        if !(self.min_delta > 0.0 && self.min_delta.is_finite() && self.max_delta.is_finite()) {
            return Err(Error::Config("minDelta must be positive and finite".into()));
        }
        if self.min_delta > self.max_delta {
            return Err(Error::Config(format!(
                "minDelta={} exceeds maxDelta={}",
                self.min_delta, self.max_delta
            )));
        }
        if !(self.min_w.is_finite() && self.max_w.is_finite()) || self.min_w > self.max_w {
            return Err(Error::Config(format!(
                "invalid initial weight range [{}, {}]",
                self.min_w, self.max_w
            )));
        }
        if let Some(du) = self.du {
            if du > self.du_max {
                return Err(Error::Config(format!("du={du} exceeds duMax={}", self.du_max)));
            }
        }
        if let Some(dy) = self.dy {
            if dy > self.dy_max {
                return Err(Error::Config(format!("dy={dy} exceeds dyMax={}", self.dy_max)));
            }
        }
        self.fitness.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Parses `key=value` text on top of the preset named by its `algorithm`
    /// key (default `dnas3`). `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<Self> {
        Self::parse_kv_named(text, "<config>")
    }

    pub fn parse_kv_named(text: &str, source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(parse_err(source, i + 1, format!("expected key=value, got `{line}`")));
            };
            entries.push((i + 1, k.trim(), v.trim()));
        }
        let algorithm = match entries.iter().rev().find(|(_, k, _)| *k == "algorithm") {
            Some((line, _, v)) => v
                .parse::<Algorithm>()
                .map_err(|e| parse_err(source, *line, e.to_string()))?,
            None => Algorithm::Dnas3,
        };
        let mut cfg = Self::preset(algorithm);
        for (line, k, v) in entries {
            cfg.set(k, v).map_err(|e| parse_err(source, line, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one parameter by its symbol name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
        }
        fn opt_delay(key: &str, v: &str) -> Result<Option<usize>> {
            match v {
                "" | "rand" | "random" | "-" => Ok(None),
                _ => num(key, v).map(Some),
            }
        }
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "maxLay" => self.max_lay = num(key, value)?,
            "maxNinLay" => self.max_nin_lay = num(key, value)?,
            "du" => self.du = opt_delay(key, value)?,
            "duMax" => self.du_max = num(key, value)?,
            "dy" => self.dy = opt_delay(key, value)?,
            "dyMax" => self.dy_max = num(key, value)?,
            "popSize" => self.pop_size = num(key, value)?,
            "pCross" => self.p_cross = num(key, value)?,
            "p1" => self.fitness.p1 = num(key, value)?,
            "p2" => self.fitness.p2 = num(key, value)?,
            "p3" => self.fitness.p3 = num(key, value)?,
            "fitBase" => self.fitness.baseline = num(key, value)?,
            "minDelta" => self.min_delta = num(key, value)?,
            "maxDelta" => self.max_delta = num(key, value)?,
            "pMutW" => self.p_mut_w = num(key, value)?,
            "pMut" => self.p_mut = num(key, value)?,
            "pMutNewN" => self.p_mut_new_n = num(key, value)?,
            "pMutD" => self.p_mut_d = num(key, value)?,
            "pMutDelN" => self.p_mut_del_n = num(key, value)?,
            "minW" => self.min_w = num(key, value)?,
            "maxW" => self.max_w = num(key, value)?,
            "hmBest" => self.hm_best = num(key, value)?,
            "pRetrain" => self.p_retrain = num(key, value)?,
            "generations" => self.generations = num(key, value)?,
            "calls" => self.calls = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "trainer" => self.train.kind = value.parse()?,
            "maxEpochs" => self.train.max_epochs = num(key, value)?,
            "lossTolerance" => self.train.loss_tolerance = num(key, value)?,
            "dampingInit" => self.train.damping_init = num(key, value)?,
            "l2Strength" => self.train.l2_strength = num(key, value)?,
            "dataset" => self.dataset = (!value.is_empty()).then(|| value.to_string()),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Resolved configuration in the `key=value` format; `parse_kv` reads it back.
    pub fn to_kv(&self) -> String {
        let delay = |d: Option<usize>| d.map_or_else(|| "rand".to_string(), |d| d.to_string());
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("algorithm", self.algorithm.to_string());
        put("maxLay", self.max_lay.to_string());
        put("maxNinLay", self.max_nin_lay.to_string());
        put("du", delay(self.du));
        put("duMax", self.du_max.to_string());
        put("dy", delay(self.dy));
        put("dyMax", self.dy_max.to_string());
        put("popSize", self.pop_size.to_string());
        put("pCross", self.p_cross.to_string());
        put("p1", self.fitness.p1.to_string());
        put("p2", self.fitness.p2.to_string());
        put("p3", self.fitness.p3.to_string());
        put("fitBase", self.fitness.baseline.to_string());
        put("minDelta", self.min_delta.to_string());
        put("maxDelta", self.max_delta.to_string());
        put("pMutW", self.p_mut_w.to_string());
        put("pMut", self.p_mut.to_string());
        put("pMutNewN", self.p_mut_new_n.to_string());
        put("pMutD", self.p_mut_d.to_string());
        put("pMutDelN", self.p_mut_del_n.to_string());
        put("minW", self.min_w.to_string());
        put("maxW", self.max_w.to_string());
        put("hmBest", self.hm_best.to_string());
        put("pRetrain", self.p_retrain.to_string());
        put("generations", self.generations.to_string());
        put("calls", self.calls.to_string());
        put("seed", self.seed.to_string());
        put("trainer", self.train.kind.to_string());
        put("maxEpochs", self.train.max_epochs.to_string());
        put("lossTolerance", self.train.loss_tolerance.to_string());
        put("dampingInit", self.train.damping_init.to_string());
        put("l2Strength", self.train.l2_strength.to_string());
        if let Some(d) = &self.dataset {
            put("dataset", d.clone());
        }
        s
    }
}

fn parse_err(source: &str, line: usize, message: String) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message,
    }
}

impl FromStr for TrainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lm" | "levenberg-marquardt" | "trainlm" => Ok(TrainerKind::LevenbergMarquardt),
            "br" | "bayesian" | "trainbr" => Ok(TrainerKind::BayesianRegularization),
            "scg" | "trainscg" => Ok(TrainerKind::ScaledConjugateGradient),
            other => Err(Error::Config(format!("unknown trainer `{other}`"))),
        }
    }
}
