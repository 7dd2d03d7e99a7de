//! Evolutionary search for minimal recurrent (NARX) network architectures.
//!
//! The crate models a network individual ([`genome::Genome`]), the operators
//! that evolve it ([`operators`]), four search algorithms ([`algorithms`]),
//! gradient trainers for the hybrid variant ([`trainer`]), and a surrogate
//! plant that produces learning and verification data ([`plant`]).

pub mod algorithms;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exhaustive;
pub mod experiment;
pub mod fitness;
pub mod genome;
pub mod operators;
pub mod plant;
pub mod rng;
pub mod trainer;

pub use config::{Algorithm, NasConfig};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use genome::{Architecture, Genome};
