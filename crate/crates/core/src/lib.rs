//! Discrete-time spiking winner-take-all networks.
//!
//! Circuits of stochastic neurons compete under shared inhibition, so each
//! output spike is a sample from the posterior over the circuit's hidden
//! causes. STDP on the incoming weights performs online expectation
//! maximization. Circuits compose into trees with optional top-down feedback.

pub mod circuit;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod plasticity;
pub mod rng;
pub mod runner;
pub mod spike;

pub use error::{LoadError, Result, WtaError};
pub use spike::{PopulationId, SpikeVector};
