//! Baseline policies: uniform-random, LQR-optimal and DDPG.

pub mod ddpg;
pub mod nn;
pub mod noise;
pub mod replay;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{flatten_observation, ArraySpec, Observation};
use crate::lqr::RiccatiSolution;

pub use ddpg::{DdpgAgent, DdpgConfig, UpdateStats};
pub use noise::OuNoise;
pub use replay::{Batch, ReplayBuffer};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("action spec is unbounded; the random agent needs finite bounds (use the LQR agent for LQR tasks)")]
    UnboundedActionSpec,
    #[error("observation has {got} features, expected {expected}")]
    ObservationShape { expected: usize, got: usize },
}

/// A policy mapping observations to actions. Evaluation semantics: no
/// exploration noise.
pub trait Agent {
    fn act(&mut self, obs: &Observation) -> Vec<f64>;
}

/// Uniform-random policy over a bounded action box.
pub struct RandomAgent {
    lo: Vec<f64>,
    hi: Vec<f64>,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn from_spec(spec: &ArraySpec, seed: u64) -> Result<Self, AgentError> {
        match (&spec.minimum, &spec.maximum) {
            (Some(lo), Some(hi)) => Ok(Self::with_bounds(lo.clone(), hi.clone(), seed)),
            _ => Err(AgentError::UnboundedActionSpec),
        }
    }

    pub fn with_bounds(lo: Vec<f64>, hi: Vec<f64>, seed: u64) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self {
            lo,
            hi,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn act(&mut self, _obs: &Observation) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| {
                if lo == hi {
                    lo
                } else {
                    self.rng.random_range(lo..hi)
                }
            })
            .collect()
    }
}

/// Stationary linear feedback `u = -K x` from a Riccati solution. The
/// observation is flattened in key order to recover the state.
pub struct LqrAgent {
    solution: RiccatiSolution,
}

impl LqrAgent {
    pub fn new(solution: RiccatiSolution) -> Self {
        Self { solution }
    }

    pub fn act_state(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        if state.len() != self.solution.k.ncols() {
            return Err(AgentError::ObservationShape {
                expected: self.solution.k.ncols(),
                got: state.len(),
            });
        }
        let x = DVector::from_column_slice(state);
        Ok(self.solution.policy(&x).as_slice().to_vec())
    }
}

impl Agent for LqrAgent {
    fn act(&mut self, obs: &Observation) -> Vec<f64> {
        let state = flatten_observation(obs);
        self.act_state(&state)
            .expect("observation must contain the full state")
    }
}
