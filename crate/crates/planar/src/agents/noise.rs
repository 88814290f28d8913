//! Ornstein-Uhlenbeck exploration noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Mean-reverting process `x += theta (mu - x) dt + sigma sqrt(dt) N(0,1)`
/// evaluated once per control step, giving temporally correlated
/// exploration.
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub dt: f64,
    state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64, mu: f64, dt: f64) -> Self {
        Self {
            theta,
            sigma,
            mu,
            dt,
            state: vec![mu; dim],
        }
    }

    /// DDPG defaults: theta 0.15, sigma 0.3, mu 0, unit step.
    pub fn standard(dim: usize) -> Self {
        Self::new(dim, 0.15, 0.3, 0.0, 1.0)
    }

    pub fn reset(&mut self) {
        self.state.fill(self.mu);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: &[f64]) {
        assert_eq!(state.len(), self.state.len());
        self.state.copy_from_slice(state);
    }

    pub fn sample(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        let scale = self.sigma * self.dt.sqrt();
        for x in &mut self.state {
            let gauss: f64 = rng.sample(StandardNormal);
            *x += self.theta * (self.mu - *x) * self.dt + scale * gauss;
        }
        &self.state
    }
}
