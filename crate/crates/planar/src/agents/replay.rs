//! Uniform-sampling replay buffer with FIFO eviction.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fixed-capacity transition store `(s, a, r, s', discount)` over flat
/// f32 arrays. Once full, the oldest transition is overwritten.
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f32>,
    act: Vec<f32>,
    reward: Vec<f32>,
    next_obs: Vec<f32>,
    discount: Vec<f32>,
    len: usize,
    cursor: usize,
    rng: ChaCha8Rng,
}

/// One sampled minibatch, columns are transitions.
pub struct Batch {
    pub obs: DMatrix<f32>,
    pub act: DMatrix<f32>,
    pub reward: DMatrix<f32>,
    pub next_obs: DMatrix<f32>,
    pub discount: DMatrix<f32>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize, rng: ChaCha8Rng) -> Self {
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            act: Vec::new(),
            reward: Vec::new(),
            next_obs: Vec::new(),
            discount: Vec::new(),
            len: 0,
            cursor: 0,
            rng,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn insert(&mut self, obs: &[f32], act: &[f32], reward: f32, next_obs: &[f32], discount: f32) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        debug_assert_eq!(act.len(), self.act_dim);
        debug_assert_eq!(next_obs.len(), self.obs_dim);
        if self.len < self.capacity {
            // Storage grows lazily to the high-water mark.
            self.obs.extend_from_slice(obs);
            self.act.extend_from_slice(act);
            self.reward.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.discount.push(discount);
            self.len += 1;
        } else {
            let o = self.cursor * self.obs_dim;
            let a = self.cursor * self.act_dim;
            self.obs[o..o + self.obs_dim].copy_from_slice(obs);
            self.act[a..a + self.act_dim].copy_from_slice(act);
            self.reward[self.cursor] = reward;
            self.next_obs[o..o + self.obs_dim].copy_from_slice(next_obs);
            self.discount[self.cursor] = discount;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample(&mut self, batch: usize) -> Batch {
        assert!(self.len > 0, "cannot sample from an empty buffer");
        let mut out = Batch {
            obs: DMatrix::zeros(self.obs_dim, batch),
            act: DMatrix::zeros(self.act_dim, batch),
            reward: DMatrix::zeros(1, batch),
            next_obs: DMatrix::zeros(self.obs_dim, batch),
            discount: DMatrix::zeros(1, batch),
        };
        for col in 0..batch {
            let i = self.rng.random_range(0..self.len);
            let o = i * self.obs_dim;
            let a = i * self.act_dim;
            out.obs
                .column_mut(col)
                .copy_from_slice(&self.obs[o..o + self.obs_dim]);
            out.act
                .column_mut(col)
                .copy_from_slice(&self.act[a..a + self.act_dim]);
            out.reward[(0, col)] = self.reward[i];
            out.next_obs
                .column_mut(col)
                .copy_from_slice(&self.next_obs[o..o + self.obs_dim]);
            out.discount[(0, col)] = self.discount[i];
        }
        out
    }

    /// Whether a transition with this exact reward tag is still stored
    /// (test support for eviction checks).
    #[cfg(test)]
    fn contains_reward(&self, reward: f32) -> bool {
        self.reward[..self.len].contains(&reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn buffer(capacity: usize) -> ReplayBuffer {
        ReplayBuffer::new(capacity, 2, 1, ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut buf = buffer(10);
        for i in 0..25 {
            let tag = i as f32;
            buf.insert(&[tag, tag], &[tag], tag, &[tag + 1.0, tag], 1.0);
        }
        assert_eq!(buf.len(), 10);
        // The oldest 15 entries are gone, the newest 10 present.
        for i in 0..15 {
            assert!(!buf.contains_reward(i as f32), "entry {i} not evicted");
        }
        for i in 15..25 {
            assert!(buf.contains_reward(i as f32), "entry {i} missing");
        }
    }

    #[test]
    fn sampled_batch_shapes() {
        let mut buf = buffer(100);
        for i in 0..40 {
            buf.insert(&[i as f32, 0.0], &[0.5], 1.0, &[0.0, 0.0], 0.99);
        }
        let batch = buf.sample(16);
        assert_eq!(batch.obs.shape(), (2, 16));
        assert_eq!(batch.act.shape(), (1, 16));
        assert_eq!(batch.reward.shape(), (1, 16));
        assert_eq!(batch.discount[(0, 0)], 0.99);
    }

    #[test]
    fn sampling_is_uniform_chi_squared() {
        // 1e5 draws from a 100-slot buffer; chi-squared at p > 0.01 means
        // the statistic stays below the 0.99 quantile of chi2(99).
        let mut buf = buffer(100);
        for i in 0..100 {
            buf.insert(&[i as f32, 0.0], &[0.0], i as f32, &[0.0, 0.0], 1.0);
        }
        let draws = 100_000usize;
        let mut counts = [0usize; 100];
        for _ in 0..draws / 50 {
            let batch = buf.sample(50);
            for col in 0..50 {
                counts[batch.reward[(0, col)] as usize] += 1;
            }
        }
        let expected = draws as f64 / 100.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let critical = {
            use statrs::distribution::{ChiSquared, ContinuousCDF};
            ChiSquared::new(99.0).unwrap().inverse_cdf(0.99)
        };
        assert!(
            stat < critical,
            "chi2 statistic {stat} exceeds critical value {critical}"
        );
    }

    #[test]
    fn seeded_sampling_reproducible() {
        let mut a = buffer(50);
        let mut b = buffer(50);
        for i in 0..50 {
            a.insert(&[i as f32, 0.0], &[0.0], i as f32, &[0.0, 0.0], 1.0);
            b.insert(&[i as f32, 0.0], &[0.0], i as f32, &[0.0, 0.0], 1.0);
        }
        let ba = a.sample(8);
        let bb = b.sample(8);
        assert_eq!(ba.reward, bb.reward);
    }
}
