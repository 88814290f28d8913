//! Deep deterministic policy gradients with target networks, a replay
//! buffer and Ornstein-Uhlenbeck exploration.
//!
//! Architecture and hyperparameters follow the common single-actor
//! configuration: ReLU MLPs (actor 300 -> 200 with a tanh head, critic
//! 400 -> 300 with the action joining at the second layer), independent
//! Adam optimisers at 1e-4, discount 0.99, soft target updates at 1e-3,
//! minibatches of 64 from a 1e6 replay buffer, and actor gradients
//! clipped elementwise to [-1, 1].

use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::nn::{Activation, Adam, Critic, CriticGrad, DenseGrad, Mlp};
use super::noise::OuNoise;
use super::replay::ReplayBuffer;
use super::{Agent, AgentError};
use crate::env::{flatten_observation, ArraySpec, Observation};

#[derive(Debug, Clone)]
pub struct DdpgConfig {
    pub actor_hidden: (usize, usize),
    pub critic_hidden: (usize, usize),
    pub actor_lr: f32,
    pub critic_lr: f32,
    pub gamma: f32,
    pub tau: f32,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Environment steps collected before updates begin.
    pub warmup: usize,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    /// Elementwise clip applied to actor parameter gradients.
    pub actor_grad_clip: f32,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_hidden: (300, 200),
            critic_hidden: (400, 300),
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            gamma: 0.99,
            tau: 1e-3,
            batch_size: 64,
            replay_capacity: 1_000_000,
            warmup: 1000,
            ou_theta: 0.15,
            ou_sigma: 0.3,
            actor_grad_clip: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

pub struct DdpgAgent {
    cfg: DdpgConfig,
    obs_dim: usize,
    act_dim: usize,
    act_lo: Vec<f64>,
    act_hi: Vec<f64>,
    actor: Mlp,
    actor_target: Mlp,
    critic: Critic,
    critic_target: Critic,
    actor_adam: Adam,
    critic_adam: Adam,
    buffer: ReplayBuffer,
    noise: OuNoise,
    rng: ChaCha8Rng,
    updates: u64,
}

impl DdpgAgent {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        act_lo: Vec<f64>,
        act_hi: Vec<f64>,
        cfg: DdpgConfig,
        seed: u64,
    ) -> Self {
        assert_eq!(act_lo.len(), act_dim);
        assert_eq!(act_hi.len(), act_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a1, a2) = cfg.actor_hidden;
        let actor = Mlp::new(
            &mut rng,
            &[obs_dim, a1, a2, act_dim],
            Activation::Tanh,
            3e-3,
        );
        let actor_target = actor.clone();
        let critic = Critic::new(&mut rng, obs_dim, act_dim, cfg.critic_hidden);
        let critic_target = critic.clone();
        let actor_adam = Adam::new(cfg.actor_lr, &adam_shapes_mlp(&actor));
        let critic_adam = Adam::new(cfg.critic_lr, &adam_shapes_critic(&critic));
        let buffer = ReplayBuffer::new(
            cfg.replay_capacity,
            obs_dim,
            act_dim,
            ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        );
        let noise = OuNoise::new(act_dim, cfg.ou_theta, cfg.ou_sigma, 0.0, 1.0);
        Self {
            cfg,
            obs_dim,
            act_dim,
            act_lo,
            act_hi,
            actor,
            actor_target,
            critic,
            critic_target,
            actor_adam,
            critic_adam,
            buffer,
            noise,
            rng,
            updates: 0,
        }
    }

    /// Builds an agent for a bounded action spec.
    pub fn for_spec(
        obs_dim: usize,
        spec: &ArraySpec,
        cfg: DdpgConfig,
        seed: u64,
    ) -> Result<Self, AgentError> {
        match (&spec.minimum, &spec.maximum) {
            (Some(lo), Some(hi)) => Ok(Self::new(
                obs_dim,
                spec.len(),
                lo.clone(),
                hi.clone(),
                cfg,
                seed,
            )),
            _ => Err(AgentError::UnboundedActionSpec),
        }
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.cfg.batch_size.max(self.cfg.warmup)
    }

    pub fn reset_noise(&mut self) {
        self.noise.reset();
    }

    fn obs_column(&self, obs: &[f64]) -> DMatrix<f32> {
        debug_assert_eq!(obs.len(), self.obs_dim);
        DMatrix::from_iterator(self.obs_dim, 1, obs.iter().map(|&x| x as f32))
    }

    fn scale_action(&self, normalized: &[f32]) -> Vec<f64> {
        normalized
            .iter()
            .zip(self.act_lo.iter().zip(&self.act_hi))
            .map(|(&a, (&lo, &hi))| lo + (a as f64 + 1.0) / 2.0 * (hi - lo))
            .collect()
    }

    fn normalize_action(&self, env_action: &[f64]) -> Vec<f32> {
        env_action
            .iter()
            .zip(self.act_lo.iter().zip(&self.act_hi))
            .map(|(&a, (&lo, &hi))| {
                if hi > lo {
                    (2.0 * (a - lo) / (hi - lo) - 1.0) as f32
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Greedy policy action in environment units.
    pub fn act_greedy(&self, obs: &[f64]) -> Vec<f64> {
        let out = self.actor.forward(&self.obs_column(obs));
        self.scale_action(out.column(0).as_slice())
    }

    /// Policy action plus OU exploration noise, clipped to the normalized
    /// box before scaling.
    pub fn act_explore(&mut self, obs: &[f64]) -> Vec<f64> {
        let out = self.actor.forward(&self.obs_column(obs));
        let noise = self.noise.sample(&mut self.rng).to_vec();
        let noisy: Vec<f32> = out
            .column(0)
            .iter()
            .zip(noise)
            .map(|(&a, n)| (a + n as f32).clamp(-1.0, 1.0))
            .collect();
        self.scale_action(&noisy)
    }

    /// Records a transition; the action is given in environment units and
    /// stored normalized.
    pub fn observe(
        &mut self,
        obs: &[f64],
        env_action: &[f64],
        reward: f64,
        next_obs: &[f64],
        discount: f64,
    ) {
        let o: Vec<f32> = obs.iter().map(|&x| x as f32).collect();
        let n: Vec<f32> = next_obs.iter().map(|&x| x as f32).collect();
        let a = self.normalize_action(env_action);
        self.buffer
            .insert(&o, &a, reward as f32, &n, discount as f32);
    }

    fn td_targets(&self, batch: &super::replay::Batch) -> DMatrix<f32> {
        let next_actions = self.actor_target.forward(&batch.next_obs);
        let next_q = self.critic_target.forward(&batch.next_obs, &next_actions);
        let mut targets = next_q;
        for col in 0..targets.ncols() {
            targets[(0, col)] = batch.reward[(0, col)]
                + self.cfg.gamma * batch.discount[(0, col)] * targets[(0, col)];
        }
        targets
    }

    /// One minibatch update of critic, actor and both targets. Returns
    /// `None` until the warmup threshold is met.
    pub fn update(&mut self) -> Option<UpdateStats> {
        if !self.ready() {
            return None;
        }
        let batch = self.buffer.sample(self.cfg.batch_size);
        let n = self.cfg.batch_size as f32;

        // Critic regression towards r + gamma * d * Q'(s', mu'(s')).
        let targets = self.td_targets(&batch);
        let cache = self.critic.forward_cached(&batch.obs, &batch.act);
        let diff = cache.q() - &targets;
        let critic_loss = diff.iter().map(|e| (e * e) as f64).sum::<f64>() / n as f64;
        let dq = diff.map(|e| 2.0 * e / n);
        let (critic_grads, _) = self.critic.backward(&cache, &dq);
        apply_critic_step(&mut self.critic, &mut self.critic_adam, &critic_grads, 1.0);

        // Actor ascends mean Q(s, mu(s)); gradients clipped elementwise.
        let actor_cache = self.actor.forward_cached(&batch.obs);
        let policy_cache = self
            .critic
            .forward_cached(&batch.obs, actor_cache.output());
        let actor_objective =
            policy_cache.q().iter().map(|&q| q as f64).sum::<f64>() / n as f64;
        let dq_ones = DMatrix::from_element(1, self.cfg.batch_size, 1.0 / n);
        let d_action = self.critic.action_gradient(&policy_cache, &dq_ones);
        let (mut actor_grads, _) = self.actor.backward(&actor_cache, &d_action);
        for g in &mut actor_grads {
            g.clamp(self.cfg.actor_grad_clip);
        }
        apply_mlp_step(&mut self.actor, &mut self.actor_adam, &actor_grads, -1.0);

        self.actor.soft_update_into(&mut self.actor_target, self.cfg.tau);
        self.critic
            .soft_update_into(&mut self.critic_target, self.cfg.tau);
        self.updates += 1;

        Some(UpdateStats {
            critic_loss,
            actor_objective,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Critic value for a raw observation/normalized action pair (test
    /// and diagnostics support).
    pub fn q_value(&self, obs: &[f64], normalized_action: &[f32]) -> f64 {
        let o = self.obs_column(obs);
        let a = DMatrix::from_column_slice(self.act_dim, 1, normalized_action);
        self.critic.forward(&o, &a)[(0, 0)] as f64
    }

    #[cfg(test)]
    fn targets_for_test(&mut self) -> (DMatrix<f32>, DMatrix<f32>) {
        let batch = self.buffer.sample(self.cfg.batch_size);
        (self.td_targets(&batch), batch.reward)
    }

    // ---- checkpointing -------------------------------------------------

    const MAGIC: &'static [u8; 8] = b"PLNRDP01";

    /// Serializes every network, optimiser moment, noise and RNG state.
    /// The replay buffer is deliberately not persisted.
    pub fn save<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(Self::MAGIC)?;
        for dim in [
            self.obs_dim,
            self.act_dim,
            self.cfg.actor_hidden.0,
            self.cfg.actor_hidden.1,
            self.cfg.critic_hidden.0,
            self.cfg.critic_hidden.1,
            self.cfg.batch_size,
            self.cfg.replay_capacity,
            self.cfg.warmup,
        ] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for x in [
            self.cfg.actor_lr as f64,
            self.cfg.critic_lr as f64,
            self.cfg.gamma as f64,
            self.cfg.tau as f64,
            self.cfg.ou_theta,
            self.cfg.ou_sigma,
            self.cfg.actor_grad_clip as f64,
        ] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.updates.to_le_bytes())?;
        for lo in &self.act_lo {
            w.write_all(&lo.to_le_bytes())?;
        }
        for hi in &self.act_hi {
            w.write_all(&hi.to_le_bytes())?;
        }
        for net in [&self.actor, &self.actor_target] {
            write_mlp(&mut w, net)?;
        }
        for net in [&self.critic, &self.critic_target] {
            write_critic(&mut w, net)?;
        }
        write_adam(&mut w, &self.actor_adam)?;
        write_adam(&mut w, &self.critic_adam)?;
        for x in self.noise.state() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.rng.get_seed())?;
        w.write_all(&self.rng.get_word_pos().to_le_bytes())?;
        Ok(())
    }

    pub fn save_to_path<P: AsRef<Path>>(&self, path: P) -> io::Result<()> {
        self.save(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Restores an agent saved by [`DdpgAgent::save`] bit-exactly
    /// (except the replay buffer, which starts empty).
    pub fn load<R: Read>(mut r: R) -> io::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "not a checkpoint file (bad magic)",
            ));
        }
        let mut dims = [0usize; 9];
        for d in &mut dims {
            *d = read_u64(&mut r)? as usize;
        }
        let mut floats = [0f64; 7];
        for f in &mut floats {
            *f = read_f64(&mut r)?;
        }
        let cfg = DdpgConfig {
            actor_hidden: (dims[2], dims[3]),
            critic_hidden: (dims[4], dims[5]),
            batch_size: dims[6],
            replay_capacity: dims[7],
            warmup: dims[8],
            actor_lr: floats[0] as f32,
            critic_lr: floats[1] as f32,
            gamma: floats[2] as f32,
            tau: floats[3] as f32,
            ou_theta: floats[4],
            ou_sigma: floats[5],
            actor_grad_clip: floats[6] as f32,
        };
        let (obs_dim, act_dim) = (dims[0], dims[1]);
        let updates = read_u64(&mut r)?;
        let mut act_lo = vec![0.0; act_dim];
        let mut act_hi = vec![0.0; act_dim];
        for x in &mut act_lo {
            *x = read_f64(&mut r)?;
        }
        for x in &mut act_hi {
            *x = read_f64(&mut r)?;
        }
        let mut agent = Self::new(obs_dim, act_dim, act_lo, act_hi, cfg, 0);
        agent.updates = updates;
        read_mlp(&mut r, &mut agent.actor)?;
        read_mlp(&mut r, &mut agent.actor_target)?;
        read_critic(&mut r, &mut agent.critic)?;
        read_critic(&mut r, &mut agent.critic_target)?;
        read_adam(&mut r, &mut agent.actor_adam)?;
        read_adam(&mut r, &mut agent.critic_adam)?;
        let mut noise_state = vec![0.0; act_dim];
        for x in &mut noise_state {
            *x = read_f64(&mut r)?;
        }
        agent.noise.set_state(&noise_state);
        let mut seed = [0u8; 32];
        r.read_exact(&mut seed)?;
        let mut pos = [0u8; 16];
        r.read_exact(&mut pos)?;
        agent.rng = ChaCha8Rng::from_seed(seed);
        agent.rng.set_word_pos(u128::from_le_bytes(pos));
        Ok(agent)
    }

    pub fn load_from_path<P: AsRef<Path>>(path: P) -> io::Result<Self> {
        Self::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl Agent for DdpgAgent {
    fn act(&mut self, obs: &Observation) -> Vec<f64> {
        self.act_greedy(&flatten_observation(obs))
    }
}

fn adam_shapes_mlp(net: &Mlp) -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for layer in &net.layers {
        shapes.push((layer.w.nrows(), layer.w.ncols()));
        shapes.push((layer.b.nrows(), 1));
    }
    shapes
}

fn adam_shapes_critic(net: &Critic) -> Vec<(usize, usize)> {
    vec![
        (net.obs_layer.w.nrows(), net.obs_layer.w.ncols()),
        (net.obs_layer.b.nrows(), 1),
        (net.joint_layer.w.nrows(), net.joint_layer.w.ncols()),
        (net.joint_layer.b.nrows(), 1),
        (net.action_layer.nrows(), net.action_layer.ncols()),
        (net.head.w.nrows(), net.head.w.ncols()),
        (net.head.b.nrows(), 1),
    ]
}

fn apply_mlp_step(net: &mut Mlp, adam: &mut Adam, grads: &[DenseGrad], scale: f32) {
    let mut tensors = Vec::new();
    let mut grad_slices = Vec::new();
    for (layer, grad) in net.layers.iter_mut().zip(grads) {
        tensors.push(layer.w.as_mut_slice());
        grad_slices.push(grad.w.as_slice());
        tensors.push(layer.b.as_mut_slice());
        grad_slices.push(grad.b.as_slice());
    }
    adam.step(tensors, grad_slices, scale);
}

fn apply_critic_step(net: &mut Critic, adam: &mut Adam, grads: &CriticGrad, scale: f32) {
    adam.step(
        vec![
            net.obs_layer.w.as_mut_slice(),
            net.obs_layer.b.as_mut_slice(),
            net.joint_layer.w.as_mut_slice(),
            net.joint_layer.b.as_mut_slice(),
            net.action_layer.as_mut_slice(),
            net.head.w.as_mut_slice(),
            net.head.b.as_mut_slice(),
        ],
        vec![
            grads.obs_layer.w.as_slice(),
            grads.obs_layer.b.as_slice(),
            grads.joint_layer.w.as_slice(),
            grads.joint_layer.b.as_slice(),
            grads.action_layer.as_slice(),
            grads.head.w.as_slice(),
            grads.head.b.as_slice(),
        ],
        scale,
    );
}

fn write_tensor<W: Write>(w: &mut W, data: &[f32]) -> io::Result<()> {
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R, data: &mut [f32]) -> io::Result<()> {
    let mut buf = [0u8; 4];
    for x in data {
        r.read_exact(&mut buf)?;
        *x = f32::from_le_bytes(buf);
    }
    Ok(())
}

fn write_mlp<W: Write>(w: &mut W, net: &Mlp) -> io::Result<()> {
    for layer in &net.layers {
        write_tensor(w, layer.w.as_slice())?;
        write_tensor(w, layer.b.as_slice())?;
    }
    Ok(())
}

fn read_mlp<R: Read>(r: &mut R, net: &mut Mlp) -> io::Result<()> {
    for layer in &mut net.layers {
        read_tensor(r, layer.w.as_mut_slice())?;
        read_tensor(r, layer.b.as_mut_slice())?;
    }
    Ok(())
}

fn write_critic<W: Write>(w: &mut W, net: &Critic) -> io::Result<()> {
    write_tensor(w, net.obs_layer.w.as_slice())?;
    write_tensor(w, net.obs_layer.b.as_slice())?;
    write_tensor(w, net.joint_layer.w.as_slice())?;
    write_tensor(w, net.joint_layer.b.as_slice())?;
    write_tensor(w, net.action_layer.as_slice())?;
    write_tensor(w, net.head.w.as_slice())?;
    write_tensor(w, net.head.b.as_slice())
}

fn read_critic<R: Read>(r: &mut R, net: &mut Critic) -> io::Result<()> {
    read_tensor(r, net.obs_layer.w.as_mut_slice())?;
    read_tensor(r, net.obs_layer.b.as_mut_slice())?;
    read_tensor(r, net.joint_layer.w.as_mut_slice())?;
    read_tensor(r, net.joint_layer.b.as_mut_slice())?;
    read_tensor(r, net.action_layer.as_mut_slice())?;
    read_tensor(r, net.head.w.as_mut_slice())?;
    read_tensor(r, net.head.b.as_mut_slice())
}

fn write_adam<W: Write>(w: &mut W, adam: &Adam) -> io::Result<()> {
    w.write_all(&adam.t.to_le_bytes())?;
    for slot in adam.slots() {
        write_tensor(w, slot.0)?;
        write_tensor(w, slot.1)?;
    }
    Ok(())
}

fn read_adam<R: Read>(r: &mut R, adam: &mut Adam) -> io::Result<()> {
    adam.t = read_u64(r)?;
    for slot in adam.slots_mut() {
        read_tensor(r, slot.0)?;
        read_tensor(r, slot.1)?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
