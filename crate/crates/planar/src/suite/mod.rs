//! Task catalog: domains, episode wiring and the `load()` entry point.
//!
//! A *domain* is a physical model; a *task* is that model with a specific
//! MDP structure (initial-state distribution, reward, observations).
//! Tasks solvable by learning agents live in [`BENCHMARKING`]; the
//! procedurally harder or non-conforming ones (extra poles, the
//! memoryless-hard point-mass, unbounded LQR) live in [`EXTRA`].
//!
//! Every task runs fixed-length 1000-step episodes of 0.02 s control steps
//! (four 0.005 s physics substeps; the LQR domain integrates one 0.02 s
//! Euler step). Only LQR terminates early, with discount 0, once its state
//! has decayed to numerical zero.

mod acrobot;
mod cartpole;
mod lqr_domain;
mod pendulum;
mod point_mass;
mod reacher;
mod swimmer;

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{ArraySpec, EnvError, Environment, Observation, StepType, TimeStep};
use crate::mjcf::{CompiledModel, ModelError};
use crate::physics::{Physics, PhysicsError};
use crate::render::FrameBuffer;

pub use cartpole::generate_cart_k_pole;
pub use lqr_domain::lqr_model;
pub use swimmer::generate_swimmer;

/// Episode length in control steps.
pub const DEFAULT_EPISODE_STEPS: usize = 1000;
/// Physics substeps per control step for the 0.005 s domains.
pub(crate) const CONTROL_SUBSTEPS: usize = 4;

/// Tasks solved by at least one learning agent.
pub const BENCHMARKING: &[(&str, &str)] = &[
    ("pendulum", "swingup"),
    ("acrobot", "swingup"),
    ("acrobot", "swingup_sparse"),
    ("cartpole", "balance"),
    ("cartpole", "balance_sparse"),
    ("cartpole", "swingup"),
    ("cartpole", "swingup_sparse"),
    ("point_mass", "easy"),
    ("reacher", "easy"),
    ("reacher", "hard"),
    ("swimmer", "swimmer6"),
    ("swimmer", "swimmer15"),
];

/// Harder or non-conforming tasks, kept out of the benchmarking set.
pub const EXTRA: &[(&str, &str)] = &[
    ("cartpole", "two_poles"),
    ("cartpole", "three_poles"),
    ("point_mass", "hard"),
    ("lqr", "lqr_2_1"),
    ("lqr", "lqr_6_2"),
];

/// All suite tasks: the benchmarking set followed by the extra set.
pub fn all_tasks() -> Vec<(&'static str, &'static str)> {
    BENCHMARKING.iter().chain(EXTRA).copied().collect()
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown task {domain}:{task}; available: {available}")]
    UnknownTask {
        domain: String,
        task: String,
        available: String,
    },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

pub(crate) fn unknown_task(domain: &str, task: &str) -> SuiteError {
    let available = all_tasks()
        .iter()
        .map(|(d, t)| format!("{d}:{t}"))
        .collect::<Vec<_>>()
        .join(", ");
    SuiteError::UnknownTask {
        domain: domain.to_string(),
        task: task.to_string(),
        available,
    }
}

/// Per-task behaviour: initial-state distribution, reward, observations
/// and (for LQR) the termination rule.
pub(crate) trait Task: Send {
    /// Draws the initial state (and any per-episode parameters such as
    /// target positions or control gains) into `physics`.
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng);

    /// Reward for the transition that produced the current state; the
    /// applied controls are available as `physics.ctrl()`.
    fn reward(&self, physics: &Physics) -> f64;

    fn observation(&self, physics: &Physics) -> Observation;

    fn observation_spec(&self) -> IndexMap<String, ArraySpec>;

    /// `Some(discount)` ends the episode now with that discount.
    fn termination(&self, _physics: &Physics) -> Option<f64> {
        None
    }
}

pub(crate) struct TaskBuild {
    pub model: CompiledModel,
    pub task: Box<dyn Task>,
    pub substeps: usize,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Scale geom colors with the current reward when rendering.
    pub visualize_reward: bool,
    pub episode_steps: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            visualize_reward: false,
            episode_steps: DEFAULT_EPISODE_STEPS,
        }
    }
}

/// Loads a task environment with a seeded random stream.
pub fn load(domain: &str, task: &str, seed: u64) -> Result<ControlEnv, SuiteError> {
    load_with(domain, task, seed, &LoadOptions::default())
}

pub fn load_with(
    domain: &str,
    task: &str,
    seed: u64,
    options: &LoadOptions,
) -> Result<ControlEnv, SuiteError> {
    let build = match domain {
        "pendulum" => pendulum::build(task)?,
        "acrobot" => acrobot::build(task)?,
        "cartpole" => cartpole::build(task)?,
        "point_mass" => point_mass::build(task)?,
        "reacher" => reacher::build(task)?,
        "swimmer" => swimmer::build(task)?,
        "lqr" => lqr_domain::build(task)?,
        _ => return Err(unknown_task(domain, task)),
    };
    ControlEnv::new(domain, task, build, seed, options)
}

/// `(dim state, dim action, dim observation)` for a catalog task.
pub fn task_dims(domain: &str, task: &str) -> Result<(usize, usize, usize), SuiteError> {
    let env = load(domain, task, 0)?;
    let state = env.physics().model().nq() + env.physics().model().nv();
    let action = env.action_spec().len();
    let obs = env.observation_spec().values().map(|s| s.len()).sum();
    Ok((state, action, obs))
}

enum EpisodeState {
    Idle,
    Running,
    Ended,
}

/// A fully wired suite environment: physics, task and a seeded stream.
pub struct ControlEnv {
    domain: String,
    task_name: String,
    physics: Physics,
    task: Box<dyn Task>,
    rng: ChaCha8Rng,
    substeps: usize,
    episode_steps: usize,
    step_count: usize,
    episode: EpisodeState,
    action_spec: ArraySpec,
    obs_spec: IndexMap<String, ArraySpec>,
    visualize_reward: bool,
    last_reward: f64,
}

impl ControlEnv {
    fn new(
        domain: &str,
        task_name: &str,
        build: TaskBuild,
        seed: u64,
        options: &LoadOptions,
    ) -> Result<Self, SuiteError> {
        let action_spec = action_spec_from_model(&build.model);
        let obs_spec = build.task.observation_spec();
        let physics = Physics::from_model(build.model)?;
        Ok(Self {
            domain: domain.to_string(),
            task_name: task_name.to_string(),
            physics,
            task: build.task,
            rng: ChaCha8Rng::seed_from_u64(seed),
            substeps: build.substeps,
            episode_steps: options.episode_steps,
            step_count: 0,
            episode: EpisodeState::Idle,
            action_spec,
            obs_spec,
            visualize_reward: options.visualize_reward,
            last_reward: 0.0,
        })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    /// Direct mutable access to the underlying physics. Intended for
    /// tooling and tests; episode bookkeeping is unaffected.
    pub fn physics_mut(&mut self) -> &mut Physics {
        &mut self.physics
    }

    /// Control timestep in seconds (substeps x physics timestep).
    pub fn control_timestep(&self) -> f64 {
        self.substeps as f64 * self.physics.model().timestep()
    }
}

fn action_spec_from_model(model: &CompiledModel) -> ArraySpec {
    let nu = model.nu();
    let bounded = !model.actuators.is_empty()
        && model.actuators.iter().all(|a| a.ctrl_range.is_some());
    if bounded {
        let (mut lo, mut hi) = (Vec::with_capacity(nu), Vec::with_capacity(nu));
        for a in &model.actuators {
            let (l, h) = a.ctrl_range.unwrap();
            lo.push(l);
            hi.push(h);
        }
        ArraySpec {
            name: "action".into(),
            shape: vec![nu],
            dtype: crate::env::DType::F64,
            minimum: Some(lo),
            maximum: Some(hi),
        }
    } else {
        ArraySpec::unbounded("action", vec![nu])
    }
}

impl Environment for ControlEnv {
    fn reset(&mut self) -> TimeStep {
        self.physics.reset();
        self.task.init_episode(&mut self.physics, &mut self.rng);
        self.step_count = 0;
        self.last_reward = 0.0;
        self.episode = EpisodeState::Running;
        TimeStep {
            step_type: StepType::First,
            reward: None,
            discount: None,
            observation: self.task.observation(&self.physics),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        if !matches!(self.episode, EpisodeState::Running) {
            return Err(EnvError::EpisodeOver);
        }
        if action.len() != self.action_spec.len() {
            return Err(EnvError::WrongActionShape {
                expected: self.action_spec.len(),
                got: action.len(),
            });
        }
        let clipped = self.action_spec.clip(action);
        if let Err(e) = self.physics.step_n(&clipped, self.substeps) {
            self.episode = EpisodeState::Ended;
            return Err(EnvError::Physics(e));
        }
        self.step_count += 1;

        let reward = self.task.reward(&self.physics);
        self.last_reward = reward;

        let (step_type, discount) = if let Some(d) = self.task.termination(&self.physics) {
            self.episode = EpisodeState::Ended;
            (StepType::Last, d)
        } else if self.step_count >= self.episode_steps {
            self.episode = EpisodeState::Ended;
            (StepType::Last, 1.0)
        } else {
            (StepType::Mid, 1.0)
        };

        Ok(TimeStep {
            step_type,
            reward: Some(reward),
            discount: Some(discount),
            observation: self.task.observation(&self.physics),
        })
    }

    fn action_spec(&self) -> &ArraySpec {
        &self.action_spec
    }

    fn observation_spec(&self) -> &IndexMap<String, ArraySpec> {
        &self.obs_spec
    }

    fn render(&self, width: u32, height: u32) -> Result<FrameBuffer, EnvError> {
        let tint = self.visualize_reward.then_some(self.last_reward);
        crate::render::render_frame(&self.physics, "fixed", width, height, tint)
            .map_err(|e| EnvError::UnknownCamera(e.to_string()))
    }

    fn supports_render(&self) -> bool {
        true
    }
}

/// Uniform draw helper shared by the task initialisers.
pub(crate) fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Spec for an unbounded f64 observation entry.
pub(crate) fn obs_entry(name: &str, len: usize) -> (String, ArraySpec) {
    (name.to_string(), ArraySpec::unbounded(name, vec![len]))
}
