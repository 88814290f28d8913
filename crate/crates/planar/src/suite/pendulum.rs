//! Pendulum domain: torque-limited swing-up.
//!
//! The actuator is 1/6th as strong as needed to lift the mass from
//! motionless horizontal (gear = m g l / 6), so several pump swings are
//! required. Reward is sparse: 1 while the pole is within 30 degrees of
//! vertical.

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild, CONTROL_SUBSTEPS};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{compile, parse_model};
use crate::physics::Physics;
use crate::rewards::{tolerance, ToleranceParams};

pub(crate) const PENDULUM_XML: &str = include_str!("../../models/pendulum.mjcf.xml");

/// Cosine threshold for "within 30 degrees of vertical".
const COSINE_BOUND: f64 = 0.86602540378443871; // cos(30 deg)

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    if task != "swingup" {
        return Err(unknown_task("pendulum", task));
    }
    let model = compile(&parse_model(PENDULUM_XML)?)?;
    Ok(TaskBuild {
        model,
        task: Box::new(SwingUp {
            upright: ToleranceParams::new(COSINE_BOUND, 1.0).expect("static bounds"),
        }),
        substeps: CONTROL_SUBSTEPS,
    })
}

struct SwingUp {
    upright: ToleranceParams,
}

impl Task for SwingUp {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let angle = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
        physics
            .set_state(&[angle], &[0.0], &[0.0])
            .expect("pendulum state shape");
    }

    fn reward(&self, physics: &Physics) -> f64 {
        // q = 0 is upright; the pole's vertical component is cos(q).
        tolerance(physics.q()[0].cos(), &self.upright)
    }

    fn observation(&self, physics: &Physics) -> Observation {
        let q = physics.q()[0];
        let mut obs = Observation::new();
        obs.insert("orientation".into(), ObsArray::F64(vec![q.cos(), q.sin()]));
        obs.insert("velocity".into(), ObsArray::F64(vec![physics.v()[0]]));
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        IndexMap::from([obs_entry("orientation", 2), obs_entry("velocity", 1)])
    }
}
