//! LQR domain: n serial masses on linear joints, m of them actuated.
//!
//! Dynamics are exactly linear (unit masses, stiffness 1, damping 0.1),
//! rewards are the negative quadratic `-(q' q + 0.1 u' u)`, and both
//! controls and rewards are unbounded, which keeps this domain out of the
//! benchmarking set. An episode terminates with discount 0 once the state
//! has decayed to numerical zero, standing in for the infinite
//! exponential convergence of a stabilised linear system.

use indexmap::IndexMap;
use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{
    compile, ActuatorSpec, BodySpec, CameraSpec, CompiledModel, GeomSpec, InertialSpec, JointSpec,
    ModelSpec,
};
use crate::physics::Physics;

pub(crate) const JOINT_STIFFNESS: f64 = 1.0;
pub(crate) const JOINT_DAMPING: f64 = 0.1;
pub(crate) const CONTROL_COST: f64 = 0.1;
/// Infinity-norm threshold on (q, v) below which the episode terminates.
pub(crate) const TERMINATION_EPS: f64 = 1e-4;

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    let (n, m) = match task {
        "lqr_2_1" => (2, 1),
        "lqr_6_2" => (6, 2),
        _ => return Err(unknown_task("lqr", task)),
    };
    let model = lqr_model(n, m)?;
    Ok(TaskBuild {
        model,
        task: Box::new(Lqr { n }),
        // One 0.02 s semi-implicit Euler step per control step, so the
        // analytic linearization is exactly the control-step map.
        substeps: 1,
    })
}

/// Serial chain of `n_masses` unit masses on x slides, the first
/// `n_actuated` driven by direct-force motors with unbounded controls.
pub fn lqr_model(n_masses: usize, n_actuated: usize) -> Result<CompiledModel, SuiteError> {
    if n_masses == 0 || n_actuated == 0 || n_actuated > n_masses {
        return Err(SuiteError::BadParameter(format!(
            "need 1 <= n_actuated <= n_masses, got {n_actuated} of {n_masses}"
        )));
    }
    let mut spec = ModelSpec::empty(&format!("lqr_{n_masses}_{n_actuated}"));
    spec.options.gravity = Vector3::zeros();
    spec.options.timestep = 0.02;
    let spacing = 0.25;
    spec.cameras.push(CameraSpec {
        name: "fixed".into(),
        pos: Vector3::new(spacing * (n_masses as f64 + 1.0) / 2.0, 0.0, 0.0),
        extent: spacing * (n_masses as f64 + 3.0),
    });

    let mut chain: Option<BodySpec> = None;
    for i in (1..=n_masses).rev() {
        let mut body = BodySpec::named(&format!("mass_{i}"));
        body.pos = Vector3::new(spacing, 0.0, 0.0);
        body.inertial = Some(InertialSpec {
            pos: Vector3::zeros(),
            mass: 1.0,
            diaginertia: Vector3::zeros(),
        });
        let mut joint = JointSpec::slide(&format!("slide_{i}"), Vector3::new(1.0, 0.0, 0.0));
        joint.stiffness = JOINT_STIFFNESS;
        joint.damping = JOINT_DAMPING;
        body.joints.push(joint);
        let mut geom = GeomSpec::sphere(&format!("mass_{i}"), 0.05);
        geom.mass = Some(0.0);
        geom.rgba = if i <= n_actuated {
            [0.85, 0.75, 0.25, 1.0]
        } else {
            [0.4, 0.55, 0.8, 1.0]
        };
        body.geoms.push(geom);
        if let Some(tail) = chain.take() {
            body.children.push(tail);
        }
        chain = Some(body);
    }
    spec.worldbody.children.push(chain.expect("n_masses >= 1"));

    for i in 1..=n_actuated {
        spec.actuators.push(ActuatorSpec {
            name: format!("motor_{i}"),
            joint: format!("slide_{i}"),
            gear: 1.0,
            ctrl_range: None,
        });
    }
    Ok(compile(&spec)?)
}

struct Lqr {
    n: usize,
}

impl Task for Lqr {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let q: Vec<f64> = (0..self.n).map(|_| uniform(rng, -0.5, 0.5)).collect();
        let nu = physics.model().nu();
        physics
            .set_state(&q, &vec![0.0; self.n], &vec![0.0; nu])
            .expect("lqr state shape");
    }

    fn reward(&self, physics: &Physics) -> f64 {
        let position_cost: f64 = physics.q().iter().map(|q| q * q).sum();
        let control_cost: f64 = physics.ctrl().iter().map(|u| u * u).sum();
        -(position_cost + CONTROL_COST * control_cost)
    }

    fn observation(&self, physics: &Physics) -> Observation {
        let mut obs = Observation::new();
        obs.insert("position".into(), ObsArray::F64(physics.q().to_vec()));
        obs.insert("velocity".into(), ObsArray::F64(physics.v().to_vec()));
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        IndexMap::from([obs_entry("position", self.n), obs_entry("velocity", self.n)])
    }

    fn termination(&self, physics: &Physics) -> Option<f64> {
        let max = physics
            .q()
            .iter()
            .chain(physics.v())
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        (max < TERMINATION_EPS).then_some(0.0)
    }
}
