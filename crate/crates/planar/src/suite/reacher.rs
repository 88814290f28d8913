//! Reacher domain: two-link planar arm with a randomised target.
//!
//! Reward is 1 while the end effector's centre is inside the target
//! sphere (radius 0.05 for `easy`, 0.015 for `hard`), decaying over a
//! 0.1 m margin outside it.

use indexmap::IndexMap;
use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild, CONTROL_SUBSTEPS};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{compile, parse_model, Category};
use crate::physics::Physics;
use crate::rewards::{tolerance, ToleranceParams};

pub(crate) const REACHER_XML: &str = include_str!("../../models/reacher.mjcf.xml");

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    let target_radius = match task {
        "easy" => 0.05,
        "hard" => 0.015,
        _ => return Err(unknown_task("reacher", task)),
    };
    let mut spec = parse_model(REACHER_XML)?;
    // The task variant only differs in the size of the target marker.
    let target = spec
        .worldbody
        .geoms
        .iter_mut()
        .find(|g| g.name == "target")
        .expect("target geom in model");
    target.size = vec![target_radius];
    let model = compile(&spec)?;
    let target_geom = model.name_to_id(Category::Geom, "target").expect("target");
    let finger_site = model.name_to_id(Category::Site, "finger").expect("finger");
    let wrist_range = model
        .joints
        .iter()
        .find(|j| j.name == "wrist")
        .and_then(|j| j.range)
        .expect("wrist range");
    Ok(TaskBuild {
        model,
        task: Box::new(Reacher {
            target_geom,
            finger_site,
            target_radius,
            wrist_range,
            in_target: ToleranceParams::new(0.0, target_radius)
                .unwrap()
                .margin(0.1)
                .unwrap(),
        }),
        substeps: CONTROL_SUBSTEPS,
    })
}

struct Reacher {
    target_geom: usize,
    finger_site: usize,
    target_radius: f64,
    wrist_range: (f64, f64),
    in_target: ToleranceParams,
}

impl Task for Reacher {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let q = [
            uniform(rng, -std::f64::consts::PI, std::f64::consts::PI),
            uniform(rng, self.wrist_range.0, self.wrist_range.1),
        ];
        physics
            .set_state(&q, &[0.0, 0.0], &[0.0, 0.0])
            .expect("reacher state shape");
        let angle = uniform(rng, 0.0, std::f64::consts::TAU);
        let radius = uniform(rng, 0.05, 0.20);
        physics
            .set_static_geom_pos(
                self.target_geom,
                Vector3::new(radius * angle.cos(), 0.0, radius * angle.sin()),
            )
            .expect("target is a world geom");
    }

    fn reward(&self, physics: &Physics) -> f64 {
        tolerance(self.finger_to_target(physics).norm(), &self.in_target)
    }

    fn observation(&self, physics: &Physics) -> Observation {
        let delta = self.finger_to_target(physics);
        let mut obs = Observation::new();
        obs.insert("position".into(), ObsArray::F64(physics.q().to_vec()));
        obs.insert("to_target".into(), ObsArray::F64(vec![delta.x, delta.z]));
        obs.insert("velocity".into(), ObsArray::F64(physics.v().to_vec()));
        obs.insert(
            "target_size".into(),
            ObsArray::F64(vec![self.target_radius]),
        );
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        IndexMap::from([
            obs_entry("position", 2),
            obs_entry("to_target", 2),
            obs_entry("velocity", 2),
            obs_entry("target_size", 1),
        ])
    }
}

impl Reacher {
    fn finger_to_target(&self, physics: &Physics) -> Vector3<f64> {
        physics.geom_xpos(self.target_geom) - physics.site_xpos(self.finger_site)
    }
}
