//! Point-mass domain: drive a planar mass into a target at the origin.
//!
//! In `easy` the two actuators map to the global axes. In `hard` a random
//! 2x2 gain matrix (entries uniform in [-1, 1], redrawn until
//! |det| > 0.2) mixes the controls each episode and is withheld from the
//! observation, so memoryless agents cannot solve it.

use indexmap::IndexMap;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild, CONTROL_SUBSTEPS};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{compile, parse_model, Category};
use crate::physics::Physics;
use crate::rewards::{tolerance, SigmoidKind, ToleranceParams};

pub(crate) const POINT_MASS_XML: &str = include_str!("../../models/point_mass.mjcf.xml");

const TARGET_RADIUS: f64 = 0.05;
/// Width of the shaped-reward basin around the target.
const REWARD_MARGIN: f64 = 0.2;

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    let randomize_gain = match task {
        "easy" => false,
        "hard" => true,
        _ => return Err(unknown_task("point_mass", task)),
    };
    let model = compile(&parse_model(POINT_MASS_XML)?)?;
    let target_geom = model
        .name_to_id(Category::Geom, "target")
        .expect("target geom");
    Ok(TaskBuild {
        model,
        task: Box::new(PointMass {
            target_geom,
            randomize_gain,
            near_target: ToleranceParams::new(0.0, TARGET_RADIUS)
                .unwrap()
                .margin(REWARD_MARGIN)
                .unwrap(),
            small_control: ToleranceParams::new(0.0, 0.0)
                .unwrap()
                .margin(1.0)
                .unwrap()
                .sigmoid(SigmoidKind::Quadratic)
                .unwrap()
                .value_at_margin(0.0)
                .unwrap(),
        }),
        substeps: CONTROL_SUBSTEPS,
    })
}

struct PointMass {
    target_geom: usize,
    randomize_gain: bool,
    near_target: ToleranceParams,
    small_control: ToleranceParams,
}

impl Task for PointMass {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let q = [uniform(rng, -0.25, 0.25), uniform(rng, -0.25, 0.25)];
        physics
            .set_state(&q, &[0.0, 0.0], &[0.0, 0.0])
            .expect("point mass state shape");
        if self.randomize_gain {
            // Redraw until the mixing matrix is comfortably invertible.
            let gain = loop {
                let entries: Vec<f64> = (0..4).map(|_| uniform(rng, -1.0, 1.0)).collect();
                let m = DMatrix::from_row_slice(2, 2, &entries);
                if m.determinant().abs() > 0.2 {
                    break m;
                }
            };
            physics
                .set_ctrl_transform(Some(gain))
                .expect("2x2 control transform");
        }
    }

    fn reward(&self, physics: &Physics) -> f64 {
        let target = physics.geom_xpos(self.target_geom);
        let mass = physics.com_pos(1);
        let dist = ((mass.x - target.x).powi(2) + (mass.z - target.z).powi(2)).sqrt();
        let near = tolerance(dist, &self.near_target);
        let control = physics.ctrl();
        let small_control = control
            .iter()
            .map(|u| tolerance(*u, &self.small_control))
            .sum::<f64>()
            / control.len() as f64;
        near * (small_control + 4.0) / 5.0
    }

    fn observation(&self, physics: &Physics) -> Observation {
        let mut obs = Observation::new();
        obs.insert("position".into(), ObsArray::F64(physics.q().to_vec()));
        obs.insert("velocity".into(), ObsArray::F64(physics.v().to_vec()));
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        IndexMap::from([obs_entry("position", 2), obs_entry("velocity", 2)])
    }
}
