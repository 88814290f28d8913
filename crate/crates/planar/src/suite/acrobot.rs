//! Acrobot domain: underactuated double pendulum, torque on the elbow.
//!
//! Both links are unit-mass unit-length rods. Reward is shaped on the
//! height of the tip above the shoulder pivot: the band `[1.9, 2.0]`
//! (roughly both links within ~18 degrees of vertical) scores 1, decaying
//! over the remaining 3.9 height units in the smooth variant.

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild, CONTROL_SUBSTEPS};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{compile, parse_model, Category};
use crate::physics::Physics;
use crate::rewards::{tolerance, ToleranceParams};

pub(crate) const ACROBOT_XML: &str = include_str!("../../models/acrobot.mjcf.xml");

const PIVOT_HEIGHT: f64 = 2.0;

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    let sparse = match task {
        "swingup" => false,
        "swingup_sparse" => true,
        _ => return Err(unknown_task("acrobot", task)),
    };
    let model = compile(&parse_model(ACROBOT_XML)?)?;
    let tip_site = model.name_to_id(Category::Site, "tip").expect("tip site");
    let upper_body = model.name_to_id(Category::Body, "upper_arm").expect("body");
    let lower_body = model.name_to_id(Category::Body, "lower_arm").expect("body");
    let band = ToleranceParams::new(1.9, 2.0).expect("static bounds");
    let height = if sparse {
        band
    } else {
        band.margin(3.9).expect("static margin")
    };
    Ok(TaskBuild {
        model,
        task: Box::new(SwingUp {
            tip_site,
            upper_body,
            lower_body,
            height,
        }),
        substeps: CONTROL_SUBSTEPS,
    })
}

struct SwingUp {
    tip_site: usize,
    upper_body: usize,
    lower_body: usize,
    height: ToleranceParams,
}

impl Task for SwingUp {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let q = [
            uniform(rng, -std::f64::consts::PI, std::f64::consts::PI),
            uniform(rng, -std::f64::consts::PI, std::f64::consts::PI),
        ];
        physics
            .set_state(&q, &[0.0, 0.0], &[0.0])
            .expect("acrobot state shape");
    }

    fn reward(&self, physics: &Physics) -> f64 {
        let tip_height = physics.site_xpos(self.tip_site).z - PIVOT_HEIGHT;
        tolerance(tip_height, &self.height)
    }

    fn observation(&self, physics: &Physics) -> Observation {
        // World orientations of both links (q = 0 hangs down).
        let upper = physics.body_rot(self.upper_body);
        let lower = physics.body_rot(self.lower_body);
        let mut obs = Observation::new();
        obs.insert(
            "orientations".into(),
            ObsArray::F64(vec![upper.cos(), upper.sin(), lower.cos(), lower.sin()]),
        );
        obs.insert("velocity".into(), ObsArray::F64(physics.v().to_vec()));
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        IndexMap::from([obs_entry("orientations", 4), obs_entry("velocity", 2)])
    }
}
