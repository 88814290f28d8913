//! Procedurally generated k-link planar swimmer in a high-Reynolds drag
//! fluid.
//!
//! The chain floats in zero gravity on a 3-DoF planar free base (two
//! slides plus a yaw hinge) with k-1 actuated inter-link hinges. Every
//! link is a drag-enabled capsule. Reward is 1 with the nose inside the
//! target and falls off like a Lorentzian (long-tail sigmoid) with a
//! margin of five body lengths.

use indexmap::IndexMap;
use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild, CONTROL_SUBSTEPS};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{
    compile, ActuatorSpec, BodySpec, CameraSpec, Category, CompiledModel, GeomSpec, JointSpec,
    ModelSpec, SiteSpec,
};
use crate::physics::Physics;
use crate::rewards::{tolerance, SigmoidKind, ToleranceParams};

const LINK_LENGTH: f64 = 0.1;
const LINK_RADIUS: f64 = 0.008;
const JOINT_RANGE: f64 = 1.5;
const TARGET_RADIUS: f64 = 0.1;

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    let k = match task {
        "swimmer6" => 6,
        "swimmer15" => 15,
        _ => return Err(unknown_task("swimmer", task)),
    };
    let model = compile(&swimmer_spec(k)?)?;
    let body_length = k as f64 * LINK_LENGTH;
    let nose_site = model.name_to_id(Category::Site, "nose").expect("nose");
    let target_geom = model.name_to_id(Category::Geom, "target").expect("target");
    let link_bodies = (1..=k)
        .map(|i| {
            model
                .name_to_id(Category::Body, &format!("link_{i}"))
                .expect("link body")
        })
        .collect();
    Ok(TaskBuild {
        model,
        task: Box::new(Swim {
            k,
            nose_site,
            target_geom,
            link_bodies,
            body_length,
            near_target: ToleranceParams::new(0.0, TARGET_RADIUS)
                .unwrap()
                .margin(5.0 * body_length)
                .unwrap()
                .sigmoid(SigmoidKind::LongTail)
                .unwrap(),
        }),
        substeps: CONTROL_SUBSTEPS,
    })
}

pub(crate) fn swimmer_spec(k: usize) -> Result<ModelSpec, SuiteError> {
    if !(3..=20).contains(&k) {
        return Err(SuiteError::BadParameter(format!(
            "swimmer supports 3 <= k <= 20, got {k}"
        )));
    }
    let mut spec = ModelSpec::empty(&format!("swimmer{k}"));
    spec.options.gravity = Vector3::zeros();
    let body_length = k as f64 * LINK_LENGTH;
    spec.cameras.push(CameraSpec {
        name: "fixed".into(),
        pos: Vector3::zeros(),
        extent: 5.0 * body_length,
    });

    let mut target = GeomSpec::sphere("target", TARGET_RADIUS);
    target.rgba = [0.9, 0.2, 0.2, 1.0];
    spec.worldbody.geoms.push(target);

    let link = |i: usize| -> BodySpec {
        let mut body = BodySpec::named(&format!("link_{i}"));
        let mut cap = GeomSpec::capsule(
            &format!("hull_{i}"),
            LINK_RADIUS,
            Vector3::zeros(),
            Vector3::new(-LINK_LENGTH, 0.0, 0.0),
        );
        cap.drag = true;
        cap.rgba = [0.3, 0.55, 0.85, 1.0];
        body.geoms.push(cap);
        body
    };

    // Head link carries the planar free base: slide x, slide z, yaw.
    let mut head = link(1);
    head.joints
        .push(JointSpec::slide("root_x", Vector3::new(1.0, 0.0, 0.0)));
    head.joints
        .push(JointSpec::slide("root_z", Vector3::new(0.0, 0.0, 1.0)));
    head.joints.push(JointSpec::hinge("root_rot"));
    let mut nose = SiteSpec::new("nose", Vector3::zeros());
    nose.size = 0.012;
    nose.rgba = [0.95, 0.6, 0.2, 1.0];
    head.sites.push(nose);

    let mut tail: Option<BodySpec> = None;
    for i in (2..=k).rev() {
        let mut body = link(i);
        body.pos = Vector3::new(-LINK_LENGTH, 0.0, 0.0);
        let mut joint = JointSpec::hinge(&format!("joint_{i}"));
        joint.range = Some((-JOINT_RANGE, JOINT_RANGE));
        joint.damping = 0.002;
        body.joints.push(joint);
        if let Some(t) = tail.take() {
            body.children.push(t);
        }
        tail = Some(body);
    }
    if let Some(t) = tail {
        head.children.push(t);
    }
    spec.worldbody.children.push(head);

    for i in 2..=k {
        spec.actuators.push(ActuatorSpec {
            name: format!("motor_{i}"),
            joint: format!("joint_{i}"),
            gear: 0.004,
            ctrl_range: Some((-1.0, 1.0)),
        });
    }
    Ok(spec)
}

/// Compiled k-link swimmer (`3 <= k <= 20`).
pub fn generate_swimmer(k: usize) -> Result<CompiledModel, SuiteError> {
    Ok(compile(&swimmer_spec(k)?)?)
}

struct Swim {
    k: usize,
    nose_site: usize,
    target_geom: usize,
    link_bodies: Vec<usize>,
    body_length: f64,
    near_target: ToleranceParams,
}

impl Task for Swim {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let nq = physics.model().nq();
        let mut q = vec![0.0; nq];
        q[2] = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
        for qi in q.iter_mut().skip(3) {
            *qi = uniform(rng, -JOINT_RANGE, JOINT_RANGE);
        }
        let nu = physics.model().nu();
        physics
            .set_state(&q, &vec![0.0; nq], &vec![0.0; nu])
            .expect("swimmer state shape");
        let angle = uniform(rng, 0.0, std::f64::consts::TAU);
        let dist = uniform(rng, 0.5 * self.body_length, 2.0 * self.body_length);
        physics
            .set_static_geom_pos(
                self.target_geom,
                Vector3::new(dist * angle.cos(), 0.0, dist * angle.sin()),
            )
            .expect("target is a world geom");
    }

    fn reward(&self, physics: &Physics) -> f64 {
        let nose = physics.site_xpos(self.nose_site);
        let target = physics.geom_xpos(self.target_geom);
        let dist = ((nose.x - target.x).powi(2) + (nose.z - target.z).powi(2)).sqrt();
        tolerance(dist, &self.near_target)
    }

    fn observation(&self, physics: &Physics) -> Observation {
        // Inter-link joint angles (skip the 3 free-base coordinates).
        let joints = physics.q()[3..].to_vec();

        // Nose-to-target vector in the head frame.
        let head_rot = physics.body_rot(self.link_bodies[0]);
        let delta = physics.geom_xpos(self.target_geom) - physics.site_xpos(self.nose_site);
        let (sin, cos) = head_rot.sin_cos();
        let to_target = vec![cos * delta.x - sin * delta.z, sin * delta.x + cos * delta.z];

        // Per-link com velocity in the link frame plus angular rate.
        let mut body_velocities = Vec::with_capacity(3 * self.k);
        for &b in &self.link_bodies {
            let vel = physics.com_vel(b);
            let (s, c) = physics.body_rot(b).sin_cos();
            body_velocities.push(c * vel.x - s * vel.z);
            body_velocities.push(s * vel.x + c * vel.z);
            body_velocities.push(physics.body_omega(b));
        }

        let mut obs = Observation::new();
        obs.insert("joints".into(), ObsArray::F64(joints));
        obs.insert("to_target".into(), ObsArray::F64(to_target));
        obs.insert("body_velocities".into(), ObsArray::F64(body_velocities));
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        IndexMap::from([
            obs_entry("joints", self.k - 1),
            obs_entry("to_target", 2),
            obs_entry("body_velocities", 3 * self.k),
        ])
    }
}
