//! Cart-pole family: balance and swing-up on one pole, plus procedurally
//! generated serial multi-pole variants.
//!
//! Physical constants are the classic ones: 1 kg cart, 0.1 kg pole with
//! its centre of mass 0.5 m from the hinge, and a 10 N force actuator on
//! the cart. Extra poles are identical copies chained tip to tip.

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use super::{obs_entry, uniform, unknown_task, SuiteError, Task, TaskBuild, CONTROL_SUBSTEPS};
use crate::env::{ArraySpec, Observation, ObsArray};
use crate::mjcf::{compile, parse_model, BodySpec, Category, CompiledModel, ModelSpec};
use crate::physics::Physics;
use crate::rewards::{tolerance, SigmoidKind, ToleranceParams};

pub(crate) const CARTPOLE_XML: &str = include_str!("../../models/cartpole.mjcf.xml");

pub(crate) fn build(task: &str) -> Result<TaskBuild, SuiteError> {
    let (poles, swingup, sparse) = match task {
        "balance" => (1, false, false),
        "balance_sparse" => (1, false, true),
        "swingup" => (1, true, false),
        "swingup_sparse" => (1, true, true),
        "two_poles" => (2, true, false),
        "three_poles" => (3, true, false),
        _ => return Err(unknown_task("cartpole", task)),
    };
    let model = compile(&cart_k_pole_spec(poles)?)?;
    let pole_bodies = (1..=poles)
        .map(|i| {
            model
                .name_to_id(Category::Body, &format!("pole_{i}"))
                .expect("pole body")
        })
        .collect();
    Ok(TaskBuild {
        model,
        task: Box::new(CartPole {
            pole_bodies,
            swingup,
            sparse,
            centered: ToleranceParams::new(0.0, 0.0)
                .unwrap()
                .margin(2.0)
                .unwrap(),
            small_control: ToleranceParams::new(0.0, 0.0)
                .unwrap()
                .margin(1.0)
                .unwrap()
                .sigmoid(SigmoidKind::Quadratic)
                .unwrap()
                .value_at_margin(0.0)
                .unwrap(),
            small_velocity: ToleranceParams::new(0.0, 0.0)
                .unwrap()
                .margin(5.0)
                .unwrap(),
            cart_in_bounds: ToleranceParams::new(-0.25, 0.25).unwrap(),
            angle_in_bounds: ToleranceParams::new(0.995, 1.0).unwrap(),
        }),
        substeps: CONTROL_SUBSTEPS,
    })
}

/// `ModelSpec` for a cart with `k` serially hinged poles; `k = 1` is
/// exactly the cart-pole model file.
pub(crate) fn cart_k_pole_spec(k: usize) -> Result<ModelSpec, SuiteError> {
    if !(1..=8).contains(&k) {
        return Err(SuiteError::BadParameter(format!(
            "cart-k-pole supports 1 <= k <= 8, got {k}"
        )));
    }
    let mut spec = parse_model(CARTPOLE_XML)?;
    if k == 1 {
        return Ok(spec);
    }
    spec.name = format!("cart_{k}_pole");
    let cart = &mut spec.worldbody.children[0];
    let template = cart.children[0].clone();
    // Attach pole_i at the tip of pole_{i-1} (the pole geom spans one
    // metre from the hinge).
    let mut chain: Vec<BodySpec> = Vec::new();
    for i in 2..=k {
        let mut pole = template.clone();
        pole.name = format!("pole_{i}");
        pole.pos = nalgebra::Vector3::new(0.0, 0.0, 1.0);
        pole.joints[0].name = format!("hinge_{i}");
        pole.geoms[0].name = format!("pole_{i}");
        chain.push(pole);
    }
    let mut tail = chain.pop().expect("k >= 2");
    while let Some(mut pole) = chain.pop() {
        pole.children.push(tail);
        tail = pole;
    }
    cart.children[0].children.push(tail);
    Ok(spec)
}

/// Compiled cart with `k` poles (`1 <= k <= 8`).
pub fn generate_cart_k_pole(k: usize) -> Result<CompiledModel, SuiteError> {
    Ok(compile(&cart_k_pole_spec(k)?)?)
}

struct CartPole {
    pole_bodies: Vec<usize>,
    swingup: bool,
    sparse: bool,
    centered: ToleranceParams,
    small_control: ToleranceParams,
    small_velocity: ToleranceParams,
    cart_in_bounds: ToleranceParams,
    angle_in_bounds: ToleranceParams,
}

impl CartPole {
    fn pole_angles(&self, physics: &Physics) -> Vec<f64> {
        self.pole_bodies
            .iter()
            .map(|&b| physics.body_rot(b))
            .collect()
    }
}

impl Task for CartPole {
    fn init_episode(&mut self, physics: &mut Physics, rng: &mut ChaCha8Rng) {
        let nq = physics.model().nq();
        let mut q = vec![0.0; nq];
        let mut v = vec![0.0; nq];
        q[0] = uniform(rng, -0.1, 0.1);
        if self.swingup {
            q[1] = std::f64::consts::PI + uniform(rng, -0.1, 0.1);
            for qi in q.iter_mut().skip(2) {
                *qi = uniform(rng, -0.1, 0.1);
            }
        } else {
            q[1] = uniform(rng, -0.034, 0.034);
        }
        for vi in v.iter_mut() {
            *vi = uniform(rng, -0.01, 0.01);
        }
        physics
            .set_state(&q, &v, &[0.0])
            .expect("cartpole state shape");
    }

    fn reward(&self, physics: &Physics) -> f64 {
        let cart_x = physics.q()[0];
        let angles = self.pole_angles(physics);
        if self.sparse {
            let cart_ok = tolerance(cart_x, &self.cart_in_bounds);
            let angles_ok: f64 = angles
                .iter()
                .map(|a| tolerance(a.cos(), &self.angle_in_bounds))
                .product();
            return cart_ok * angles_ok;
        }
        let upright = angles.iter().map(|a| (a.cos() + 1.0) / 2.0).sum::<f64>()
            / angles.len() as f64;
        let centered = (1.0 + tolerance(cart_x, &self.centered)) / 2.0;
        let control = physics.ctrl();
        let small_control = control
            .iter()
            .map(|u| (4.0 + tolerance(*u, &self.small_control)) / 5.0)
            .sum::<f64>()
            / control.len() as f64;
        let small_velocity = physics.v()[1..]
            .iter()
            .map(|w| tolerance(*w, &self.small_velocity))
            .fold(f64::INFINITY, f64::min);
        let small_velocity = (1.0 + small_velocity) / 2.0;
        upright * small_control * small_velocity * centered
    }

    fn observation(&self, physics: &Physics) -> Observation {
        let angles = self.pole_angles(physics);
        let mut position = Vec::with_capacity(1 + 2 * angles.len());
        position.push(physics.q()[0]);
        position.extend(angles.iter().map(|a| a.cos()));
        position.extend(angles.iter().map(|a| a.sin()));
        let mut obs = Observation::new();
        obs.insert("position".into(), ObsArray::F64(position));
        obs.insert("velocity".into(), ObsArray::F64(physics.v().to_vec()));
        obs
    }

    fn observation_spec(&self) -> IndexMap<String, ArraySpec> {
        let k = self.pole_bodies.len();
        IndexMap::from([obs_entry("position", 1 + 2 * k), obs_entry("velocity", 1 + k)])
    }
}
