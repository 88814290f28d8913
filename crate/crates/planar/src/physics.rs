//! Generalized-coordinate forward dynamics for planar articulated trees.
//!
//! State lives in joint space: positions `q`, velocities `v` and controls
//! `u`. Bodies move in the x-z plane (rotations about y), while positions
//! remain 3-D so that static scenes with y offsets render correctly.
//!
//! Each simulation step runs in two phases: the control-dependent phase
//! integrates `(q, v)` forward, then the state-dependent phase recomputes
//! the derived quantities (body frames, world geom positions, com
//! velocities, energy), so anything read after a step reflects the new
//! state while force-dependent values refer to the previous transition.
//!
//! The mass matrix comes from composite-rigid-body accumulation over the
//! tree with all quantities expressed at the world origin; bias forces
//! (gravity, Coriolis/centrifugal, joint damping and stiffness) come from
//! a zero-acceleration pass projected through point Jacobians.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::mjcf::{CompiledModel, Integrator, JointKind, LookupError};

/// Fluid-drag coefficients per unit link length: quadratic normal and
/// linear tangential components.
pub const DRAG_NORMAL: f64 = 1.0;
pub const DRAG_TANGENT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("{what}: expected length {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mass matrix is not positive definite (check masses and armature)")]
    SingularMass,
    #[error("simulation diverged at t = {time:.4} s: non-finite state")]
    Diverged { time: f64 },
    #[error("quaternion norm deviates from 1 by {deviation:.3e} (limit 1e-6)")]
    BadQuaternion { deviation: f64 },
    #[error("geom `{0}` is not attached to the world body")]
    NotWorldGeom(String),
    #[error("control transform must be {nu} x {nu}")]
    BadCtrlTransform { nu: usize },
    #[error("state contains non-finite values")]
    NonFiniteState,
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

/// y-axis cross product: `ŷ × r`.
#[inline]
fn ycross(r: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(r.z, 0.0, -r.x)
}

/// Rotation about y by `angle` applied to `v`.
#[inline]
fn rot_y(cos: f64, sin: f64, v: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(cos * v.x + sin * v.z, v.y, -sin * v.x + cos * v.z)
}

/// Converts a unit quaternion `(w, x, y, z)` to a rotation matrix.
///
/// Quaternions within 1e-9 of unit norm pass silently; deviations below
/// 1e-6 are normalized with a warning; anything larger is an error.
pub fn quat_to_mat(quat: [f64; 4]) -> Result<Matrix3<f64>, PhysicsError> {
    let norm = quat.iter().map(|x| x * x).sum::<f64>().sqrt();
    let deviation = (norm - 1.0).abs();
    if deviation > 1e-6 {
        return Err(PhysicsError::BadQuaternion { deviation });
    }
    if deviation > 1e-9 {
        log::warn!("normalizing quaternion with norm deviation {deviation:.3e}");
    }
    let [w, x, y, z] = quat.map(|c| c / norm);
    Ok(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// World-frame kinematic state of every body and joint, plus the
/// zero-acceleration (bias) pass.
#[derive(Debug, Clone, Default)]
struct Kin {
    body_pos: Vec<Vector3<f64>>,
    body_rot: Vec<f64>,
    body_cos: Vec<f64>,
    body_sin: Vec<f64>,
    /// Velocity of the body-frame origin point.
    body_vel: Vec<Vector3<f64>>,
    body_omega: Vec<f64>,
    /// Acceleration of the body-frame origin point with all `q̈ = 0`.
    body_acc0: Vec<Vector3<f64>>,
    /// Hinge anchors / slide directions in world coordinates.
    joint_anchor: Vec<Vector3<f64>>,
    joint_axis: Vec<Vector3<f64>>,
    com_pos: Vec<Vector3<f64>>,
    com_vel: Vec<Vector3<f64>>,
    com_acc0: Vec<Vector3<f64>>,
}

impl Kin {
    fn resize(&mut self, nbody: usize, njoint: usize) {
        self.body_pos.resize(nbody, Vector3::zeros());
        self.body_rot.resize(nbody, 0.0);
        self.body_cos.resize(nbody, 1.0);
        self.body_sin.resize(nbody, 0.0);
        self.body_vel.resize(nbody, Vector3::zeros());
        self.body_omega.resize(nbody, 0.0);
        self.body_acc0.resize(nbody, Vector3::zeros());
        self.joint_anchor.resize(njoint, Vector3::zeros());
        self.joint_axis.resize(njoint, Vector3::zeros());
        self.com_pos.resize(nbody, Vector3::zeros());
        self.com_vel.resize(nbody, Vector3::zeros());
        self.com_acc0.resize(nbody, Vector3::zeros());
    }
}

fn compute_kin(model: &CompiledModel, q: &[f64], v: &[f64], kin: &mut Kin) {
    kin.resize(model.bodies.len(), model.joints.len());
    kin.body_pos[0] = Vector3::zeros();
    kin.body_rot[0] = 0.0;
    kin.body_cos[0] = 1.0;
    kin.body_sin[0] = 0.0;
    kin.body_vel[0] = Vector3::zeros();
    kin.body_omega[0] = 0.0;
    kin.body_acc0[0] = Vector3::zeros();
    kin.com_pos[0] = Vector3::zeros();
    kin.com_vel[0] = Vector3::zeros();
    kin.com_acc0[0] = Vector3::zeros();

    for (b, body) in model.bodies.iter().enumerate().skip(1) {
        let p = body.parent;
        let offset = rot_y(kin.body_cos[p], kin.body_sin[p], body.pos);
        let mut pos = kin.body_pos[p] + offset;
        let mut rot = kin.body_rot[p] + body.rot;
        let mut vel = kin.body_vel[p] + kin.body_omega[p] * ycross(offset);
        let mut omega = kin.body_omega[p];
        let mut acc = kin.body_acc0[p] - kin.body_omega[p] * kin.body_omega[p] * offset;

        for &j in &body.joints {
            let joint = &model.joints[j];
            match joint.kind {
                JointKind::Hinge => {
                    kin.joint_anchor[j] = pos;
                    kin.joint_axis[j] = Vector3::new(0.0, joint.hinge_sign, 0.0);
                    rot += joint.hinge_sign * q[j];
                    omega += joint.hinge_sign * v[j];
                }
                JointKind::Slide => {
                    let (s, c) = rot.sin_cos();
                    let dir = rot_y(c, s, joint.axis);
                    kin.joint_anchor[j] = pos;
                    kin.joint_axis[j] = dir;
                    pos += q[j] * dir;
                    vel += v[j] * dir + q[j] * omega * ycross(dir);
                    acc += 2.0 * v[j] * omega * ycross(dir) - q[j] * omega * omega * dir;
                }
            }
        }

        let (sin, cos) = rot.sin_cos();
        kin.body_pos[b] = pos;
        kin.body_rot[b] = rot;
        kin.body_cos[b] = cos;
        kin.body_sin[b] = sin;
        kin.body_vel[b] = vel;
        kin.body_omega[b] = omega;
        kin.body_acc0[b] = acc;

        let com_offset = rot_y(cos, sin, body.com);
        kin.com_pos[b] = pos + com_offset;
        kin.com_vel[b] = vel + omega * ycross(com_offset);
        kin.com_acc0[b] = acc - omega * omega * com_offset;
    }
}

/// Jacobian column: velocity of the world point `p` (attached to a body
/// supported by joint `j`) per unit joint velocity.
#[inline]
fn point_jac(model: &CompiledModel, kin: &Kin, j: usize, p: Vector3<f64>) -> Vector3<f64> {
    match model.joints[j].kind {
        JointKind::Hinge => model.joints[j].hinge_sign * ycross(p - kin.joint_anchor[j]),
        JointKind::Slide => kin.joint_axis[j],
    }
}

fn mass_matrix_from(
    model: &CompiledModel,
    kin: &Kin,
    support: &[Vec<usize>],
) -> DMatrix<f64> {
    let nv = model.nv();
    let nbody = model.bodies.len();
    // Planar spatial inertia about the world origin in the (omega, vx, vz)
    // basis; composite accumulation runs leaf-to-root.
    let mut composite = vec![Matrix3::<f64>::zeros(); nbody];
    for (b, body) in model.bodies.iter().enumerate().skip(1) {
        let m = body.mass;
        let c = kin.com_pos[b];
        let i = body.inertia + m * (c.x * c.x + c.z * c.z);
        composite[b] = Matrix3::new(
            i,
            m * c.z,
            -m * c.x,
            m * c.z,
            m,
            0.0,
            -m * c.x,
            0.0,
            m,
        );
    }
    for b in (1..nbody).rev() {
        let parent = model.bodies[b].parent;
        if parent != 0 {
            let add = composite[b];
            composite[parent] += add;
        }
    }

    let spatial_axis = |j: usize| -> Vector3<f64> {
        let joint = &model.joints[j];
        match joint.kind {
            JointKind::Hinge => {
                let a = kin.joint_anchor[j];
                joint.hinge_sign * Vector3::new(1.0, -a.z, a.x)
            }
            JointKind::Slide => {
                let d = kin.joint_axis[j];
                Vector3::new(0.0, d.x, d.z)
            }
        }
    };

    let mut m = DMatrix::zeros(nv, nv);
    for i in 0..nv {
        let body = model.joints[i].body;
        let s_i = spatial_axis(i);
        let f = composite[body] * s_i;
        m[(i, i)] = s_i.dot(&f) + model.joints[i].armature;
        for &j in &support[body] {
            if j < i {
                let val = f.dot(&spatial_axis(j));
                m[(i, j)] = val;
                m[(j, i)] = val;
            }
        }
    }
    m
}

fn bias_from(
    model: &CompiledModel,
    kin: &Kin,
    q: &[f64],
    v: &[f64],
    support: &[Vec<usize>],
) -> DVector<f64> {
    let mut c = DVector::zeros(model.nv());
    for (j, joint) in model.joints.iter().enumerate() {
        c[j] += joint.damping * v[j] + joint.stiffness * (q[j] - joint.springref);
    }
    let g = model.options.gravity;
    for (b, body) in model.bodies.iter().enumerate().skip(1) {
        if body.mass == 0.0 {
            continue;
        }
        let force = body.mass * (kin.com_acc0[b] - g);
        for &j in &support[b] {
            c[j] += force.dot(&point_jac(model, kin, j, kin.com_pos[b]));
        }
    }
    c
}

fn drag_from(
    model: &CompiledModel,
    kin: &Kin,
    support: &[Vec<usize>],
) -> DVector<f64> {
    let mut out = DVector::zeros(model.nv());
    for geom in &model.geoms {
        if !geom.drag {
            continue;
        }
        let b = geom.body;
        let cos = kin.body_cos[b];
        let sin = kin.body_sin[b];
        let center = kin.body_pos[b] + rot_y(cos, sin, geom.pos);
        let tangent = rot_y(cos, sin, geom.axis);
        let normal = ycross(tangent);
        let vel = kin.body_vel[b] + kin.body_omega[b] * ycross(center - kin.body_pos[b]);
        let v_t = vel.dot(&tangent);
        let v_n = vel.dot(&normal);
        let len = 2.0 * geom.half_len;
        let force = -DRAG_TANGENT * len * v_t * tangent
            - DRAG_NORMAL * len * v_n * v_n.abs() * normal;
        for &j in &support[b] {
            out[j] += force.dot(&point_jac(model, kin, j, center));
        }
    }
    out
}

fn applied_torque(model: &CompiledModel, u_eff: &DVector<f64>) -> DVector<f64> {
    let mut tau = DVector::zeros(model.nv());
    for (a, act) in model.actuators.iter().enumerate() {
        tau[act.joint] += act.gear * u_eff[a];
    }
    tau
}

fn accel_from(
    model: &CompiledModel,
    kin: &Kin,
    q: &[f64],
    v: &[f64],
    u_eff: &DVector<f64>,
    support: &[Vec<usize>],
) -> Result<DVector<f64>, PhysicsError> {
    let m = mass_matrix_from(model, kin, support);
    let rhs = applied_torque(model, u_eff) + drag_from(model, kin, support)
        - bias_from(model, kin, q, v, support);
    m.cholesky()
        .map(|chol| chol.solve(&rhs))
        .ok_or(PhysicsError::SingularMass)
}

/// Owned simulation state over a shared immutable model.
pub struct Physics {
    model: Arc<CompiledModel>,
    q: DVector<f64>,
    v: DVector<f64>,
    u: DVector<f64>,
    t: f64,
    kin: Kin,
    scratch: Kin,
    /// World positions of geoms and sites, with static overrides applied.
    geom_xpos: Vec<Vector3<f64>>,
    site_xpos: Vec<Vector3<f64>>,
    energy: f64,
    synced: bool,
    /// Per-episode overrides for world-attached marker geoms.
    static_geom_pos: Vec<Option<Vector3<f64>>>,
    /// Optional mixing matrix from controls to actuator activations.
    ctrl_transform: Option<DMatrix<f64>>,
    /// Supporting joints per body (ancestors included), precomputed.
    support: Vec<Vec<usize>>,
}

impl Physics {
    pub fn new(model: Arc<CompiledModel>) -> Result<Self, PhysicsError> {
        let nq = model.nq();
        let nu = model.nu();
        let support: Vec<Vec<usize>> = (0..model.bodies.len())
            .map(|b| model.supporting_joints(b))
            .collect();
        let mut physics = Self {
            q: DVector::zeros(nq),
            v: DVector::zeros(nq),
            u: DVector::zeros(nu),
            t: 0.0,
            kin: Kin::default(),
            scratch: Kin::default(),
            geom_xpos: vec![Vector3::zeros(); model.geoms.len()],
            site_xpos: vec![Vector3::zeros(); model.sites.len()],
            energy: 0.0,
            synced: false,
            static_geom_pos: vec![None; model.geoms.len()],
            ctrl_transform: None,
            support,
            model,
        };
        physics.forward();
        if nq > 0 {
            // Reject models whose reference pose already has a singular
            // mass matrix.
            mass_matrix_from(&physics.model, &physics.kin, &physics.support)
                .cholesky()
                .ok_or(PhysicsError::SingularMass)?;
        }
        Ok(physics)
    }

    pub fn from_model(model: CompiledModel) -> Result<Self, PhysicsError> {
        Self::new(Arc::new(model))
    }

    pub fn model(&self) -> &CompiledModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<CompiledModel> {
        self.model.clone()
    }

    pub fn q(&self) -> &[f64] {
        self.q.as_slice()
    }

    pub fn v(&self) -> &[f64] {
        self.v.as_slice()
    }

    pub fn ctrl(&self) -> &[f64] {
        self.u.as_slice()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Recomputes every derived quantity from `(q, v)`.
    pub fn forward(&mut self) {
        let model = self.model.clone();
        compute_kin(&model, self.q.as_slice(), self.v.as_slice(), &mut self.kin);
        for (g, geom) in model.geoms.iter().enumerate() {
            self.geom_xpos[g] = match self.static_geom_pos[g] {
                Some(p) => p,
                None => {
                    let b = geom.body;
                    self.kin.body_pos[b]
                        + rot_y(self.kin.body_cos[b], self.kin.body_sin[b], geom.pos)
                }
            };
        }
        for (s, site) in model.sites.iter().enumerate() {
            let b = site.body;
            self.site_xpos[s] =
                self.kin.body_pos[b] + rot_y(self.kin.body_cos[b], self.kin.body_sin[b], site.pos);
        }
        self.energy = self.compute_energy();
        self.synced = true;
    }

    fn compute_energy(&self) -> f64 {
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        let g = self.model.options.gravity;
        for (b, body) in self.model.bodies.iter().enumerate().skip(1) {
            let vel = self.kin.com_vel[b];
            let omega = self.kin.body_omega[b];
            kinetic += 0.5 * body.mass * (vel.x * vel.x + vel.z * vel.z)
                + 0.5 * body.inertia * omega * omega;
            potential -= body.mass * g.dot(&self.kin.com_pos[b]);
        }
        for (j, joint) in self.model.joints.iter().enumerate() {
            let dq = self.q[j] - joint.springref;
            potential += 0.5 * joint.stiffness * dq * dq;
        }
        kinetic + potential
    }

    /// Replaces the full state and resynchronizes derived quantities.
    pub fn set_state(&mut self, q: &[f64], v: &[f64], u: &[f64]) -> Result<(), PhysicsError> {
        check_len("qpos", self.model.nq(), q.len())?;
        check_len("qvel", self.model.nv(), v.len())?;
        check_len("ctrl", self.model.nu(), u.len())?;
        if !q.iter().chain(v).chain(u).all(|x| x.is_finite()) {
            return Err(PhysicsError::NonFiniteState);
        }
        self.q.copy_from_slice(q);
        self.v.copy_from_slice(v);
        self.u.copy_from_slice(u);
        self.forward();
        Ok(())
    }

    /// Scoped mutable access to the raw state; derived quantities are
    /// recomputed when the closure returns, so observers can never see a
    /// stale view.
    pub fn modify_state<R>(
        &mut self,
        f: impl FnOnce(&mut StateMut<'_>) -> R,
    ) -> Result<R, PhysicsError> {
        let model = self.model.clone();
        let mut view = StateMut {
            model: &model,
            q: &mut self.q,
            v: &mut self.v,
            u: &mut self.u,
        };
        let out = f(&mut view);
        if !self.q.iter().chain(self.v.iter()).chain(self.u.iter()).all(|x| x.is_finite()) {
            return Err(PhysicsError::NonFiniteState);
        }
        self.forward();
        Ok(out)
    }

    /// Resets to the reference pose (`q = v = u = 0`, `t = 0`).
    pub fn reset(&mut self) {
        self.q.fill(0.0);
        self.v.fill(0.0);
        self.u.fill(0.0);
        self.t = 0.0;
        self.static_geom_pos.fill(None);
        self.ctrl_transform = None;
        self.forward();
    }

    /// Installs a mixing matrix applied to controls before the actuator
    /// gears (`nu x nu`).
    pub fn set_ctrl_transform(
        &mut self,
        transform: Option<DMatrix<f64>>,
    ) -> Result<(), PhysicsError> {
        let nu = self.model.nu();
        if let Some(t) = &transform {
            if t.nrows() != nu || t.ncols() != nu {
                return Err(PhysicsError::BadCtrlTransform { nu });
            }
        }
        self.ctrl_transform = transform;
        Ok(())
    }

    /// Moves a marker geom attached to the world body (targets and the
    /// like). The override persists until the next `reset`.
    pub fn set_static_geom_pos(
        &mut self,
        geom: usize,
        pos: Vector3<f64>,
    ) -> Result<(), PhysicsError> {
        let g = self
            .model
            .geoms
            .get(geom)
            .ok_or(LookupError::BadIndex {
                category: crate::mjcf::Category::Geom,
                index: geom,
                count: self.model.geoms.len(),
            })?;
        if g.body != 0 {
            return Err(PhysicsError::NotWorldGeom(g.name.clone()));
        }
        self.static_geom_pos[geom] = Some(pos);
        self.forward();
        Ok(())
    }

    fn effective_controls(&self, ctrl: &DVector<f64>) -> DVector<f64> {
        match &self.ctrl_transform {
            Some(t) => t * ctrl,
            None => ctrl.clone(),
        }
    }

    /// Advances one physics substep of the model timestep with the given
    /// controls, then resynchronizes derived quantities.
    pub fn step(&mut self, ctrl: &[f64]) -> Result<(), PhysicsError> {
        check_len("ctrl", self.model.nu(), ctrl.len())?;
        self.u.copy_from_slice(ctrl);
        let model = self.model.clone();
        let h = model.options.timestep;
        let u_eff = self.effective_controls(&self.u);

        match model.options.integrator {
            Integrator::SemiImplicitEuler => {
                compute_kin(&model, self.q.as_slice(), self.v.as_slice(), &mut self.scratch);
                let a = accel_from(
                    &model,
                    &self.scratch,
                    self.q.as_slice(),
                    self.v.as_slice(),
                    &u_eff,
                    &self.support,
                )?;
                self.v.axpy(h, &a, 1.0);
                self.q.axpy(h, &self.v, 1.0);
            }
            Integrator::Rk4 => {
                let eval = |q: &DVector<f64>, v: &DVector<f64>, scratch: &mut Kin| {
                    compute_kin(&model, q.as_slice(), v.as_slice(), scratch);
                    accel_from(&model, scratch, q.as_slice(), v.as_slice(), &u_eff, &self.support)
                };
                let q0 = self.q.clone();
                let v0 = self.v.clone();
                let k1q = v0.clone();
                let k1v = eval(&q0, &v0, &mut self.scratch)?;
                let q2 = &q0 + 0.5 * h * &k1q;
                let v2 = &v0 + 0.5 * h * &k1v;
                let k2q = v2.clone();
                let k2v = eval(&q2, &v2, &mut self.scratch)?;
                let q3 = &q0 + 0.5 * h * &k2q;
                let v3 = &v0 + 0.5 * h * &k2v;
                let k3q = v3.clone();
                let k3v = eval(&q3, &v3, &mut self.scratch)?;
                let q4 = &q0 + h * &k3q;
                let v4 = &v0 + h * &k3v;
                let k4q = v4.clone();
                let k4v = eval(&q4, &v4, &mut self.scratch)?;
                self.q = q0 + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
                self.v = v0 + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            }
        }
        self.t += h;

        if !self.q.iter().chain(self.v.iter()).all(|x| x.is_finite()) {
            return Err(PhysicsError::Diverged { time: self.t });
        }
        self.forward();
        Ok(())
    }

    /// Runs `n` substeps under constant controls: one logical control step
    /// of duration `n * timestep`.
    pub fn step_n(&mut self, ctrl: &[f64], n: usize) -> Result<(), PhysicsError> {
        for _ in 0..n {
            self.step(ctrl)?;
        }
        Ok(())
    }

    /// Mass matrix at the current positions.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        debug_assert!(self.synced);
        mass_matrix_from(&self.model, &self.kin, &self.support)
    }

    /// Bias forces (Coriolis + centrifugal + gravity + damping +
    /// stiffness) at the current state.
    pub fn bias_forces(&self) -> DVector<f64> {
        debug_assert!(self.synced);
        bias_from(
            &self.model,
            &self.kin,
            self.q.as_slice(),
            self.v.as_slice(),
            &self.support,
        )
    }

    /// Generalized fluid-drag forces at the current state.
    pub fn fluid_drag(&self) -> DVector<f64> {
        debug_assert!(self.synced);
        drag_from(&self.model, &self.kin, &self.support)
    }

    /// Joint accelerations solving `M a = B u - c + drag` at the current
    /// state with the given controls.
    pub fn accel(&self, ctrl: &[f64]) -> Result<DVector<f64>, PhysicsError> {
        check_len("ctrl", self.model.nu(), ctrl.len())?;
        let u = DVector::from_column_slice(ctrl);
        let u_eff = self.effective_controls(&u);
        accel_from(
            &self.model,
            &self.kin,
            self.q.as_slice(),
            self.v.as_slice(),
            &u_eff,
            &self.support,
        )
    }

    pub fn body_pos(&self, body: usize) -> Vector3<f64> {
        self.kin.body_pos[body]
    }

    pub fn body_rot(&self, body: usize) -> f64 {
        self.kin.body_rot[body]
    }

    pub fn body_omega(&self, body: usize) -> f64 {
        self.kin.body_omega[body]
    }

    /// Velocity of the body-frame origin point.
    pub fn body_vel(&self, body: usize) -> Vector3<f64> {
        self.kin.body_vel[body]
    }

    pub fn com_pos(&self, body: usize) -> Vector3<f64> {
        self.kin.com_pos[body]
    }

    pub fn com_vel(&self, body: usize) -> Vector3<f64> {
        self.kin.com_vel[body]
    }

    pub fn geom_xpos(&self, geom: usize) -> Vector3<f64> {
        self.geom_xpos[geom]
    }

    /// World symmetry axis of a geom (capsule orientation).
    pub fn geom_world_axis(&self, geom: usize) -> Vector3<f64> {
        let g = &self.model.geoms[geom];
        rot_y(self.kin.body_cos[g.body], self.kin.body_sin[g.body], g.axis)
    }

    pub fn site_xpos(&self, site: usize) -> Vector3<f64> {
        self.site_xpos[site]
    }

    /// Total mechanical energy (kinetic + gravitational + spring).
    pub fn energy(&self) -> f64 {
        debug_assert!(self.synced);
        self.energy
    }

    /// Name-indexed read access to state and derived quantities.
    pub fn named(&self) -> Named<'_> {
        Named { physics: self }
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), PhysicsError> {
    if expected == got {
        Ok(())
    } else {
        Err(PhysicsError::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Read-only name-indexed views, mirroring index access exactly.
pub struct Named<'a> {
    physics: &'a Physics,
}

impl<'a> Named<'a> {
    fn joint_id(&self, name: &str) -> Result<usize, LookupError> {
        self.physics
            .model
            .name_to_id(crate::mjcf::Category::Joint, name)
    }

    pub fn qpos(&self, joint: &str) -> Result<f64, LookupError> {
        Ok(self.physics.q[self.joint_id(joint)?])
    }

    pub fn qvel(&self, joint: &str) -> Result<f64, LookupError> {
        Ok(self.physics.v[self.joint_id(joint)?])
    }

    pub fn geom_xpos(&self, geom: &str) -> Result<Vector3<f64>, LookupError> {
        let id = self
            .physics
            .model
            .name_to_id(crate::mjcf::Category::Geom, geom)?;
        Ok(self.physics.geom_xpos[id])
    }

    /// Selected components of a geom's world position by axis label.
    pub fn geom_xpos_axes(&self, geom: &str, axes: &[&str]) -> Result<Vec<f64>, LookupError> {
        let p = self.geom_xpos(geom)?;
        axes.iter()
            .map(|axis| match *axis {
                "x" => Ok(p.x),
                "y" => Ok(p.y),
                "z" => Ok(p.z),
                other => Err(LookupError::BadAxis(other.to_string())),
            })
            .collect()
    }

    pub fn site_xpos(&self, site: &str) -> Result<Vector3<f64>, LookupError> {
        let id = self
            .physics
            .model
            .name_to_id(crate::mjcf::Category::Site, site)?;
        Ok(self.physics.site_xpos[id])
    }
}

/// Mutable state view handed to [`Physics::modify_state`] closures.
pub struct StateMut<'a> {
    model: &'a CompiledModel,
    q: &'a mut DVector<f64>,
    v: &'a mut DVector<f64>,
    u: &'a mut DVector<f64>,
}

impl<'a> StateMut<'a> {
    pub fn qpos_mut(&mut self) -> &mut [f64] {
        self.q.as_mut_slice()
    }

    pub fn qvel_mut(&mut self) -> &mut [f64] {
        self.v.as_mut_slice()
    }

    pub fn ctrl_mut(&mut self) -> &mut [f64] {
        self.u.as_mut_slice()
    }

    pub fn set_qpos(&mut self, joint: &str, value: f64) -> Result<(), LookupError> {
        let id = self.model.name_to_id(crate::mjcf::Category::Joint, joint)?;
        self.q[id] = value;
        Ok(())
    }

    pub fn set_qvel(&mut self, joint: &str, value: f64) -> Result<(), LookupError> {
        let id = self.model.name_to_id(crate::mjcf::Category::Joint, joint)?;
        self.v[id] = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mjcf::{
        compile, parse_model, BodySpec, GeomSpec, InertialSpec, JointSpec, ModelSpec,
    };
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const BOX_AND_SPHERE: &str = r#"
<mujoco>
  <worldbody>
    <light name="top" pos="0 0 1.5"/>
    <geom name="floor" type="plane" size="1 1 .1"/>
    <body name="box" pos="0 0 .3">
      <joint name="up_down" type="slide" axis="0 0 1"/>
      <geom name="box" type="box" size=".2 .2 .2" rgba="1 0 0 1"/>
      <geom name="sphere" pos=".2 .2 .2" size=".1" rgba="0 1 0 1"/>
    </body>
  </worldbody>
</mujoco>
"#;

    fn physics_from(doc: &str) -> Physics {
        Physics::from_model(compile(&parse_model(doc).unwrap()).unwrap()).unwrap()
    }

    /// Point-mass pendulum: unit mass at unit distance below the pivot,
    /// zero rotational inertia about its own com, so M = [1].
    fn point_pendulum() -> ModelSpec {
        let mut spec = ModelSpec::empty("point_pendulum");
        let mut pole = BodySpec::named("pole");
        pole.joints.push(JointSpec::hinge("pin"));
        pole.inertial = Some(InertialSpec {
            pos: nalgebra::Vector3::new(0.0, 0.0, -1.0),
            mass: 1.0,
            diaginertia: nalgebra::Vector3::zeros(),
        });
        pole.geoms.push(GeomSpec::sphere("bob", 0.05));
        spec.worldbody.children.push(pole);
        spec
    }

    /// Two point masses on unit links (classic double pendulum).
    fn double_point_pendulum() -> ModelSpec {
        let mut spec = ModelSpec::empty("double_pendulum");
        let mut upper = BodySpec::named("upper");
        upper.joints.push(JointSpec::hinge("shoulder"));
        upper.inertial = Some(InertialSpec {
            pos: nalgebra::Vector3::new(0.0, 0.0, -1.0),
            mass: 1.0,
            diaginertia: nalgebra::Vector3::zeros(),
        });
        let mut lower = BodySpec::named("lower");
        lower.pos = nalgebra::Vector3::new(0.0, 0.0, -1.0);
        lower.joints.push(JointSpec::hinge("elbow"));
        lower.inertial = Some(InertialSpec {
            pos: nalgebra::Vector3::new(0.0, 0.0, -1.0),
            mass: 1.0,
            diaginertia: nalgebra::Vector3::zeros(),
        });
        upper.children.push(lower);
        spec.worldbody.children.push(upper);
        spec
    }

    /// Mixed tree: a cart with two hinged poles and a vertical slide,
    /// exercising multi-joint bodies and branching.
    fn branched_model() -> ModelSpec {
        let mut spec = ModelSpec::empty("branched");
        let mut cart = BodySpec::named("cart");
        cart.joints
            .push(JointSpec::slide("cart_x", nalgebra::Vector3::new(1.0, 0.0, 0.0)));
        cart.joints
            .push(JointSpec::slide("cart_z", nalgebra::Vector3::new(0.0, 0.0, 1.0)));
        let mut g = GeomSpec::sphere("cart_ball", 0.1);
        g.mass = Some(2.0);
        cart.geoms.push(g);
        for (i, offset) in [(1, 0.1), (2, -0.1)] {
            let mut pole = BodySpec::named(&format!("pole{i}"));
            pole.pos = nalgebra::Vector3::new(offset, 0.0, 0.0);
            pole.joints.push(JointSpec::hinge(&format!("hinge{i}")));
            pole.inertial = Some(InertialSpec {
                pos: nalgebra::Vector3::new(0.0, 0.0, 0.6),
                mass: 0.5,
                diaginertia: nalgebra::Vector3::new(0.0, 0.02, 0.0),
            });
            cart.children.push(pole);
        }
        spec.worldbody.children.push(cart);
        spec
    }

    #[test]
    fn quat_paper_example() {
        let m = quat_to_mat([0.5, 0.5, 0.5, 0.5]).unwrap();
        let expected = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        assert!((m - expected).abs().max() < 1e-15, "{m}");
    }

    #[test]
    fn quat_identity() {
        let m = quat_to_mat([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((m - Matrix3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn quat_orthonormal_for_random_units() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-3 {
                continue;
            }
            let q = raw.map(|x| x / norm);
            let m = quat_to_mat(q).unwrap();
            // Independent check: explicit row dot products and determinant.
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| m[(i, k)] * m[(j, k)]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-12);
                }
            }
            let det = m.determinant();
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quat_far_from_unit_is_error() {
        assert!(matches!(
            quat_to_mat([2.0, 0.0, 0.0, 0.0]),
            Err(PhysicsError::BadQuaternion { .. })
        ));
        // Small deviations are normalized.
        assert!(quat_to_mat([1.0 + 1e-8, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn fk_reference_pose_matches_offsets() {
        let physics = physics_from(BOX_AND_SPHERE);
        assert_eq!(physics.geom_xpos(0), Vector3::new(0.0, 0.0, 0.0));
        assert_eq!(physics.geom_xpos(1), Vector3::new(0.0, 0.0, 0.3));
        assert_eq!(physics.geom_xpos(2), Vector3::new(0.2, 0.2, 0.5));
    }

    #[test]
    fn fk_single_hinge_trigonometry() {
        // Unit link along -z; rotating by q moves the tip through a circle.
        let mut physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        let q = std::f64::consts::FRAC_PI_2;
        physics.set_state(&[q], &[0.0], &[]).unwrap();
        let com = physics.com_pos(1);
        // R_y(pi/2) * (0,0,-1) = (-1, 0, 0)
        assert!((com - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12, "{com}");
        let q = 0.3;
        physics.set_state(&[q], &[0.0], &[]).unwrap();
        let com = physics.com_pos(1);
        assert!((com - Vector3::new(-q.sin(), 0.0, -q.cos())).norm() < 1e-12);
    }

    #[test]
    fn named_write_moves_box() {
        let mut physics = physics_from(BOX_AND_SPHERE);
        physics
            .modify_state(|st| st.set_qpos("up_down", 0.1))
            .unwrap()
            .unwrap();
        let xz = physics.named().geom_xpos_axes("box", &["x", "z"]).unwrap();
        assert!((xz[0] - 0.0).abs() < 1e-15);
        assert!((xz[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn named_read_matches_indexed_read() {
        let mut physics = physics_from(BOX_AND_SPHERE);
        physics.set_state(&[0.37], &[-1.2], &[]).unwrap();
        assert_eq!(physics.named().qpos("up_down").unwrap(), physics.q()[0]);
        assert_eq!(physics.named().qvel("up_down").unwrap(), physics.v()[0]);
        let by_name = physics.named().geom_xpos("sphere").unwrap();
        assert_eq!(by_name, physics.geom_xpos(2));
        assert!(physics.named().qpos("nope").is_err());
        assert!(physics.named().geom_xpos_axes("box", &["w"]).is_err());
    }

    #[test]
    fn point_pendulum_unit_mass_matrix() {
        let physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        let m = physics.mass_matrix();
        assert_eq!(m.nrows(), 1);
        assert!((m[(0, 0)] - 1.0).abs() < 1e-12, "M = {}", m[(0, 0)]);
    }

    #[test]
    fn armature_adds_to_diagonal() {
        let mut spec = point_pendulum();
        spec.worldbody.children[0].joints[0].armature = 0.25;
        let physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        assert!((physics.mass_matrix()[(0, 0)] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn double_pendulum_mass_matrix_closed_form() {
        // Lagrangian of two point masses on massless unit links:
        //   M11 = m1 l1^2 + m2 (l1^2 + l2^2 + 2 l1 l2 cos t2)
        //   M12 = m2 (l2^2 + l1 l2 cos t2),  M22 = m2 l2^2
        let mut physics =
            Physics::from_model(compile(&double_point_pendulum()).unwrap()).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let t1 = rng.random_range(-3.0..3.0);
            let t2 = rng.random_range(-3.0..3.0);
            physics.set_state(&[t1, t2], &[0.0, 0.0], &[]).unwrap();
            let m = physics.mass_matrix();
            let c2 = f64::cos(t2);
            assert!((m[(0, 0)] - (3.0 + 2.0 * c2)).abs() < 1e-10);
            assert!((m[(0, 1)] - (1.0 + c2)).abs() < 1e-10);
            assert!((m[(1, 0)] - (1.0 + c2)).abs() < 1e-10);
            assert!((m[(1, 1)] - 1.0).abs() < 1e-10);
        }
        // At t2 = 0 this is [[5, 2], [2, 1]].
        physics.set_state(&[0.7, 0.0], &[0.0, 0.0], &[]).unwrap();
        let m = physics.mass_matrix();
        assert!((m[(0, 0)] - 5.0).abs() < 1e-12);
        assert!((m[(0, 1)] - 2.0).abs() < 1e-12);
    }

    /// Independent mass-matrix oracle: M = sum_b m J_com' J_com + I Jang' Jang
    /// with Jacobians from central finite differences of forward kinematics.
    fn fd_mass_matrix(physics: &mut Physics, q: &[f64]) -> DMatrix<f64> {
        let model = physics.model_arc();
        let nv = model.nv();
        let nbody = model.bodies.len();
        let eps = 1e-6;
        let zeros = vec![0.0; nv];
        let mut jl = vec![DMatrix::<f64>::zeros(3, nv); nbody];
        let mut ja = vec![DVector::<f64>::zeros(nv); nbody];
        for k in 0..nv {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[k] += eps;
            qm[k] -= eps;
            physics.set_state(&qp, &zeros, &vec![0.0; model.nu()]).unwrap();
            let com_p: Vec<_> = (0..nbody).map(|b| physics.com_pos(b)).collect();
            let rot_p: Vec<_> = (0..nbody).map(|b| physics.body_rot(b)).collect();
            physics.set_state(&qm, &zeros, &vec![0.0; model.nu()]).unwrap();
            for b in 0..nbody {
                let dcom = (com_p[b] - physics.com_pos(b)) / (2.0 * eps);
                jl[b].set_column(k, &dcom);
                ja[b][k] = (rot_p[b] - physics.body_rot(b)) / (2.0 * eps);
            }
        }
        let mut m = DMatrix::zeros(nv, nv);
        for (b, body) in model.bodies.iter().enumerate().skip(1) {
            m += body.mass * jl[b].transpose() * &jl[b] + body.inertia * &ja[b] * ja[b].transpose();
        }
        for (j, joint) in model.joints.iter().enumerate() {
            m[(j, j)] += joint.armature;
        }
        physics.set_state(q, &zeros, &vec![0.0; model.nu()]).unwrap();
        m
    }

    #[test]
    fn mass_matrix_matches_jacobian_oracle_on_branched_tree() {
        let mut physics = Physics::from_model(compile(&branched_model()).unwrap()).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            physics.set_state(&q, &[0.0; 4], &[]).unwrap();
            let m = physics.mass_matrix();
            let oracle = fd_mass_matrix(&mut physics, &q);
            let err = (&m - &oracle).abs().max();
            assert!(err < 1e-6, "CRB vs FD-Jacobian mismatch: {err}\n{m}{oracle}");
        }
    }

    #[test]
    fn mass_matrix_symmetric_pd_random_states() {
        for spec in [point_pendulum(), double_point_pendulum(), branched_model()] {
            let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
            let nv = physics.model().nv();
            let mut rng = StdRng::seed_from_u64(42);
            for _ in 0..1000 {
                let q: Vec<f64> = (0..nv).map(|_| rng.random_range(-3.0..3.0)).collect();
                physics.set_state(&q, &vec![0.0; nv], &[]).unwrap();
                let m = physics.mass_matrix();
                assert!((&m - m.transpose()).abs().max() < 1e-12);
                let eig = m.symmetric_eigenvalues();
                assert!(eig.min() > 0.0, "min eigenvalue {}", eig.min());
            }
        }
    }

    #[test]
    fn bias_zero_at_hanging_equilibrium() {
        let mut physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        physics.set_state(&[0.0], &[0.0], &[]).unwrap();
        assert!(physics.bias_forces().abs().max() < 1e-12);
    }

    #[test]
    fn bias_gravity_torque_at_horizontal() {
        let mut physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        physics
            .set_state(&[std::f64::consts::FRAC_PI_2], &[0.0], &[])
            .unwrap();
        let c = physics.bias_forces();
        assert!((c[0].abs() - 9.81).abs() < 1e-10, "torque {}", c[0]);
    }

    #[test]
    fn bias_includes_damping_term() {
        let mut spec = point_pendulum();
        spec.worldbody.children[0].joints[0].damping = 0.7;
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[0.0], &[2.0], &[]).unwrap();
        // At the hanging pose gravity contributes nothing, centrifugal
        // forces are radial, so the only generalized term is d * v.
        let c = physics.bias_forces();
        assert!((c[0] - 1.4).abs() < 1e-12, "bias {}", c[0]);
    }

    #[test]
    fn bias_includes_stiffness_term() {
        let mut spec = point_pendulum();
        spec.worldbody.children[0].joints[0].stiffness = 3.0;
        spec.worldbody.children[0].joints[0].springref = 0.5;
        spec.options.gravity = nalgebra::Vector3::zeros();
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[1.5], &[0.0], &[]).unwrap();
        let c = physics.bias_forces();
        assert!((c[0] - 3.0).abs() < 1e-12, "bias {}", c[0]);
    }

    #[test]
    fn forward_dynamics_equilibrium_zero_accel() {
        let mut physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        physics.set_state(&[0.0], &[0.0], &[]).unwrap();
        assert!(physics.accel(&[]).unwrap().abs().max() < 1e-12);
    }

    #[test]
    fn forward_dynamics_horizontal_gravity_accel() {
        let mut physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        physics
            .set_state(&[std::f64::consts::FRAC_PI_2], &[0.0], &[])
            .unwrap();
        let a = physics.accel(&[]).unwrap();
        assert!((a[0].abs() - 9.81).abs() < 1e-10, "a = {}", a[0]);
    }

    #[test]
    fn forward_dynamics_residual_small() {
        let mut physics = Physics::from_model(compile(&branched_model()).unwrap()).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..50 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            physics.set_state(&q, &v, &[]).unwrap();
            let a = physics.accel(&[]).unwrap();
            let m = physics.mass_matrix();
            let rhs = physics.fluid_drag() - physics.bias_forces();
            let residual = (m * a - rhs).abs().max();
            assert!(residual < 1e-10, "residual {residual}");
        }
    }

    #[test]
    fn control_acts_linearly() {
        let mut spec = point_pendulum();
        spec.actuators.push(crate::mjcf::ActuatorSpec {
            name: "torque".into(),
            joint: "pin".into(),
            gear: 2.5,
            ctrl_range: Some((-1.0, 1.0)),
        });
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[0.4], &[0.0], &[0.0]).unwrap();
        let a0 = physics.accel(&[0.0]).unwrap()[0];
        let a1 = physics.accel(&[0.3]).unwrap()[0];
        let a2 = physics.accel(&[0.6]).unwrap()[0];
        assert!(((a2 - a0) - 2.0 * (a1 - a0)).abs() < 1e-12);
        // Gear scales the torque: da/du = gear / M.
        assert!(((a1 - a0) / 0.3 - 2.5).abs() < 1e-10);
    }

    fn swimmer_link() -> ModelSpec {
        let mut spec = ModelSpec::empty("one_link");
        spec.options.gravity = nalgebra::Vector3::zeros();
        let mut link = BodySpec::named("link");
        link.joints
            .push(JointSpec::slide("x", nalgebra::Vector3::new(1.0, 0.0, 0.0)));
        link.joints
            .push(JointSpec::slide("z", nalgebra::Vector3::new(0.0, 0.0, 1.0)));
        link.joints.push(JointSpec::hinge("yaw"));
        let mut cap = GeomSpec::capsule(
            "hull",
            0.01,
            nalgebra::Vector3::new(-0.1, 0.0, 0.0),
            nalgebra::Vector3::new(0.1, 0.0, 0.0),
        );
        cap.mass = Some(0.1);
        cap.drag = true;
        link.geoms.push(cap);
        spec.worldbody.children.push(link);
        spec
    }

    #[test]
    fn drag_zero_at_rest() {
        let physics = Physics::from_model(compile(&swimmer_link()).unwrap()).unwrap();
        assert!(physics.fluid_drag().abs().max() == 0.0);
    }

    #[test]
    fn drag_tangential_opposes_motion() {
        let mut physics = Physics::from_model(compile(&swimmer_link()).unwrap()).unwrap();
        // Motion along the capsule axis (x): linear tangential drag only.
        physics.set_state(&[0.0, 0.0, 0.0], &[0.8, 0.0, 0.0], &[]).unwrap();
        let d = physics.fluid_drag();
        let expected = -DRAG_TANGENT * 0.2 * 0.8;
        assert!((d[0] - expected).abs() < 1e-12, "drag {}", d[0]);
        assert!(d[1].abs() < 1e-12 && d[2].abs() < 1e-12);
    }

    #[test]
    fn drag_normal_is_quadratic() {
        let mut physics = Physics::from_model(compile(&swimmer_link()).unwrap()).unwrap();
        physics.set_state(&[0.0, 0.0, 0.0], &[0.0, 0.5, 0.0], &[]).unwrap();
        let d1 = physics.fluid_drag()[1];
        physics.set_state(&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[]).unwrap();
        let d2 = physics.fluid_drag()[1];
        assert!(d1 < 0.0 && d2 < 0.0);
        assert!((d2 / d1 - 4.0).abs() < 1e-9, "ratio {}", d2 / d1);
    }

    #[test]
    fn drag_dissipates_for_random_states() {
        let mut physics = Physics::from_model(compile(&swimmer_link()).unwrap()).unwrap();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..1000 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            physics.set_state(&q, &v, &[]).unwrap();
            let drag = physics.fluid_drag();
            let power: f64 = drag
                .iter()
                .zip(v.iter())
                .map(|(f, vel)| f * vel)
                .sum();
            assert!(power <= 1e-12, "drag generated power {power}");
        }
    }

    #[test]
    fn semi_implicit_euler_formula() {
        // v' = v + h a, q' = q + h v'. With a slide in zero gravity and a
        // unit force: a = f / m.
        let mut spec = ModelSpec::empty("block");
        spec.options.gravity = nalgebra::Vector3::zeros();
        spec.options.timestep = 0.1;
        let mut block = BodySpec::named("block");
        block
            .joints
            .push(JointSpec::slide("x", nalgebra::Vector3::new(1.0, 0.0, 0.0)));
        let mut g = GeomSpec::sphere("ball", 0.1);
        g.mass = Some(1.0);
        block.geoms.push(g);
        spec.worldbody.children.push(block);
        spec.actuators.push(crate::mjcf::ActuatorSpec {
            name: "push".into(),
            joint: "x".into(),
            gear: 1.0,
            ctrl_range: None,
        });
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[0.0], &[1.0], &[0.0]).unwrap();
        physics.step(&[1.0]).unwrap();
        assert!((physics.v()[0] - 1.1).abs() < 1e-14);
        assert!((physics.q()[0] - 0.11).abs() < 1e-14);
        // Zero force: uniform motion.
        physics.set_state(&[0.0], &[2.0], &[0.0]).unwrap();
        physics.step(&[0.0]).unwrap();
        assert!((physics.q()[0] - 0.2).abs() < 1e-14);
        assert!((physics.v()[0] - 2.0).abs() < 1e-14);
    }

    /// Harmonic oscillator via joint stiffness: analytic solution available.
    fn oscillator(h: f64) -> Physics {
        let mut spec = ModelSpec::empty("osc");
        spec.options.gravity = nalgebra::Vector3::zeros();
        spec.options.timestep = h;
        spec.options.integrator = Integrator::Rk4;
        let mut block = BodySpec::named("block");
        let mut joint = JointSpec::slide("x", nalgebra::Vector3::new(1.0, 0.0, 0.0));
        joint.stiffness = 1.0;
        block.joints.push(joint);
        let mut g = GeomSpec::sphere("ball", 0.1);
        g.mass = Some(1.0);
        block.geoms.push(g);
        spec.worldbody.children.push(block);
        Physics::from_model(compile(&spec).unwrap()).unwrap()
    }

    #[test]
    fn rk4_oscillator_fifth_order_local_error() {
        // One step against (q, v) = (cos t, -sin t): halving h must shrink
        // the local state error by about 2^5. (The position component
        // alone degenerates to sixth order for this start state.)
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let mut physics = oscillator(h);
            physics.set_state(&[1.0], &[0.0], &[]).unwrap();
            physics.step(&[]).unwrap();
            let eq = physics.q()[0] - h.cos();
            let ev = physics.v()[0] + h.sin();
            errs.push((eq * eq + ev * ev).sqrt());
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (24.0..40.0).contains(&ratio),
            "order ratio {ratio} (errors {errs:?})"
        );
    }

    #[test]
    fn rk4_zero_dynamics_keeps_state() {
        let mut spec = ModelSpec::empty("still");
        spec.options.gravity = nalgebra::Vector3::zeros();
        spec.options.integrator = Integrator::Rk4;
        let mut block = BodySpec::named("block");
        block
            .joints
            .push(JointSpec::slide("x", nalgebra::Vector3::new(1.0, 0.0, 0.0)));
        let mut g = GeomSpec::sphere("ball", 0.1);
        g.mass = Some(1.0);
        block.geoms.push(g);
        spec.worldbody.children.push(block);
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[0.25], &[0.0], &[]).unwrap();
        physics.step(&[]).unwrap();
        assert_eq!(physics.q()[0], 0.25);
        assert_eq!(physics.v()[0], 0.0);
    }

    #[test]
    fn rk4_pendulum_energy_drift_small() {
        let mut spec = point_pendulum();
        spec.options.integrator = Integrator::Rk4;
        spec.options.timestep = 0.02;
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[2.0], &[0.0], &[]).unwrap();
        let e0 = physics.energy();
        for _ in 0..1000 {
            physics.step(&[]).unwrap();
        }
        let drift = (physics.energy() - e0).abs() / e0.abs();
        assert!(drift < 1e-4, "relative drift {drift}");
    }

    #[test]
    fn euler_damped_pendulum_passive() {
        let mut spec = point_pendulum();
        spec.worldbody.children[0].joints[0].damping = 0.1;
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        physics.set_state(&[1.2], &[0.0], &[]).unwrap();
        let mut prev = physics.energy();
        for _ in 0..1000 {
            physics.step(&[]).unwrap();
            let e = physics.energy();
            assert!(e <= prev + 1e-6, "energy rose from {prev} to {e}");
            prev = e;
        }
    }

    #[test]
    fn step_from_equilibrium_is_stationary() {
        let mut physics = Physics::from_model(compile(&point_pendulum()).unwrap()).unwrap();
        physics.set_state(&[0.0], &[0.0], &[]).unwrap();
        physics.step(&[]).unwrap();
        assert!(physics.q()[0].abs() < 1e-12);
        assert!(physics.v()[0].abs() < 1e-12);
    }

    #[test]
    fn step_resyncs_derived_quantities() {
        let mut physics = physics_from(BOX_AND_SPHERE);
        physics.set_state(&[0.0], &[1.0], &[]).unwrap();
        physics.step(&[]).unwrap();
        // After the step the rendered/world position must reflect new q.
        let z = physics.named().geom_xpos("box").unwrap().z;
        assert!((z - (0.3 + physics.q()[0])).abs() < 1e-12);
    }

    #[test]
    fn substep_accounting() {
        let mut physics = physics_from(BOX_AND_SPHERE);
        let h = physics.model().timestep();
        physics.step_n(&[], 4).unwrap();
        assert!((physics.time() - 4.0 * h).abs() < 1e-15);
    }

    #[test]
    fn deterministic_stepping() {
        let run = || {
            let mut physics = Physics::from_model(compile(&branched_model()).unwrap()).unwrap();
            physics
                .set_state(&[0.1, -0.2, 0.3, -0.4], &[1.0, 0.5, -0.5, 0.25], &[])
                .unwrap();
            for _ in 0..500 {
                physics.step(&[]).unwrap();
            }
            (physics.q().to_vec(), physics.v().to_vec())
        };
        let (q1, v1) = run();
        let (q2, v2) = run();
        assert_eq!(q1, q2);
        assert_eq!(v1, v2);
    }

    #[test]
    fn set_state_matches_fresh_instance() {
        let model = Arc::new(compile(&parse_model(BOX_AND_SPHERE).unwrap()).unwrap());
        let mut a = Physics::new(model.clone()).unwrap();
        a.set_state(&[0.1], &[0.5], &[]).unwrap();
        let mut b = Physics::new(model).unwrap();
        b.set_state(&[0.1], &[0.5], &[]).unwrap();
        assert_eq!(a.geom_xpos(1), b.geom_xpos(1));
        assert_eq!(a.energy(), b.energy());
    }

    #[test]
    fn divergence_guard_reports_error() {
        let mut spec = point_pendulum();
        spec.actuators.push(crate::mjcf::ActuatorSpec {
            name: "torque".into(),
            joint: "pin".into(),
            gear: 1.0,
            ctrl_range: None,
        });
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        let mut diverged = false;
        for _ in 0..10000 {
            match physics.step(&[1e300]) {
                Ok(()) => {}
                Err(PhysicsError::Diverged { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(diverged, "expected divergence error");
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut physics = physics_from(BOX_AND_SPHERE);
        assert!(matches!(
            physics.set_state(&[0.0, 0.0], &[0.0], &[]),
            Err(PhysicsError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            physics.step(&[1.0]),
            Err(PhysicsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn static_geom_override_applies_to_world_geoms_only() {
        let mut physics = physics_from(BOX_AND_SPHERE);
        physics
            .set_static_geom_pos(0, Vector3::new(1.0, 0.0, 0.5))
            .unwrap();
        assert_eq!(physics.geom_xpos(0), Vector3::new(1.0, 0.0, 0.5));
        assert!(matches!(
            physics.set_static_geom_pos(1, Vector3::zeros()),
            Err(PhysicsError::NotWorldGeom(_))
        ));
    }

    #[test]
    fn ctrl_transform_mixes_controls() {
        let mut spec = ModelSpec::empty("mix");
        spec.options.gravity = nalgebra::Vector3::zeros();
        let mut block = BodySpec::named("block");
        block
            .joints
            .push(JointSpec::slide("x", nalgebra::Vector3::new(1.0, 0.0, 0.0)));
        block
            .joints
            .push(JointSpec::slide("z", nalgebra::Vector3::new(0.0, 0.0, 1.0)));
        let mut g = GeomSpec::sphere("ball", 0.1);
        g.mass = Some(1.0);
        block.geoms.push(g);
        spec.worldbody.children.push(block);
        for (name, joint) in [("fx", "x"), ("fz", "z")] {
            spec.actuators.push(crate::mjcf::ActuatorSpec {
                name: name.into(),
                joint: joint.into(),
                gear: 1.0,
                ctrl_range: Some((-1.0, 1.0)),
            });
        }
        let mut physics = Physics::from_model(compile(&spec).unwrap()).unwrap();
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        physics.set_ctrl_transform(Some(t)).unwrap();
        let a = physics.accel(&[1.0, 0.0]).unwrap();
        // Swapped: control 0 drives the z axis.
        assert!(a[0].abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
        assert!(physics
            .set_ctrl_transform(Some(DMatrix::zeros(3, 3)))
            .is_err());
    }
}
