//! Compilation of a [`ModelSpec`] into the flat, immutable [`CompiledModel`]
//! consumed by the simulator.
//!
//! Elements are assigned indices in document order (bodies in pre-order,
//! world first), so compilation is deterministic. Per-body mass properties
//! are derived from geoms unless an explicit `<inertial>` overrides them.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::{
    ActuatorSpec, BodySpec, Category, GeomKind, GeomSpec, JointKind, LookupError,
    ModelError, ModelSpec, SimOptions,
};

/// Tolerance for "this vector component must vanish" planarity checks.
const PLANAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub parent: usize,
    /// Frame offset from the parent body, expressed in the parent frame.
    pub pos: Vector3<f64>,
    /// Planar rotation offset about y (radians), decoded from `quat`.
    pub rot: f64,
    pub mass: f64,
    /// Centre of mass in the body frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the y axis through the centre of mass.
    pub inertia: f64,
    pub joints: Vec<usize>,
    pub geoms: Vec<usize>,
    pub sites: Vec<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub body: usize,
    pub kind: JointKind,
    /// +1 if a hinge rotates about +y, -1 for -y. Unused for slides.
    pub hinge_sign: f64,
    /// Unit slide direction in the frame current when the joint applies.
    pub axis: Vector3<f64>,
    pub damping: f64,
    pub stiffness: f64,
    pub springref: f64,
    pub armature: f64,
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Geom {
    pub name: String,
    pub body: usize,
    pub kind: GeomKind,
    /// Raw size numbers as authored (semantics depend on `kind`).
    pub size: Vec<f64>,
    /// Centre in the body frame (midpoint for `fromto` capsules).
    pub pos: Vector3<f64>,
    /// Unit symmetry axis in the body frame (capsules).
    pub axis: Vector3<f64>,
    /// Cylinder half-length (capsules).
    pub half_len: f64,
    pub rgba: [f32; 4],
    pub mass: f64,
    pub drag: bool,
}

impl Geom {
    pub fn radius(&self) -> f64 {
        self.size.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Site {
    pub name: String,
    pub body: usize,
    pub pos: Vector3<f64>,
    pub size: f64,
    pub rgba: [f32; 4],
}

#[derive(Debug, Clone)]
pub struct Actuator {
    pub name: String,
    pub joint: usize,
    pub gear: f64,
    pub ctrl_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Camera {
    pub name: String,
    pub center: Vector3<f64>,
    pub extent: f64,
}

/// Bijective name <-> index registry for one element category.
#[derive(Debug, Clone, Default)]
pub struct Names {
    list: Vec<String>,
    index: HashMap<String, usize>,
}

impl Names {
    fn push(&mut self, category: &'static str, name: &str) -> Result<usize, ModelError> {
        if self.index.contains_key(name) {
            return Err(ModelError::Invalid {
                element: name.to_string(),
                msg: format!("duplicate {category} name"),
            });
        }
        let id = self.list.len();
        self.list.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.list.get(id).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }
}

/// Immutable kinematic tree plus registries. Freely shareable between
/// physics instances.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub name: String,
    pub options: SimOptions,
    pub bodies: Vec<Body>,
    pub joints: Vec<Joint>,
    pub geoms: Vec<Geom>,
    pub sites: Vec<Site>,
    pub actuators: Vec<Actuator>,
    pub cameras: Vec<Camera>,
    names: HashMap<Category, Names>,
}

impl CompiledModel {
    /// Number of generalized position coordinates (= one per joint).
    pub fn nq(&self) -> usize {
        self.joints.len()
    }

    /// Number of generalized velocities. Equal to `nq` for hinge/slide
    /// trees.
    pub fn nv(&self) -> usize {
        self.joints.len()
    }

    /// Number of actuators.
    pub fn nu(&self) -> usize {
        self.actuators.len()
    }

    pub fn timestep(&self) -> f64 {
        self.options.timestep
    }

    pub fn name_to_id(&self, category: Category, name: &str) -> Result<usize, LookupError> {
        self.names[&category]
            .id(name)
            .ok_or_else(|| LookupError::UnknownName {
                category,
                name: name.to_string(),
            })
    }

    pub fn id_to_name(&self, category: Category, id: usize) -> Result<&str, LookupError> {
        let names = &self.names[&category];
        names.name(id).ok_or(LookupError::BadIndex {
            category,
            index: id,
            count: names.len(),
        })
    }

    pub fn camera(&self, name: &str) -> Option<&Camera> {
        self.names[&Category::Camera]
            .id(name)
            .map(|id| &self.cameras[id])
    }

    /// Joints of `body` and of every ancestor, in index order. These are
    /// exactly the degrees of freedom that move the body.
    pub fn supporting_joints(&self, body: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut b = body;
        while b != 0 {
            out.extend(self.bodies[b].joints.iter().copied());
            b = self.bodies[b].parent;
        }
        out.sort_unstable();
        out
    }
}

/// Compiles a spec, deriving mass properties and validating the planar
/// constraints (hinge axes parallel to y, slide axes in the x-z plane,
/// body rotations about y).
pub fn compile(spec: &ModelSpec) -> Result<CompiledModel, ModelError> {
    let mut model = CompiledModel {
        name: spec.name.clone(),
        options: spec.options.clone(),
        bodies: Vec::new(),
        joints: Vec::new(),
        geoms: Vec::new(),
        sites: Vec::new(),
        actuators: Vec::new(),
        cameras: Vec::new(),
        names: [
            (Category::Body, Names::default()),
            (Category::Joint, Names::default()),
            (Category::Geom, Names::default()),
            (Category::Actuator, Names::default()),
            (Category::Site, Names::default()),
            (Category::Camera, Names::default()),
        ]
        .into_iter()
        .collect(),
    };

    if !(spec.options.timestep > 0.0) {
        return Err(ModelError::Invalid {
            element: spec.name.clone(),
            msg: format!("timestep must be positive, got {}", spec.options.timestep),
        });
    }

    compile_body(&mut model, &spec.worldbody, 0)?;

    for a in &spec.actuators {
        compile_actuator(&mut model, a)?;
    }

    for c in &spec.cameras {
        model
            .names
            .get_mut(&Category::Camera)
            .unwrap()
            .push("camera", &c.name)?;
        model.cameras.push(Camera {
            name: c.name.clone(),
            center: c.pos,
            extent: c.extent,
        });
    }
    if model.cameras.is_empty() {
        // Synthesized default viewport fitted around the reference pose.
        let cam = default_camera(&model);
        model
            .names
            .get_mut(&Category::Camera)
            .unwrap()
            .push("camera", &cam.name)?;
        model.cameras.push(cam);
    }

    // Every joint must move some mass, otherwise the mass matrix is
    // singular.
    for j in &model.joints {
        if subtree_mass(&model, j.body) <= 0.0 {
            return Err(ModelError::Invalid {
                element: j.name.clone(),
                msg: "joint moves a subtree with zero total mass".into(),
            });
        }
    }

    Ok(model)
}

fn compile_body(model: &mut CompiledModel, spec: &BodySpec, parent: usize) -> Result<usize, ModelError> {
    let id = model.bodies.len();
    let is_world = id == 0;
    model
        .names
        .get_mut(&Category::Body)
        .unwrap()
        .push("body", &spec.name)?;

    let rot = match spec.quat {
        None => 0.0,
        Some(q) => planar_angle_from_quat(&spec.name, q)?,
    };

    model.bodies.push(Body {
        name: spec.name.clone(),
        parent,
        pos: spec.pos,
        rot,
        mass: 0.0,
        com: Vector3::zeros(),
        inertia: 0.0,
        joints: Vec::new(),
        geoms: Vec::new(),
        sites: Vec::new(),
        children: Vec::new(),
    });
    if !is_world {
        model.bodies[parent].children.push(id);
    }

    for j in &spec.joints {
        if is_world {
            return Err(ModelError::Invalid {
                element: j.name.clone(),
                msg: "the world body cannot have joints".into(),
            });
        }
        let jid = model.joints.len();
        model
            .names
            .get_mut(&Category::Joint)
            .unwrap()
            .push("joint", &j.name)?;
        let axis_norm = j.axis.norm();
        if axis_norm < PLANAR_EPS {
            return Err(ModelError::Invalid {
                element: j.name.clone(),
                msg: "joint axis has zero length".into(),
            });
        }
        let axis = j.axis / axis_norm;
        let (hinge_sign, axis) = match j.kind {
            JointKind::Hinge => {
                if axis.x.abs() > PLANAR_EPS || axis.z.abs() > PLANAR_EPS {
                    return Err(ModelError::Invalid {
                        element: j.name.clone(),
                        msg: format!("hinge axis must be parallel to y, got {axis:?}"),
                    });
                }
                (axis.y.signum(), Vector3::new(0.0, axis.y.signum(), 0.0))
            }
            JointKind::Slide => {
                if axis.y.abs() > PLANAR_EPS {
                    return Err(ModelError::Invalid {
                        element: j.name.clone(),
                        msg: format!("slide axis must lie in the x-z plane, got {axis:?}"),
                    });
                }
                (1.0, axis)
            }
        };
        if j.damping < 0.0 || j.stiffness < 0.0 || j.armature < 0.0 {
            return Err(ModelError::Invalid {
                element: j.name.clone(),
                msg: "damping, stiffness and armature must be non-negative".into(),
            });
        }
        model.joints.push(Joint {
            name: j.name.clone(),
            body: id,
            kind: j.kind,
            hinge_sign,
            axis,
            damping: j.damping,
            stiffness: j.stiffness,
            springref: j.springref,
            armature: j.armature,
            range: j.range,
        });
        model.bodies[id].joints.push(jid);
    }

    let mut mass_parts: Vec<(f64, Vector3<f64>, f64)> = Vec::new(); // (mass, com, I_yy about own com)
    for g in &spec.geoms {
        let gid = model.geoms.len();
        model
            .names
            .get_mut(&Category::Geom)
            .unwrap()
            .push("geom", &g.name)?;
        let mut geom = resolve_geom(g, is_world)?;
        geom.body = id;
        if geom.mass > 0.0 {
            mass_parts.push((geom.mass, geom.pos, geom_inertia_y(&geom)));
        }
        model.geoms.push(geom);
        model.bodies[id].geoms.push(gid);
    }

    for s in &spec.sites {
        let sid = model.sites.len();
        model
            .names
            .get_mut(&Category::Site)
            .unwrap()
            .push("site", &s.name)?;
        model.sites.push(Site {
            name: s.name.clone(),
            body: id,
            pos: s.pos,
            size: s.size,
            rgba: s.rgba,
        });
        model.bodies[id].sites.push(sid);
    }

    // Mass properties: explicit inertial wins, otherwise accumulate geoms.
    if let Some(inertial) = &spec.inertial {
        if inertial.mass < 0.0 || inertial.diaginertia.y < 0.0 {
            return Err(ModelError::Invalid {
                element: spec.name.clone(),
                msg: "inertial mass and diaginertia must be non-negative".into(),
            });
        }
        model.bodies[id].mass = inertial.mass;
        model.bodies[id].com = inertial.pos;
        model.bodies[id].inertia = inertial.diaginertia.y;
    } else if !mass_parts.is_empty() {
        let mass: f64 = mass_parts.iter().map(|(m, _, _)| m).sum();
        let com = mass_parts
            .iter()
            .map(|(m, c, _)| c * *m)
            .sum::<Vector3<f64>>()
            / mass;
        let inertia = mass_parts
            .iter()
            .map(|(m, c, i)| {
                let d = c - com;
                i + m * (d.x * d.x + d.z * d.z)
            })
            .sum();
        model.bodies[id].mass = mass;
        model.bodies[id].com = com;
        model.bodies[id].inertia = inertia;
    }

    for child in &spec.children {
        compile_body(model, child, id)?;
    }
    Ok(id)
}

fn compile_actuator(model: &mut CompiledModel, a: &ActuatorSpec) -> Result<(), ModelError> {
    model
        .names
        .get_mut(&Category::Actuator)
        .unwrap()
        .push("actuator", &a.name)?;
    let joint = model
        .name_to_id(Category::Joint, &a.joint)
        .map_err(|_| ModelError::Invalid {
            element: a.name.clone(),
            msg: format!("actuator references unknown joint `{}`", a.joint),
        })?;
    model.actuators.push(Actuator {
        name: a.name.clone(),
        joint,
        gear: a.gear,
        ctrl_range: a.ctrl_range,
    });
    Ok(())
}

fn resolve_geom(g: &GeomSpec, is_world: bool) -> Result<Geom, ModelError> {
    let invalid = |msg: String| ModelError::Invalid {
        element: g.name.clone(),
        msg,
    };
    let mut pos = g.pos;
    let mut axis = Vector3::new(0.0, 0.0, 1.0);
    let mut half_len = 0.0;
    match g.kind {
        GeomKind::Plane => {
            if !is_world {
                return Err(invalid("plane geoms are only allowed on the world body".into()));
            }
        }
        GeomKind::Sphere => {
            if g.size.is_empty() || g.size[0] <= 0.0 {
                return Err(invalid("sphere needs a positive radius".into()));
            }
        }
        GeomKind::Capsule => {
            if g.size.is_empty() || g.size[0] <= 0.0 {
                return Err(invalid("capsule needs a positive radius".into()));
            }
            match (&g.fromto, g.size.get(1)) {
                (Some((from, to)), _) => {
                    let d = to - from;
                    let len = d.norm();
                    if len < PLANAR_EPS {
                        return Err(invalid("capsule fromto endpoints coincide".into()));
                    }
                    pos = (from + to) / 2.0;
                    axis = d / len;
                    half_len = len / 2.0;
                }
                (None, Some(&hl)) if hl > 0.0 => half_len = hl,
                _ => {
                    return Err(invalid(
                        "capsule needs fromto or size=\"radius half_len\"".into(),
                    ))
                }
            }
        }
        GeomKind::Box => {
            if g.size.len() != 3 || g.size.iter().any(|&s| s <= 0.0) {
                return Err(invalid("box needs three positive half-sizes".into()));
            }
        }
    }
    let volume = match g.kind {
        GeomKind::Plane => 0.0,
        GeomKind::Sphere => 4.0 / 3.0 * std::f64::consts::PI * g.size[0].powi(3),
        GeomKind::Capsule => {
            let r = g.size[0];
            std::f64::consts::PI * r * r * (2.0 * half_len) + 4.0 / 3.0 * std::f64::consts::PI * r.powi(3)
        }
        GeomKind::Box => 8.0 * g.size[0] * g.size[1] * g.size[2],
    };
    let mass = match g.mass {
        Some(m) => {
            if m < 0.0 {
                return Err(invalid("geom mass must be non-negative".into()));
            }
            m
        }
        None => g.density * volume,
    };
    if g.drag {
        if g.kind != GeomKind::Capsule {
            return Err(invalid("drag is only supported on capsule geoms".into()));
        }
        if axis.y.abs() > PLANAR_EPS {
            return Err(invalid("drag capsules must lie in the x-z plane".into()));
        }
    }
    Ok(Geom {
        name: g.name.clone(),
        body: 0, // assigned by compile_body
        kind: g.kind,
        size: g.size.clone(),
        pos,
        axis,
        half_len,
        rgba: g.rgba,
        mass,
        drag: g.drag,
    })
}

/// I_yy of a geom about its own centre, for the axis through the com
/// parallel to y. Axisymmetric shapes use I = I_ax a a' + I_perp (1 - a a').
fn geom_inertia_y(g: &Geom) -> f64 {
    match g.kind {
        GeomKind::Plane => 0.0,
        GeomKind::Sphere => 0.4 * g.mass * g.radius() * g.radius(),
        GeomKind::Box => {
            let (hx, hz) = (g.size[0], g.size[2]);
            g.mass * (hx * hx + hz * hz) / 3.0
        }
        GeomKind::Capsule => {
            let r = g.radius();
            let l = 2.0 * g.half_len;
            let v_cyl = std::f64::consts::PI * r * r * l;
            let v_sph = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
            let density = g.mass / (v_cyl + v_sph);
            let m_cyl = density * v_cyl;
            let m_hemi = density * v_sph / 2.0;
            let i_axial = 0.5 * m_cyl * r * r + 2.0 * m_hemi * 0.4 * r * r;
            // Hemisphere about its own com, then shifted to the capsule
            // centre (com sits 3r/8 from the flat face).
            let i_hemi_com = (83.0 / 320.0) * m_hemi * r * r;
            let d = l / 2.0 + 3.0 * r / 8.0;
            let i_perp = m_cyl * (l * l / 12.0 + r * r / 4.0)
                + 2.0 * (i_hemi_com + m_hemi * d * d);
            let ay = g.axis.y;
            i_axial * ay * ay + i_perp * (1.0 - ay * ay)
        }
    }
}

fn subtree_mass(model: &CompiledModel, body: usize) -> f64 {
    let mut total = model.bodies[body].mass;
    for &child in &model.bodies[body].children {
        total += subtree_mass(model, child);
    }
    total
}

fn planar_angle_from_quat(body: &str, q: [f64; 4]) -> Result<f64, ModelError> {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(ModelError::Invalid {
            element: body.to_string(),
            msg: format!("body quat is not a unit quaternion (norm {norm})"),
        });
    }
    let q = [q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm];
    if q[1].abs() > 1e-9 || q[3].abs() > 1e-9 {
        return Err(ModelError::Invalid {
            element: body.to_string(),
            msg: "body quat must be a rotation about the y axis".into(),
        });
    }
    Ok(2.0 * q[2].atan2(q[0]))
}

fn default_camera(model: &CompiledModel) -> Camera {
    // Bounding box of geom centres at the reference pose (q = 0), grown by
    // the largest geom size. Deterministic and adequate for quick looks.
    let mut min = Vector3::new(f64::INFINITY, 0.0, f64::INFINITY);
    let mut max = Vector3::new(f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY);
    let mut pad: f64 = 0.1;
    let mut any = false;
    for g in &model.geoms {
        if g.kind == GeomKind::Plane {
            continue;
        }
        any = true;
        // Accumulate this geom's body-chain offset at q = 0.
        let mut p = g.pos;
        let mut b = g.body;
        loop {
            let body = &model.bodies[b];
            let (s, c) = body.rot.sin_cos();
            p = Vector3::new(c * p.x + s * p.z, p.y, -s * p.x + c * p.z) + body.pos;
            if b == 0 {
                break;
            }
            b = body.parent;
        }
        min.x = min.x.min(p.x);
        min.z = min.z.min(p.z);
        max.x = max.x.max(p.x);
        max.z = max.z.max(p.z);
        pad = pad.max(g.size.first().copied().unwrap_or(0.0) + g.half_len);
    }
    if !any {
        return Camera {
            name: "fixed".into(),
            center: Vector3::zeros(),
            extent: 2.0,
        };
    }
    let center = Vector3::new((min.x + max.x) / 2.0, 0.0, (min.z + max.z) / 2.0);
    let extent = ((max.x - min.x).max(max.z - min.z) + 4.0 * pad).max(0.5);
    Camera {
        name: "fixed".into(),
        center,
        extent,
    }
}
