//! Declarative model format: a strict, planar subset of MJCF-style XML.
//!
//! A model document describes a kinematic tree of bodies connected by
//! one-degree-of-freedom hinge and slide joints, plus geoms, sites,
//! actuators and simulation options. [`parse_model`] reads a document into
//! a [`ModelSpec`], [`serialize_model`] writes the canonical form back out,
//! and [`compile`] freezes a spec into an immutable [`CompiledModel`] with
//! name/index registries used by the simulator.
//!
//! The grammar is deliberately small and strict: only the elements and
//! attributes documented on the spec types below are accepted, and anything
//! unknown is an error so that typos surface immediately.
//!
//! Conventions: lengths in metres, angles in radians, masses in kilograms.
//! The dynamic world is the x-z plane; hinge axes must be parallel to the
//! y axis and slide axes must lie in the x-z plane. Body `quat` attributes
//! are accepted for static-scene use but must encode a rotation about y.

mod compile;
mod parse;
mod serialize;

pub use compile::{compile, Actuator, Body, Camera, CompiledModel, Geom, Joint, Names, Site};
pub use parse::parse_model;
pub use serialize::serialize_model;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{row}:{col}: malformed document: {msg}")]
    Syntax { row: u32, col: u32, msg: String },
    #[error("{row}:{col}: unknown element <{name}>")]
    UnknownElement { row: u32, col: u32, name: String },
    #[error("{row}:{col}: unknown attribute `{name}` on <{element}>")]
    UnknownAttribute {
        row: u32,
        col: u32,
        name: String,
        element: String,
    },
    #[error("{row}:{col}: invalid value for `{attr}`: {msg}")]
    BadValue {
        row: u32,
        col: u32,
        attr: String,
        msg: String,
    },
    #[error("{row}:{col}: missing required attribute `{attr}` on <{element}>")]
    MissingAttribute {
        row: u32,
        col: u32,
        attr: String,
        element: String,
    },
    #[error("{row}:{col}: duplicate {category} name `{name}`")]
    DuplicateName {
        row: u32,
        col: u32,
        category: &'static str,
        name: String,
    },
    #[error("{row}:{col}: reference to unknown {category} `{name}`")]
    DanglingReference {
        row: u32,
        col: u32,
        category: &'static str,
        name: String,
    },
    #[error("model `{element}`: {msg}")]
    Invalid { element: String, msg: String },
}

/// Lookup failures in the name/index registries.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LookupError {
    #[error("no {category:?} named `{name}`")]
    UnknownName { category: Category, name: String },
    #[error("{category:?} index {index} out of range (count {count})")]
    BadIndex {
        category: Category,
        index: usize,
        count: usize,
    },
    #[error("unknown axis label `{0}` (expected x, y or z)")]
    BadAxis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Body,
    Joint,
    Geom,
    Actuator,
    Site,
    Camera,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Hinge,
    Slide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeomKind {
    Plane,
    Sphere,
    Capsule,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Semi-implicit Euler: velocity first, then position with the new
    /// velocity. The suite default.
    #[default]
    SemiImplicitEuler,
    /// Classical 4th-order Runge-Kutta.
    Rk4,
}

/// `<option timestep gravity integrator>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub timestep: f64,
    pub gravity: Vector3<f64>,
    pub integrator: Integrator,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            timestep: 0.005,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            integrator: Integrator::SemiImplicitEuler,
        }
    }
}

/// Parsed model document. The `worldbody` field is the root of the body
/// tree; acyclicity is structural (bodies nest).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub options: SimOptions,
    pub worldbody: BodySpec,
    pub actuators: Vec<ActuatorSpec>,
    pub cameras: Vec<CameraSpec>,
    pub lights: Vec<LightSpec>,
}

impl ModelSpec {
    /// Empty model with the given name and default options.
    pub fn empty(name: &str) -> Self {
        Self {
            name: name.to_string(),
            options: SimOptions::default(),
            worldbody: BodySpec::world(),
            actuators: Vec::new(),
            cameras: Vec::new(),
            lights: Vec::new(),
        }
    }
}

/// `<body name pos quat>`; the world body is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySpec {
    pub name: String,
    pub pos: Vector3<f64>,
    /// Optional frame rotation as a unit quaternion `(w, x, y, z)`. For
    /// dynamic models it must be a rotation about the y axis.
    pub quat: Option<[f64; 4]>,
    pub inertial: Option<InertialSpec>,
    pub joints: Vec<JointSpec>,
    pub geoms: Vec<GeomSpec>,
    pub sites: Vec<SiteSpec>,
    pub children: Vec<BodySpec>,
}

impl BodySpec {
    pub fn world() -> Self {
        Self::named("world")
    }

    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pos: Vector3::zeros(),
            quat: None,
            inertial: None,
            joints: Vec::new(),
            geoms: Vec::new(),
            sites: Vec::new(),
            children: Vec::new(),
        }
    }
}

/// `<inertial pos mass diaginertia>` — explicit mass properties that
/// override anything derived from the body's geoms. Only the y component
/// of `diaginertia` enters the planar dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialSpec {
    pub pos: Vector3<f64>,
    pub mass: f64,
    pub diaginertia: Vector3<f64>,
}

/// `<joint name type axis range damping stiffness springref armature>`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    /// Metadata only: used by task initialisers, not enforced dynamically.
    pub range: Option<(f64, f64)>,
    pub damping: f64,
    pub stiffness: f64,
    pub springref: f64,
    pub armature: f64,
}

impl JointSpec {
    pub fn hinge(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: JointKind::Hinge,
            axis: Vector3::new(0.0, 1.0, 0.0),
            range: None,
            damping: 0.0,
            stiffness: 0.0,
            springref: 0.0,
            armature: 0.0,
        }
    }

    pub fn slide(name: &str, axis: Vector3<f64>) -> Self {
        Self {
            axis,
            kind: JointKind::Slide,
            ..Self::hinge(name)
        }
    }
}

/// `<geom name type size pos fromto rgba mass density drag>`.
///
/// Size semantics per type: sphere `[radius]`, capsule `[radius, half_len]`
/// (or a `fromto` segment), box `[hx, hy, hz]` half-sizes, plane render
/// half-extents. `drag="1"` marks a capsule as subject to fluid drag.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomSpec {
    pub name: String,
    pub kind: GeomKind,
    pub size: Vec<f64>,
    pub pos: Vector3<f64>,
    pub fromto: Option<(Vector3<f64>, Vector3<f64>)>,
    pub rgba: [f32; 4],
    pub mass: Option<f64>,
    pub density: f64,
    pub drag: bool,
}

impl GeomSpec {
    pub fn sphere(name: &str, radius: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: GeomKind::Sphere,
            size: vec![radius],
            pos: Vector3::zeros(),
            fromto: None,
            rgba: DEFAULT_RGBA,
            mass: None,
            density: 1000.0,
            drag: false,
        }
    }

    pub fn capsule(name: &str, radius: f64, from: Vector3<f64>, to: Vector3<f64>) -> Self {
        Self {
            kind: GeomKind::Capsule,
            size: vec![radius],
            fromto: Some((from, to)),
            ..Self::sphere(name, radius)
        }
    }
}

pub const DEFAULT_RGBA: [f32; 4] = [0.5, 0.5, 0.5, 1.0];

/// `<site name pos size rgba>` — a named reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSpec {
    pub name: String,
    pub pos: Vector3<f64>,
    pub size: f64,
    pub rgba: [f32; 4],
}

impl SiteSpec {
    pub fn new(name: &str, pos: Vector3<f64>) -> Self {
        Self {
            name: name.to_string(),
            pos,
            size: 0.01,
            rgba: DEFAULT_RGBA,
        }
    }
}

/// `<motor name joint gear ctrlrange>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorSpec {
    pub name: String,
    pub joint: String,
    pub gear: f64,
    /// Absent means unbounded controls (the LQR domain).
    pub ctrl_range: Option<(f64, f64)>,
}

/// `<camera name pos extent>` — an orthographic viewport centred at
/// `(pos.x, pos.z)` spanning `extent` world units horizontally.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    pub name: String,
    pub pos: Vector3<f64>,
    pub extent: f64,
}

/// `<light name pos>` — accepted for scene descriptions; the planar
/// rasterizer does not use lights.
#[derive(Debug, Clone, PartialEq)]
pub struct LightSpec {
    pub name: String,
    pub pos: Vector3<f64>,
}
