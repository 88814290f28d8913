//! Canonical serializer for [`ModelSpec`].
//!
//! Output is deterministic: fixed element and attribute order, two-space
//! indentation and shortest round-trip float formatting, so re-parsing the
//! serialized form reproduces the spec exactly. Attributes equal to their
//! defaults are omitted.

use std::fmt::Write;

use nalgebra::Vector3;

use super::{
    BodySpec, GeomKind, Integrator, JointKind, ModelSpec, SimOptions, DEFAULT_RGBA,
};

pub fn serialize_model(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<mujoco model=\"{}\">", escape(&spec.name));

    let default_opt = SimOptions::default();
    if spec.options != default_opt {
        let mut attrs = String::new();
        if spec.options.timestep != default_opt.timestep {
            let _ = write!(attrs, " timestep=\"{}\"", spec.options.timestep);
        }
        if spec.options.gravity != default_opt.gravity {
            let _ = write!(attrs, " gravity=\"{}\"", vec3(&spec.options.gravity));
        }
        if spec.options.integrator != default_opt.integrator {
            let name = match spec.options.integrator {
                Integrator::SemiImplicitEuler => "euler",
                Integrator::Rk4 => "rk4",
            };
            let _ = write!(attrs, " integrator=\"{name}\"");
        }
        let _ = writeln!(out, "  <option{attrs}/>");
    }

    let _ = writeln!(out, "  <worldbody>");
    for light in &spec.lights {
        let _ = writeln!(
            out,
            "    <light name=\"{}\" pos=\"{}\"/>",
            escape(&light.name),
            vec3(&light.pos)
        );
    }
    for cam in &spec.cameras {
        let _ = writeln!(
            out,
            "    <camera name=\"{}\" pos=\"{}\" extent=\"{}\"/>",
            escape(&cam.name),
            vec3(&cam.pos),
            cam.extent
        );
    }
    write_body_contents(&mut out, &spec.worldbody, 2);
    let _ = writeln!(out, "  </worldbody>");

    if !spec.actuators.is_empty() {
        let _ = writeln!(out, "  <actuator>");
        for a in &spec.actuators {
            let mut attrs = format!(
                " name=\"{}\" joint=\"{}\"",
                escape(&a.name),
                escape(&a.joint)
            );
            if a.gear != 1.0 {
                let _ = write!(attrs, " gear=\"{}\"", a.gear);
            }
            if let Some((lo, hi)) = a.ctrl_range {
                let _ = write!(attrs, " ctrlrange=\"{lo} {hi}\"");
            }
            let _ = writeln!(out, "    <motor{attrs}/>");
        }
        let _ = writeln!(out, "  </actuator>");
    }

    let _ = writeln!(out, "</mujoco>");
    out
}

fn write_body_contents(out: &mut String, body: &BodySpec, depth: usize) {
    let pad = "  ".repeat(depth);
    if let Some(inertial) = &body.inertial {
        let mut attrs = String::new();
        if inertial.pos != Vector3::zeros() {
            let _ = write!(attrs, " pos=\"{}\"", vec3(&inertial.pos));
        }
        let _ = write!(attrs, " mass=\"{}\"", inertial.mass);
        if inertial.diaginertia != Vector3::zeros() {
            let _ = write!(attrs, " diaginertia=\"{}\"", vec3(&inertial.diaginertia));
        }
        let _ = writeln!(out, "{pad}<inertial{attrs}/>");
    }
    for j in &body.joints {
        let mut attrs = format!(" name=\"{}\"", escape(&j.name));
        let (kind, default_axis) = match j.kind {
            JointKind::Hinge => ("hinge", Vector3::new(0.0, 1.0, 0.0)),
            JointKind::Slide => ("slide", Vector3::new(0.0, 0.0, 1.0)),
        };
        let _ = write!(attrs, " type=\"{kind}\"");
        if j.axis != default_axis {
            let _ = write!(attrs, " axis=\"{}\"", vec3(&j.axis));
        }
        if let Some((lo, hi)) = j.range {
            let _ = write!(attrs, " range=\"{lo} {hi}\"");
        }
        if j.damping != 0.0 {
            let _ = write!(attrs, " damping=\"{}\"", j.damping);
        }
        if j.stiffness != 0.0 {
            let _ = write!(attrs, " stiffness=\"{}\"", j.stiffness);
        }
        if j.springref != 0.0 {
            let _ = write!(attrs, " springref=\"{}\"", j.springref);
        }
        if j.armature != 0.0 {
            let _ = write!(attrs, " armature=\"{}\"", j.armature);
        }
        let _ = writeln!(out, "{pad}<joint{attrs}/>");
    }
    for g in &body.geoms {
        let mut attrs = format!(" name=\"{}\"", escape(&g.name));
        let kind = match g.kind {
            GeomKind::Plane => "plane",
            GeomKind::Sphere => "sphere",
            GeomKind::Capsule => "capsule",
            GeomKind::Box => "box",
        };
        if g.kind != GeomKind::Sphere {
            let _ = write!(attrs, " type=\"{kind}\"");
        }
        if !g.size.is_empty() {
            let _ = write!(attrs, " size=\"{}\"", floats(&g.size));
        }
        if g.pos != Vector3::zeros() {
            let _ = write!(attrs, " pos=\"{}\"", vec3(&g.pos));
        }
        if let Some((from, to)) = &g.fromto {
            let _ = write!(attrs, " fromto=\"{} {}\"", vec3(from), vec3(to));
        }
        if g.rgba != DEFAULT_RGBA {
            let _ = write!(
                attrs,
                " rgba=\"{} {} {} {}\"",
                g.rgba[0], g.rgba[1], g.rgba[2], g.rgba[3]
            );
        }
        if let Some(mass) = g.mass {
            let _ = write!(attrs, " mass=\"{mass}\"");
        }
        if g.density != 1000.0 {
            let _ = write!(attrs, " density=\"{}\"", g.density);
        }
        if g.drag {
            let _ = write!(attrs, " drag=\"1\"");
        }
        let _ = writeln!(out, "{pad}<geom{attrs}/>");
    }
    for s in &body.sites {
        let mut attrs = format!(" name=\"{}\"", escape(&s.name));
        if s.pos != Vector3::zeros() {
            let _ = write!(attrs, " pos=\"{}\"", vec3(&s.pos));
        }
        if s.size != 0.01 {
            let _ = write!(attrs, " size=\"{}\"", s.size);
        }
        if s.rgba != DEFAULT_RGBA {
            let _ = write!(
                attrs,
                " rgba=\"{} {} {} {}\"",
                s.rgba[0], s.rgba[1], s.rgba[2], s.rgba[3]
            );
        }
        let _ = writeln!(out, "{pad}<site{attrs}/>");
    }
    for child in &body.children {
        let mut attrs = format!(" name=\"{}\"", escape(&child.name));
        if child.pos != Vector3::zeros() {
            let _ = write!(attrs, " pos=\"{}\"", vec3(&child.pos));
        }
        if let Some(q) = child.quat {
            let _ = write!(attrs, " quat=\"{} {} {} {}\"", q[0], q[1], q[2], q[3]);
        }
        let _ = writeln!(out, "{pad}<body{attrs}>");
        write_body_contents(out, child, depth + 1);
        let _ = writeln!(out, "{pad}</body>");
    }
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

fn floats(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}
