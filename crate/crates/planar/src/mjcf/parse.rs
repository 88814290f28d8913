//! Strict parser for the model document format.

use std::collections::HashSet;

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::{
    ActuatorSpec, BodySpec, CameraSpec, GeomKind, GeomSpec, InertialSpec, Integrator, JointKind,
    JointSpec, LightSpec, ModelError, ModelSpec, SiteSpec, DEFAULT_RGBA,
};

/// Parses a model document. All elements are captured with defaults
/// applied; unknown elements and attributes are errors.
pub fn parse_model(text: &str) -> Result<ModelSpec, ModelError> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        ModelError::Syntax {
            row: pos.row,
            col: pos.col,
            msg: e.to_string(),
        }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "mujoco" {
        return err_unknown_element(&doc, root);
    }

    let mut ctx = Ctx {
        doc: &doc,
        names: Default::default(),
    };

    let mut spec = ModelSpec::empty("unnamed");
    check_attrs(&doc, root, &["model"])?;
    if let Some(name) = root.attribute("model") {
        spec.name = name.to_string();
    }

    let mut seen_worldbody = false;
    for child in element_children(root) {
        match child.tag_name().name() {
            "option" => {
                check_attrs(&doc, child, &["timestep", "gravity", "integrator"])?;
                if let Some(v) = child.attribute("timestep") {
                    spec.options.timestep = parse_f64(&doc, child, "timestep", v)?;
                }
                if let Some(v) = child.attribute("gravity") {
                    spec.options.gravity = parse_vec3(&doc, child, "gravity", v)?;
                }
                if let Some(v) = child.attribute("integrator") {
                    spec.options.integrator = match v {
                        "euler" => Integrator::SemiImplicitEuler,
                        "rk4" => Integrator::Rk4,
                        other => {
                            return bad_value(&doc, child, "integrator", format!(
                                "unknown integrator `{other}` (expected euler or rk4)"
                            ))
                        }
                    };
                }
                no_children(&doc, child)?;
            }
            "worldbody" => {
                check_attrs(&doc, child, &[])?;
                seen_worldbody = true;
                ctx.record_name(&doc, child, "body", "world")?;
                let mut worldbody = BodySpec::world();
                let mut extras = Extras::default();
                parse_body_contents(&mut ctx, child, &mut worldbody, &mut extras, true)?;
                spec.worldbody = worldbody;
                spec.cameras = extras.cameras;
                spec.lights = extras.lights;
            }
            "actuator" => {
                check_attrs(&doc, child, &[])?;
                for motor in element_children(child) {
                    if motor.tag_name().name() != "motor" {
                        return err_unknown_element(&doc, motor);
                    }
                    check_attrs(&doc, motor, &["name", "joint", "gear", "ctrlrange"])?;
                    let name = required(&doc, motor, "name")?.to_string();
                    ctx.record_name(&doc, motor, "actuator", &name)?;
                    let joint = required(&doc, motor, "joint")?.to_string();
                    let gear = match motor.attribute("gear") {
                        Some(v) => parse_f64(&doc, motor, "gear", v)?,
                        None => 1.0,
                    };
                    let ctrl_range = match motor.attribute("ctrlrange") {
                        Some(v) => Some(parse_range(&doc, motor, "ctrlrange", v)?),
                        None => None,
                    };
                    no_children(&doc, motor)?;
                    spec.actuators.push(ActuatorSpec {
                        name,
                        joint,
                        gear,
                        ctrl_range,
                    });
                }
            }
            _ => return err_unknown_element(&doc, child),
        }
    }
    if !seen_worldbody {
        return Err(ModelError::Invalid {
            element: spec.name,
            msg: "document has no <worldbody>".into(),
        });
    }

    // Reference resolution: actuators must point at declared joints. The
    // parser re-walks the document for locations so errors stay precise.
    let joint_names: HashSet<&str> = ctx
        .names
        .iter()
        .filter(|(cat, _)| *cat == "joint")
        .map(|(_, n)| n.as_str())
        .collect();
    for a in &spec.actuators {
        if !joint_names.contains(a.joint.as_str()) {
            let node = find_motor_node(root, &a.name);
            let (row, col) = node_pos(&doc, node.unwrap_or(root));
            return Err(ModelError::DanglingReference {
                row,
                col,
                category: "joint",
                name: a.joint.clone(),
            });
        }
    }

    Ok(spec)
}

struct Ctx<'a> {
    doc: &'a Document<'a>,
    /// (category, name) pairs seen so far, for duplicate detection.
    names: Vec<(&'static str, String)>,
}

impl<'a> Ctx<'a> {
    fn record_name(
        &mut self,
        doc: &Document,
        node: Node,
        category: &'static str,
        name: &str,
    ) -> Result<(), ModelError> {
        if self
            .names
            .iter()
            .any(|(c, n)| *c == category && n == name)
        {
            let (row, col) = node_pos(doc, node);
            return Err(ModelError::DuplicateName {
                row,
                col,
                category,
                name: name.to_string(),
            });
        }
        self.names.push((category, name.to_string()));
        Ok(())
    }
}

#[derive(Default)]
struct Extras {
    cameras: Vec<CameraSpec>,
    lights: Vec<LightSpec>,
}

fn parse_body_contents(
    ctx: &mut Ctx,
    node: Node,
    body: &mut BodySpec,
    extras: &mut Extras,
    is_world: bool,
) -> Result<(), ModelError> {
    let doc = ctx.doc;
    for child in element_children(node) {
        match child.tag_name().name() {
            "body" => {
                check_attrs(doc, child, &["name", "pos", "quat"])?;
                let name = required(doc, child, "name")?.to_string();
                ctx.record_name(doc, child, "body", &name)?;
                let mut sub = BodySpec::named(&name);
                if let Some(v) = child.attribute("pos") {
                    sub.pos = parse_vec3(doc, child, "pos", v)?;
                }
                if let Some(v) = child.attribute("quat") {
                    let q = parse_floats(doc, child, "quat", v, 4)?;
                    sub.quat = Some([q[0], q[1], q[2], q[3]]);
                }
                parse_body_contents(ctx, child, &mut sub, extras, false)?;
                body.children.push(sub);
            }
            "inertial" => {
                check_attrs(doc, child, &["pos", "mass", "diaginertia"])?;
                let mass = parse_f64(doc, child, "mass", required(doc, child, "mass")?)?;
                let pos = match child.attribute("pos") {
                    Some(v) => parse_vec3(doc, child, "pos", v)?,
                    None => Vector3::zeros(),
                };
                let diaginertia = match child.attribute("diaginertia") {
                    Some(v) => parse_vec3(doc, child, "diaginertia", v)?,
                    None => Vector3::zeros(),
                };
                no_children(doc, child)?;
                body.inertial = Some(InertialSpec {
                    pos,
                    mass,
                    diaginertia,
                });
            }
            "joint" => {
                if is_world {
                    let (row, col) = node_pos(doc, child);
                    return Err(ModelError::BadValue {
                        row,
                        col,
                        attr: "joint".into(),
                        msg: "the world body cannot have joints".into(),
                    });
                }
                check_attrs(
                    doc,
                    child,
                    &[
                        "name",
                        "type",
                        "axis",
                        "range",
                        "damping",
                        "stiffness",
                        "springref",
                        "armature",
                    ],
                )?;
                let name = required(doc, child, "name")?.to_string();
                ctx.record_name(doc, child, "joint", &name)?;
                let kind = match child.attribute("type").unwrap_or("hinge") {
                    "hinge" => JointKind::Hinge,
                    "slide" => JointKind::Slide,
                    other => {
                        return bad_value(doc, child, "type", format!(
                            "unknown joint type `{other}` (expected hinge or slide)"
                        ))
                    }
                };
                let mut j = JointSpec {
                    name,
                    kind,
                    ..JointSpec::hinge("")
                };
                if let Some(v) = child.attribute("axis") {
                    j.axis = parse_vec3(doc, child, "axis", v)?;
                } else if kind == JointKind::Slide {
                    j.axis = Vector3::new(0.0, 0.0, 1.0);
                }
                if let Some(v) = child.attribute("range") {
                    j.range = Some(parse_range(doc, child, "range", v)?);
                }
                if let Some(v) = child.attribute("damping") {
                    j.damping = parse_f64(doc, child, "damping", v)?;
                }
                if let Some(v) = child.attribute("stiffness") {
                    j.stiffness = parse_f64(doc, child, "stiffness", v)?;
                }
                if let Some(v) = child.attribute("springref") {
                    j.springref = parse_f64(doc, child, "springref", v)?;
                }
                if let Some(v) = child.attribute("armature") {
                    j.armature = parse_f64(doc, child, "armature", v)?;
                }
                no_children(doc, child)?;
                body.joints.push(j);
            }
            "geom" => {
                check_attrs(
                    doc,
                    child,
                    &[
                        "name", "type", "size", "pos", "fromto", "rgba", "mass", "density", "drag",
                    ],
                )?;
                let name = required(doc, child, "name")?.to_string();
                ctx.record_name(doc, child, "geom", &name)?;
                let kind = match child.attribute("type").unwrap_or("sphere") {
                    "plane" => GeomKind::Plane,
                    "sphere" => GeomKind::Sphere,
                    "capsule" => GeomKind::Capsule,
                    "box" => GeomKind::Box,
                    other => {
                        return bad_value(doc, child, "type", format!(
                            "unknown geom type `{other}` (expected plane, sphere, capsule or box)"
                        ))
                    }
                };
                let mut g = GeomSpec {
                    name,
                    kind,
                    size: Vec::new(),
                    pos: Vector3::zeros(),
                    fromto: None,
                    rgba: DEFAULT_RGBA,
                    mass: None,
                    density: 1000.0,
                    drag: false,
                };
                if let Some(v) = child.attribute("size") {
                    g.size = parse_float_list(doc, child, "size", v, 1, 3)?;
                }
                if let Some(v) = child.attribute("pos") {
                    g.pos = parse_vec3(doc, child, "pos", v)?;
                }
                if let Some(v) = child.attribute("fromto") {
                    let f = parse_floats(doc, child, "fromto", v, 6)?;
                    g.fromto = Some((
                        Vector3::new(f[0], f[1], f[2]),
                        Vector3::new(f[3], f[4], f[5]),
                    ));
                }
                if let Some(v) = child.attribute("rgba") {
                    g.rgba = parse_rgba(doc, child, v)?;
                }
                if let Some(v) = child.attribute("mass") {
                    g.mass = Some(parse_f64(doc, child, "mass", v)?);
                }
                if let Some(v) = child.attribute("density") {
                    g.density = parse_f64(doc, child, "density", v)?;
                }
                if let Some(v) = child.attribute("drag") {
                    g.drag = parse_bool(doc, child, "drag", v)?;
                }
                no_children(doc, child)?;
                body.geoms.push(g);
            }
            "site" => {
                check_attrs(doc, child, &["name", "pos", "size", "rgba"])?;
                let name = required(doc, child, "name")?.to_string();
                ctx.record_name(doc, child, "site", &name)?;
                let mut s = SiteSpec::new(&name, Vector3::zeros());
                if let Some(v) = child.attribute("pos") {
                    s.pos = parse_vec3(doc, child, "pos", v)?;
                }
                if let Some(v) = child.attribute("size") {
                    s.size = parse_f64(doc, child, "size", v)?;
                }
                if let Some(v) = child.attribute("rgba") {
                    s.rgba = parse_rgba(doc, child, v)?;
                }
                no_children(doc, child)?;
                body.sites.push(s);
            }
            "camera" if is_world => {
                check_attrs(doc, child, &["name", "pos", "extent"])?;
                let name = required(doc, child, "name")?.to_string();
                ctx.record_name(doc, child, "camera", &name)?;
                let pos = match child.attribute("pos") {
                    Some(v) => parse_vec3(doc, child, "pos", v)?,
                    None => Vector3::zeros(),
                };
                let extent =
                    parse_f64(doc, child, "extent", required(doc, child, "extent")?)?;
                no_children(doc, child)?;
                extras.cameras.push(CameraSpec { name, pos, extent });
            }
            "light" if is_world => {
                check_attrs(doc, child, &["name", "pos"])?;
                let name = required(doc, child, "name")?.to_string();
                let pos = match child.attribute("pos") {
                    Some(v) => parse_vec3(doc, child, "pos", v)?,
                    None => Vector3::zeros(),
                };
                no_children(doc, child)?;
                extras.lights.push(LightSpec { name, pos });
            }
            _ => return err_unknown_element(doc, child),
        }
    }
    Ok(())
}

fn element_children<'a>(node: Node<'a, 'a>) -> impl Iterator<Item = Node<'a, 'a>> {
    node.children().filter(|n| n.is_element())
}

fn node_pos(doc: &Document, node: Node) -> (u32, u32) {
    let pos = doc.text_pos_at(node.range().start);
    (pos.row, pos.col)
}

fn err_unknown_element<T>(doc: &Document, node: Node) -> Result<T, ModelError> {
    let (row, col) = node_pos(doc, node);
    Err(ModelError::UnknownElement {
        row,
        col,
        name: node.tag_name().name().to_string(),
    })
}

fn bad_value<T>(doc: &Document, node: Node, attr: &str, msg: String) -> Result<T, ModelError> {
    let (row, col) = node_pos(doc, node);
    Err(ModelError::BadValue {
        row,
        col,
        attr: attr.to_string(),
        msg,
    })
}

fn check_attrs(doc: &Document, node: Node, allowed: &[&str]) -> Result<(), ModelError> {
    for attr in node.attributes() {
        if !allowed.contains(&attr.name()) {
            let (row, col) = node_pos(doc, node);
            return Err(ModelError::UnknownAttribute {
                row,
                col,
                name: attr.name().to_string(),
                element: node.tag_name().name().to_string(),
            });
        }
    }
    Ok(())
}

fn no_children(doc: &Document, node: Node) -> Result<(), ModelError> {
    match element_children(node).next() {
        Some(child) => err_unknown_element(doc, child),
        None => Ok(()),
    }
}

fn required<'a>(doc: &Document, node: Node<'a, 'a>, attr: &str) -> Result<&'a str, ModelError> {
    node.attribute(attr).ok_or_else(|| {
        let (row, col) = node_pos(doc, node);
        ModelError::MissingAttribute {
            row,
            col,
            attr: attr.to_string(),
            element: node.tag_name().name().to_string(),
        }
    })
}

fn parse_f64(doc: &Document, node: Node, attr: &str, v: &str) -> Result<f64, ModelError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| {
            let (row, col) = node_pos(doc, node);
            ModelError::BadValue {
                row,
                col,
                attr: attr.to_string(),
                msg: format!("`{v}` is not a finite number"),
            }
        })
}

fn parse_floats(
    doc: &Document,
    node: Node,
    attr: &str,
    v: &str,
    n: usize,
) -> Result<Vec<f64>, ModelError> {
    let out = parse_float_list(doc, node, attr, v, n, n)?;
    Ok(out)
}

fn parse_float_list(
    doc: &Document,
    node: Node,
    attr: &str,
    v: &str,
    min: usize,
    max: usize,
) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::new();
    for tok in v.split_whitespace() {
        out.push(parse_f64(doc, node, attr, tok)?);
    }
    if out.len() < min || out.len() > max {
        return bad_value(
            doc,
            node,
            attr,
            format!(
                "expected {} number(s), got {}",
                if min == max {
                    min.to_string()
                } else {
                    format!("{min}..{max}")
                },
                out.len()
            ),
        );
    }
    Ok(out)
}

fn parse_vec3(doc: &Document, node: Node, attr: &str, v: &str) -> Result<Vector3<f64>, ModelError> {
    let f = parse_floats(doc, node, attr, v, 3)?;
    Ok(Vector3::new(f[0], f[1], f[2]))
}

fn parse_range(
    doc: &Document,
    node: Node,
    attr: &str,
    v: &str,
) -> Result<(f64, f64), ModelError> {
    let f = parse_floats(doc, node, attr, v, 2)?;
    if f[0] > f[1] {
        return bad_value(doc, node, attr, format!("range lower {} > upper {}", f[0], f[1]));
    }
    Ok((f[0], f[1]))
}

fn parse_rgba(doc: &Document, node: Node, v: &str) -> Result<[f32; 4], ModelError> {
    let f = parse_floats(doc, node, "rgba", v, 4)?;
    Ok([f[0] as f32, f[1] as f32, f[2] as f32, f[3] as f32])
}

fn parse_bool(doc: &Document, node: Node, attr: &str, v: &str) -> Result<bool, ModelError> {
    match v {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => bad_value(doc, node, attr, format!("`{other}` is not a boolean (0/1)")),
    }
}

fn find_motor_node<'a>(root: Node<'a, 'a>, name: &str) -> Option<Node<'a, 'a>> {
    root.descendants()
        .find(|n| n.tag_name().name() == "motor" && n.attribute("name") == Some(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BOX_AND_SPHERE: &str = r#"
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

    #[test]
    fn parses_box_and_sphere_scene() {
        let spec = parse_model(BOX_AND_SPHERE).unwrap();
        assert_eq!(spec.worldbody.geoms.len(), 1);
        assert_eq!(spec.worldbody.geoms[0].name, "floor");
        assert_eq!(spec.worldbody.children.len(), 1);
        let body = &spec.worldbody.children[0];
        assert_eq!(body.joints.len(), 1);
        assert_eq!(body.joints[0].name, "up_down");
        assert_eq!(body.joints[0].kind, JointKind::Slide);
        assert_eq!(body.geoms.len(), 2);
        // Unspecified geom type defaults to sphere.
        assert_eq!(body.geoms[1].kind, GeomKind::Sphere);
        assert_eq!(spec.lights.len(), 1);
    }

    #[test]
    fn duplicate_joint_name_is_error() {
        let doc = r#"
<mujoco>
  <worldbody>
    <body name="a" pos="0 0 0">
      <joint name="j" type="hinge" axis="0 1 0"/>
      <geom name="g" size=".1" mass="1"/>
      <body name="b" pos="0 0 1">
        <joint name="j" type="hinge" axis="0 1 0"/>
        <geom name="g2" size=".1" mass="1"/>
      </body>
    </body>
  </worldbody>
</mujoco>"#;
        match parse_model(doc) {
            Err(ModelError::DuplicateName { category, name, row, .. }) => {
                assert_eq!(category, "joint");
                assert_eq!(name, "j");
                assert!(row > 1);
            }
            other => panic!("expected duplicate-name error, got {other:?}"),
        }
    }

    #[test]
    fn empty_worldbody_is_valid() {
        let spec = parse_model("<mujoco><worldbody/></mujoco>").unwrap();
        assert!(spec.worldbody.children.is_empty());
        assert!(spec.worldbody.geoms.is_empty());
    }

    #[test]
    fn unknown_element_is_error_with_location() {
        let doc = "<mujoco>\n  <worldbody>\n    <tendon name=\"t\"/>\n  </worldbody>\n</mujoco>";
        match parse_model(doc) {
            Err(ModelError::UnknownElement { name, row, .. }) => {
                assert_eq!(name, "tendon");
                assert_eq!(row, 3);
            }
            other => panic!("expected unknown-element error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_attribute_is_error() {
        let doc = r#"<mujoco><worldbody><geom name="g" size=".1" friction="1"/></worldbody></mujoco>"#;
        assert!(matches!(
            parse_model(doc),
            Err(ModelError::UnknownAttribute { .. })
        ));
    }

    #[test]
    fn dangling_actuator_reference_is_error() {
        let doc = r#"
<mujoco>
  <worldbody>
    <body name="a" pos="0 0 0">
      <joint name="j" type="hinge" axis="0 1 0"/>
      <geom name="g" size=".1" mass="1"/>
    </body>
  </worldbody>
  <actuator>
    <motor name="m" joint="nope" gear="1"/>
  </actuator>
</mujoco>"#;
        match parse_model(doc) {
            Err(ModelError::DanglingReference { category, name, .. }) => {
                assert_eq!(category, "joint");
                assert_eq!(name, "nope");
            }
            other => panic!("expected dangling-reference error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_syntax_reports_position() {
        match parse_model("<mujoco><worldbody></mujoco>") {
            Err(ModelError::Syntax { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_is_error() {
        let doc = r#"<mujoco><option timestep="fast"/><worldbody/></mujoco>"#;
        assert!(matches!(parse_model(doc), Err(ModelError::BadValue { .. })));
    }
}
