//! Deterministic software rasterizer for planar scenes.
//!
//! Orthographic projection of the x-z plane: geoms are drawn in document
//! order (painter's algorithm) over a flat background, sites on top as
//! markers. No antialiasing, so identical states produce identical byte
//! buffers.

use thiserror::Error;

use crate::mjcf::GeomKind;
use crate::physics::Physics;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
}

/// Row-major RGB byte framebuffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height * 3) as usize],
        }
    }

    #[inline]
    fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let idx = ((y * self.width + x) * 3) as usize;
        self.data[idx..idx + 3].copy_from_slice(&rgb);
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let idx = ((y * self.width + x) * 3) as usize;
        [self.data[idx], self.data[idx + 1], self.data[idx + 2]]
    }

    /// Plain PPM (P6) encoding of the buffer.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

const BACKGROUND: [u8; 3] = [24, 28, 38];

/// Scaling applied to geom colors when reward visualisation is on: the
/// brightness tracks the current reward linearly.
fn tint_factor(reward: f64) -> f32 {
    (0.3 + 0.7 * reward.clamp(0.0, 1.0)) as f32
}

fn shade(rgba: [f32; 4], tint: Option<f64>) -> [u8; 3] {
    let f = tint.map_or(1.0, tint_factor);
    let to_byte = |c: f32| (c * f * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(rgba[0]), to_byte(rgba[1]), to_byte(rgba[2])]
}

/// Renders the current, synchronized physics state through the named
/// camera. With `reward_tint = Some(r)` geom colors scale linearly with
/// `r`; the background is unaffected.
pub fn render_frame(
    physics: &Physics,
    camera: &str,
    width: u32,
    height: u32,
    reward_tint: Option<f64>,
) -> Result<FrameBuffer, RenderError> {
    let model = physics.model();
    let cam = model
        .camera(camera)
        .ok_or_else(|| RenderError::UnknownCamera(camera.to_string()))?;

    let mut frame = FrameBuffer::new(width, height);
    let extent_x = cam.extent;
    let extent_z = cam.extent * height as f64 / width as f64;
    let px = extent_x / width as f64;

    // Precompute world-space shape parameters.
    enum Shape {
        Circle {
            c: (f64, f64),
            r: f64,
        },
        Segment {
            a: (f64, f64),
            b: (f64, f64),
            r: f64,
        },
        OrientedBox {
            c: (f64, f64),
            cos: f64,
            sin: f64,
            hx: f64,
            hz: f64,
        },
        HalfSpace {
            z: f64,
        },
    }

    let mut shapes: Vec<(Shape, [u8; 3])> = Vec::new();
    for (g, geom) in model.geoms.iter().enumerate() {
        let p = physics.geom_xpos(g);
        let color = shade(geom.rgba, reward_tint);
        let shape = match geom.kind {
            GeomKind::Plane => Shape::HalfSpace { z: p.z },
            GeomKind::Sphere => Shape::Circle {
                c: (p.x, p.z),
                r: geom.radius(),
            },
            GeomKind::Capsule => {
                let axis = physics.geom_world_axis(g);
                let a = p - geom.half_len * axis;
                let b = p + geom.half_len * axis;
                Shape::Segment {
                    a: (a.x, a.z),
                    b: (b.x, b.z),
                    r: geom.radius(),
                }
            }
            GeomKind::Box => {
                let rot = physics.body_rot(geom.body);
                Shape::OrientedBox {
                    c: (p.x, p.z),
                    cos: rot.cos(),
                    sin: rot.sin(),
                    hx: geom.size[0],
                    hz: geom.size[2],
                }
            }
        };
        shapes.push((shape, color));
    }
    for (s, site) in model.sites.iter().enumerate() {
        let p = physics.site_xpos(s);
        shapes.push((
            Shape::Circle {
                c: (p.x, p.z),
                r: site.size.max(px),
            },
            shade(site.rgba, reward_tint),
        ));
    }

    for iy in 0..height {
        // Screen up is +z.
        let wz = cam.center.z + (0.5 - (iy as f64 + 0.5) / height as f64) * extent_z;
        for ix in 0..width {
            let wx = cam.center.x + ((ix as f64 + 0.5) / width as f64 - 0.5) * extent_x;
            let mut rgb = BACKGROUND;
            for (shape, color) in &shapes {
                let inside = match shape {
                    Shape::Circle { c, r } => {
                        let (dx, dz) = (wx - c.0, wz - c.1);
                        dx * dx + dz * dz <= r * r
                    }
                    Shape::Segment { a, b, r } => {
                        point_segment_dist2(wx, wz, *a, *b) <= r * r
                    }
                    Shape::OrientedBox { c, cos, sin, hx, hz } => {
                        // Into the geom frame: inverse y-rotation.
                        let (dx, dz) = (wx - c.0, wz - c.1);
                        let lx = cos * dx - sin * dz;
                        let lz = sin * dx + cos * dz;
                        lx.abs() <= *hx && lz.abs() <= *hz
                    }
                    Shape::HalfSpace { z } => wz <= *z,
                };
                if inside {
                    rgb = *color;
                }
            }
            frame.put(ix, iy, rgb);
        }
    }
    Ok(frame)
}

fn point_segment_dist2(px: f64, pz: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, abz) = (b.0 - a.0, b.1 - a.1);
    let (apx, apz) = (px - a.0, pz - a.1);
    let len2 = abx * abx + abz * abz;
    let t = if len2 > 0.0 {
        ((apx * abx + apz * abz) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dz) = (apx - t * abx, apz - t * abz);
    dx * dx + dz * dz
}
