//! Planar continuous-control benchmark suite.
//!
//! The crate bundles everything needed to run seeded, reproducible control
//! experiments on planar articulated systems:
//!
//! - [`mjcf`]: a strict declarative model format with name registries.
//! - [`physics`]: generalized-coordinate forward dynamics and integrators.
//! - [`rewards`]: the bounded `tolerance()` shaping calculus.
//! - [`env`]: the episodic environment contract (specs, time steps,
//!   observation wrappers).
//! - [`suite`]: the task catalog (pendulum, acrobot, cart-pole family,
//!   point-mass, reacher, swimmers and LQR).
//! - [`lqr`]: linear extraction and a discrete Riccati solver.
//! - [`agents`]: random, LQR-optimal and DDPG baselines.
//! - [`render`]: a deterministic software rasterizer for pixel
//!   observations.
//! - [`bench`]: the episode runner, learning curves and CSV/SVG emission.

pub mod agents;
pub mod bench;
pub mod env;
pub mod lqr;
pub mod mjcf;
pub mod physics;
pub mod render;
pub mod rewards;
pub mod suite;

pub use env::{ArraySpec, DType, Environment, Observation, StepType, TimeStep};
pub use mjcf::{compile, parse_model, serialize_model, CompiledModel, ModelSpec};
pub use physics::{quat_to_mat, Physics};
