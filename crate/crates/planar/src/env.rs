//! Episodic environment contract: array specs, time steps, the
//! [`Environment`] trait and observation wrappers.
//!
//! Episodes are fixed length (1000 control steps by default) with no early
//! termination; the LQR domain is the one exception and signals a terminal
//! state through `discount = 0`. Every other task returns `discount = 1`
//! on every step including the last, and rewards in the unit interval.
//!
//! Agents that prefer a discounted objective use `γ = exp(-h/τ)` for a
//! control timestep `h` and time constant `τ`; see
//! [`discount_for_time_constant`].

use indexmap::IndexMap;
use thiserror::Error;

use crate::render::FrameBuffer;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action has wrong shape: expected {expected}, got {got}")]
    WrongActionShape { expected: usize, got: usize },
    #[error("step() called before reset() or after the episode ended")]
    EpisodeOver,
    #[error("environment does not support rendering")]
    RenderUnsupported,
    #[error("unknown camera `{0}`")]
    UnknownCamera(String),
    #[error("physics error: {0}")]
    Physics(#[from] crate::physics::PhysicsError),
    #[error("wrapper requires observation key `{0}`")]
    MissingObservation(String),
}

/// Discount factor implied by a control timestep and a time constant:
/// `γ = exp(-h/τ)`. As `τ → ∞`, `γ → 1` and the discounted objective
/// matches the average-return objective the suite reports.
pub fn discount_for_time_constant(timestep: f64, tau: f64) -> f64 {
    (-timestep / tau).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F64,
    U8,
}

/// Shape/bounds description of one action or observation array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub minimum: Option<Vec<f64>>,
    pub maximum: Option<Vec<f64>>,
}

impl ArraySpec {
    pub fn unbounded(name: &str, shape: Vec<usize>) -> Self {
        Self {
            name: name.to_string(),
            shape,
            dtype: DType::F64,
            minimum: None,
            maximum: None,
        }
    }

    /// Uniformly bounded f64 array (e.g. the `[-1, 1]` action box).
    pub fn bounded(name: &str, shape: Vec<usize>, minimum: f64, maximum: f64) -> Self {
        assert!(minimum <= maximum, "spec bounds inverted");
        let n: usize = shape.iter().product();
        Self {
            name: name.to_string(),
            shape,
            dtype: DType::F64,
            minimum: Some(vec![minimum; n]),
            maximum: Some(vec![maximum; n]),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_bounded(&self) -> bool {
        self.minimum.is_some() && self.maximum.is_some()
    }

    /// Clips `action` into the spec bounds (no-op when unbounded).
    pub fn clip(&self, action: &[f64]) -> Vec<f64> {
        let mut out = action.to_vec();
        if let (Some(lo), Some(hi)) = (&self.minimum, &self.maximum) {
            for ((x, l), h) in out.iter_mut().zip(lo).zip(hi) {
                *x = x.clamp(*l, *h);
            }
        }
        out
    }
}

/// One observation array; pixel observations use the byte variant.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsArray {
    F64(Vec<f64>),
    U8 { shape: Vec<usize>, data: Vec<u8> },
}

impl ObsArray {
    pub fn as_f64(&self) -> Option<&[f64]> {
        match self {
            ObsArray::F64(v) => Some(v),
            ObsArray::U8 { .. } => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ObsArray::F64(v) => v.len(),
            ObsArray::U8 { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered name -> array map; key order is fixed per task.
pub type Observation = IndexMap<String, ObsArray>;

/// Concatenates the f64 entries of an observation in map order. This is
/// the flattening agents use as network input; byte arrays (pixels) are
/// skipped.
pub fn flatten_observation(obs: &Observation) -> Vec<f64> {
    let mut out = Vec::new();
    for value in obs.values() {
        if let ObsArray::F64(v) = value {
            out.extend_from_slice(v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepType {
    First,
    Mid,
    Last,
}

/// One transition record.
///
/// `FIRST` steps carry no reward or discount (a reward belongs to a
/// transition); every subsequent step carries both.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStep {
    pub step_type: StepType,
    pub reward: Option<f64>,
    pub discount: Option<f64>,
    pub observation: Observation,
}

impl TimeStep {
    pub fn first(&self) -> bool {
        self.step_type == StepType::First
    }

    pub fn mid(&self) -> bool {
        self.step_type == StepType::Mid
    }

    pub fn last(&self) -> bool {
        self.step_type == StepType::Last
    }
}

/// An episodic environment. Single ownership; run seeded copies for
/// parallelism.
pub trait Environment {
    /// Starts a new episode and returns its `FIRST` step.
    fn reset(&mut self) -> TimeStep;

    /// Advances one control step. Out-of-bounds actions are clipped into
    /// the action spec; a wrong shape is an error.
    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError>;

    fn action_spec(&self) -> &ArraySpec;

    fn observation_spec(&self) -> &IndexMap<String, ArraySpec>;

    /// Renders the current state, if this environment has a renderer.
    fn render(&self, _width: u32, _height: u32) -> Result<FrameBuffer, EnvError> {
        Err(EnvError::RenderUnsupported)
    }

    fn supports_render(&self) -> bool {
        false
    }
}

pub const PIXELS_KEY: &str = "pixels";

/// Adds (or substitutes) a rendered `"pixels"` observation.
pub struct PixelWrapper {
    inner: Box<dyn Environment>,
    width: u32,
    height: u32,
    pixels_only: bool,
    obs_spec: IndexMap<String, ArraySpec>,
}

/// Wraps `env` so observations carry `"pixels"` of shape
/// `[height, width, 3]`; with `pixels_only` the feature keys are removed.
pub fn wrap_pixels(
    env: Box<dyn Environment>,
    width: u32,
    height: u32,
    pixels_only: bool,
) -> Result<PixelWrapper, EnvError> {
    if !env.supports_render() {
        return Err(EnvError::RenderUnsupported);
    }
    let mut obs_spec = IndexMap::new();
    if !pixels_only {
        obs_spec = env.observation_spec().clone();
    }
    obs_spec.insert(
        PIXELS_KEY.to_string(),
        ArraySpec {
            name: PIXELS_KEY.to_string(),
            shape: vec![height as usize, width as usize, 3],
            dtype: DType::U8,
            minimum: Some(vec![0.0]),
            maximum: Some(vec![255.0]),
        },
    );
    Ok(PixelWrapper {
        inner: env,
        width,
        height,
        pixels_only,
        obs_spec,
    })
}

impl PixelWrapper {
    fn attach_pixels(&self, mut ts: TimeStep) -> Result<TimeStep, EnvError> {
        if self.pixels_only {
            ts.observation.clear();
        }
        let frame = self.inner.render(self.width, self.height)?;
        ts.observation.insert(
            PIXELS_KEY.to_string(),
            ObsArray::U8 {
                shape: vec![frame.height as usize, frame.width as usize, 3],
                data: frame.data,
            },
        );
        Ok(ts)
    }
}

impl Environment for PixelWrapper {
    fn reset(&mut self) -> TimeStep {
        let ts = self.inner.reset();
        self.attach_pixels(ts)
            .expect("render support checked at construction")
    }

    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        let ts = self.inner.step(action)?;
        self.attach_pixels(ts)
    }

    fn action_spec(&self) -> &ArraySpec {
        self.inner.action_spec()
    }

    fn observation_spec(&self) -> &IndexMap<String, ArraySpec> {
        &self.obs_spec
    }

    fn render(&self, width: u32, height: u32) -> Result<FrameBuffer, EnvError> {
        self.inner.render(width, height)
    }

    fn supports_render(&self) -> bool {
        true
    }
}

/// Stacks the last `depth` pixel frames along the channel axis, so an
/// `[h, w, 3]` stream becomes `[h, w, 3 * depth]`. The first frame of an
/// episode is replicated to fill the stack.
pub struct FrameStack {
    inner: Box<dyn Environment>,
    depth: usize,
    frames: Vec<Vec<u8>>,
    obs_spec: IndexMap<String, ArraySpec>,
}

impl FrameStack {
    pub fn new(inner: Box<dyn Environment>, depth: usize) -> Result<Self, EnvError> {
        let spec = inner
            .observation_spec()
            .get(PIXELS_KEY)
            .ok_or_else(|| EnvError::MissingObservation(PIXELS_KEY.to_string()))?;
        let mut shape = spec.shape.clone();
        let channels = shape.pop().unwrap_or(0) * depth;
        shape.push(channels);
        let mut obs_spec = inner.observation_spec().clone();
        obs_spec.insert(
            PIXELS_KEY.to_string(),
            ArraySpec {
                name: PIXELS_KEY.to_string(),
                shape,
                dtype: DType::U8,
                minimum: Some(vec![0.0]),
                maximum: Some(vec![255.0]),
            },
        );
        Ok(Self {
            inner,
            depth,
            frames: Vec::new(),
            obs_spec,
        })
    }

    fn stack(&mut self, mut ts: TimeStep) -> Result<TimeStep, EnvError> {
        let (shape, data) = match ts.observation.get(PIXELS_KEY) {
            Some(ObsArray::U8 { shape, data }) => (shape.clone(), data.clone()),
            _ => return Err(EnvError::MissingObservation(PIXELS_KEY.to_string())),
        };
        if self.frames.is_empty() {
            self.frames = vec![data.clone(); self.depth];
        } else {
            self.frames.remove(0);
            self.frames.push(data);
        }
        let (h, w, c) = (shape[0], shape[1], shape[2]);
        // Interleave per pixel: oldest frame's channels first.
        let mut stacked = vec![0u8; h * w * c * self.depth];
        for px in 0..h * w {
            for (f, frame) in self.frames.iter().enumerate() {
                let src = &frame[px * c..(px + 1) * c];
                let dst = px * c * self.depth + f * c;
                stacked[dst..dst + c].copy_from_slice(src);
            }
        }
        ts.observation.insert(
            PIXELS_KEY.to_string(),
            ObsArray::U8 {
                shape: vec![h, w, c * self.depth],
                data: stacked,
            },
        );
        Ok(ts)
    }
}

impl Environment for FrameStack {
    fn reset(&mut self) -> TimeStep {
        self.frames.clear();
        let ts = self.inner.reset();
        self.stack(ts).expect("inner env must produce pixels")
    }

    fn step(&mut self, action: &[f64]) -> Result<TimeStep, EnvError> {
        let ts = self.inner.step(action)?;
        self.stack(ts)
    }

    fn action_spec(&self) -> &ArraySpec {
        self.inner.action_spec()
    }

    fn observation_spec(&self) -> &IndexMap<String, ArraySpec> {
        &self.obs_spec
    }

    fn supports_render(&self) -> bool {
        self.inner.supports_render()
    }

    fn render(&self, width: u32, height: u32) -> Result<FrameBuffer, EnvError> {
        self.inner.render(width, height)
    }
}
