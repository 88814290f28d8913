//! Minimal dense-network substrate: fully connected layers, ReLU/tanh
//! activations, manual backprop and Adam.
//!
//! Everything is f32 with batch samples as matrix columns. The layer code
//! is deliberately plain: forward caches per-layer inputs and
//! pre-activations, backward walks them in reverse.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

fn apply(activation: Activation, z: &mut DMatrix<f32>) {
    match activation {
        Activation::Linear => {}
        Activation::Relu => z.apply(|x| *x = x.max(0.0)),
        Activation::Tanh => z.apply(|x| *x = x.tanh()),
    }
}

/// `dy * act'(z)` expressed through the activation output `y`.
fn backprop_activation(activation: Activation, y: &DMatrix<f32>, dy: &DMatrix<f32>) -> DMatrix<f32> {
    match activation {
        Activation::Linear => dy.clone(),
        Activation::Relu => dy.zip_map(y, |d, v| if v > 0.0 { d } else { 0.0 }),
        Activation::Tanh => dy.zip_map(y, |d, v| d * (1.0 - v * v)),
    }
}

/// Row sums accumulated column by column (cache-friendly for the
/// column-major layout).
fn row_sums(m: &DMatrix<f32>) -> DVector<f32> {
    let mut out = DVector::zeros(m.nrows());
    for col in m.column_iter() {
        out += col;
    }
    out
}

/// One dense layer `y = act(W x + b)`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: DMatrix<f32>,
    pub b: DVector<f32>,
    pub activation: Activation,
}

impl Dense {
    /// Fan-in scaled uniform initialisation.
    pub fn init(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize, activation: Activation) -> Self {
        let bound = 1.0 / (inputs as f32).sqrt();
        Self::init_with_bound(rng, inputs, outputs, activation, bound)
    }

    pub fn init_with_bound(
        rng: &mut ChaCha8Rng,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        bound: f32,
    ) -> Self {
        let w = DMatrix::from_fn(outputs, inputs, |_, _| rng.random_range(-bound..bound));
        let b = DVector::from_fn(outputs, |_, _| rng.random_range(-bound..bound));
        Self { w, b, activation }
    }

    pub fn forward(&self, x: &DMatrix<f32>) -> DMatrix<f32> {
        let mut z = &self.w * x;
        for mut col in z.column_iter_mut() {
            col += &self.b;
        }
        apply(self.activation, &mut z);
        z
    }

    /// Gradient step backwards through this layer given its cached input
    /// and output: returns `(dW, db, dx)`.
    fn backward(
        &self,
        input: &DMatrix<f32>,
        output: &DMatrix<f32>,
        dy: &DMatrix<f32>,
    ) -> (DMatrix<f32>, DVector<f32>, DMatrix<f32>) {
        let dz = backprop_activation(self.activation, output, dy);
        let dw = &dz * input.transpose();
        let db = row_sums(&dz);
        let dx = self.w.transpose() * &dz;
        (dw, db, dx)
    }
}

/// Parameter-shaped gradient (or Adam moment) storage for one layer.
#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub w: DMatrix<f32>,
    pub b: DVector<f32>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &Dense) -> Self {
        Self {
            w: DMatrix::zeros(layer.w.nrows(), layer.w.ncols()),
            b: DVector::zeros(layer.b.nrows()),
        }
    }

    pub fn clamp(&mut self, limit: f32) {
        self.w.apply(|x| *x = x.clamp(-limit, limit));
        self.b.apply(|x| *x = x.clamp(-limit, limit));
    }
}

/// Plain multi-layer perceptron.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Cached activations from [`Mlp::forward_cached`]: the input to each
/// layer plus every layer output.
pub struct MlpCache {
    inputs: Vec<DMatrix<f32>>,
    outputs: Vec<DMatrix<f32>>,
}

impl MlpCache {
    pub fn output(&self) -> &DMatrix<f32> {
        self.outputs.last().expect("non-empty network")
    }
}

impl Mlp {
    /// Hidden layers are ReLU; the output layer uses `output_activation`.
    /// The final layer is initialised in `±final_bound` so initial outputs
    /// start near zero.
    pub fn new(
        rng: &mut ChaCha8Rng,
        sizes: &[usize],
        output_activation: Activation,
        final_bound: f32,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut layers = Vec::new();
        for i in 0..sizes.len() - 1 {
            let last = i == sizes.len() - 2;
            let activation = if last {
                output_activation
            } else {
                Activation::Relu
            };
            layers.push(if last {
                Dense::init_with_bound(rng, sizes[i], sizes[i + 1], activation, final_bound)
            } else {
                Dense::init(rng, sizes[i], sizes[i + 1], activation)
            });
        }
        Self { layers }
    }

    pub fn forward(&self, x: &DMatrix<f32>) -> DMatrix<f32> {
        let mut y = x.clone();
        for layer in &self.layers {
            y = layer.forward(&y);
        }
        y
    }

    pub fn forward_cached(&self, x: &DMatrix<f32>) -> MlpCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut y = x.clone();
        for layer in &self.layers {
            inputs.push(y.clone());
            y = layer.forward(&y);
            outputs.push(y.clone());
        }
        MlpCache { inputs, outputs }
    }

    /// Backpropagates `dy` (gradient w.r.t. the network output) through
    /// the cached pass; returns per-layer parameter gradients and the
    /// gradient w.r.t. the network input.
    pub fn backward(&self, cache: &MlpCache, dy: &DMatrix<f32>) -> (Vec<DenseGrad>, DMatrix<f32>) {
        let mut grads: Vec<Option<DenseGrad>> = (0..self.layers.len()).map(|_| None).collect();
        let mut upstream = dy.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (dw, db, dx) = layer.backward(&cache.inputs[i], &cache.outputs[i], &upstream);
            grads[i] = Some(DenseGrad { w: dw, b: db });
            upstream = dx;
        }
        (grads.into_iter().map(|g| g.unwrap()).collect(), upstream)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.len() + l.b.len())
            .sum()
    }

    /// Polyak update: `target <- (1 - tau) target + tau self`.
    pub fn soft_update_into(&self, target: &mut Mlp, tau: f32) {
        for (src, dst) in self.layers.iter().zip(&mut target.layers) {
            dst.w.zip_apply(&src.w, |t, s| *t = (1.0 - tau) * *t + tau * s);
            dst.b.zip_apply(&src.b, |t, s| *t = (1.0 - tau) * *t + tau * s);
        }
    }
}

/// State-action value network: the observation passes through the first
/// layer, the action joins through its own linear map at the second
/// layer, and a linear head reads out `Q`.
#[derive(Debug, Clone)]
pub struct Critic {
    pub obs_layer: Dense,
    pub joint_layer: Dense,
    pub action_layer: DMatrix<f32>,
    pub head: Dense,
}

pub struct CriticCache {
    obs: DMatrix<f32>,
    action: DMatrix<f32>,
    h1: DMatrix<f32>,
    h2: DMatrix<f32>,
    q: DMatrix<f32>,
}

impl CriticCache {
    pub fn q(&self) -> &DMatrix<f32> {
        &self.q
    }
}

/// Critic parameter gradients (same shapes as the fields).
pub struct CriticGrad {
    pub obs_layer: DenseGrad,
    pub joint_layer: DenseGrad,
    pub action_layer: DMatrix<f32>,
    pub head: DenseGrad,
}

impl Critic {
    pub fn new(rng: &mut ChaCha8Rng, obs_dim: usize, act_dim: usize, hidden: (usize, usize)) -> Self {
        let (h1, h2) = hidden;
        let action_bound = 1.0 / (act_dim as f32).sqrt();
        Self {
            obs_layer: Dense::init(rng, obs_dim, h1, Activation::Relu),
            joint_layer: Dense::init(rng, h1, h2, Activation::Relu),
            action_layer: DMatrix::from_fn(h2, act_dim, |_, _| {
                rng.random_range(-action_bound..action_bound)
            }),
            head: Dense::init_with_bound(rng, h2, 1, Activation::Linear, 3e-3),
        }
    }

    pub fn forward(&self, obs: &DMatrix<f32>, action: &DMatrix<f32>) -> DMatrix<f32> {
        self.forward_cached(obs, action).q
    }

    pub fn forward_cached(&self, obs: &DMatrix<f32>, action: &DMatrix<f32>) -> CriticCache {
        let h1 = self.obs_layer.forward(obs);
        let mut z2 = &self.joint_layer.w * &h1 + &self.action_layer * action;
        for mut col in z2.column_iter_mut() {
            col += &self.joint_layer.b;
        }
        apply(Activation::Relu, &mut z2);
        let q = self.head.forward(&z2);
        CriticCache {
            obs: obs.clone(),
            action: action.clone(),
            h1,
            h2: z2,
            q,
        }
    }

    /// Backward pass from `dq` (gradient w.r.t. Q output). Returns the
    /// parameter gradients and the gradient w.r.t. the action input.
    pub fn backward(&self, cache: &CriticCache, dq: &DMatrix<f32>) -> (CriticGrad, DMatrix<f32>) {
        let (head_dw, head_db, dh2) = self.head.backward(&cache.h2, &cache.q, dq);
        let dz2 = backprop_activation(Activation::Relu, &cache.h2, &dh2);
        let joint_dw = &dz2 * cache.h1.transpose();
        let joint_db = row_sums(&dz2);
        let action_dw = &dz2 * cache.action.transpose();
        let d_action = self.action_layer.transpose() * &dz2;
        let dh1 = self.joint_layer.w.transpose() * &dz2;
        let dz1 = backprop_activation(Activation::Relu, &cache.h1, &dh1);
        let obs_dw = &dz1 * cache.obs.transpose();
        let obs_db = row_sums(&dz1);
        (
            CriticGrad {
                obs_layer: DenseGrad {
                    w: obs_dw,
                    b: obs_db,
                },
                joint_layer: DenseGrad {
                    w: joint_dw,
                    b: joint_db,
                },
                action_layer: action_dw,
                head: DenseGrad {
                    w: head_dw,
                    b: head_db,
                },
            },
            d_action,
        )
    }

    /// Gradient of `sum(dq . Q)` w.r.t. the action input only, skipping
    /// the parameter gradients (used by the policy update, where the
    /// critic's own parameters are held fixed).
    pub fn action_gradient(&self, cache: &CriticCache, dq: &DMatrix<f32>) -> DMatrix<f32> {
        let dh2 = self.head.w.transpose() * dq;
        let dz2 = backprop_activation(Activation::Relu, &cache.h2, &dh2);
        self.action_layer.transpose() * dz2
    }

    pub fn soft_update_into(&self, target: &mut Critic, tau: f32) {
        let blend = |dst: &mut DMatrix<f32>, src: &DMatrix<f32>| {
            dst.zip_apply(src, |t, s| *t = (1.0 - tau) * *t + tau * s);
        };
        blend(&mut target.obs_layer.w, &self.obs_layer.w);
        blend(&mut target.joint_layer.w, &self.joint_layer.w);
        blend(&mut target.action_layer, &self.action_layer);
        blend(&mut target.head.w, &self.head.w);
        target
            .obs_layer
            .b
            .zip_apply(&self.obs_layer.b, |t, s| *t = (1.0 - tau) * *t + tau * s);
        target
            .joint_layer
            .b
            .zip_apply(&self.joint_layer.b, |t, s| *t = (1.0 - tau) * *t + tau * s);
        target
            .head
            .b
            .zip_apply(&self.head.b, |t, s| *t = (1.0 - tau) * *t + tau * s);
    }
}

/// Adam state for one tensor.
#[derive(Debug, Clone)]
struct AdamSlot {
    m: DMatrix<f32>,
    v: DMatrix<f32>,
}

/// Adam optimiser over a fixed list of tensors; `step` order must match
/// the construction order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub t: u64,
    slots: Vec<AdamSlot>,
}

impl Adam {
    pub fn new(lr: f32, shapes: &[(usize, usize)]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            slots: shapes
                .iter()
                .map(|&(r, c)| AdamSlot {
                    m: DMatrix::zeros(r, c),
                    v: DMatrix::zeros(r, c),
                })
                .collect(),
        }
    }

    /// Moment tensors in construction order, for checkpointing.
    pub(crate) fn slots(&self) -> impl Iterator<Item = (&[f32], &[f32])> {
        self.slots.iter().map(|s| (s.m.as_slice(), s.v.as_slice()))
    }

    pub(crate) fn slots_mut(&mut self) -> impl Iterator<Item = (&mut [f32], &mut [f32])> {
        self.slots
            .iter_mut()
            .map(|s| (s.m.as_mut_slice(), s.v.as_mut_slice()))
    }

    /// Applies one Adam update. `tensors` and `grads` must line up with
    /// the shapes given at construction. Pass `scale = -1.0` to ascend.
    pub fn step(&mut self, tensors: Vec<&mut [f32]>, grads: Vec<&[f32]>, scale: f32) {
        assert_eq!(tensors.len(), self.slots.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((params, grad), slot) in tensors.into_iter().zip(grads).zip(&mut self.slots) {
            debug_assert_eq!(params.len(), slot.m.len());
            debug_assert_eq!(grad.len(), slot.m.len());
            let m = slot.m.as_mut_slice();
            let v = slot.v.as_mut_slice();
            for (((p, &gr), m), v) in params
                .iter_mut()
                .zip(grad.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let g = scale * gr;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_weight_net_outputs_zero() {
        let mut net = Mlp::new(&mut rng(0), &[3, 4, 2], Activation::Linear, 3e-3);
        for layer in &mut net.layers {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let x = DMatrix::from_element(3, 5, 1.7);
        assert!(net.forward(&x).abs().max() == 0.0);
    }

    #[test]
    fn single_linear_layer_is_matvec() {
        let mut net = Mlp::new(&mut rng(1), &[3, 2], Activation::Linear, 0.5);
        net.layers[0].b.fill(0.0);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let y = net.forward(&x);
        let expected = &net.layers[0].w * &x;
        assert!((y - expected).abs().max() < 1e-7);
    }

    /// f64 mirror of an [`Mlp`] forward pass, for finite-difference
    /// reference gradients free of f32 cancellation noise. `weights[li]`
    /// is row-major `[out][in]`.
    fn forward_sum_f64(
        weights: &[Vec<f64>],
        biases: &[Vec<f64>],
        activations: &[Activation],
        x: &[Vec<f64>],
    ) -> f64 {
        let mut total = 0.0;
        for sample in x {
            let mut a = sample.clone();
            for li in 0..weights.len() {
                let outs = biases[li].len();
                let ins = a.len();
                let mut z = biases[li].clone();
                for (o, zo) in z.iter_mut().enumerate() {
                    for (i, ai) in a.iter().enumerate() {
                        *zo += weights[li][o * ins + i] * ai;
                    }
                }
                for zo in &mut z {
                    *zo = match activations[li] {
                        Activation::Linear => *zo,
                        Activation::Relu => zo.max(0.0),
                        Activation::Tanh => zo.tanh(),
                    };
                }
                a = z;
            }
            total += a.iter().sum::<f64>();
        }
        total
    }

    fn mirror_f64(net: &Mlp) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Activation>) {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut activations = Vec::new();
        for layer in &net.layers {
            let (rows, cols) = (layer.w.nrows(), layer.w.ncols());
            let mut w = vec![0.0f64; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    w[r * cols + c] = layer.w[(r, c)] as f64;
                }
            }
            weights.push(w);
            biases.push(layer.b.iter().map(|&b| b as f64).collect());
            activations.push(layer.activation);
        }
        (weights, biases, activations)
    }

    /// Central finite differences (f64 reference) on L = sum(outputs)
    /// over every weight and bias; returns the number of perturbations.
    fn mlp_fd_check(sizes: &[usize], activation: Activation, seed: u64) -> usize {
        let mut r = rng(seed);
        let net = Mlp::new(&mut r, sizes, activation, 0.3);
        let batch = 4;
        let x32 = DMatrix::from_fn(sizes[0], batch, |_, _| r.random_range(-1.0f32..1.0));
        let x64: Vec<Vec<f64>> = (0..batch)
            .map(|c| x32.column(c).iter().map(|&v| v as f64).collect())
            .collect();
        let cache = net.forward_cached(&x32);
        let dy = DMatrix::from_element(*sizes.last().unwrap(), batch, 1.0);
        let (grads, _) = net.backward(&cache, &dy);
        let (weights, biases, activations) = mirror_f64(&net);

        let check = |fd: f64, analytic: f64, what: String| {
            let denom = fd.abs().max(analytic.abs()).max(1e-3);
            assert!(
                (fd - analytic).abs() / denom < 1e-4,
                "{what}: fd {fd} vs analytic {analytic}"
            );
        };
        let mut checked = 0;
        let eps = 1e-6f64;
        for li in 0..net.layers.len() {
            let rows = net.layers[li].w.nrows();
            let cols = net.layers[li].w.ncols();
            for idx in 0..net.layers[li].w.len() {
                // nalgebra stores column-major; map to the row-major mirror.
                let (row, col) = (idx % rows, idx / rows);
                let flat = row * cols + col;
                let mut wp = weights.clone();
                wp[li][flat] += eps;
                let mut wm = weights.clone();
                wm[li][flat] -= eps;
                let fd = (forward_sum_f64(&wp, &biases, &activations, &x64)
                    - forward_sum_f64(&wm, &biases, &activations, &x64))
                    / (2.0 * eps);
                check(fd, grads[li].w.as_slice()[idx] as f64, format!("layer {li} w[{idx}]"));
                checked += 1;
            }
            for idx in 0..net.layers[li].b.len() {
                let mut bp = biases.clone();
                bp[li][idx] += eps;
                let mut bm = biases.clone();
                bm[li][idx] -= eps;
                let fd = (forward_sum_f64(&weights, &bp, &activations, &x64)
                    - forward_sum_f64(&weights, &bm, &activations, &x64))
                    / (2.0 * eps);
                check(fd, grads[li].b.as_slice()[idx] as f64, format!("layer {li} b[{idx}]"));
                checked += 1;
            }
        }
        checked
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        // A 4-8-2 net has 58 parameters; two nets give > 100 perturbations.
        let n = mlp_fd_check(&[4, 8, 2], Activation::Linear, 11)
            + mlp_fd_check(&[4, 8, 2], Activation::Tanh, 12);
        assert!(n >= 100, "only {n} perturbations checked");
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let mut r = rng(3);
        let critic = Critic::new(&mut r, 3, 2, (8, 6));
        let obs = DMatrix::from_fn(3, 4, |_, _| r.random_range(-1.0f32..1.0));
        let act = DMatrix::from_fn(2, 4, |_, _| r.random_range(-1.0f32..1.0));
        let cache = critic.forward_cached(&obs, &act);
        let dq = DMatrix::from_element(1, 4, 1.0);
        let (grads, d_action) = critic.backward(&cache, &dq);

        let eps = 1e-3f32;
        // Spot-check each tensor family.
        for idx in 0..critic.obs_layer.w.len().min(20) {
            let mut plus = critic.clone();
            plus.obs_layer.w.as_mut_slice()[idx] += eps;
            let mut minus = critic.clone();
            minus.obs_layer.w.as_mut_slice()[idx] -= eps;
            let fd = (plus.forward(&obs, &act).sum() - minus.forward(&obs, &act).sum())
                / (2.0 * eps);
            let analytic = grads.obs_layer.w.as_slice()[idx];
            assert!(
                (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-4) < 1e-2,
                "obs w[{idx}]: {fd} vs {analytic}"
            );
        }
        for idx in 0..critic.action_layer.len() {
            let mut plus = critic.clone();
            plus.action_layer.as_mut_slice()[idx] += eps;
            let mut minus = critic.clone();
            minus.action_layer.as_mut_slice()[idx] -= eps;
            let fd = (plus.forward(&obs, &act).sum() - minus.forward(&obs, &act).sum())
                / (2.0 * eps);
            let analytic = grads.action_layer.as_slice()[idx];
            assert!(
                (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-4) < 1e-2,
                "action w[{idx}]: {fd} vs {analytic}"
            );
        }
        // d_action via FD on the action input.
        for i in 0..2 {
            let mut plus = act.clone();
            plus[(i, 0)] += eps;
            let mut minus = act.clone();
            minus[(i, 0)] -= eps;
            let fd = (critic.forward(&obs, &plus).sum() - critic.forward(&obs, &minus).sum())
                / (2.0 * eps);
            let analytic = d_action[(i, 0)];
            assert!(
                (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-4) < 1e-2,
                "d_action[{i}]: {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut params = vec![1.0f32, -2.0, 3.0];
        let grads = vec![0.0f32; 3];
        let mut adam = Adam::new(1e-3, &[(3, 1)]);
        adam.step(vec![&mut params], vec![&grads], 1.0);
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        // With bias correction the first update is lr * g / (|g| + eps).
        let mut params = vec![0.0f32; 2];
        let grads = vec![0.5f32, -3.0];
        let mut adam = Adam::new(0.01, &[(2, 1)]);
        adam.step(vec![&mut params], vec![&grads], 1.0);
        assert!((params[0] + 0.01).abs() < 1e-6, "{params:?}");
        assert!((params[1] - 0.01).abs() < 1e-6, "{params:?}");
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // Minimise (x - 3)^2 from 0.
        let mut x = vec![0.0f32];
        let mut adam = Adam::new(0.01, &[(1, 1)]);
        for _ in 0..10_000 {
            let g = vec![2.0 * (x[0] - 3.0)];
            adam.step(vec![&mut x], vec![&g], 1.0);
        }
        assert!((x[0] - 3.0).abs() < 1e-6, "x = {}", x[0]);
    }

    #[test]
    fn soft_update_blends_parameters() {
        let mut r = rng(4);
        let a = Mlp::new(&mut r, &[2, 3, 1], Activation::Linear, 0.1);
        let mut b = Mlp::new(&mut r, &[2, 3, 1], Activation::Linear, 0.1);
        let before = b.layers[0].w.clone();
        a.soft_update_into(&mut b, 0.25);
        let expected = 0.75 * before + 0.25 * &a.layers[0].w;
        assert!((&b.layers[0].w - expected).abs().max() < 1e-6);
        // tau = 1 copies wholesale.
        a.soft_update_into(&mut b, 1.0);
        assert!((&b.layers[0].w - &a.layers[0].w).abs().max() < 1e-7);
    }

    #[test]
    fn grad_clipping_clamps_elementwise() {
        let mut g = DenseGrad {
            w: DMatrix::from_row_slice(1, 3, &[5.0, -0.5, -7.0]),
            b: DVector::from_column_slice(&[2.0]),
        };
        g.clamp(1.0);
        assert_eq!(g.w.as_slice(), &[1.0, -0.5, -1.0]);
        assert_eq!(g.b[0], 1.0);
    }
}
