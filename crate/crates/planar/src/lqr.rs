//! Linear system extraction and a discrete algebraic Riccati solver.
//!
//! For slide-joint serial-mass chains the dynamics are exactly linear, so
//! the discrete transition map of one semi-implicit Euler step can be
//! written in closed form ([`linearize`]). A plain fixed-point Riccati
//! iteration ([`solve_dare`]) then yields the optimal cost-to-go `P` and
//! gain `K`; instances here are tiny, so no doubling or Schur machinery
//! is warranted.
//!
//! [`linearize_fd`] provides a finite-difference linearization of an
//! arbitrary model around an operating point, which doubles as an
//! independent cross-check of the analytic map.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mjcf::{CompiledModel, JointKind};
use crate::physics::Physics;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("model is not exactly linear: {0}")]
    UnsupportedModel(String),
    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("cost matrices invalid: {0}")]
    BadCost(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("physics error: {0}")]
    Physics(#[from] crate::physics::PhysicsError),
}

/// Discrete-time linear system `x' = A x + B u` with stage cost
/// `x' Q x + u' R u`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Discretization step in seconds.
    pub h: f64,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        h: f64,
    ) -> Result<Self, LqrError> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || q.nrows() != n || q.ncols() != n {
            return Err(LqrError::Dimension("A, B, Q sizes inconsistent".into()));
        }
        let m = b.ncols();
        if r.nrows() != m || r.ncols() != m {
            return Err(LqrError::Dimension("R size inconsistent with B".into()));
        }
        if (&q - q.transpose()).abs().max() > 1e-12 {
            return Err(LqrError::BadCost("Q must be symmetric".into()));
        }
        if (&r - r.transpose()).abs().max() > 1e-12 {
            return Err(LqrError::BadCost("R must be symmetric".into()));
        }
        if r.clone().cholesky().is_none() {
            return Err(LqrError::BadCost("R must be positive definite".into()));
        }
        Ok(Self { a, b, q, r, h })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Cost matrices used by the LQR domain: unit weight on positions, zero on
/// velocities, `0.1 I` on controls.
pub fn standard_cost(nq: usize, nu: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut q = DMatrix::zeros(2 * nq, 2 * nq);
    for i in 0..nq {
        q[(i, i)] = 1.0;
    }
    (q, DMatrix::identity(nu, nu) * 0.1)
}

/// Exact discrete transition of one semi-implicit Euler step for a
/// slide-only chain:
///
/// ```text
/// v' = v + h M^-1 (F u - K q - C v)
/// q' = q + h v'
/// ```
///
/// State ordering is `[q; v]`. Models with hinges, fluid drag, spring
/// offsets or a gravity component along a slide axis are rejected.
pub fn linearize(model: &CompiledModel, h: f64) -> Result<LinearSystem, LqrError> {
    for joint in &model.joints {
        if joint.kind != JointKind::Slide {
            return Err(LqrError::UnsupportedModel(format!(
                "joint `{}` is not a slide joint",
                joint.name
            )));
        }
        if joint.springref != 0.0 {
            return Err(LqrError::UnsupportedModel(format!(
                "joint `{}` has a spring offset",
                joint.name
            )));
        }
    }
    if model.geoms.iter().any(|g| g.drag) {
        return Err(LqrError::UnsupportedModel(
            "fluid drag is quadratic in velocity".into(),
        ));
    }

    let physics = Physics::from_model(model.clone())?;
    let bias0 = physics.bias_forces();
    if bias0.abs().max() > 1e-12 {
        return Err(LqrError::UnsupportedModel(
            "constant force at the origin (gravity along a slide axis?)".into(),
        ));
    }

    let nq = model.nq();
    let nu = model.nu();
    // Slide-only chains have a configuration-independent mass matrix.
    let m = physics.mass_matrix();
    let m_inv = m
        .clone()
        .cholesky()
        .ok_or(LqrError::UnsupportedModel("singular mass matrix".into()))?
        .inverse();
    let k = DMatrix::from_diagonal(&DVector::from_iterator(
        nq,
        model.joints.iter().map(|j| j.stiffness),
    ));
    let c = DMatrix::from_diagonal(&DVector::from_iterator(
        nq,
        model.joints.iter().map(|j| j.damping),
    ));
    let mut f = DMatrix::zeros(nq, nu);
    for (i, act) in model.actuators.iter().enumerate() {
        f[(act.joint, i)] += act.gear;
    }

    let mk = &m_inv * &k;
    let mc = &m_inv * &c;
    let mf = &m_inv * &f;
    let eye = DMatrix::<f64>::identity(nq, nq);

    let mut a = DMatrix::zeros(2 * nq, 2 * nq);
    a.view_mut((0, 0), (nq, nq))
        .copy_from(&(&eye - h * h * &mk));
    a.view_mut((0, nq), (nq, nq))
        .copy_from(&(h * &eye - h * h * &mc));
    a.view_mut((nq, 0), (nq, nq)).copy_from(&(-h * &mk));
    a.view_mut((nq, nq), (nq, nq)).copy_from(&(&eye - h * &mc));

    let mut b = DMatrix::zeros(2 * nq, nu);
    b.view_mut((0, 0), (nq, nu)).copy_from(&(h * h * &mf));
    b.view_mut((nq, 0), (nq, nu)).copy_from(&(h * &mf));

    let (q, r) = standard_cost(nq, nu);
    LinearSystem::new(a, b, q, r, h)
}

/// Central finite-difference linearization of one control step
/// (`substeps` integrator substeps) around `(x0, u0)` for an arbitrary
/// model. State ordering `[q; v]`.
pub fn linearize_fd(
    model: &CompiledModel,
    x0: &[f64],
    u0: &[f64],
    substeps: usize,
    eps: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), LqrError> {
    let nq = model.nq();
    let nu = model.nu();
    if x0.len() != 2 * nq {
        return Err(LqrError::Dimension(format!(
            "x0 must have length {} (q then v)",
            2 * nq
        )));
    }
    if u0.len() != nu {
        return Err(LqrError::Dimension(format!("u0 must have length {nu}")));
    }
    let mut physics = Physics::from_model(model.clone())?;
    let mut rollout = |x: &[f64], u: &[f64]| -> Result<DVector<f64>, LqrError> {
        physics.set_state(&x[..nq], &x[nq..], u)?;
        physics.step_n(u, substeps)?;
        let mut out = DVector::zeros(2 * nq);
        out.as_mut_slice()[..nq].copy_from_slice(physics.q());
        out.as_mut_slice()[nq..].copy_from_slice(physics.v());
        Ok(out)
    };

    let mut a = DMatrix::zeros(2 * nq, 2 * nq);
    for i in 0..2 * nq {
        let mut xp = x0.to_vec();
        let mut xm = x0.to_vec();
        xp[i] += eps;
        xm[i] -= eps;
        let col = (rollout(&xp, u0)? - rollout(&xm, u0)?) / (2.0 * eps);
        a.set_column(i, &col);
    }
    let mut b = DMatrix::zeros(2 * nq, nu);
    for i in 0..nu {
        let mut up = u0.to_vec();
        let mut um = u0.to_vec();
        up[i] += eps;
        um[i] -= eps;
        let col = (rollout(x0, &up)? - rollout(x0, &um)?) / (2.0 * eps);
        b.set_column(i, &col);
    }
    Ok((a, b))
}

/// Cost-to-go matrix and stationary gain for a [`LinearSystem`].
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
    /// Infinity norm of the Bellman residual at exit.
    pub residual: f64,
}

impl RiccatiSolution {
    /// Optimal stationary feedback `u = -K x`.
    pub fn policy(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.k * x)
    }
}

pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 1_000_000;

/// Fixed-point iteration of the discrete algebraic Riccati equation,
/// starting from `P = Q`:
///
/// ```text
/// P <- Q + A' (P - P B (R + B' P B)^-1 B' P) A
/// ```
///
/// Convergence is declared when the infinity norm of the update falls
/// below `tol`.
pub fn solve_dare(sys: &LinearSystem, tol: f64, max_iter: usize) -> Result<RiccatiSolution, LqrError> {
    let a_t = sys.a.transpose();
    let b_t = sys.b.transpose();
    let mut p = sys.q.clone();
    let mut iterations = 0;
    loop {
        let pb = &p * &sys.b;
        let gram = &sys.r + &b_t * &pb;
        let chol = gram
            .cholesky()
            .ok_or_else(|| LqrError::BadCost("R + B'PB not positive definite".into()))?;
        let gain = chol.solve(&(pb.transpose() * &sys.a)); // (R + B'PB)^-1 B'PA
        let next = &sys.q + &a_t * (&p * &sys.a - pb * &gain);
        // Symmetrize to keep rounding from accumulating asymmetry.
        let next = (&next + next.transpose()) * 0.5;
        let delta = (&next - &p).abs().max();
        p = next;
        iterations += 1;
        if delta < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(LqrError::NotConverged {
                iterations,
                residual: delta,
            });
        }
    }
    let pb = &p * &sys.b;
    let gram = &sys.r + &b_t * &pb;
    let k = gram
        .cholesky()
        .ok_or_else(|| LqrError::BadCost("R + B'PB not positive definite".into()))?
        .solve(&(pb.transpose() * &sys.a));
    let residual = bellman_residual(sys, &p);
    Ok(RiccatiSolution {
        p,
        k,
        iterations,
        residual,
    })
}

/// `|| P - (Q + A'PA - A'PB (R + B'PB)^-1 B'PA) ||_inf`.
pub fn bellman_residual(sys: &LinearSystem, p: &DMatrix<f64>) -> f64 {
    let b_t = sys.b.transpose();
    let pb = p * &sys.b;
    let gram = &sys.r + &b_t * &pb;
    let gain = gram
        .cholesky()
        .expect("R + B'PB positive definite")
        .solve(&(pb.transpose() * &sys.a));
    let rhs = &sys.q + sys.a.transpose() * (p * &sys.a - pb * gain);
    (p - rhs).abs().max()
}

/// Spectral radius of the closed-loop map `A - B K`.
pub fn closed_loop_spectral_radius(sys: &LinearSystem, sol: &RiccatiSolution) -> f64 {
    let closed = &sys.a - &sys.b * &sol.k;
    closed
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}
