//! Finite-horizon optimal control on the disturbance-corrected surrogate.
//!
//! The problem is reduced by single shooting to the input sequence alone and
//! solved by projected gradient descent with a limited-memory quasi-Newton
//! (L-BFGS) direction and Armijo backtracking; the box constraint is handled
//! by exact projection of every iterate. Gradients come from the adjoint
//! recursion over the rollout, so one gradient costs two passes over the
//! horizon.

use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

use crate::edmd::SurrogateModel;
use crate::error::{Error, Result};

/// How the prediction model is propagated inside the OCP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// Project to state space after every lifted step; the disturbance is
    /// added to the projected state (dimension n).
    Projected,
    /// Keep the recursion in the lifted space; the disturbance lives there
    /// too (dimension M + 1).
    Lifted,
}

/// Weights, horizon and input box of the optimal control problem.
#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub u_lo: DVector<f64>,
    pub u_hi: DVector<f64>,
    /// Relative stationarity tolerance: stop when the projected-gradient
    /// norm drops below `tol * (1 + |cost|)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl OcpSpec {
    pub fn new(
        horizon: usize,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        u_lo: DVector<f64>,
        u_hi: DVector<f64>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if q.nrows() != q.ncols() || r.nrows() != r.ncols() {
            return Err(Error::Config("weight matrices must be square".into()));
        }
        let sym_err = |m: &DMatrix<f64>| (m - m.transpose()).norm() / (1.0 + m.norm());
        if sym_err(&q) > 1e-12 || sym_err(&r) > 1e-12 {
            return Err(Error::Config("weight matrices must be symmetric".into()));
        }
        let q_eigs = q.clone().symmetric_eigen().eigenvalues;
        if q_eigs.min() < -1e-12 * (1.0 + q_eigs.max()) {
            return Err(Error::Config("Q must be positive semidefinite".into()));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::Config("R must be positive definite".into()));
        }
        if u_lo.len() != r.nrows() || u_hi.len() != r.nrows() {
            return Err(Error::Dimension {
                context: "input box",
                expected: r.nrows(),
                got: u_lo.len(),
            });
        }
        if u_lo.iter().zip(u_hi.iter()).any(|(lo, hi)| lo > hi) {
            return Err(Error::Config("input box must satisfy u_lo <= u_hi".into()));
        }
        Ok(Self {
            horizon,
            q,
            r,
            u_lo,
            u_hi,
            tol: 1e-8,
            max_iters: 500,
        })
    }

    pub fn with_tolerances(mut self, tol: f64, max_iters: usize) -> Self {
        self.tol = tol;
        self.max_iters = max_iters;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        u.iter()
            .zip(self.u_lo.iter().zip(self.u_hi.iter()))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    fn clamp(&self, u: &mut DVector<f64>) {
        for i in 0..u.len() {
            u[i] = u[i].clamp(self.u_lo[i], self.u_hi[i]);
        }
    }
}

/// Optimizer output: the input sequence, the matching rollout, and solver
/// diagnostics.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    /// m x N optimal input sequence, every column inside the box.
    pub u_seq: DMatrix<f64>,
    /// n x (N+1) predicted trajectory under the corrected model.
    pub x_seq: DMatrix<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// Projected-gradient norm at termination.
    pub stationarity: f64,
    /// False when the iteration limit was reached first.
    pub converged: bool,
}

/// Rollout workspace binding the model, correction and references.
struct Shooting<'a> {
    model: &'a SurrogateModel,
    mode: PropagationMode,
    x0: &'a DVector<f64>,
    d_hat: &'a DVector<f64>,
    x_ref: &'a DVector<f64>,
    u_ref: &'a DVector<f64>,
    spec: &'a OcpSpec,
}

impl Shooting<'_> {
    fn n(&self) -> usize {
        self.model.state_dim()
    }

    fn m(&self) -> usize {
        self.model.input_dim()
    }

    /// Cost of an input sequence; `None` when the rollout leaves f64 range.
    fn cost(&self, u_seq: &DMatrix<f64>) -> Option<f64> {
        let horizon = self.spec.horizon;
        let mut cost = 0.0;
        let mut add_stage = |x: &DVector<f64>, u: &DVector<f64>| {
            let dx = x - self.x_ref;
            let du = u - self.u_ref;
            cost += (&self.spec.q * &dx).dot(&dx) + (&self.spec.r * &du).dot(&du);
        };
        match self.mode {
            PropagationMode::Projected => {
                let mut x = self.x0.clone();
                for i in 0..horizon {
                    let u = u_seq.column(i).into_owned();
                    add_stage(&x, &u);
                    x = self.model.predict(&x, &u).ok()? + self.d_hat;
                    if !x.iter().all(|v| v.is_finite()) {
                        return None;
                    }
                }
            }
            PropagationMode::Lifted => {
                let mut z = self.model.lift(self.x0).ok()?;
                for i in 0..horizon {
                    let u = u_seq.column(i).into_owned();
                    let x = self.model.project_lifted(&z).ok()?;
                    add_stage(&x, &u);
                    z = self.model.predict_lifted(&z, &u).ok()? + self.d_hat;
                    if !z.iter().all(|v| v.is_finite()) {
                        return None;
                    }
                }
            }
        }
        cost.is_finite().then_some(cost)
    }

    /// Cost, gradient (stacked stage-major) and the rollout trajectory.
    fn cost_grad(&self, u_seq: &DMatrix<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let horizon = self.spec.horizon;
        let n = self.n();
        let m = self.m();
        let mut cost = 0.0;
        let mut grad = DVector::zeros(m * horizon);
        let mut x_seq = DMatrix::zeros(n, horizon + 1);

        match self.mode {
            PropagationMode::Projected => {
                let mut xs = Vec::with_capacity(horizon + 1);
                let mut jx = Vec::with_capacity(horizon);
                let mut ju = Vec::with_capacity(horizon);
                xs.push(self.x0.clone());
                for i in 0..horizon {
                    let u = u_seq.column(i).into_owned();
                    let (next, jxi, jui) = self
                        .model
                        .predict_with_jacobians(&xs[i], &u)
                        .map_err(|_| Error::NonFiniteRollout { step: i })?;
                    let next = next + self.d_hat;
                    if !next.iter().all(|v| v.is_finite()) {
                        return Err(Error::NonFiniteRollout { step: i });
                    }
                    let dx = &xs[i] - self.x_ref;
                    let du = &u - self.u_ref;
                    cost += (&self.spec.q * &dx).dot(&dx) + (&self.spec.r * &du).dot(&du);
                    xs.push(next);
                    jx.push(jxi);
                    ju.push(jui);
                }
                // Adjoint sweep; the terminal state carries no cost.
                let mut lambda = DVector::zeros(n);
                for i in (0..horizon).rev() {
                    let u = u_seq.column(i).into_owned();
                    let du = &u - self.u_ref;
                    let gu = &self.spec.r * du * 2.0 + ju[i].transpose() * &lambda;
                    grad.rows_mut(i * m, m).copy_from(&gu);
                    let dx = &xs[i] - self.x_ref;
                    lambda = &self.spec.q * dx * 2.0 + jx[i].transpose() * lambda;
                }
                for (i, x) in xs.iter().enumerate() {
                    x_seq.set_column(i, x);
                }
            }
            PropagationMode::Lifted => {
                let size = self.model.lifted_dim();
                let mut zs = Vec::with_capacity(horizon + 1);
                let mut kz = Vec::with_capacity(horizon);
                let mut ju = Vec::with_capacity(horizon);
                zs.push(self.model.lift(self.x0)?);
                for i in 0..horizon {
                    let u = u_seq.column(i).into_owned();
                    let (next, ki, jui) = self
                        .model
                        .predict_lifted_with_jacobians(&zs[i], &u)
                        .map_err(|_| Error::NonFiniteRollout { step: i })?;
                    let next = next + self.d_hat;
                    if !next.iter().all(|v| v.is_finite()) {
                        return Err(Error::NonFiniteRollout { step: i });
                    }
                    let x = self.model.project_lifted(&zs[i])?;
                    let dx = &x - self.x_ref;
                    let du = &u - self.u_ref;
                    cost += (&self.spec.q * &dx).dot(&dx) + (&self.spec.r * &du).dot(&du);
                    zs.push(next);
                    kz.push(ki);
                    ju.push(jui);
                }
                let mut lambda = DVector::zeros(size);
                for i in (0..horizon).rev() {
                    let u = u_seq.column(i).into_owned();
                    let du = &u - self.u_ref;
                    let gu = &self.spec.r * du * 2.0 + ju[i].transpose() * &lambda;
                    grad.rows_mut(i * m, m).copy_from(&gu);
                    let x = self.model.project_lifted(&zs[i])?;
                    let dx = &x - self.x_ref;
                    // Chain rule through the coordinate projection: the state
                    // cost pulls back onto lifted slots 1..=n.
                    let mut stage = DVector::zeros(size);
                    stage.rows_mut(1, n).copy_from(&(&self.spec.q * dx * 2.0));
                    lambda = stage + kz[i].transpose() * lambda;
                }
                for (i, z) in zs.iter().enumerate() {
                    x_seq.set_column(i, &self.model.project_lifted(z)?);
                }
            }
        }
        if !cost.is_finite() {
            return Err(Error::NonFiniteRollout { step: horizon });
        }
        Ok((cost, grad, x_seq))
    }
}

fn project_box(u: &mut DVector<f64>, spec: &OcpSpec) {
    let m = spec.input_dim();
    for stage in 0..spec.horizon {
        for j in 0..m {
            let idx = stage * m + j;
            u[idx] = u[idx].clamp(spec.u_lo[j], spec.u_hi[j]);
        }
    }
}

/// Gradient with the components that push outside an active box face zeroed:
/// zero at the lower face when the descent direction points below it, and at
/// the upper face when it points above.
fn projected_gradient(u: &DVector<f64>, g: &DVector<f64>, spec: &OcpSpec) -> DVector<f64> {
    let m = spec.input_dim();
    let mut pg = g.clone();
    for stage in 0..spec.horizon {
        for j in 0..m {
            let idx = stage * m + j;
            let at_lo = u[idx] <= spec.u_lo[j];
            let at_hi = u[idx] >= spec.u_hi[j];
            if (at_lo && g[idx] > 0.0) || (at_hi && g[idx] < 0.0) {
                pg[idx] = 0.0;
            }
        }
    }
    pg
}

/// L-BFGS two-loop recursion: approximate inverse-Hessian times gradient.
fn two_loop(
    g: &DVector<f64>,
    memory: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let alpha = rho * s.dot(&q);
        q -= y * alpha;
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = s.dot(y) / y.dot(y);
        q *= gamma;
    }
    for ((s, y, rho), alpha) in memory.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * y.dot(&q);
        q += s * (alpha - beta);
    }
    q
}

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;

/// Cost and adjoint gradient of the shooting problem at a given input
/// sequence (m x N); the gradient is stacked stage-major. Exposed for solver
/// diagnostics and derivative verification.
#[allow(clippy::too_many_arguments)]
pub fn shooting_cost_and_gradient(
    model: &SurrogateModel,
    x0: &DVector<f64>,
    d_hat: &DVector<f64>,
    x_ref: &DVector<f64>,
    u_ref: &DVector<f64>,
    spec: &OcpSpec,
    u_seq: &DMatrix<f64>,
    mode: PropagationMode,
) -> Result<(f64, DVector<f64>)> {
    let shooting = Shooting {
        model,
        mode,
        x0,
        d_hat,
        x_ref,
        u_ref,
        spec,
    };
    let (cost, grad, _) = shooting.cost_grad(u_seq)?;
    Ok((cost, grad))
}

/// Solve the box-constrained shooting problem from a warm start (or from
/// the clamped reference input repeated over the horizon).
#[allow(clippy::too_many_arguments)]
pub fn solve_ocp(
    model: &SurrogateModel,
    x0: &DVector<f64>,
    d_hat: &DVector<f64>,
    x_ref: &DVector<f64>,
    u_ref: &DVector<f64>,
    spec: &OcpSpec,
    warm_start: Option<&DMatrix<f64>>,
    mode: PropagationMode,
) -> Result<OcpSolution> {
    let n = model.state_dim();
    let m = model.input_dim();
    if spec.input_dim() != m {
        return Err(Error::Dimension {
            context: "ocp input weights",
            expected: m,
            got: spec.input_dim(),
        });
    }
    let expected_d = match mode {
        PropagationMode::Projected => n,
        PropagationMode::Lifted => model.lifted_dim(),
    };
    if d_hat.len() != expected_d {
        return Err(Error::Dimension {
            context: "ocp disturbance",
            expected: expected_d,
            got: d_hat.len(),
        });
    }

    let shooting = Shooting {
        model,
        mode,
        x0,
        d_hat,
        x_ref,
        u_ref,
        spec,
    };

    // Stage-major flattened decision vector.
    let horizon = spec.horizon;
    let mut u = DVector::zeros(m * horizon);
    match warm_start {
        Some(w) => {
            for i in 0..horizon {
                u.rows_mut(i * m, m).copy_from(&w.column(i));
            }
        }
        None => {
            let mut u0 = u_ref.clone();
            spec.clamp(&mut u0);
            for i in 0..horizon {
                u.rows_mut(i * m, m).copy_from(&u0);
            }
        }
    }
    project_box(&mut u, spec);

    let to_seq = |u: &DVector<f64>| {
        let mut seq = DMatrix::zeros(m, horizon);
        for i in 0..horizon {
            seq.set_column(i, &u.rows(i * m, m));
        }
        seq
    };

    let (mut cost, mut grad, mut x_seq) = shooting.cost_grad(&to_seq(&u))?;
    let mut memory: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut stationarity = projected_gradient(&u, &grad, spec).norm();

    while iterations < spec.max_iters {
        if stationarity <= spec.tol * (1.0 + cost.abs()) {
            break;
        }

        let mut improved = false;
        // Quasi-Newton direction first, steepest descent as fallback.
        let directions = [
            if memory.is_empty() {
                None
            } else {
                Some(-two_loop(&grad, &memory))
            },
            Some(-&grad),
        ];
        'dirs: for dir in directions.into_iter().flatten() {
            let mut alpha = 1.0;
            while alpha >= MIN_STEP {
                let mut candidate = &u + &dir * alpha;
                project_box(&mut candidate, spec);
                let displacement = &candidate - &u;
                if displacement.norm() == 0.0 {
                    break;
                }
                let predicted = grad.dot(&displacement);
                if let Some(c_new) = shooting.cost(&to_seq(&candidate)) {
                    let sufficient = if predicted < 0.0 {
                        c_new <= cost + ARMIJO_C1 * predicted
                    } else {
                        c_new < cost
                    };
                    if sufficient {
                        let (c_chk, g_new, x_new) = shooting.cost_grad(&to_seq(&candidate))?;
                        let s = displacement;
                        let y = &g_new - &grad;
                        let sy = s.dot(&y);
                        if sy > 1e-12 * s.norm() * y.norm() {
                            if memory.len() == LBFGS_MEMORY {
                                memory.pop_front();
                            }
                            memory.push_back((s, y, 1.0 / sy));
                        }
                        u = candidate;
                        cost = c_chk;
                        grad = g_new;
                        x_seq = x_new;
                        improved = true;
                        break 'dirs;
                    }
                }
                alpha *= 0.5;
            }
        }

        iterations += 1;
        stationarity = projected_gradient(&u, &grad, spec).norm();
        if !improved {
            // No decreasing step exists at numerical precision.
            break;
        }
    }

    let converged = stationarity <= spec.tol * (1.0 + cost.abs());
    Ok(OcpSolution {
        u_seq: to_seq(&u),
        x_seq,
        cost,
        iterations,
        stationarity,
        converged,
    })
}

/// Receding-horizon wrapper owning the shift-and-repeat warm start.
#[derive(Debug, Clone)]
pub struct MpcController {
    spec: OcpSpec,
    mode: PropagationMode,
    warm: Option<DMatrix<f64>>,
}

impl MpcController {
    pub fn new(spec: OcpSpec, mode: PropagationMode) -> Self {
        Self {
            spec,
            mode,
            warm: None,
        }
    }

    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    pub fn mode(&self) -> PropagationMode {
        self.mode
    }

    /// One receding-horizon step: solve from the stored warm start, apply
    /// the first input, keep the shifted sequence (last input repeated) for
    /// the next call.
    pub fn step(
        &mut self,
        model: &SurrogateModel,
        x_measured: &DVector<f64>,
        d_hat: &DVector<f64>,
        x_ref: &DVector<f64>,
        u_ref: &DVector<f64>,
    ) -> Result<(DVector<f64>, OcpSolution)> {
        let solution = solve_ocp(
            model,
            x_measured,
            d_hat,
            x_ref,
            u_ref,
            &self.spec,
            self.warm.as_ref(),
            self.mode,
        )?;
        let u_applied = solution.u_seq.column(0).into_owned();
        let horizon = self.spec.horizon;
        let mut shifted = DMatrix::zeros(self.spec.input_dim(), horizon);
        for i in 0..horizon - 1 {
            shifted.set_column(i, &solution.u_seq.column(i + 1));
        }
        shifted.set_column(horizon - 1, &solution.u_seq.column(horizon - 1));
        self.warm = Some(shifted);
        Ok((u_applied, solution))
    }
}
