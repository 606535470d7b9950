//! Steady-state reference calculator: the state/input pair that is a fixed
//! point of the disturbance-corrected surrogate and meets the controlled
//! output setpoint.
//!
//! With as many controlled outputs as inputs (both benchmarks) the
//! constraints form a square nonlinear system solved by damped Newton with a
//! central finite-difference Jacobian. Otherwise the steady-state cost is
//! minimized under a quadratic penalty on the constraints with the input box
//! handled by projection.

use nalgebra::{DMatrix, DVector};

use crate::edmd::SurrogateModel;
use crate::error::{Error, Result};
use crate::mpc::PropagationMode;

/// Controlled output as a coordinate selection `y_c = x[indices]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputMap {
    state_dim: usize,
    indices: Vec<usize>,
}

impl OutputMap {
    pub fn coordinates(state_dim: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() || indices.len() > state_dim {
            return Err(Error::Config(format!(
                "output map must select between 1 and {state_dim} coordinates"
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= state_dim) {
            return Err(Error::Config(format!(
                "output index {bad} out of range for state dimension {state_dim}"
            )));
        }
        Ok(Self { state_dim, indices })
    }

    /// Full-state output, `r(x) = x`.
    pub fn identity(state_dim: usize) -> Self {
        Self {
            state_dim,
            indices: (0..state_dim).collect(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.indices.len(), |i, _| x[self.indices[i]])
    }
}

/// Solver result with the residual diagnostics of Eq-style feasibility:
/// `x - F_hat(x, u) - d` and `r(x) - y_target`.
#[derive(Debug, Clone)]
pub struct ReferencePair {
    pub x_ref: DVector<f64>,
    pub u_ref: DVector<f64>,
    pub residual_fixed_point: f64,
    pub residual_output: f64,
    pub iterations: usize,
}

impl ReferencePair {
    pub fn guess(x_ref: DVector<f64>, u_ref: DVector<f64>) -> Self {
        Self {
            x_ref,
            u_ref,
            residual_fixed_point: f64::INFINITY,
            residual_output: f64::INFINITY,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RefCalcOptions {
    pub max_iters: usize,
    /// Combined-residual tolerance for the square Newton path.
    pub tol: f64,
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for RefCalcOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
            fd_step: 1e-7,
        }
    }
}

const MIN_DAMPING: f64 = 1.0 / (1u64 << 20) as f64;

/// One corrected surrogate step in the requested propagation space,
/// expressed on original state coordinates.
fn corrected_step(
    model: &SurrogateModel,
    mode: PropagationMode,
    d_hat: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    match mode {
        PropagationMode::Projected => Ok(model.predict(x, u)? + d_hat),
        PropagationMode::Lifted => {
            let z = model.lift(x)?;
            let z_next = model.predict_lifted(&z, u)? + d_hat;
            model.project_lifted(&z_next)
        }
    }
}

/// Solve for the reference pair. Square systems (output dimension equals
/// input dimension) go through damped Newton on the stacked constraints;
/// otherwise the steady-state cost (default: squared distance to the initial
/// guess) is minimized under an increasing quadratic penalty.
#[allow(clippy::too_many_arguments)]
pub fn solve_reference(
    model: &SurrogateModel,
    d_hat: &DVector<f64>,
    mode: PropagationMode,
    output_map: &OutputMap,
    y_target: &DVector<f64>,
    input_box: (&DVector<f64>, &DVector<f64>),
    steady_cost: Option<&dyn Fn(&DVector<f64>, &DVector<f64>) -> f64>,
    initial_guess: &ReferencePair,
    opts: &RefCalcOptions,
) -> Result<ReferencePair> {
    let n = model.state_dim();
    let m = model.input_dim();
    let p = output_map.output_dim();
    if output_map.state_dim() != n {
        return Err(Error::Dimension {
            context: "output map",
            expected: n,
            got: output_map.state_dim(),
        });
    }
    if y_target.len() != p {
        return Err(Error::Dimension {
            context: "output target",
            expected: p,
            got: y_target.len(),
        });
    }

    let residuals = |x: &DVector<f64>, u: &DVector<f64>| -> Result<DVector<f64>> {
        let fp = x - corrected_step(model, mode, d_hat, x, u)?;
        let out = output_map.eval(x) - y_target;
        let mut g = DVector::zeros(n + p);
        g.rows_mut(0, n).copy_from(&fp);
        g.rows_mut(n, p).copy_from(&out);
        Ok(g)
    };

    let pair = if p == m {
        newton_square(
            n,
            m,
            &residuals,
            initial_guess,
            opts,
        )?
    } else {
        penalty_descent(
            n,
            m,
            &residuals,
            steady_cost,
            input_box,
            initial_guess,
            opts,
        )?
    };

    // Feasibility of the input reference is verified after the fact; a
    // violation is an error, never a silent clamp.
    let (lo, hi) = input_box;
    for j in 0..m {
        if pair.u_ref[j] < lo[j] - 1e-12 || pair.u_ref[j] > hi[j] + 1e-12 {
            return Err(Error::ReferenceOutsideBox {
                component: j,
                value: pair.u_ref[j],
            });
        }
    }
    Ok(pair)
}

fn split_residuals(n: usize, g: &DVector<f64>) -> (f64, f64) {
    (g.rows(0, n).norm(), g.rows(n, g.len() - n).norm())
}

fn newton_square(
    n: usize,
    m: usize,
    residuals: &dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
    initial_guess: &ReferencePair,
    opts: &RefCalcOptions,
) -> Result<ReferencePair> {
    let dim = n + m;
    let mut v = DVector::zeros(dim);
    v.rows_mut(0, n).copy_from(&initial_guess.x_ref);
    v.rows_mut(n, m).copy_from(&initial_guess.u_ref);

    let eval = |v: &DVector<f64>| -> Result<DVector<f64>> {
        residuals(&v.rows(0, n).into_owned(), &v.rows(n, m).into_owned())
    };

    let mut g = eval(&v)?;
    for iter in 0..opts.max_iters {
        let gnorm = g.norm();
        if gnorm <= opts.tol {
            let (rf, ro) = split_residuals(n, &g);
            return Ok(ReferencePair {
                x_ref: v.rows(0, n).into_owned(),
                u_ref: v.rows(n, m).into_owned(),
                residual_fixed_point: rf,
                residual_output: ro,
                iterations: iter,
            });
        }

        // Central finite-difference Jacobian.
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = opts.fd_step * (1.0 + v[j].abs());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += h;
            vm[j] -= h;
            let col = (eval(&vp)? - eval(&vm)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let delta = jac
            .full_piv_lu()
            .solve(&(-&g))
            .ok_or(Error::SingularJacobian)?;

        // Backtrack on the combined residual norm.
        let mut t = 1.0;
        let mut accepted = None;
        while t >= MIN_DAMPING {
            let candidate = &v + &delta * t;
            if let Ok(gc) = eval(&candidate) {
                if gc.norm() < gnorm {
                    accepted = Some((candidate, gc));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((candidate, gc)) => {
                v = candidate;
                g = gc;
            }
            None => {
                return Err(Error::ReferenceNoConvergence {
                    iters: iter,
                    residual: gnorm,
                })
            }
        }
    }

    let gnorm = g.norm();
    if gnorm <= opts.tol {
        let (rf, ro) = split_residuals(n, &g);
        return Ok(ReferencePair {
            x_ref: v.rows(0, n).into_owned(),
            u_ref: v.rows(n, m).into_owned(),
            residual_fixed_point: rf,
            residual_output: ro,
            iterations: opts.max_iters,
        });
    }
    Err(Error::ReferenceNoConvergence {
        iters: opts.max_iters,
        residual: gnorm,
    })
}

/// Quadratic-penalty path for non-square systems: minimize the steady-state
/// cost under an increasing penalty on the constraint residuals, with the
/// input projected onto its box. Accepts at a looser feasibility level than
/// Newton since the penalty only enforces constraints asymptotically.
fn penalty_descent(
    n: usize,
    m: usize,
    residuals: &dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
    steady_cost: Option<&dyn Fn(&DVector<f64>, &DVector<f64>) -> f64>,
    input_box: (&DVector<f64>, &DVector<f64>),
    initial_guess: &ReferencePair,
    opts: &RefCalcOptions,
) -> Result<ReferencePair> {
    let (lo, hi) = input_box;
    let x0 = initial_guess.x_ref.clone();
    let u0 = initial_guess.u_ref.clone();
    let proximal = |x: &DVector<f64>, u: &DVector<f64>| (x - &x0).norm_squared() + (u - &u0).norm_squared();
    let cost = |x: &DVector<f64>, u: &DVector<f64>| match steady_cost {
        Some(f) => f(x, u),
        None => proximal(x, u),
    };

    let dim = n + m;
    let mut v = DVector::zeros(dim);
    v.rows_mut(0, n).copy_from(&x0);
    v.rows_mut(n, m).copy_from(&u0);

    let project = |v: &mut DVector<f64>| {
        for j in 0..m {
            v[n + j] = v[n + j].clamp(lo[j], hi[j]);
        }
    };
    project(&mut v);

    let feas_tol = opts.tol.sqrt();
    let mut mu = 1e2;
    let mut last_residual = f64::INFINITY;

    for _round in 0..8 {
        let phi = |v: &DVector<f64>| -> Result<f64> {
            let x = v.rows(0, n).into_owned();
            let u = v.rows(n, m).into_owned();
            let g = residuals(&x, &u)?;
            Ok(cost(&x, &u) + mu * g.norm_squared())
        };
        let mut value = phi(&v)?;
        for _ in 0..200 {
            // Forward-difference gradient of the penalty objective.
            let mut grad = DVector::zeros(dim);
            let h = 1e-7;
            for j in 0..dim {
                let mut vp = v.clone();
                vp[j] += h * (1.0 + v[j].abs());
                grad[j] = (phi(&vp)? - value) / (h * (1.0 + v[j].abs()));
            }
            if grad.norm() <= 1e-9 * (1.0 + value.abs()) {
                break;
            }
            let mut alpha = 1.0 / mu;
            let mut moved = false;
            while alpha >= MIN_DAMPING {
                let mut candidate = &v - &grad * alpha;
                project(&mut candidate);
                if let Ok(c_new) = phi(&candidate) {
                    if c_new < value {
                        v = candidate;
                        value = c_new;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let x = v.rows(0, n).into_owned();
        let u = v.rows(n, m).into_owned();
        last_residual = residuals(&x, &u)?.norm();
        if last_residual <= feas_tol {
            let g = residuals(&x, &u)?;
            let (rf, ro) = split_residuals(n, &g);
            return Ok(ReferencePair {
                x_ref: x,
                u_ref: u,
                residual_fixed_point: rf,
                residual_output: ro,
                iterations: _round + 1,
            });
        }
        mu *= 10.0;
    }
    Err(Error::ReferenceNoConvergence {
        iters: opts.max_iters,
        residual: last_residual,
    })
}
