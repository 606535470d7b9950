//! Ground-truth continuous-time benchmark systems and their discrete-time
//! sampled-data form (classic fourth-order Runge-Kutta under zero-order hold).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Control-affine right-hand side `dx/dt = f(x, u)`.
///
/// Evaluation is deterministic and side-effect free; the returned vector has
/// length `state_dim`. Implementations report domain violations (e.g. a
/// negative tank level under a square root) as [`Error::Domain`].
pub trait VectorField {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Van-der-Pol oscillator with damping parameter `nu`.
///
/// The default nonlinearity is `nu * (1 - x1)^2 * x2`; setting `classical`
/// switches to the textbook `nu * (1 - x1^2) * x2` form for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanDerPol {
    pub nu: f64,
    #[serde(default)]
    pub classical: bool,
}

impl VanDerPol {
    pub fn new(nu: f64) -> Self {
        Self {
            nu,
            classical: false,
        }
    }
}

impl VectorField for VanDerPol {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        debug_assert_eq!(x.len(), 2);
        debug_assert_eq!(u.len(), 1);
        let damping = if self.classical {
            self.nu * (1.0 - x[0] * x[0]) * x[1]
        } else {
            self.nu * (1.0 - x[0]).powi(2) * x[1]
        };
        Ok(DVector::from_column_slice(&[
            x[1],
            damping - x[0] + u[0],
        ]))
    }
}

/// Seconds per hour; tank flows are specified in m^3/h and integrated in SI.
const SECONDS_PER_HOUR: f64 = 3600.0;

/// Physical parameters of the four-tanks process.
///
/// All areas in m^2, gravity in m/s^2, valve splits dimensionless. The
/// defaults are transcribed from the standard four-tank laboratory benchmark
/// (Alvarado et al. 2011) and are validated by the equilibrium fixed-point
/// tests below; they are configuration, not constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourTanksParams {
    /// Tank cross-section S.
    pub tank_area: f64,
    /// Outlet cross-sections a1..a4.
    pub outlet_areas: [f64; 4],
    /// Gravitational acceleration g.
    pub gravity: f64,
    /// Valve split ratio for pump a.
    pub gamma_a: f64,
    /// Valve split ratio for pump b.
    pub gamma_b: f64,
}

impl Default for FourTanksParams {
    fn default() -> Self {
        Self {
            tank_area: 0.03,
            outlet_areas: [1.31e-4, 1.51e-4, 9.27e-5, 8.82e-5],
            gravity: 9.81,
            gamma_a: 0.3,
            gamma_b: 0.4,
        }
    }
}

impl FourTanksParams {
    pub fn validate(&self) -> Result<()> {
        let positive = self.tank_area > 0.0
            && self.gravity > 0.0
            && self.outlet_areas.iter().all(|&a| a > 0.0);
        if !positive {
            return Err(Error::Config(
                "four-tanks areas and gravity must be strictly positive".into(),
            ));
        }
        for (name, g) in [("gamma_a", self.gamma_a), ("gamma_b", self.gamma_b)] {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {g}")));
            }
        }
        Ok(())
    }
}

/// Four-tanks process: states are the levels h1..h4 in meters, inputs the
/// pump flows (q_a, q_b) in m^3/h (converted to m^3/s internally).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourTanks {
    pub params: FourTanksParams,
}

impl FourTanks {
    pub fn new(params: FourTanksParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Closed-form equilibrium for prescribed levels of the two lower tanks:
    /// the balance equations are linear in the pump flows once (h1, h2) are
    /// fixed, and the upper-tank levels follow from their outflow balances.
    /// Returns (levels in m, flows in m^3/h).
    pub fn equilibrium_for_levels(&self, h1: f64, h2: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        if h1 < 0.0 || h2 < 0.0 {
            return Err(Error::Domain("equilibrium levels must be nonnegative".into()));
        }
        let p = &self.params;
        let det = p.gamma_a + p.gamma_b - 1.0;
        if det.abs() < 1e-12 {
            return Err(Error::Config(
                "valve splits with gamma_a + gamma_b = 1 leave the flow system singular".into(),
            ));
        }
        let w1 = p.outlet_areas[0] * (2.0 * p.gravity * h1).sqrt();
        let w2 = p.outlet_areas[1] * (2.0 * p.gravity * h2).sqrt();
        // [gamma_a, 1-gamma_b; 1-gamma_a, gamma_b] [qa; qb] = [w1; w2]
        let qa = (p.gamma_b * w1 - (1.0 - p.gamma_b) * w2) / det;
        let qb = (p.gamma_a * w2 - (1.0 - p.gamma_a) * w1) / det;
        if qa < 0.0 || qb < 0.0 {
            return Err(Error::Config(format!(
                "no nonnegative-flow equilibrium for levels ({h1}, {h2})"
            )));
        }
        let s3 = (1.0 - p.gamma_b) * qb / p.outlet_areas[2];
        let s4 = (1.0 - p.gamma_a) * qa / p.outlet_areas[3];
        let h3 = s3 * s3 / (2.0 * p.gravity);
        let h4 = s4 * s4 / (2.0 * p.gravity);
        Ok((
            DVector::from_column_slice(&[h1, h2, h3, h4]),
            DVector::from_column_slice(&[qa * SECONDS_PER_HOUR, qb * SECONDS_PER_HOUR]),
        ))
    }
}

impl VectorField for FourTanks {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        debug_assert_eq!(x.len(), 4);
        debug_assert_eq!(u.len(), 2);
        let p = &self.params;
        for (i, &h) in x.iter().enumerate() {
            if h < 0.0 {
                return Err(Error::Domain(format!(
                    "tank level h{} = {h:.6e} is negative",
                    i + 1
                )));
            }
        }
        let outflow = |i: usize| p.outlet_areas[i] * (2.0 * p.gravity * x[i]).sqrt();
        let qa = u[0] / SECONDS_PER_HOUR;
        let qb = u[1] / SECONDS_PER_HOUR;
        let s = p.tank_area;
        Ok(DVector::from_column_slice(&[
            (-outflow(0) + outflow(2) + p.gamma_a * qa) / s,
            (-outflow(1) + outflow(3) + p.gamma_b * qb) / s,
            (-outflow(2) + (1.0 - p.gamma_b) * qb) / s,
            (-outflow(3) + (1.0 - p.gamma_a) * qa) / s,
        ]))
    }
}

/// One classical RK4 step of size `h` with the input held constant
/// (zero-order hold) across all four stages.
pub fn rk4_step(
    field: &dyn VectorField,
    x: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>> {
    debug_assert!(h > 0.0);
    let k1 = field.eval(x, u)?;
    let k2 = field.eval(&(x + &k1 * (h / 2.0)), u)?;
    let k3 = field.eval(&(x + &k2 * (h / 2.0)), u)?;
    let k4 = field.eval(&(x + &k3 * h), u)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Discrete-time sampled-data system: the ground truth `F(x, u)` obtained by
/// integrating a continuous-time field over one sampling interval with
/// zero-order hold.
pub struct SampledSystem {
    field: Box<dyn VectorField + Send + Sync>,
    dt: f64,
    substeps: usize,
}

impl SampledSystem {
    pub fn new(
        field: Box<dyn VectorField + Send + Sync>,
        dt: f64,
        substeps: usize,
    ) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::Config(format!("sampling time must be positive, got {dt}")));
        }
        if substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        Ok(Self {
            field,
            dt,
            substeps,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.field.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.field.input_dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Advance one sampling interval: `substeps` RK4 steps of size
    /// `dt / substeps`, all under the same held input.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let h = self.dt / self.substeps as f64;
        let mut state = x.clone();
        for _ in 0..self.substeps {
            state = rk4_step(self.field.as_ref(), &state, u, h)?;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ZeroField;
    impl VectorField for ZeroField {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::zeros(x.len()))
        }
    }

    /// dx/dt = x, the linear scalar test equation.
    struct ScalarExp;
    impl VectorField for ScalarExp {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &DVector<f64>, _u: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(x.clone())
        }
    }

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn paper_equilibrium() -> (DVector<f64>, DVector<f64>) {
        (
            vec(&[0.65, 0.66, 0.6417, 0.6882]),
            vec(&[1.666, 1.974]),
        )
    }

    #[test]
    fn rk4_zero_field_fixes_state() {
        let x = vec(&[1.0, 2.0]);
        let next = rk4_step(&ZeroField, &x, &vec(&[0.7]), 0.05).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn rk4_matches_degree_four_taylor_polynomial() {
        // For dx/dt = x the one-step RK4 update is exactly
        // 1 + h + h^2/2 + h^3/6 + h^4/24.
        let h = 0.1;
        let next = rk4_step(&ScalarExp, &vec(&[1.0]), &vec(&[0.0]), h).unwrap();
        let expected = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((next[0] - expected).abs() < 1e-15);
        assert!((next[0] - 1.1051708333333333).abs() < 1e-15);
    }

    #[test]
    fn rk4_one_step_error_is_fifth_order() {
        // Step-halving on dx/dt = x: err(h)/err(h/2) ~ 2^5 = 32.
        let one_step_err = |h: f64| {
            let next = rk4_step(&ScalarExp, &vec(&[1.0]), &vec(&[0.0]), h).unwrap();
            (next[0] - h.exp()).abs()
        };
        for h in [0.1, 0.05, 0.025] {
            let ratio = one_step_err(h) / one_step_err(h / 2.0);
            assert!(
                (ratio - 32.0).abs() < 3.0,
                "step-halving ratio {ratio} at h={h} is not ~32"
            );
        }
    }

    #[test]
    fn vdp_origin_is_an_equilibrium() {
        let field = VanDerPol::new(0.1);
        let dx = field.eval(&vec(&[0.0, 0.0]), &vec(&[0.0])).unwrap();
        assert_eq!(dx, vec(&[0.0, 0.0]));
        let next = rk4_step(&field, &vec(&[0.0, 0.0]), &vec(&[0.0]), 0.05).unwrap();
        assert_eq!(next, vec(&[0.0, 0.0]));
    }

    #[test]
    fn vdp_field_direct_substitution() {
        let field = VanDerPol::new(0.1);
        // (1,1): damping term vanishes because (1 - x1)^2 = 0.
        let dx = field.eval(&vec(&[1.0, 1.0]), &vec(&[0.0])).unwrap();
        assert_eq!(dx, vec(&[1.0, -1.0]));
        // (0,1) with u = 0.5: (x2, nu*1*1 - 0 + 0.5) = (1, 0.6).
        let dx = field.eval(&vec(&[0.0, 1.0]), &vec(&[0.5])).unwrap();
        assert!((dx[0] - 1.0).abs() < 1e-15);
        assert!((dx[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn vdp_classical_toggle_changes_the_nonlinearity() {
        let printed = VanDerPol::new(0.1);
        let classical = VanDerPol {
            nu: 0.1,
            classical: true,
        };
        let x = vec(&[0.5, 1.0]);
        let u = vec(&[0.0]);
        let a = printed.eval(&x, &u).unwrap();
        let b = classical.eval(&x, &u).unwrap();
        // (1 - 0.5)^2 = 0.25 vs 1 - 0.25 = 0.75.
        assert!((a[1] - (0.1 * 0.25 - 0.5)).abs() < 1e-15);
        assert!((b[1] - (0.1 * 0.75 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn four_tanks_paper_equilibrium_is_consistent_with_default_params() {
        let field = FourTanks::new(FourTanksParams::default()).unwrap();
        let (x_eq, u_eq) = paper_equilibrium();
        let dx = field.eval(&x_eq, &u_eq).unwrap();
        assert!(
            dx.norm() < 1e-3,
            "field norm at the published equilibrium is {}",
            dx.norm()
        );
    }

    #[test]
    fn four_tanks_negative_level_is_a_domain_error() {
        let field = FourTanks::new(FourTanksParams::default()).unwrap();
        let err = field
            .eval(&vec(&[0.5, -0.1, 0.5, 0.5]), &vec(&[1.0, 1.0]))
            .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn four_tanks_drains_without_inflow() {
        let field = FourTanks::new(FourTanksParams::default()).unwrap();
        let dx = field
            .eval(&vec(&[1.0, 1.0, 1.0, 1.0]), &vec(&[0.0, 0.0]))
            .unwrap();
        assert!(dx.iter().all(|&v| v <= 0.0));
        assert!(dx[2] < 0.0 && dx[3] < 0.0);
    }

    #[test]
    fn four_tanks_rejects_bad_parameters() {
        let mut p = FourTanksParams::default();
        p.gamma_a = 1.5;
        assert!(FourTanks::new(p).is_err());
        let mut p = FourTanksParams::default();
        p.tank_area = 0.0;
        assert!(FourTanks::new(p).is_err());
    }

    #[test]
    fn sampled_step_with_one_substep_is_one_rk4_step() {
        let sys = SampledSystem::new(Box::new(VanDerPol::new(0.1)), 0.05, 1).unwrap();
        let x = vec(&[1.0, 1.0]);
        let u = vec(&[0.3]);
        let direct = rk4_step(&VanDerPol::new(0.1), &x, &u, 0.05).unwrap();
        assert_eq!(sys.step(&x, &u).unwrap(), direct);
    }

    #[test]
    fn sampled_step_substep_refinement_converges() {
        let coarse = SampledSystem::new(Box::new(VanDerPol::new(0.1)), 0.05, 1).unwrap();
        let fine = SampledSystem::new(Box::new(VanDerPol::new(0.1)), 0.05, 64).unwrap();
        let x = vec(&[1.0, 1.0]);
        let u = vec(&[0.0]);
        let a = coarse.step(&x, &u).unwrap();
        let b = fine.step(&x, &u).unwrap();
        // Measured one-step truncation gap, cross-checked against an
        // adaptive high-accuracy reference: 3.2845e-9.
        assert!((a - b).norm() < 5e-9);
    }

    #[test]
    fn sampled_step_zero_order_hold_composes_substeps() {
        let sys = SampledSystem::new(Box::new(VanDerPol::new(0.1)), 0.2, 4).unwrap();
        let x = vec(&[0.3, -0.7]);
        let u = vec(&[1.1]);
        let mut manual = x.clone();
        for _ in 0..4 {
            manual = rk4_step(&VanDerPol::new(0.1), &manual, &u, 0.05).unwrap();
        }
        assert_eq!(sys.step(&x, &u).unwrap(), manual);
    }

    #[test]
    fn four_tanks_equilibrium_is_a_fixed_point_of_the_sampled_system() {
        let field = FourTanks::new(FourTanksParams::default()).unwrap();
        let sys = SampledSystem::new(Box::new(field), 25.0, 32).unwrap();
        let (x_eq, u_eq) = paper_equilibrium();
        let next = sys.step(&x_eq, &u_eq).unwrap();
        assert!((next - &x_eq).norm() < 1e-3);
    }

    #[test]
    fn four_tanks_closed_form_equilibrium_is_exact() {
        let field = FourTanks::new(FourTanksParams::default()).unwrap();
        let (x_eq, u_eq) = field.equilibrium_for_levels(0.65, 0.66).unwrap();
        // Agrees with the published rounded values to their 4 digits.
        let (x_pub, u_pub) = paper_equilibrium();
        assert!((&x_eq - x_pub).amax() < 5e-5);
        assert!((&u_eq - u_pub).amax() < 1e-3);
        // And it is an equilibrium to machine precision.
        let dx = field.eval(&x_eq, &u_eq).unwrap();
        assert!(dx.norm() < 1e-15, "residual {}", dx.norm());
        let sys = SampledSystem::new(Box::new(field), 25.0, 32).unwrap();
        let next = sys.step(&x_eq, &u_eq).unwrap();
        assert!((next - &x_eq).norm() < 1e-12);
    }

    #[test]
    fn four_tanks_equilibrium_rejects_singular_valve_splits() {
        let mut p = FourTanksParams::default();
        p.gamma_a = 0.4;
        p.gamma_b = 0.6;
        let field = FourTanks::new(p).unwrap();
        assert!(field.equilibrium_for_levels(0.65, 0.66).is_err());
    }

    #[test]
    fn sampled_system_rejects_bad_sampling_config() {
        assert!(SampledSystem::new(Box::new(VanDerPol::new(0.1)), 0.0, 1).is_err());
        assert!(SampledSystem::new(Box::new(VanDerPol::new(0.1)), 0.05, 0).is_err());
    }
}
