//! Declarative experiment description: system, data campaign, model kind,
//! controller configuration and simulation settings. The TOML config file
//! mirrors this type field for field; unknown keys are a hard error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::dynamics::{FourTanks, FourTanksParams, SampledSystem, VanDerPol};
use crate::edmd::CoordinateTransform;
use crate::error::{Error, Result};
use crate::mpc::{OcpSpec, PropagationMode};
use crate::refcalc::OutputMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Vdp,
    FourTanks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    /// Sampling time in seconds.
    pub dt: f64,
    /// RK4 sub-steps per sampling interval.
    pub substeps: usize,
    /// Van-der-Pol damping parameter (vdp only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Use the classical (1 - x1^2) nonlinearity instead of the printed
    /// (1 - x1)^2 form (vdp only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vdp_classical: bool,
    /// Four-tanks physical parameters (four_tanks only; defaults shipped).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub four_tanks: Option<FourTanksParams>,
}

impl SystemConfig {
    pub fn dims(&self) -> (usize, usize) {
        match self.kind {
            SystemKind::Vdp => (2, 1),
            SystemKind::FourTanks => (4, 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SystemKind::Vdp => {
                if self.nu.is_none() {
                    return Err(Error::Config("vdp system requires `nu`".into()));
                }
                if self.four_tanks.is_some() {
                    return Err(Error::Config(
                        "`four_tanks` parameters are not applicable to the vdp system".into(),
                    ));
                }
            }
            SystemKind::FourTanks => {
                if self.nu.is_some() || self.vdp_classical {
                    return Err(Error::Config(
                        "`nu`/`vdp_classical` are not applicable to the four_tanks system".into(),
                    ));
                }
                self.four_tanks.unwrap_or_default().validate()?;
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<SampledSystem> {
        self.validate()?;
        match self.kind {
            SystemKind::Vdp => SampledSystem::new(
                Box::new(VanDerPol {
                    nu: self.nu.unwrap(),
                    classical: self.vdp_classical,
                }),
                self.dt,
                self.substeps,
            ),
            SystemKind::FourTanks => SampledSystem::new(
                Box::new(FourTanks::new(self.four_tanks.unwrap_or_default())?),
                self.dt,
                self.substeps,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub max_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Samples per basis input.
    pub count: usize,
    /// Per-coordinate lower bounds of the sampling box.
    pub omega_lo: Vec<f64>,
    /// Per-coordinate upper bounds of the sampling box.
    pub omega_hi: Vec<f64>,
    /// Mandatory RNG seed; identical scenarios reproduce bit-identical data.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bilinear,
    Edmdc,
    Safedmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationConfig {
    Projected,
    Lifted,
}

impl From<PropagationConfig> for PropagationMode {
    fn from(c: PropagationConfig) -> Self {
        match c {
            PropagationConfig::Projected => PropagationMode::Projected,
            PropagationConfig::Lifted => PropagationMode::Lifted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub propagation: PropagationConfig,
    /// Optional ridge parameter for the regressions.
    #[serde(default)]
    pub ridge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Standard,
    OffsetFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub mode: ControllerMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMode {
    Known,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub mode: EquilibriumMode,
    /// True equilibrium state (known mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_ref: Option<Vec<f64>>,
    /// True equilibrium input (known mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_ref: Option<Vec<f64>>,
    /// Approximate equilibrium state (unknown mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_x: Option<Vec<f64>>,
    /// Approximate equilibrium input (unknown mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_u: Option<Vec<f64>>,
    /// 1-based state indices of the controlled output; defaults to the full
    /// state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_indices: Option<Vec<usize>>,
    /// Output setpoint; defaults to the output map evaluated at the (known
    /// or approximate) equilibrium state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Diagonal of the state weight Q.
    pub q_diag: Vec<f64>,
    /// Diagonal of the input weight R.
    pub r_diag: Vec<f64>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub steps: usize,
    pub x0: Vec<f64>,
}

/// Full experiment description; see the module docs for the file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemConfig,
    pub dictionary: DictionaryConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub controller: ControllerConfig,
    pub equilibrium: EquilibriumConfig,
    pub mpc: MpcConfig,
    pub sim: SimConfig,
}

fn expect_len(what: &str, v: &[f64], len: usize) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::Config(format!(
            "{what} must have {len} entries, got {}",
            v.len()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialization")
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let (n, m) = self.system.dims();
        if self.dictionary.max_degree == 0 {
            return Err(Error::Config("dictionary degree must be at least 1".into()));
        }
        if self.data.count == 0 {
            return Err(Error::Config("data count must be at least 1".into()));
        }
        expect_len("data.omega_lo", &self.data.omega_lo, n)?;
        expect_len("data.omega_hi", &self.data.omega_hi, n)?;
        if self
            .data
            .omega_lo
            .iter()
            .zip(&self.data.omega_hi)
            .any(|(lo, hi)| lo >= hi)
        {
            return Err(Error::Config("sampling box must satisfy lo < hi".into()));
        }
        expect_len("mpc.q_diag", &self.mpc.q_diag, n)?;
        expect_len("mpc.r_diag", &self.mpc.r_diag, m)?;
        expect_len("mpc.u_lo", &self.mpc.u_lo, m)?;
        expect_len("mpc.u_hi", &self.mpc.u_hi, m)?;
        expect_len("sim.x0", &self.sim.x0, n)?;
        if self.sim.steps == 0 {
            return Err(Error::Config("sim.steps must be at least 1".into()));
        }

        match self.equilibrium.mode {
            EquilibriumMode::Known => {
                if self.equilibrium.x_ref.is_none() || self.equilibrium.u_ref.is_none() {
                    return Err(Error::Config(
                        "known-equilibrium mode requires equilibrium.x_ref and equilibrium.u_ref"
                            .into(),
                    ));
                }
                if self.equilibrium.approx_x.is_some() || self.equilibrium.approx_u.is_some() {
                    return Err(Error::Config(
                        "approx_x/approx_u are only valid in unknown-equilibrium mode".into(),
                    ));
                }
            }
            EquilibriumMode::Unknown => {
                if self.equilibrium.approx_x.is_none() || self.equilibrium.approx_u.is_none() {
                    return Err(Error::Config(
                        "unknown-equilibrium mode requires equilibrium.approx_x and equilibrium.approx_u"
                            .into(),
                    ));
                }
                if self.equilibrium.x_ref.is_some() || self.equilibrium.u_ref.is_some() {
                    return Err(Error::Config(
                        "x_ref/u_ref are only valid in known-equilibrium mode".into(),
                    ));
                }
            }
        }
        let (xe, ue) = self.equilibrium_pair()?;
        if xe.len() != n || ue.len() != m {
            return Err(Error::Config("equilibrium dimensions are inconsistent".into()));
        }
        self.output_map()?;
        let y = self.y_target()?;
        if let Some(t) = &self.equilibrium.y_target {
            if t.len() != y.len() {
                return Err(Error::Config("y_target length mismatch".into()));
            }
        }
        self.build_ocp_spec()?;
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.system.dims().0
    }

    pub fn input_dim(&self) -> usize {
        self.system.dims().1
    }

    pub fn build_system(&self) -> Result<SampledSystem> {
        self.system.build()
    }

    pub fn build_dictionary(&self) -> Result<Dictionary> {
        Dictionary::monomials(self.state_dim(), self.dictionary.max_degree)
    }

    /// Shift by the (known or approximate) equilibrium and scale inputs by
    /// half their largest magnitude so the transformed components lie in
    /// [-2, 2].
    pub fn build_transform(&self) -> Result<CoordinateTransform> {
        let (xe, ue) = self.equilibrium_pair()?;
        let m = self.input_dim();
        let scale = DVector::from_fn(m, |j, _| {
            self.mpc.u_lo[j].abs().max(self.mpc.u_hi[j].abs()) / 2.0
        });
        CoordinateTransform::new(xe, ue, scale)
    }

    /// The pair the controller treats as the equilibrium: exact in known
    /// mode, the approximation otherwise.
    pub fn equilibrium_pair(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let (n, m) = self.system.dims();
        match self.equilibrium.mode {
            EquilibriumMode::Known => Ok((
                expect_len("equilibrium.x_ref", self.equilibrium.x_ref.as_ref().unwrap(), n)?,
                expect_len("equilibrium.u_ref", self.equilibrium.u_ref.as_ref().unwrap(), m)?,
            )),
            EquilibriumMode::Unknown => Ok((
                expect_len(
                    "equilibrium.approx_x",
                    self.equilibrium.approx_x.as_ref().unwrap(),
                    n,
                )?,
                expect_len(
                    "equilibrium.approx_u",
                    self.equilibrium.approx_u.as_ref().unwrap(),
                    m,
                )?,
            )),
        }
    }

    pub fn output_map(&self) -> Result<OutputMap> {
        let n = self.state_dim();
        match &self.equilibrium.output_indices {
            None => Ok(OutputMap::identity(n)),
            Some(indices) => {
                let zero_based: Vec<usize> = indices
                    .iter()
                    .map(|&i| {
                        if i == 0 || i > n {
                            Err(Error::Config(format!(
                                "output index {i} out of range 1..={n}"
                            )))
                        } else {
                            Ok(i - 1)
                        }
                    })
                    .collect::<Result<_>>()?;
                OutputMap::coordinates(n, zero_based)
            }
        }
    }

    pub fn y_target(&self) -> Result<DVector<f64>> {
        let map = self.output_map()?;
        match &self.equilibrium.y_target {
            Some(t) => expect_len("equilibrium.y_target", t, map.output_dim()),
            None => {
                let (xe, _) = self.equilibrium_pair()?;
                Ok(map.eval(&xe))
            }
        }
    }

    pub fn build_ocp_spec(&self) -> Result<OcpSpec> {
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&self.mpc.q_diag));
        let r = DMatrix::from_diagonal(&DVector::from_column_slice(&self.mpc.r_diag));
        Ok(OcpSpec::new(
            self.mpc.horizon,
            q,
            r,
            DVector::from_column_slice(&self.mpc.u_lo),
            DVector::from_column_slice(&self.mpc.u_hi),
        )?
        .with_tolerances(self.mpc.tol, self.mpc.max_iters))
    }

    pub fn propagation_mode(&self) -> PropagationMode {
        self.model.propagation.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::suites;

    #[test]
    fn suite_scenarios_round_trip_through_toml() {
        for (_, scenario) in suites::vdp_suite().iter().chain(suites::four_tanks_suite().iter()) {
            let text = scenario.to_toml();
            let parsed = Scenario::from_toml(&text).unwrap();
            assert_eq!(&parsed, scenario);
        }
    }

    #[test]
    fn unknown_keys_are_a_hard_error() {
        let (_, scenario) = &suites::vdp_suite()[0];
        let text = scenario.to_toml() + "\n[extra]\nkey = 1\n";
        assert!(Scenario::from_toml(&text).is_err());
        let text = scenario.to_toml().replace("[sim]", "[sim]\nbogus = 2\n");
        assert!(Scenario::from_toml(&text).is_err());
    }

    #[test]
    fn dimension_mismatches_are_config_errors() {
        let (_, scenario) = &suites::vdp_suite()[0];
        let mut bad = scenario.clone();
        bad.sim.x0 = vec![1.0];
        assert!(bad.validate().is_err());
        let mut bad = scenario.clone();
        bad.mpc.q_diag = vec![1.0, 1.0, 1.0];
        assert!(bad.validate().is_err());
        let mut bad = scenario.clone();
        bad.data.omega_hi = vec![-3.0, 2.0];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn equilibrium_mode_fields_are_mutually_exclusive() {
        let (_, scenario) = &suites::vdp_suite()[0];
        let mut bad = scenario.clone();
        bad.equilibrium.approx_x = Some(vec![0.0, 0.0]);
        assert!(bad.validate().is_err());

        let (_, ue) = suites::four_tanks_suite()
            .into_iter()
            .find(|(name, _)| name.contains("ue"))
            .unwrap();
        let mut bad = ue.clone();
        bad.equilibrium.x_ref = Some(vec![0.0; 4]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn input_scaling_matches_the_half_max_rule() {
        let (_, vdp) = &suites::vdp_suite()[0];
        let t = vdp.build_transform().unwrap();
        assert_eq!(t.u_scale[0], 1.0); // box [-2, 2]
        let (_, tanks) = &suites::four_tanks_suite()[0];
        let t = tanks.build_transform().unwrap();
        assert_eq!(t.u_scale[0], 1.63); // box [0, 3.26]
        assert_eq!(t.u_scale[1], 2.0); // box [0, 4]
    }

    #[test]
    fn output_indices_are_one_based() {
        let (_, tanks) = &suites::four_tanks_suite()[0];
        let map = tanks.output_map().unwrap();
        assert_eq!(map.indices(), &[0, 1]);
        let y = tanks.y_target().unwrap();
        assert_eq!(y.len(), 2);
        assert!((y[0] - 0.65).abs() < 1e-12 && (y[1] - 0.66).abs() < 1e-12);
    }
}
