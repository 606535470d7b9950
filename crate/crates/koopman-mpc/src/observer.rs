//! Disturbance observer: the additive model-error estimate fed to the MPC.
//!
//! Each step compares the measured state with the disturbance-corrected
//! one-step prediction from the previous state/input pair and accumulates
//! the innovation into the estimate. Works either on states (default) or on
//! lifted vectors when the controller propagates in the observable space.

use nalgebra::DVector;

use crate::edmd::SurrogateModel;
use crate::error::{Error, Result};

/// Which space the observer (and the disturbance) lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverSpace {
    /// Disturbance on the projected state, dimension n.
    State,
    /// Disturbance on the lifted vector, dimension M + 1 (constant slot
    /// retained).
    Lifted,
}

/// Observer state, updated functionally: old value in, new value out.
#[derive(Debug, Clone)]
pub struct Observer {
    space: ObserverSpace,
    /// Unit innovation gain reproduces the update law exactly; values in
    /// (0, 1) are an extension for noisy measurements.
    gain: f64,
    d_hat: DVector<f64>,
    /// Previous measured state (lifted in lifted mode) and applied input.
    prev: Option<(DVector<f64>, DVector<f64>)>,
    /// Last corrected one-step prediction.
    x_tilde: Option<DVector<f64>>,
}

impl Observer {
    /// Fresh observer with a zero disturbance estimate of dimension `dim`
    /// (n in state mode, M + 1 in lifted mode).
    pub fn new(space: ObserverSpace, dim: usize) -> Self {
        Self {
            space,
            gain: 1.0,
            d_hat: DVector::zeros(dim),
            prev: None,
            x_tilde: None,
        }
    }

    /// Override the innovation gain; must lie in (0, 1].
    pub fn with_gain(mut self, gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain <= 1.0) {
            return Err(Error::Config(format!(
                "observer gain must lie in (0, 1], got {gain}"
            )));
        }
        self.gain = gain;
        Ok(self)
    }

    pub fn space(&self) -> ObserverSpace {
        self.space
    }

    pub fn d_hat(&self) -> &DVector<f64> {
        &self.d_hat
    }

    /// Corrected one-step prediction from the most recent update, if any.
    pub fn x_tilde(&self) -> Option<&DVector<f64>> {
        self.x_tilde.as_ref()
    }

    /// Store the measured state and the input just applied to the plant;
    /// these seed the prediction of the next update. In lifted mode the
    /// measurement is lifted through the model first.
    pub fn record(&self, model: &SurrogateModel, x_measured: &DVector<f64>, u_applied: &DVector<f64>) -> Result<Self> {
        let stored = match self.space {
            ObserverSpace::State => x_measured.clone(),
            ObserverSpace::Lifted => model.lift(x_measured)?,
        };
        Ok(Self {
            prev: Some((stored, u_applied.clone())),
            ..self.clone()
        })
    }

    /// Disturbance update at a new measurement: predict one step from the
    /// stored pair, correct by the current estimate, and add the innovation
    /// between measurement and corrected prediction.
    pub fn update(&self, model: &SurrogateModel, x_measured: &DVector<f64>) -> Result<Self> {
        let (x_prev, u_prev) = self.prev.as_ref().ok_or(Error::ObserverNotPrimed)?;
        let (x_tilde, x_now) = match self.space {
            ObserverSpace::State => {
                let pred = model.predict(x_prev, u_prev)? + &self.d_hat;
                (pred, x_measured.clone())
            }
            ObserverSpace::Lifted => {
                let pred = model.predict_lifted(x_prev, u_prev)? + &self.d_hat;
                (pred, model.lift(x_measured)?)
            }
        };
        let d_hat = &self.d_hat + (&x_now - &x_tilde) * self.gain;
        Ok(Self {
            space: self.space,
            gain: self.gain,
            d_hat,
            prev: self.prev.clone(),
            x_tilde: Some(x_tilde),
        })
    }
}
