//! Identification of bilinear Koopman (EDMD) surrogate models from sampled
//! data and offset-free model predictive control on top of them.
//!
//! The crate covers the full pipeline: ground-truth sampled-data benchmark
//! systems ([`dynamics`]), monomial observable dictionaries ([`dictionary`]),
//! EDMD / bilinear / SafEDMD / EDMDc regression ([`edmd`]), the disturbance
//! observer ([`observer`]), the finite-horizon box-constrained optimal
//! control problem ([`mpc`]), the steady-state reference calculator
//! ([`refcalc`]), and the scenario/closed-loop machinery with CSV trace
//! export ([`harness`]).

pub mod dictionary;
pub mod dynamics;
pub mod edmd;
pub mod error;
pub mod linalg;
pub mod mpc;
pub mod observer;
pub mod refcalc;

pub mod harness;

pub use error::{Error, Result};
