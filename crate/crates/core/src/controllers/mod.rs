//! Outer-loop tracking controllers and the inner-loop wheel PID.
//!
//! Every outer controller maps the measured robot state and the reference
//! (plus a look-ahead horizon for the predictive controller) to a
//! [`ControlCommand`]. At zero tracking error with zero error rates they all
//! emit exactly the feedforward `(v_d, omega_d)`.

mod adaptive;
mod antifragile;
mod pid;
mod resilient;
mod robust;

use alloc::boxed::Box;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flags::Flags;
use crate::math::{cos, sin, wrap_angle};
use crate::planner::ReferenceSample;
use crate::vehicle::{body_to_wheels, Pose, RobotParams, RobotState, WheelSpeeds};

pub use adaptive::{horizon_cost, solve_horizon, AdaptiveController, HorizonSolution, MpcConfig};
pub use antifragile::{
    antifragile_law, lyapunov_rate, reaching_time, sliding_values, AntifragileController, AntifragileGains,
    AntifragileLaw, SlidingState,
};
pub use pid::{hurwitz_check, PidGains, PidState, WheelPid};
pub use resilient::{FuzzyConfig, FuzzyRule, ResilientController, TNorm};
pub use robust::{RobustController, RobustGains};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid gain {field}: {reason}")]
    InvalidGain { field: &'static str, reason: &'static str },
    #[error("unknown controller id `{0}`")]
    UnknownController(alloc::string::String),
}

pub(crate) fn positive(field: &'static str, x: f64) -> Result<(), ControlError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ControlError::InvalidGain { field, reason: "must be finite and > 0" })
    }
}

pub(crate) fn non_negative(field: &'static str, x: f64) -> Result<(), ControlError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(ControlError::InvalidGain { field, reason: "must be finite and >= 0" })
    }
}

/// Pose error in the reference frame together with its rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    pub x_e: f64,
    pub y_e: f64,
    pub phi_e: f64,
    pub dx_e: f64,
    pub dy_e: f64,
    pub dphi_e: f64,
}

impl TrackingError {
    /// Error of `actual` moving at `(v_r, omega_r)` against the reference.
    pub fn new(actual: &Pose, v_r: f64, omega_r: f64, reference: &ReferenceSample) -> Self {
        let (x_e, y_e, phi_e) = tracking_error(actual, reference);
        let (dx_e, dy_e, dphi_e) = tracking_error_rates((x_e, y_e, phi_e), v_r, omega_r, reference.v, reference.omega);
        Self { x_e, y_e, phi_e, dx_e, dy_e, dphi_e }
    }
}

/// World-frame pose difference rotated by `-phi_d`; heading error wrapped.
pub fn tracking_error(actual: &Pose, desired: &ReferenceSample) -> (f64, f64, f64) {
    let dx = actual.x - desired.x;
    let dy = actual.y - desired.y;
    let (s, c) = (sin(desired.phi), cos(desired.phi));
    (c * dx + s * dy, -s * dx + c * dy, wrap_angle(actual.phi - desired.phi))
}

/// Error dynamics of the unicycle in the reference frame.
pub fn tracking_error_rates(err: (f64, f64, f64), v_r: f64, omega_r: f64, v_d: f64, omega_d: f64) -> (f64, f64, f64) {
    let (x_e, y_e, phi_e) = err;
    (-v_d + v_r * cos(phi_e) + y_e * omega_d, v_r * sin(phi_e) - x_e * omega_d, omega_r - omega_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub v_c: f64,
    /// Commanded linear acceleration.
    pub dv_c: f64,
    pub omega_c: f64,
    pub wheel_setpoints: WheelSpeeds,
    pub flags: Flags,
}

impl ControlCommand {
    pub fn new(v_c: f64, dv_c: f64, omega_c: f64, params: &RobotParams, flags: Flags) -> Self {
        Self { v_c, dv_c, omega_c, wheel_setpoints: body_to_wheels(v_c, omega_c, params), flags }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Robust,
    Adaptive,
    Resilient,
    Antifragile,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] =
        [ControllerKind::Robust, ControllerKind::Adaptive, ControllerKind::Resilient, ControllerKind::Antifragile];

    pub fn id(self) -> &'static str {
        match self {
            ControllerKind::Robust => "robust",
            ControllerKind::Adaptive => "adaptive",
            ControllerKind::Resilient => "resilient",
            ControllerKind::Antifragile => "antifragile",
        }
    }

    /// Upper-case label used in tables.
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Robust => "ROBUST",
            ControllerKind::Adaptive => "ADAPTIVE",
            ControllerKind::Resilient => "RESILIENT",
            ControllerKind::Antifragile => "ANTIFRAGILE",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ControllerKind {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| ControlError::UnknownController(s.into()))
    }
}

/// Gain sets of all four controllers; a scenario carries one of each so any
/// controller can be selected at run time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub antifragile: AntifragileGains,
    pub robust: RobustGains,
    pub adaptive: MpcConfig,
    pub resilient: FuzzyConfig,
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        self.antifragile.validate()?;
        self.robust.validate()?;
        self.adaptive.validate()?;
        self.resilient.validate()
    }
}

pub trait TrackingController {
    fn kind(&self) -> ControllerKind;

    /// Number of reference samples (current first) the controller reads.
    fn horizon_len(&self) -> usize {
        1
    }

    /// One outer-loop step. `horizon[0]` is the reference at the current time,
    /// later entries are spaced by `dt`.
    fn command(&mut self, measured: &RobotState, horizon: &[ReferenceSample], dt: f64) -> ControlCommand;
}

pub fn build_controller(kind: ControllerKind, gains: &ControllerGains, params: &RobotParams) -> Box<dyn TrackingController + Send> {
    match kind {
        ControllerKind::Antifragile => Box::new(AntifragileController::new(gains.antifragile, *params)),
        ControllerKind::Robust => Box::new(RobustController::new(gains.robust, *params)),
        ControllerKind::Adaptive => Box::new(AdaptiveController::new(gains.adaptive, *params)),
        ControllerKind::Resilient => Box::new(ResilientController::new(gains.resilient.clone(), *params)),
    }
}

/// First-order low-pass differentiator, `y' = w_c (du/dt - y)` discretized
/// with backward Euler.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilteredDerivative {
    prev: Option<f64>,
    value: f64,
    pub cutoff_hz: f64,
}

impl FilteredDerivative {
    pub fn new(cutoff_hz: f64) -> Self {
        Self { prev: None, value: 0.0, cutoff_hz }
    }

    pub fn update(&mut self, u: f64, dt: f64) -> f64 {
        if let Some(prev) = self.prev {
            let wc = 2.0 * core::f64::consts::PI * self.cutoff_hz;
            let a = wc * dt / (1.0 + wc * dt);
            self.value += a * ((u - prev) / dt - self.value);
        }
        self.prev = Some(u);
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}
