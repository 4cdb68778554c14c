//! Sliding-mode controller with separate longitudinal and heading surfaces
//! acting at the acceleration level through uncertain input gains.
//!
//! `s1 = dx_e + c1 x_e` is steered by the linear acceleration
//! `v' = alpha u1`; `s2 = dphi_e + c2 phi_e + c3 y_e` by the angular
//! acceleration `w' = beta u2`. Each input is an equivalent-control term that
//! cancels the surface drift plus a saturated switching term.

use serde::{Deserialize, Serialize};

use super::{non_negative, positive, ControlCommand, ControlError, ControllerKind, TrackingController, TrackingError};
use crate::flags::Flags;
use crate::math::{cos, guard_denominator, sat, sin};
use crate::planner::ReferenceSample;
use crate::vehicle::{RobotParams, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustGains {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k1: f64,
    pub k2: f64,
    /// Nominal input gain of the linear channel (inverse effective mass).
    pub alpha: f64,
    /// Nominal input gain of the angular channel (inverse effective inertia).
    pub beta: f64,
    pub sat_width: f64,
}

impl Default for RobustGains {
    fn default() -> Self {
        Self { c1: 4.0, c2: 3.0, c3: 5.0, k1: 1.0, k2: 0.6, alpha: 1.0, beta: 1.0, sat_width: 0.05 }
    }
}

impl RobustGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        positive("robust.c1", self.c1)?;
        positive("robust.c2", self.c2)?;
        positive("robust.c3", self.c3)?;
        non_negative("robust.k1", self.k1)?;
        non_negative("robust.k2", self.k2)?;
        if !(self.alpha.is_finite() && self.alpha != 0.0 && self.beta.is_finite() && self.beta != 0.0) {
            return Err(ControlError::InvalidGain { field: "robust.alpha/beta", reason: "must be finite and non-zero" });
        }
        positive("robust.sat_width", self.sat_width)
    }
}

#[derive(Debug, Clone)]
pub struct RobustController {
    pub gains: RobustGains,
    params: RobotParams,
    v_c: Option<f64>,
    omega_c: f64,
}

impl RobustController {
    pub fn new(gains: RobustGains, params: RobotParams) -> Self {
        Self { gains, params, v_c: None, omega_c: 0.0 }
    }

    /// Surface values `(s1, s2)`.
    pub fn surfaces(&self, err: &TrackingError) -> (f64, f64) {
        let g = &self.gains;
        (err.dx_e + g.c1 * err.x_e, err.dphi_e + g.c2 * err.phi_e + g.c3 * err.y_e)
    }
}

impl TrackingController for RobustController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Robust
    }

    fn command(&mut self, measured: &RobotState, horizon: &[ReferenceSample], dt: f64) -> ControlCommand {
        let r = &horizon[0];
        let g = self.gains;
        let err = TrackingError::new(&measured.pose, measured.v, measured.omega, r);
        let (s1, s2) = self.surfaces(&err);
        let mut flags = Flags::empty();

        // drift of s1 with the acceleration input removed
        let d1 = -r.dv - measured.v * sin(err.phi_e) * err.dphi_e + err.dy_e * r.omega + err.y_e * r.domega + g.c1 * err.dx_e;
        let (c, clamped) = guard_denominator(g.alpha * cos(err.phi_e), 1e-3);
        if clamped {
            flags |= Flags::COS_CLAMPED;
        }
        let u1 = -(d1 + g.k1 * sat(s1, g.sat_width)) / c;

        let d2 = -r.domega + g.c2 * err.dphi_e + g.c3 * err.dy_e;
        let u2 = -(d2 + g.k2 * sat(s2, g.sat_width)) / g.beta;

        let (v_prev, w_prev) = match self.v_c {
            Some(v) => (v, self.omega_c),
            None => (measured.v, measured.omega),
        };
        let dv_c = g.alpha * u1;
        let v_c = v_prev + dv_c * dt;
        let omega_c = w_prev + g.beta * u2 * dt;
        self.v_c = Some(v_c);
        self.omega_c = omega_c;
        ControlCommand::new(v_c, dv_c, omega_c, &self.params, flags)
    }
}
