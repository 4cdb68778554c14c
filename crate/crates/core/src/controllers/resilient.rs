//! Four-rule Takagi-Sugeno-Kang fuzzy corrector on top of feedforward.
//!
//! Inputs are the signed distance error `d_e` (positive when the robot lags
//! the reference) and `|phi_e|`, each covered by a "small"/"large" pair of
//! triangular shoulders. Each rule carries crisp gains `(k_d, k_t)`; the
//! wheel-speed corrections are `v_l = k_d d_e + k_t phi_e` and
//! `v_r = k_d d_e - k_t phi_e`.

use serde::{Deserialize, Serialize};

use super::{ControlCommand, ControlError, ControllerKind, TrackingController, TrackingError};
use crate::flags::Flags;
use crate::math::{hypot, sat};
use crate::planner::ReferenceSample;
use crate::vehicle::{RobotParams, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TNorm {
    Product,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzyRule {
    pub k_d: f64,
    pub k_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzyConfig {
    /// `|d_e|` at which "small" ends and "large" is fully active.
    pub distance_breakpoints: [f64; 2],
    /// Same for `|phi_e|`, in radians.
    pub heading_breakpoints: [f64; 2],
    /// Rule order: (d small, phi small), (d small, phi large),
    /// (d large, phi small), (d large, phi large).
    pub rules: [FuzzyRule; 4],
    pub t_norm: TNorm,
    /// Width of the sign blend applied to `x_e` when signing `d_e`.
    pub sign_width: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            distance_breakpoints: [0.0, 0.1],
            heading_breakpoints: [0.0, 0.2],
            rules: [
                FuzzyRule { k_d: 0.1, k_t: 0.1 },
                FuzzyRule { k_d: 0.1, k_t: 0.3 },
                FuzzyRule { k_d: 0.3, k_t: 0.1 },
                FuzzyRule { k_d: 0.3, k_t: 0.3 },
            ],
            t_norm: TNorm::Product,
            sign_width: 0.05,
        }
    }
}

impl FuzzyConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        for bp in [self.distance_breakpoints, self.heading_breakpoints] {
            if !(bp[0].is_finite() && bp[1].is_finite() && bp[0] >= 0.0 && bp[1] > bp[0]) {
                return Err(ControlError::InvalidGain { field: "resilient.breakpoints", reason: "need 0 <= lo < hi" });
            }
        }
        for rule in &self.rules {
            for k in [rule.k_d, rule.k_t] {
                if !(k > 0.0 && k < 1.0) {
                    return Err(ControlError::InvalidGain { field: "resilient.rules", reason: "k_d, k_t must lie in (0, 1)" });
                }
            }
        }
        super::positive("resilient.sign_width", self.sign_width)
    }

    /// Degrees of ("small", "large") for one input; they sum to one.
    pub fn memberships(x: f64, bp: [f64; 2]) -> [f64; 2] {
        let large = ((x - bp[0]) / (bp[1] - bp[0])).clamp(0.0, 1.0);
        [1.0 - large, large]
    }

    /// Rule firing strengths for inputs `(|d_e|, |phi_e|)`.
    pub fn firing(&self, d: f64, phi: f64) -> [f64; 4] {
        let md = Self::memberships(d, self.distance_breakpoints);
        let mp = Self::memberships(phi, self.heading_breakpoints);
        let t = |a: f64, b: f64| match self.t_norm {
            TNorm::Product => a * b,
            TNorm::Min => a.min(b),
        };
        [t(md[0], mp[0]), t(md[0], mp[1]), t(md[1], mp[0]), t(md[1], mp[1])]
    }

    /// Weighted-average gains `(k_d, k_t)`.
    pub fn gains(&self, d: f64, phi: f64) -> (f64, f64) {
        let w = self.firing(d, phi);
        let total: f64 = w.iter().sum();
        let kd = w.iter().zip(&self.rules).map(|(w, r)| w * r.k_d).sum::<f64>() / total;
        let kt = w.iter().zip(&self.rules).map(|(w, r)| w * r.k_t).sum::<f64>() / total;
        (kd, kt)
    }

    /// Wheel linear-speed corrections `(right, left)`.
    pub fn corrections(&self, d_e: f64, phi_e: f64) -> (f64, f64) {
        let (kd, kt) = self.gains(d_e.abs(), phi_e.abs());
        (kd * d_e - kt * phi_e, kd * d_e + kt * phi_e)
    }
}

#[derive(Debug, Clone)]
pub struct ResilientController {
    pub config: FuzzyConfig,
    params: RobotParams,
    last_v_c: Option<f64>,
}

impl ResilientController {
    pub fn new(config: FuzzyConfig, params: RobotParams) -> Self {
        Self { config, params, last_v_c: None }
    }

    /// Euclidean position error, positive when the robot lags behind.
    pub fn distance_error(&self, err: &TrackingError) -> f64 {
        sat(-err.x_e, self.config.sign_width) * hypot(err.x_e, err.y_e)
    }
}

impl TrackingController for ResilientController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Resilient
    }

    fn command(&mut self, measured: &RobotState, horizon: &[ReferenceSample], dt: f64) -> ControlCommand {
        let r = &horizon[0];
        let err = TrackingError::new(&measured.pose, measured.v, measured.omega, r);
        let (dv_right, dv_left) = self.config.corrections(self.distance_error(&err), err.phi_e);
        let b = self.params.half_track_m;
        let right = r.v + b * r.omega + dv_right;
        let left = r.v - b * r.omega + dv_left;
        let v_c = 0.5 * (right + left);
        let omega_c = (right - left) / (2.0 * b);
        let dv_c = match self.last_v_c {
            Some(prev) => (v_c - prev) / dt,
            None => r.dv,
        };
        self.last_v_c = Some(v_c);
        ControlCommand::new(v_c, dv_c, omega_c, &self.params, Flags::empty())
    }
}
