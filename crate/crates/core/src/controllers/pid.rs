//! Wheel-speed PID for the fast actuator loop.
//!
//! With `tau = t / epsilon` the loop splits into a fast proportional-derivative
//! part, whose companion matrix `[[0, 1], [-k1, -k2]]` must be Hurwitz, and a
//! slow integral part. The derivative gain acts on the fast-time derivative
//! `de/dtau = epsilon de/dt`, so the realized law is
//! `u = k1 e + epsilon k2 de/dt + k3 int(e) dt`.

use serde::{Deserialize, Serialize};

use super::{non_negative, positive, ControlError, FilteredDerivative};
use crate::flags::Flags;
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Time-scale ratio between the fast and slow subsystems.
    pub epsilon: f64,
    /// Supply voltage limit; the output is clamped to `[-limit, limit]`.
    pub voltage_limit: f64,
    pub derivative_filter_hz: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { k1: 5.0, k2: 0.5, k3: 10.0, epsilon: 0.01, voltage_limit: 24.0, derivative_filter_hz: 100.0 }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !hurwitz_check(self.k1, self.k2) {
            return Err(ControlError::InvalidGain { field: "pid.k1/k2", reason: "[[0,1],[-k1,-k2]] must be Hurwitz" });
        }
        non_negative("pid.k3", self.k3)?;
        positive("pid.epsilon", self.epsilon)?;
        positive("pid.voltage_limit", self.voltage_limit)?;
        positive("pid.derivative_filter_hz", self.derivative_filter_hz)
    }
}

/// Whether both eigenvalues of `[[0, 1], [-k1, -k2]]` have negative real part.
pub fn hurwitz_check(k1: f64, k2: f64) -> bool {
    if !(k1.is_finite() && k2.is_finite()) {
        return false;
    }
    // eigenvalues solve l^2 + k2 l + k1 = 0
    let disc = k2 * k2 - 4.0 * k1;
    let max_re = if disc >= 0.0 { 0.5 * (-k2 + sqrt(disc)) } else { -0.5 * k2 };
    max_re < 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub derivative: FilteredDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelPid {
    pub gains: PidGains,
    pub state: PidState,
}

impl WheelPid {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, state: PidState { integral: 0.0, derivative: FilteredDerivative::new(gains.derivative_filter_hz) } }
    }

    /// Motor voltage for one inner-loop step.
    pub fn update(&mut self, setpoint: f64, measured: f64, dt: f64) -> (f64, Flags) {
        let g = &self.gains;
        let mut flags = Flags::empty();
        let e = setpoint - measured;
        let de = self.state.derivative.update(e, dt);
        let mut integral = self.state.integral + e * dt;
        if g.k3 > 0.0 {
            let bound = g.voltage_limit / g.k3;
            if integral.abs() > bound {
                integral = integral.clamp(-bound, bound);
                flags |= Flags::INTEGRAL_CLAMPED;
            }
        }
        self.state.integral = integral;
        let u = g.k1 * e + g.epsilon * g.k2 * de + g.k3 * integral;
        if u.abs() > g.voltage_limit {
            flags |= Flags::VOLTAGE_SATURATED;
            return (u.clamp(-g.voltage_limit, g.voltage_limit), flags);
        }
        (u, flags)
    }
}
