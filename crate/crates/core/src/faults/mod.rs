//! Wheel faults as altered plant and sensor parameters, the measurement
//! channel, and a bank of Kalman filters that isolates the active fault.
//!
//! A flat tire is a sensing fault: odometry converts true wheel rotation
//! with the shrinking radius. A shaft bump and slippage are actuation faults:
//! they change how wheel rotation turns into ground speed and never touch the
//! sensors directly.

mod bank;
mod kalman;
mod sensing;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{exp, sin};
use crate::vehicle::WheelSpeeds;

pub use bank::{diagnose, BankConfig, FilterBank, Hypothesis, KalmanFilterModel, HYPOTHESES};
pub use kalman::{kalman_correct, kalman_predict, Correction};
pub use sensing::{corrupt_measurement, Measurement, NoiseConfig, Sensors};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultError {
    #[error("fault event {index}: {reason}")]
    InvalidEvent { index: usize, reason: &'static str },
    #[error("fault events must be sorted by t_start (event {index})")]
    Unsorted { index: usize },
    #[error("effective {wheel} radius {radius} m is not positive at t = {t} s")]
    NonPositiveRadius { wheel: &'static str, radius: f64, t: f64 },
    #[error("unknown fault kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    FaultFree,
    FlatLeft,
    FlatRight,
    BumpLeft,
    BumpRight,
    Slippage,
}

impl FaultKind {
    pub const ALL: [FaultKind; 6] = [
        FaultKind::FaultFree,
        FaultKind::FlatLeft,
        FaultKind::FlatRight,
        FaultKind::BumpLeft,
        FaultKind::BumpRight,
        FaultKind::Slippage,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FaultKind::FaultFree => "fault_free",
            FaultKind::FlatLeft => "flat_left",
            FaultKind::FlatRight => "flat_right",
            FaultKind::BumpLeft => "bump_left",
            FaultKind::BumpRight => "bump_right",
            FaultKind::Slippage => "slippage",
        }
    }

    /// Amplitude used when an event leaves it unset.
    pub fn default_amplitude(self) -> f64 {
        match self {
            FaultKind::FlatLeft | FaultKind::FlatRight => 0.04,
            FaultKind::BumpLeft | FaultKind::BumpRight => 0.015,
            FaultKind::Slippage => 0.8,
            FaultKind::FaultFree => 0.0,
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FaultKind {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaultKind::ALL.into_iter().find(|k| k.id() == s).ok_or_else(|| FaultError::UnknownKind(s.into()))
    }
}

fn default_decay_tau() -> f64 {
    5.0
}

/// One timed fault. `amplitude` is the radius loss of a flat tire, the bump
/// height (both in meters) or the slip factor in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub kind: FaultKind,
    pub t_start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_s: Option<f64>,
    pub amplitude: f64,
    /// Bump period in seconds; when absent the bump is locked to wheel rotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_s: Option<f64>,
    #[serde(default = "default_decay_tau")]
    pub decay_tau_s: f64,
}

impl FaultEvent {
    pub fn new(kind: FaultKind, t_start_s: f64, t_end_s: Option<f64>) -> Self {
        Self { kind, t_start_s, t_end_s, amplitude: kind.default_amplitude(), period_s: None, decay_tau_s: default_decay_tau() }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start_s && self.t_end_s.is_none_or(|end| t < end)
    }

    fn validate(&self, index: usize, nominal_radius: f64) -> Result<(), FaultError> {
        let bad = |reason| Err(FaultError::InvalidEvent { index, reason });
        if !(self.t_start_s.is_finite() && self.t_start_s >= 0.0) {
            return bad("t_start_s must be finite and >= 0");
        }
        if let Some(end) = self.t_end_s {
            if !(end.is_finite() && end > self.t_start_s) {
                return bad("t_end_s must exceed t_start_s");
            }
        }
        if !self.amplitude.is_finite() {
            return bad("amplitude must be finite");
        }
        match self.kind {
            FaultKind::FlatLeft | FaultKind::FlatRight => {
                if !(self.amplitude >= 0.0 && nominal_radius - self.amplitude > 0.0) {
                    return bad("flat final radius must stay > 0");
                }
                if !(self.decay_tau_s.is_finite() && self.decay_tau_s > 0.0) {
                    return bad("decay_tau_s must be > 0");
                }
            }
            FaultKind::BumpLeft | FaultKind::BumpRight => {
                if !(nominal_radius + self.amplitude.min(0.0) > 0.0) {
                    return bad("bump would make the radius non-positive");
                }
                if let Some(p) = self.period_s {
                    if !(p.is_finite() && p > 0.0) {
                        return bad("period_s must be > 0");
                    }
                }
            }
            FaultKind::Slippage => {
                if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
                    return bad("slip factor must lie in (0, 1]");
                }
            }
            FaultKind::FaultFree => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultSchedule {
    pub events: Vec<FaultEvent>,
}

/// Per-wheel decomposition of the radius perturbations at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusBreakdown {
    /// Base radius after any flat-tire loss, `[right, left]`.
    pub base: [f64; 2],
    /// Bump lift added on top of the base.
    pub bump: [f64; 2],
    pub slip: f64,
    pub nominal: f64,
}

impl RadiusBreakdown {
    /// Radii seen by odometry (flat only).
    pub fn sensing(&self) -> [f64; 2] {
        self.base
    }

    /// Rolling radii realizing ground speed (bump only).
    pub fn actuation(&self) -> [f64; 2] {
        [self.nominal + self.bump[0], self.nominal + self.bump[1]]
    }
}

impl FaultSchedule {
    pub fn new(events: Vec<FaultEvent>) -> Self {
        Self { events }
    }

    pub fn validate(&self, nominal_radius: f64) -> Result<(), FaultError> {
        for (i, e) in self.events.iter().enumerate() {
            e.validate(i, nominal_radius)?;
            if i > 0 && e.t_start_s < self.events[i - 1].t_start_s {
                return Err(FaultError::Unsorted { index: i });
            }
        }
        Ok(())
    }

    pub fn active(&self, t: f64) -> impl Iterator<Item = &FaultEvent> + '_ {
        self.events.iter().filter(move |e| e.is_active(t) && e.kind != FaultKind::FaultFree)
    }

    pub fn active_kinds(&self, t: f64) -> Vec<FaultKind> {
        let mut kinds: Vec<FaultKind> = self.active(t).map(|e| e.kind).collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    pub fn breakdown(&self, t: f64, wheel_angles: [f64; 2], nominal: f64) -> RadiusBreakdown {
        let mut base = [nominal; 2];
        let mut bump = [0.0; 2];
        let mut slip = 1.0;
        for e in self.active(t) {
            match e.kind {
                FaultKind::FlatRight | FaultKind::FlatLeft => {
                    let w = usize::from(e.kind == FaultKind::FlatLeft);
                    let loss = e.amplitude * (1.0 - exp(-(t - e.t_start_s) / e.decay_tau_s));
                    base[w] -= loss;
                }
                FaultKind::BumpRight | FaultKind::BumpLeft => {
                    let w = usize::from(e.kind == FaultKind::BumpLeft);
                    let phase = match e.period_s {
                        Some(p) => 2.0 * core::f64::consts::PI * (t - e.t_start_s) / p,
                        None => wheel_angles[w],
                    };
                    bump[w] += e.amplitude * sin(phase).max(0.0);
                }
                FaultKind::Slippage => slip *= e.amplitude,
                FaultKind::FaultFree => {}
            }
        }
        RadiusBreakdown { base, bump, slip, nominal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRadii {
    pub right: f64,
    pub left: f64,
    pub slip: f64,
}

/// Composite radii: flat sets the base, bump adds, slip multiplies speed.
pub fn effective_radii(
    schedule: &FaultSchedule,
    t: f64,
    wheel_angle_right: f64,
    wheel_angle_left: f64,
    nominal: f64,
) -> Result<EffectiveRadii, FaultError> {
    let b = schedule.breakdown(t, [wheel_angle_right, wheel_angle_left], nominal);
    let right = b.base[0] + b.bump[0];
    let left = b.base[1] + b.bump[1];
    for (wheel, radius) in [("right", right), ("left", left)] {
        if !(radius > 0.0) {
            return Err(FaultError::NonPositiveRadius { wheel, radius, t });
        }
    }
    Ok(EffectiveRadii { right, left, slip: b.slip })
}

/// Wheel speeds actually realized on the ground, expressed at the nominal
/// radius so that the nominal forward kinematics applies.
pub fn apply_actuation(cmd: &WheelSpeeds, schedule: &FaultSchedule, t: f64, wheel_angles: [f64; 2], nominal: f64) -> WheelSpeeds {
    let b = schedule.breakdown(t, wheel_angles, nominal);
    let act = b.actuation();
    WheelSpeeds { right: cmd.right * act[0] / nominal * b.slip, left: cmd.left * act[1] / nominal * b.slip }
}
