//! One extended Kalman filter per fault hypothesis, all fed the same
//! commanded wheel speeds and the same measurements; the hypothesis with the
//! smallest windowed innovation norm is the diagnosis.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::{Matrix3, SMatrix, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use super::kalman::{kalman_correct, kalman_predict};
use super::sensing::{Measurement, NoiseConfig};
use super::FaultKind;
use crate::flags::Flags;
use crate::math::{cos, sin, wrap_angle};
use crate::vehicle::{integrate_pose, wheels_to_body_with_radii, Pose, RobotParams, VehicleError, WheelSpeeds};

/// The five modelled conditions, nominal first.
pub const HYPOTHESES: [FaultKind; 5] =
    [FaultKind::FaultFree, FaultKind::FlatRight, FaultKind::FlatLeft, FaultKind::BumpRight, FaultKind::BumpLeft];

pub type Hypothesis = FaultKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankConfig {
    /// Residual history length used by [`diagnose`].
    pub window: usize,
    /// Radius a flat-tire filter assumes for the deflated wheel.
    pub flat_radius_m: f64,
    /// Bump height assumed by the bump filters.
    pub bump_amplitude_m: f64,
    /// Per-step process noise std of `(x, y, phi)`.
    pub process_std: [f64; 3],
    /// Std of odometry speed and yaw rate against the commanded wheel speeds.
    pub odometry_std: [f64; 2],
    /// A fault hypothesis must undercut the nominal windowed residual by this
    /// fraction; closer scores count as a tie.
    pub tie_margin: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self { window: 50, flat_radius_m: 0.27, bump_amplitude_m: 0.015, process_std: [0.002, 0.002, 0.002], odometry_std: [0.02, 0.05], tie_margin: 0.05 }
    }
}

impl BankConfig {
    pub fn is_valid(&self) -> bool {
        self.window >= 1
            && self.flat_radius_m > 0.0
            && self.bump_amplitude_m.is_finite()
            && self.tie_margin.is_finite()
            && self.tie_margin >= 0.0
            && self.process_std.iter().chain(self.odometry_std.iter()).all(|s| s.is_finite() && *s >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilterModel {
    pub hypothesis: Hypothesis,
    pub x: Vector3<f64>,
    pub p: Matrix3<f64>,
    pub q: Matrix3<f64>,
    pub r: SMatrix<f64, 5, 5>,
    residuals: VecDeque<f64>,
    window: usize,
}

impl KalmanFilterModel {
    /// Radii `[right, left]` this hypothesis uses for ground motion.
    fn actuation_radii(&self, cfg: &BankConfig, nominal: f64, wheel_angles: [f64; 2]) -> [f64; 2] {
        let lift = |a: f64| cfg.bump_amplitude_m * sin(a).max(0.0);
        match self.hypothesis {
            FaultKind::BumpRight => [nominal + lift(wheel_angles[0]), nominal],
            FaultKind::BumpLeft => [nominal, nominal + lift(wheel_angles[1])],
            _ => [nominal, nominal],
        }
    }

    /// Radii `[right, left]` this hypothesis expects odometry to use.
    fn sensing_radii(&self, cfg: &BankConfig, nominal: f64) -> [f64; 2] {
        match self.hypothesis {
            FaultKind::FlatRight => [cfg.flat_radius_m, nominal],
            FaultKind::FlatLeft => [nominal, cfg.flat_radius_m],
            _ => [nominal, nominal],
        }
    }

    pub fn pose(&self) -> Pose {
        Pose { x: self.x[0], y: self.x[1], phi: self.x[2] }
    }

    /// Mean of the stored residual norms (at most `window` of them).
    pub fn windowed_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        self.residuals.iter().sum::<f64>() / self.residuals.len() as f64
    }

    pub fn last_residual(&self) -> Option<f64> {
        self.residuals.back().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub config: BankConfig,
    pub filters: Vec<KalmanFilterModel>,
    nominal_radius: f64,
    half_track: f64,
}

impl FilterBank {
    pub fn new(config: BankConfig, noise: &NoiseConfig, params: &RobotParams, initial: &Pose) -> Self {
        let ps = config.process_std;
        let q = Matrix3::from_diagonal(&Vector3::new(ps[0] * ps[0], ps[1] * ps[1], ps[2] * ps[2]));
        let sq = |s: f64| (s * s).max(1e-12);
        let r = SMatrix::<f64, 5, 5>::from_diagonal(&Vector5::new(
            sq(noise.pose_xy_std_m),
            sq(noise.pose_xy_std_m),
            sq(noise.pose_heading_std_rad),
            sq(config.odometry_std[0]),
            sq(config.odometry_std[1]),
        ));
        let p0 = Matrix3::from_diagonal(&Vector3::new(sq(noise.pose_xy_std_m), sq(noise.pose_xy_std_m), sq(noise.pose_heading_std_rad)));
        let filters = HYPOTHESES
            .iter()
            .map(|&h| KalmanFilterModel {
                hypothesis: h,
                x: Vector3::new(initial.x, initial.y, initial.phi),
                p: p0,
                q,
                r,
                residuals: VecDeque::with_capacity(config.window),
                window: config.window,
            })
            .collect();
        Self { config, filters, nominal_radius: params.wheel_radius_m, half_track: params.half_track_m }
    }

    /// Prediction of one filter under commanded wheel speeds.
    pub fn predict(&self, filter: &KalmanFilterModel, input: &WheelSpeeds, wheel_angles: [f64; 2], dt: f64) -> Result<KalmanFilterModel, VehicleError> {
        let radii = filter.actuation_radii(&self.config, self.nominal_radius, wheel_angles);
        let (v, w) = wheels_to_body_with_radii(input, radii[0], radii[1], self.half_track);
        let pose = integrate_pose(&filter.pose(), v, w, dt)?;
        let phi = filter.x[2];
        let f = Matrix3::new(1.0, 0.0, -v * dt * sin(phi), 0.0, 1.0, v * dt * cos(phi), 0.0, 0.0, 1.0);
        let (p, _) = kalman_predict(&filter.p, &f, &filter.q);
        Ok(KalmanFilterModel { x: Vector3::new(pose.x, pose.y, pose.phi), p, ..filter.clone() })
    }

    /// Predicts every filter with `input` over `dt` and corrects with `z`.
    pub fn step(&mut self, input: &WheelSpeeds, wheel_angles: [f64; 2], z: &Measurement, dt: f64) -> Result<Flags, VehicleError> {
        let mut flags = Flags::empty();
        let h = SMatrix::<f64, 5, 3>::from_row_slice(&[
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0,
        ]);
        let mut updated = Vec::with_capacity(self.filters.len());
        for filter in &self.filters {
            let mut f = self.predict(filter, input, wheel_angles, dt)?;
            let sense = f.sensing_radii(&self.config, self.nominal_radius);
            let (v_h, w_h) = wheels_to_body_with_radii(input, sense[0], sense[1], self.half_track);
            let hx = Vector5::new(f.x[0], f.x[1], f.x[2], v_h, w_h);
            // compare headings on the circle
            let phi_z = f.x[2] + wrap_angle(z.pose_fix.phi - f.x[2]);
            let zv = Vector5::new(z.pose_fix.x, z.pose_fix.y, phi_z, z.v_odo, z.omega_odo);
            let c = kalman_correct(&f.x, &f.p, &zv, &hx, &h, &f.r);
            flags |= c.flags;
            f.x = c.x;
            f.x[2] = wrap_angle(f.x[2]);
            f.p = c.p;
            if f.residuals.len() == f.window {
                f.residuals.pop_front();
            }
            f.residuals.push_back(c.residual);
            updated.push(f);
        }
        self.filters = updated;
        Ok(flags)
    }

    pub fn filter(&self, kind: FaultKind) -> Option<&KalmanFilterModel> {
        self.filters.iter().find(|f| f.hypothesis == kind)
    }
}

/// Hypothesis with the smallest mean residual over the last `window` steps.
/// Ties, including scores within the configured margin of the nominal
/// filter, go to the fault-free hypothesis.
pub fn diagnose(bank: &FilterBank, window: usize) -> FaultKind {
    let window = window.max(1);
    let score = |f: &KalmanFilterModel| {
        let n = f.residuals.len().min(window);
        if n == 0 {
            return 0.0;
        }
        f.residuals.iter().rev().take(n).sum::<f64>() / n as f64
    };
    let mut best = FaultKind::FaultFree;
    let mut best_score = bank.filter(FaultKind::FaultFree).map_or(f64::INFINITY, score) * (1.0 - bank.config.tie_margin);
    for f in &bank.filters {
        let s = score(f);
        if s < best_score {
            best = f.hypothesis;
            best_score = s;
        }
    }
    best
}
