//! Measurement channel: an absolute pose fix plus wheel encoders, with
//! odometry formed from encoder rotation and the (possibly faulty) radii.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::FaultSchedule;
use crate::vehicle::{integrate_pose, wheels_to_body_with_radii, Pose, RobotParams, RobotState, VehicleError, WheelSpeeds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub pose_xy_std_m: f64,
    pub pose_heading_std_rad: f64,
    pub wheel_speed_std_rad_s: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { pose_xy_std_m: 0.005, pose_heading_std_rad: 0.2_f64.to_radians(), wheel_speed_std_rad_s: 0.01 }
    }
}

impl NoiseConfig {
    pub const ZERO: NoiseConfig = NoiseConfig { pose_xy_std_m: 0.0, pose_heading_std_rad: 0.0, wheel_speed_std_rad_s: 0.0 };

    pub fn is_valid(&self) -> bool {
        [self.pose_xy_std_m, self.pose_heading_std_rad, self.wheel_speed_std_rad_s]
            .iter()
            .all(|s| s.is_finite() && *s >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub pose_fix: Pose,
    pub encoder: WheelSpeeds,
    pub v_odo: f64,
    pub omega_odo: f64,
    /// Dead-reckoned pose from odometry, with the same additive pose noise
    /// as the fix.
    pub odometry_pose: Pose,
    /// Encoder wheel angles `[right, left]`.
    pub wheel_angles: [f64; 2],
}

impl Measurement {
    /// Pose fix with odometry velocities.
    pub fn as_state(&self) -> RobotState {
        RobotState { pose: self.pose_fix, v: self.v_odo, omega: self.omega_odo, wheels: self.encoder }
    }

    /// Dead-reckoned pose with odometry velocities.
    pub fn odometry_state(&self) -> RobotState {
        RobotState { pose: self.odometry_pose, ..self.as_state() }
    }
}

/// Stateful sensor suite owning the noise stream. Every call to
/// [`Sensors::measure`] draws exactly five normals, whatever the noise levels,
/// so streams stay aligned across configurations.
#[derive(Debug, Clone)]
pub struct Sensors {
    rng: ChaCha8Rng,
    pub noise: NoiseConfig,
    odometry_pose: Pose,
    wheel_angles: [f64; 2],
}

impl Sensors {
    pub fn new(seed: u64, noise: NoiseConfig, initial_pose: Pose) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), noise, odometry_pose: initial_pose, wheel_angles: [0.0; 2] }
    }

    /// Advances encoder angles and dead-reckoned odometry over one inner step
    /// from the true shaft speeds.
    pub fn integrate(&mut self, shaft: &WheelSpeeds, sensed_radii: [f64; 2], half_track: f64, dt: f64) -> Result<(), VehicleError> {
        let (v, w) = wheels_to_body_with_radii(shaft, sensed_radii[0], sensed_radii[1], half_track);
        self.odometry_pose = integrate_pose(&self.odometry_pose, v, w, dt)?;
        self.wheel_angles[0] += shaft.right * dt;
        self.wheel_angles[1] += shaft.left * dt;
        Ok(())
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn measure(&mut self, truth: &Pose, shaft: &WheelSpeeds, sensed_radii: [f64; 2], half_track: f64) -> Measurement {
        let n = [self.normal(), self.normal(), self.normal(), self.normal(), self.normal()];
        let nc = self.noise;
        let noisy = |p: &Pose| {
            Pose::new(p.x + nc.pose_xy_std_m * n[0], p.y + nc.pose_xy_std_m * n[1], p.phi + nc.pose_heading_std_rad * n[2])
        };
        let pose_fix = noisy(truth);
        let odometry_pose = noisy(&self.odometry_pose);
        let encoder = WheelSpeeds::new(shaft.right + nc.wheel_speed_std_rad_s * n[3], shaft.left + nc.wheel_speed_std_rad_s * n[4]);
        let (v_odo, omega_odo) = wheels_to_body_with_radii(&encoder, sensed_radii[0], sensed_radii[1], half_track);
        Measurement { pose_fix, encoder, v_odo, omega_odo, odometry_pose, wheel_angles: self.wheel_angles }
    }

    pub fn wheel_angles(&self) -> [f64; 2] {
        self.wheel_angles
    }
}

/// One-shot measurement of `truth` (its wheel speeds read as shaft speeds)
/// under the sensing faults active at `t`.
pub fn corrupt_measurement(
    truth: &RobotState,
    schedule: &FaultSchedule,
    t: f64,
    seed: u64,
    noise: &NoiseConfig,
    params: &RobotParams,
) -> RobotState {
    let mut sensors = Sensors::new(seed, *noise, truth.pose);
    let radii = schedule.breakdown(t, [0.0; 2], params.wheel_radius_m).sensing();
    sensors.measure(&truth.pose, &truth.wheels, radii, params.half_track_m).as_state()
}
