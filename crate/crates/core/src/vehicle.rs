//! Differential-drive plant: kinematics, reduced rigid-body dynamics and the
//! per-wheel DC motor.
//!
//! Everything here is a pure state transition on value types. The closed loop
//! in [`crate::sim`] owns the state and decides which of these models to chain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::rk4;
use crate::math::{all_finite, cos, sin, wrap_angle};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VehicleError {
    #[error("non-finite value in {0}")]
    InvalidState(&'static str),
    #[error("invalid parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: &'static str },
    #[error("step {dt} s exceeds the electrical stiffness bound {bound} s (L/(10 R))")]
    Stiffness { dt: f64, bound: f64 },
}

/// Geometry and mass properties of the wheelchair-type robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub wheel_radius_m: f64,
    /// Half the distance between the driving wheels.
    pub half_track_m: f64,
    /// Distance from the axle midpoint to the centre of mass.
    pub com_offset_m: f64,
    pub body_mass_kg: f64,
    /// Mass of one driving wheel together with its motor.
    pub wheel_mass_kg: f64,
    /// Body inertia about the vertical axis through the centre of mass.
    pub body_inertia: f64,
    /// Wheel (with motor) inertia about the wheel axis.
    pub wheel_inertia: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            wheel_radius_m: 0.30,
            half_track_m: 0.25,
            com_offset_m: 0.05,
            body_mass_kg: 30.0,
            wheel_mass_kg: 1.0,
            body_inertia: 1.0,
            wheel_inertia: 0.005,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let checks = [
            ("wheel_radius_m", self.wheel_radius_m),
            ("half_track_m", self.half_track_m),
            ("body_mass_kg", self.body_mass_kg),
            ("wheel_mass_kg", self.wheel_mass_kg),
            ("body_inertia", self.body_inertia),
            ("wheel_inertia", self.wheel_inertia),
        ];
        for (field, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(VehicleError::InvalidParams { field, reason: "must be finite and > 0" });
            }
        }
        if !(self.com_offset_m.is_finite() && self.com_offset_m >= 0.0) {
            return Err(VehicleError::InvalidParams { field: "com_offset_m", reason: "must be finite and >= 0" });
        }
        Ok(())
    }

    /// m = m_c + 2 m_w.
    pub fn total_mass(&self) -> f64 {
        self.body_mass_kg + 2.0 * self.wheel_mass_kg
    }
}

/// Planar pose of the axle midpoint. `phi` is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self { x, y, phi: wrap_angle(phi) }
    }
}

/// Wheel angular velocities, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub right: f64,
    pub left: f64,
}

impl WheelSpeeds {
    pub fn new(right: f64, left: f64) -> Self {
        Self { right, left }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub pose: Pose,
    /// Linear velocity of the axle midpoint.
    pub v: f64,
    /// Yaw rate.
    pub omega: f64,
    pub wheels: WheelSpeeds,
}

/// Pose kinematics: x' = v cos(phi), y' = v sin(phi), phi' = omega, one RK4
/// step with `v` and `omega` held constant.
pub fn integrate_pose(pose: &Pose, v: f64, omega: f64, dt: f64) -> Result<Pose, VehicleError> {
    if !all_finite(&[pose.x, pose.y, pose.phi, v, omega, dt]) {
        return Err(VehicleError::InvalidState("kinematic step input"));
    }
    if dt <= 0.0 {
        return Err(VehicleError::InvalidParams { field: "dt", reason: "must be > 0" });
    }
    let x = rk4(&[pose.x, pose.y, pose.phi], dt, |s| [v * cos(s[2]), v * sin(s[2]), omega]);
    Ok(Pose { x: x[0], y: x[1], phi: wrap_angle(x[2]) })
}

/// Advances the robot kinematically under a commanded `(v, omega)`; the
/// velocities and wheel speeds are set to the command.
pub fn kinematic_step(
    state: &RobotState,
    cmd_v: f64,
    cmd_omega: f64,
    params: &RobotParams,
    dt: f64,
) -> Result<RobotState, VehicleError> {
    let pose = integrate_pose(&state.pose, cmd_v, cmd_omega, dt)?;
    Ok(RobotState { pose, v: cmd_v, omega: cmd_omega, wheels: body_to_wheels(cmd_v, cmd_omega, params) })
}

/// Inverse kinematics: right `(v + b w)/r`, left `(v - b w)/r`.
pub fn body_to_wheels(v: f64, omega: f64, params: &RobotParams) -> WheelSpeeds {
    body_to_wheels_with_radii(v, omega, params.wheel_radius_m, params.wheel_radius_m, params.half_track_m)
}

pub fn body_to_wheels_with_radii(v: f64, omega: f64, r_right: f64, r_left: f64, half_track: f64) -> WheelSpeeds {
    WheelSpeeds { right: (v + half_track * omega) / r_right, left: (v - half_track * omega) / r_left }
}

/// Forward kinematics: `v = r (W_r + W_l)/2`, `w = r (W_r - W_l)/(2b)`.
pub fn wheels_to_body(wheels: &WheelSpeeds, params: &RobotParams) -> (f64, f64) {
    wheels_to_body_with_radii(wheels, params.wheel_radius_m, params.wheel_radius_m, params.half_track_m)
}

/// Forward kinematics with a separate effective radius per wheel.
pub fn wheels_to_body_with_radii(wheels: &WheelSpeeds, r_right: f64, r_left: f64, half_track: f64) -> (f64, f64) {
    let vr = r_right * wheels.right;
    let vl = r_left * wheels.left;
    (0.5 * (vr + vl), (vr - vl) / (2.0 * half_track))
}

/// DC motor electrical and mechanical constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorParams {
    /// Armature inductance; the small parameter of the two-time-scale split.
    pub inductance_h: f64,
    pub resistance_ohm: f64,
    /// Torque constant, equal to the back-EMF constant in SI units.
    pub torque_constant: f64,
    /// Rotor plus wheel inertia seen by the shaft.
    pub shaft_inertia: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self { inductance_h: 1e-3, resistance_ohm: 1.0, torque_constant: 0.5, shaft_inertia: 0.05 }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let checks = [
            ("inductance_h", self.inductance_h),
            ("resistance_ohm", self.resistance_ohm),
            ("torque_constant", self.torque_constant),
            ("shaft_inertia", self.shaft_inertia),
        ];
        for (field, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(VehicleError::InvalidParams { field, reason: "must be finite and > 0" });
            }
        }
        Ok(())
    }

    /// Largest step accepted by [`motor_step_full`].
    pub fn max_full_step(&self) -> f64 {
        self.inductance_h / (10.0 * self.resistance_ohm)
    }

    /// Mechanical time constant `J R / k^2` of the reduced model.
    pub fn mechanical_time_constant(&self) -> f64 {
        self.shaft_inertia * self.resistance_ohm / (self.torque_constant * self.torque_constant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    pub speed: f64,
    pub current: f64,
}

impl MotorState {
    /// Stored energy `J w^2 / 2 + L i^2 / 2`.
    pub fn energy(&self, params: &MotorParams) -> f64 {
        0.5 * params.shaft_inertia * self.speed * self.speed
            + 0.5 * params.inductance_h * self.current * self.current
    }
}

/// Full second-order motor: `J w' = k i - load`, `L i' = -k w - R i + u`.
pub(crate) fn motor_derivative(s: &[f64; 2], u: f64, load: f64, p: &MotorParams) -> [f64; 2] {
    [
        (p.torque_constant * s[1] - load) / p.shaft_inertia,
        (-p.torque_constant * s[0] - p.resistance_ohm * s[1] + u) / p.inductance_h,
    ]
}

pub fn motor_step_full(state: &MotorState, u: f64, params: &MotorParams, dt: f64) -> Result<MotorState, VehicleError> {
    if !all_finite(&[state.speed, state.current, u, dt]) {
        return Err(VehicleError::InvalidState("motor step input"));
    }
    let bound = params.max_full_step();
    if dt <= 0.0 || dt > bound * (1.0 + 1e-12) {
        return Err(VehicleError::Stiffness { dt, bound });
    }
    let x = rk4(&[state.speed, state.current], dt, |s| motor_derivative(s, u, 0.0, params));
    Ok(MotorState { speed: x[0], current: x[1] })
}

/// Slow-manifold motor (L = 0): `J w' = -(k^2/R) w + (k/R) u`.
pub fn motor_step_reduced(speed: f64, u: f64, params: &MotorParams, dt: f64) -> f64 {
    let k = params.torque_constant;
    let r = params.resistance_ohm;
    let j = params.shaft_inertia;
    rk4(&[speed], dt, |s| [(-k * k / r * s[0] + k / r * u) / j])[0]
}

/// Current on the slow manifold, `i = (u - k w)/R`.
pub fn quasi_steady_current(speed: f64, u: f64, params: &MotorParams) -> f64 {
    (u - params.torque_constant * speed) / params.resistance_ohm
}

/// Reduced inertia matrix `S^T M S` of the constrained rigid body in wheel
/// coordinates.
pub fn reduced_inertia(params: &RobotParams) -> [[f64; 2]; 2] {
    let r = params.wheel_radius_m;
    let b = params.half_track_m;
    let m = params.total_mass();
    let c = r * r / (4.0 * b * b);
    let diag = c * (m * b * b + params.body_inertia) + params.wheel_inertia;
    let off = c * (m * b * b - params.body_inertia);
    [[diag, off], [off, diag]]
}

/// Velocity-dependent (centripetal/Coriolis) matrix in wheel coordinates.
pub fn reduced_coriolis(params: &RobotParams, yaw_rate: f64) -> [[f64; 2]; 2] {
    let r = params.wheel_radius_m;
    let b = params.half_track_m;
    let c = r * r / (2.0 * b) * params.body_mass_kg * params.com_offset_m * yaw_rate;
    [[0.0, c], [-c, 0.0]]
}

/// Wheel accelerations from `M w' + V w = tau`, with optional extra inertia
/// (e.g. motor rotors) added on the diagonal.
pub fn wheel_acceleration(
    params: &RobotParams,
    wheels: &WheelSpeeds,
    torque: &WheelSpeeds,
    extra_inertia: f64,
) -> WheelSpeeds {
    let (_, yaw_rate) = wheels_to_body(wheels, params);
    let mut m = reduced_inertia(params);
    m[0][0] += extra_inertia;
    m[1][1] += extra_inertia;
    let v = reduced_coriolis(params, yaw_rate);
    let rhs0 = torque.right - (v[0][0] * wheels.right + v[0][1] * wheels.left);
    let rhs1 = torque.left - (v[1][0] * wheels.right + v[1][1] * wheels.left);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    WheelSpeeds {
        right: (m[1][1] * rhs0 - m[0][1] * rhs1) / det,
        left: (-m[1][0] * rhs0 + m[0][0] * rhs1) / det,
    }
}
