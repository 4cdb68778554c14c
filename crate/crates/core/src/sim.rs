//! Two-time-scale closed loop: an outer pose controller at `outer_rate_hz`
//! and per-wheel actuation at `inner_rate_hz`, recorded once per outer step.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{
    build_controller, lyapunov_rate, sliding_values, ControlCommand, ControlError, ControllerGains, ControllerKind,
    PidGains, TrackingError, WheelPid,
};
use crate::faults::{apply_actuation, diagnose, BankConfig, FaultError, FaultKind, FaultSchedule, FilterBank, NoiseConfig, Sensors};
use crate::flags::Flags;
use crate::math::{all_finite, round_sig9};
use crate::planner::{PlannerError, ReferenceSample, ReferenceTrajectory, Waypoint};
use crate::vehicle::{
    body_to_wheels, integrate_pose, motor_step_full, wheels_to_body, MotorParams, MotorState, Pose, RobotParams,
    RobotState, VehicleError, WheelSpeeds,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("gains: {0}")]
    Gains(#[from] ControlError),
    #[error("faults: {0}")]
    Faults(#[from] FaultError),
    #[error("trajectory: {0}")]
    Planner(#[from] PlannerError),
    #[error("non-finite state at record {index} (t = {t})")]
    NonFinite { index: usize, t: f64 },
    #[error("plant failure at record {index}: {source}")]
    Plant { index: usize, source: VehicleError },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantMode {
    /// Wheel speeds follow their setpoints instantly.
    Kinematic,
    /// Each wheel is a DC motor driven by its own PID.
    #[default]
    Dynamic,
}

impl PlantMode {
    pub fn id(self) -> &'static str {
        match self {
            PlantMode::Kinematic => "kinematic",
            PlantMode::Dynamic => "dynamic",
        }
    }
}

impl core::str::FromStr for PlantMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kinematic" => Ok(PlantMode::Kinematic),
            "dynamic" => Ok(PlantMode::Dynamic),
            other => Err(alloc::format!("unknown plant mode `{other}`")),
        }
    }
}

/// Where the outer controller's pose comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    /// Dead-reckoned odometry.
    Odometry,
    /// Absolute pose fix.
    #[default]
    PoseFix,
    /// Estimate of the filter matching the current diagnosis.
    BankEstimate,
}

fn default_outer() -> f64 {
    50.0
}

fn default_inner() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub controller: ControllerKind,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outer")]
    pub outer_rate_hz: f64,
    #[serde(default = "default_inner")]
    pub inner_rate_hz: f64,
    #[serde(default)]
    pub plant: PlantMode,
    #[serde(default)]
    pub feedback: FeedbackSource,
    /// Start pose; the first reference sample when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pose: Option<Pose>,
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub gains: ControllerGains,
    #[serde(default)]
    pub pid: PidGains,
    #[serde(default)]
    pub robot: RobotParams,
    #[serde(default)]
    pub motor: MotorParams,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub bank: BankConfig,
    #[serde(default)]
    pub faults: FaultSchedule,
}

impl Scenario {
    pub fn new(name: impl Into<String>, controller: ControllerKind, waypoints: Vec<Waypoint>, duration_s: f64) -> Self {
        Self {
            name: name.into(),
            controller,
            duration_s,
            seed: 0,
            outer_rate_hz: default_outer(),
            inner_rate_hz: default_inner(),
            plant: PlantMode::default(),
            feedback: FeedbackSource::default(),
            initial_pose: None,
            waypoints,
            gains: ControllerGains::default(),
            pid: PidGains::default(),
            robot: RobotParams::default(),
            motor: MotorParams::default(),
            noise: NoiseConfig::default(),
            bank: BankConfig::default(),
            faults: FaultSchedule::default(),
        }
    }

    /// Inner steps per outer step.
    pub fn substeps(&self) -> usize {
        libm::round(self.inner_rate_hz / self.outer_rate_hz) as usize
    }

    /// Number of outer steps (and trace records).
    pub fn steps(&self) -> usize {
        libm::round(self.duration_s * self.outer_rate_hz) as usize
    }

    pub fn trajectory(&self) -> Result<ReferenceTrajectory, SimError> {
        Ok(ReferenceTrajectory::from_waypoints(&self.waypoints, self.outer_rate_hz)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        for (field, rate) in [("outer_rate_hz", self.outer_rate_hz), ("inner_rate_hz", self.inner_rate_hz)] {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(invalid(field, "must be finite and > 0"));
            }
        }
        let ratio = self.inner_rate_hz / self.outer_rate_hz;
        if ratio < 1.0 || (ratio - libm::round(ratio)).abs() > 1e-9 {
            return Err(invalid("inner_rate_hz", "must be an integer multiple of outer_rate_hz"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration_s", "must be finite and > 0"));
        }
        self.robot.validate().map_err(|e| invalid("robot", alloc::format!("{e}")))?;
        self.motor.validate().map_err(|e| invalid("motor", alloc::format!("{e}")))?;
        self.gains.validate()?;
        self.pid.validate()?;
        if !self.noise.is_valid() {
            return Err(invalid("noise", "standard deviations must be finite and >= 0"));
        }
        if !self.bank.is_valid() {
            return Err(invalid("bank", "window must be > 0 and deviations finite and >= 0"));
        }
        if let Some(p) = self.initial_pose {
            if !all_finite(&[p.x, p.y, p.phi]) {
                return Err(invalid("initial_pose", "must be finite"));
            }
        }
        self.faults.validate(self.robot.wheel_radius_m)?;
        let traj = self.trajectory()?;
        let span = traj.end_time() - traj.start_time();
        if self.duration_s + 1e-9 < span {
            return Err(invalid("duration_s", alloc::format!("must cover the trajectory span of {span} s")));
        }
        Ok(())
    }
}

/// One outer step. Tracking errors are taken between the true pose and the
/// reference; `measured` is what the controller saw.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub truth: Pose,
    pub measured: Pose,
    pub reference: ReferenceSample,
    pub error: TrackingError,
    pub command: ControlCommand,
    /// Realized body velocities.
    pub v_r: f64,
    pub omega_r: f64,
    pub s1: f64,
    pub s2: f64,
    pub lyapunov: f64,
    pub lyapunov_rate: f64,
    pub faults: Vec<FaultKind>,
    pub diagnosis: FaultKind,
    pub flags: Flags,
}

impl TraceRecord {
    /// Euclidean distance between the true and desired positions.
    pub fn deviation(&self) -> f64 {
        crate::math::hypot(self.truth.x - self.reference.x, self.truth.y - self.reference.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub outer_rate_hz: f64,
    pub inner_rate_hz: f64,
    pub plant: PlantMode,
    pub records: Vec<TraceRecord>,
}

fn q(x: f64) -> f64 {
    round_sig9(x)
}

fn quantize_pose(p: &Pose) -> Pose {
    Pose { x: q(p.x), y: q(p.y), phi: q(p.phi) }
}

struct Wheel {
    motor: MotorState,
    pid: WheelPid,
}

pub fn run_scenario(scn: &Scenario) -> Result<SimTrace, SimError> {
    scn.validate()?;
    let traj = scn.trajectory()?;
    let params = scn.robot;
    let nominal = params.wheel_radius_m;
    let dt_o = 1.0 / scn.outer_rate_hz;
    let substeps = scn.substeps();
    let dt_i = dt_o / substeps as f64;
    let motor_sub = libm::ceil(dt_i / scn.motor.max_full_step() - 1e-9).max(1.0) as usize;
    let dt_m = dt_i / motor_sub as f64;
    let t0 = traj.start_time();

    let first = traj.sample_clamped(t0);
    let mut pose = scn.initial_pose.unwrap_or(Pose::new(first.x, first.y, first.phi));
    let start_wheels = body_to_wheels(first.v, first.omega, &params);
    let mut shaft = start_wheels;
    let hold = |speed: f64| {
        let mut pid = WheelPid::new(scn.pid);
        if scn.pid.k3 > 0.0 {
            pid.state.integral = scn.motor.torque_constant * speed / scn.pid.k3;
        }
        Wheel { motor: MotorState { speed, current: 0.0 }, pid }
    };
    let mut wheels = [hold(start_wheels.right), hold(start_wheels.left)];

    let mut controller = build_controller(scn.controller, &scn.gains, &params);
    let mut sensors = Sensors::new(scn.seed, scn.noise, pose);
    let mut bank = FilterBank::new(scn.bank, &scn.noise, &params, &pose);
    let horizon_len = controller.horizon_len().max(1);
    let mut horizon = Vec::with_capacity(horizon_len);
    let mut prev_input: Option<(WheelSpeeds, [f64; 2])> = None;
    let (mut v_r, mut omega_r) = wheels_to_body(&apply_actuation(&shaft, &scn.faults, t0, sensors.wheel_angles(), nominal), &params);

    let steps = scn.steps();
    let mut records = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = t0 + k as f64 * dt_o;
        let sensing = scn.faults.breakdown(t, sensors.wheel_angles(), nominal).sensing();
        let m = sensors.measure(&pose, &shaft, sensing, params.half_track_m);
        let mut flags = Flags::empty();
        if let Some((input, angles)) = prev_input {
            flags |= bank.step(&input, angles, &m, dt_o).map_err(|source| SimError::Plant { index: k, source })?;
        }
        let diagnosis = diagnose(&bank, scn.bank.window);

        horizon.clear();
        horizon.extend((0..horizon_len).map(|i| traj.sample_clamped(t + i as f64 * dt_o)));
        let measured = match scn.feedback {
            FeedbackSource::Odometry => m.odometry_state(),
            FeedbackSource::PoseFix => m.as_state(),
            FeedbackSource::BankEstimate => {
                let pose = bank.filter(diagnosis).map_or(m.pose_fix, |f| f.pose());
                RobotState { pose, ..m.as_state() }
            }
        };
        let command = controller.command(&measured, &horizon, dt_o);
        flags |= command.flags;
        let reference = horizon[0];
        let error = TrackingError::new(&pose, v_r, omega_r, &reference);
        let (s1, s2) = sliding_values(&error, &scn.gains.antifragile);

        if !all_finite(&[pose.x, pose.y, pose.phi, command.v_c, command.omega_c, command.dv_c, v_r, omega_r, s1, s2]) {
            return Err(SimError::NonFinite { index: k, t });
        }
        records.push(TraceRecord {
            t: q(t),
            truth: quantize_pose(&pose),
            measured: quantize_pose(&measured.pose),
            reference: ReferenceSample {
                t: q(reference.t),
                x: q(reference.x),
                y: q(reference.y),
                phi: q(reference.phi),
                v: q(reference.v),
                omega: q(reference.omega),
                dv: q(reference.dv),
                domega: q(reference.domega),
                curvature: q(reference.curvature),
            },
            error: TrackingError {
                x_e: q(error.x_e),
                y_e: q(error.y_e),
                phi_e: q(error.phi_e),
                dx_e: q(error.dx_e),
                dy_e: q(error.dy_e),
                dphi_e: q(error.dphi_e),
            },
            command: ControlCommand {
                v_c: q(command.v_c),
                dv_c: q(command.dv_c),
                omega_c: q(command.omega_c),
                wheel_setpoints: WheelSpeeds::new(q(command.wheel_setpoints.right), q(command.wheel_setpoints.left)),
                flags: command.flags,
            },
            v_r: q(v_r),
            omega_r: q(omega_r),
            s1: q(s1),
            s2: q(s2),
            lyapunov: q(0.5 * (s1 * s1 + s2 * s2)),
            lyapunov_rate: q(lyapunov_rate(s1, s2, &scn.gains.antifragile)),
            faults: scn.faults.active_kinds(t),
            diagnosis,
            flags,
        });
        prev_input = Some((command.wheel_setpoints, sensors.wheel_angles()));

        let setpoint = [command.wheel_setpoints.right, command.wheel_setpoints.left];
        for j in 0..substeps {
            let ti = t + j as f64 * dt_i;
            match scn.plant {
                PlantMode::Kinematic => shaft = command.wheel_setpoints,
                PlantMode::Dynamic => {
                    let mut speeds = [0.0; 2];
                    for (w, wheel) in wheels.iter_mut().enumerate() {
                        let (u, pid_flags) = wheel.pid.update(setpoint[w], wheel.motor.speed, dt_i);
                        flags |= pid_flags;
                        for _ in 0..motor_sub {
                            wheel.motor = motor_step_full(&wheel.motor, u, &scn.motor, dt_m)
                                .map_err(|source| SimError::Plant { index: k, source })?;
                        }
                        speeds[w] = wheel.motor.speed;
                    }
                    shaft = WheelSpeeds::new(speeds[0], speeds[1]);
                }
            }
            let angles = sensors.wheel_angles();
            let ground = apply_actuation(&shaft, &scn.faults, ti, angles, nominal);
            (v_r, omega_r) = wheels_to_body(&ground, &params);
            pose = integrate_pose(&pose, v_r, omega_r, dt_i).map_err(|_| SimError::NonFinite { index: k, t: ti })?;
            let sensing = scn.faults.breakdown(ti, angles, nominal).sensing();
            sensors
                .integrate(&shaft, sensing, params.half_track_m, dt_i)
                .map_err(|_| SimError::NonFinite { index: k, t: ti })?;
        }
        if let Some(last) = records.last_mut() {
            last.flags |= flags;
        }
    }
    Ok(SimTrace {
        scenario: scn.name.clone(),
        controller: scn.controller,
        seed: scn.seed,
        outer_rate_hz: scn.outer_rate_hz,
        inner_rate_hz: scn.inner_rate_hz,
        plant: scn.plant,
        records,
    })
}

/// Runs every scenario in order. Each entry succeeds or fails on its own.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<SimTrace, SimError>> {
    scenarios.iter().map(run_scenario).collect()
}
