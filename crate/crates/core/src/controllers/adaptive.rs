//! Receding-horizon controller on the unicycle error model linearized about
//! the reference, with lateral and heading weights that grow with the
//! current error.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{non_negative, ControlCommand, ControlError, ControllerKind, TrackingController, TrackingError};
use crate::flags::Flags;
use crate::planner::ReferenceSample;
use crate::vehicle::{RobotParams, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon_steps: usize,
    /// Weights on `(x_e, y_e, phi_e)`.
    pub q_weight: [f64; 3],
    /// Weights on the deviations from feedforward `(v - v_d, w - w_d)`.
    pub r_weight: [f64; 2],
    /// Inflation of the lateral and heading weights per unit of
    /// `|y_e| + |phi_e|`.
    pub adaptive_gain: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self { horizon_steps: 10, q_weight: [1.0, 1.0, 0.5], r_weight: [0.1, 0.05], adaptive_gain: 5.0 }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.horizon_steps == 0 {
            return Err(ControlError::InvalidGain { field: "adaptive.horizon_steps", reason: "must be >= 1" });
        }
        for q in self.q_weight {
            non_negative("adaptive.q_weight", q)?;
        }
        for r in self.r_weight {
            non_negative("adaptive.r_weight", r)?;
        }
        non_negative("adaptive.adaptive_gain", self.adaptive_gain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    /// Optimal input deviations `(dv, dw)` for each horizon step.
    pub inputs: Vec<[f64; 2]>,
    /// Cost of applying pure feedforward over the horizon.
    pub cost_feedforward: f64,
    pub cost: f64,
}

fn step_matrices(r: &ReferenceSample, dt: f64) -> ([[f64; 3]; 3], [[f64; 2]; 3]) {
    let a = [[1.0, dt * r.omega, 0.0], [-dt * r.omega, 1.0, dt * r.v], [0.0, 0.0, 1.0]];
    let b = [[dt, 0.0], [0.0, 0.0], [0.0, dt]];
    (a, b)
}

fn mat3_vec(a: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    core::array::from_fn(|i| a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2])
}

/// Cost of an input sequence, evaluated by rolling the linear model forward.
pub fn horizon_cost(e0: [f64; 3], horizon: &[ReferenceSample], dt: f64, q: [f64; 3], r: [f64; 2], inputs: &[[f64; 2]]) -> f64 {
    let mut e = e0;
    let mut cost = 0.0;
    for (sample, u) in horizon.iter().zip(inputs) {
        let (a, b) = step_matrices(sample, dt);
        let ae = mat3_vec(&a, &e);
        e = core::array::from_fn(|i| ae[i] + b[i][0] * u[0] + b[i][1] * u[1]);
        cost += q[0] * e[0] * e[0] + q[1] * e[1] * e[1] + q[2] * e[2] * e[2];
        cost += r[0] * u[0] * u[0] + r[1] * u[1] * u[1];
    }
    cost
}

/// Minimizes the quadratic horizon cost exactly through the batch normal
/// equations. Returns `None` if the Hessian is not positive definite.
pub fn solve_horizon(
    e0: [f64; 3],
    horizon: &[ReferenceSample],
    dt: f64,
    q: [f64; 3],
    r: [f64; 2],
) -> Option<HorizonSolution> {
    let n = horizon.len();
    if n == 0 {
        return None;
    }
    // prediction: E = Phi e0 + Gamma U, stacked over steps 1..=n
    let mut phi = DMatrix::<f64>::zeros(3 * n, 3);
    let mut gamma = DMatrix::<f64>::zeros(3 * n, 2 * n);
    let mut phi_k = DMatrix::<f64>::identity(3, 3);
    let mut gamma_k = DMatrix::<f64>::zeros(3, 2 * n);
    for (k, sample) in horizon.iter().enumerate() {
        let (a, b) = step_matrices(sample, dt);
        let a = DMatrix::from_fn(3, 3, |i, j| a[i][j]);
        let b = DMatrix::from_fn(3, 2, |i, j| b[i][j]);
        phi_k = &a * phi_k;
        gamma_k = &a * gamma_k;
        gamma_k.view_mut((0, 2 * k), (3, 2)).copy_from(&b);
        phi.view_mut((3 * k, 0), (3, 3)).copy_from(&phi_k);
        gamma.view_mut((3 * k, 0), (3, 2 * n)).copy_from(&gamma_k);
    }
    let qbar = DVector::from_fn(3 * n, |i, _| q[i % 3]);
    let rbar = DVector::from_fn(2 * n, |i, _| r[i % 2]);
    let e0v = DVector::from_column_slice(&e0);
    let weighted_gamma = DMatrix::from_fn(3 * n, 2 * n, |i, j| qbar[i] * gamma[(i, j)]);
    let mut hessian = gamma.transpose() * &weighted_gamma;
    for i in 0..2 * n {
        hessian[(i, i)] += rbar[i];
    }
    let gradient = weighted_gamma.transpose() * (phi * e0v);
    let chol = hessian.cholesky()?;
    let u = -chol.solve(&gradient);
    if !u.iter().all(|x| x.is_finite()) {
        return None;
    }
    let inputs: Vec<[f64; 2]> = (0..n).map(|k| [u[2 * k], u[2 * k + 1]]).collect();
    let zeros = alloc::vec![[0.0; 2]; n];
    Some(HorizonSolution {
        cost_feedforward: horizon_cost(e0, horizon, dt, q, r, &zeros),
        cost: horizon_cost(e0, horizon, dt, q, r, &inputs),
        inputs,
    })
}

#[derive(Debug, Clone)]
pub struct AdaptiveController {
    pub config: MpcConfig,
    params: RobotParams,
    last_v_c: Option<f64>,
    pub last_solution: Option<HorizonSolution>,
}

impl AdaptiveController {
    pub fn new(config: MpcConfig, params: RobotParams) -> Self {
        Self { config, params, last_v_c: None, last_solution: None }
    }

    /// Output weights inflated by the current lateral and heading error.
    pub fn weights(&self, err: &TrackingError) -> [f64; 3] {
        let q = self.config.q_weight;
        let scale = 1.0 + self.config.adaptive_gain * (err.y_e.abs() + err.phi_e.abs());
        [q[0], q[1] * scale, q[2] * scale]
    }
}

impl TrackingController for AdaptiveController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Adaptive
    }

    fn horizon_len(&self) -> usize {
        self.config.horizon_steps
    }

    fn command(&mut self, measured: &RobotState, horizon: &[ReferenceSample], dt: f64) -> ControlCommand {
        let r = &horizon[0];
        let err = TrackingError::new(&measured.pose, measured.v, measured.omega, r);
        let q = self.weights(&err);
        let mut flags = Flags::empty();
        let solution = solve_horizon([err.x_e, err.y_e, err.phi_e], horizon, dt, q, self.config.r_weight);
        let du = match &solution {
            Some(s) => s.inputs[0],
            None => {
                flags |= Flags::SOLVER_FALLBACK;
                [0.0, 0.0]
            }
        };
        self.last_solution = solution;
        let v_c = r.v + du[0];
        let omega_c = r.omega + du[1];
        let dv_c = match self.last_v_c {
            Some(prev) => (v_c - prev) / dt,
            None => r.dv,
        };
        self.last_v_c = Some(v_c);
        ControlCommand::new(v_c, dv_c, omega_c, &self.params, flags)
    }
}
