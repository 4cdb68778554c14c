//! Reference trajectories from waypoints: piecewise quintic polynomials with
//! matched position, velocity and acceleration at every knot, sampled into
//! pose, velocity, acceleration and curvature references.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{atan2, cos, hypot, powf, sin, sqrt};

/// Below this planar speed curvature is undefined.
pub const SPEED_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("degenerate segment: t_end {t_end} must exceed t_start {t_start}")]
    DegenerateSegment { t_start: f64, t_end: f64 },
    #[error("non-finite boundary condition")]
    NonFinite,
    #[error("quintic solve residual {0:e} above tolerance")]
    IllConditioned(f64),
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("curvature undefined at speed^2 {0:e}")]
    UndefinedCurvature(f64),
    #[error("waypoint {index}: arrival times must be strictly increasing")]
    NonMonotoneTime { index: usize },
    #[error("need at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Desired heading at the waypoint; derived from the neighbours when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
    /// Arrival time in seconds.
    pub t: f64,
}

/// Position, velocity and acceleration of both axes at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryState {
    pub t: f64,
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub acc: [f64; 2],
}

/// One quintic piece. Coefficients are in local time `tau = t - t_start`,
/// lowest order first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSegment {
    pub coeffs_x: [f64; 6],
    pub coeffs_y: [f64; 6],
    pub t_start: f64,
    pub t_end: f64,
}

/// Value and first three derivatives of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisEval {
    pub p: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

fn eval_poly(c: &[f64; 6], tau: f64) -> AxisEval {
    let t = tau;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    AxisEval {
        p: c[0] + c[1] * t + c[2] * t2 + c[3] * t3 + c[4] * t4 + c[5] * t5,
        d1: c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t2 + 4.0 * c[4] * t3 + 5.0 * c[5] * t4,
        d2: 2.0 * c[2] + 6.0 * c[3] * t + 12.0 * c[4] * t2 + 20.0 * c[5] * t3,
        d3: 6.0 * c[3] + 24.0 * c[4] * t + 60.0 * c[5] * t2,
    }
}

impl QuinticSegment {
    pub fn eval(&self, t: f64) -> (AxisEval, AxisEval) {
        let tau = t - self.t_start;
        (eval_poly(&self.coeffs_x, tau), eval_poly(&self.coeffs_y, tau))
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Fits the unique quintic per axis matching position, velocity and
/// acceleration at both ends.
pub fn fit_quintic(start: &BoundaryState, end: &BoundaryState) -> Result<QuinticSegment, PlannerError> {
    let finite = [start.t, end.t]
        .iter()
        .chain(start.pos.iter().chain(start.vel.iter()).chain(start.acc.iter()))
        .chain(end.pos.iter().chain(end.vel.iter()).chain(end.acc.iter()))
        .all(|x| x.is_finite());
    if !finite {
        return Err(PlannerError::NonFinite);
    }
    let h = end.t - start.t;
    if !(h > 0.0) {
        return Err(PlannerError::DegenerateSegment { t_start: start.t, t_end: end.t });
    }
    let (h2, h3, h4, h5) = (h * h, h * h * h, h * h * h * h, h * h * h * h * h);
    #[rustfmt::skip]
    let a = SMatrix::<f64, 6, 6>::from_row_slice(&[
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 2.0, 0.0, 0.0, 0.0,
        1.0, h,   h2,  h3,  h4,  h5,
        0.0, 1.0, 2.0 * h, 3.0 * h2, 4.0 * h3, 5.0 * h4,
        0.0, 0.0, 2.0, 6.0 * h, 12.0 * h2, 20.0 * h3,
    ]);
    let lu = a.lu();
    let mut out = [[0.0; 6]; 2];
    for axis in 0..2 {
        let b = SVector::<f64, 6>::from_row_slice(&[
            start.pos[axis],
            start.vel[axis],
            start.acc[axis],
            end.pos[axis],
            end.vel[axis],
            end.acc[axis],
        ]);
        let c = lu.solve(&b).ok_or(PlannerError::DegenerateSegment { t_start: start.t, t_end: end.t })?;
        let scale = 1.0 + b.amax();
        let residual = (a * c - b).amax() / scale;
        if residual > 1e-10 {
            return Err(PlannerError::IllConditioned(residual));
        }
        out[axis].copy_from_slice(c.as_slice());
    }
    Ok(QuinticSegment { coeffs_x: out[0], coeffs_y: out[1], t_start: start.t, t_end: end.t })
}

/// Signed path curvature `(x' y'' - x'' y') / (x'^2 + y'^2)^(3/2)`.
pub fn curvature(xd1: f64, yd1: f64, xd2: f64, yd2: f64) -> Result<f64, PlannerError> {
    let sq = xd1 * xd1 + yd1 * yd1;
    if sq <= SPEED_EPS * SPEED_EPS || !sq.is_finite() {
        return Err(PlannerError::UndefinedCurvature(sq));
    }
    Ok((xd1 * yd2 - xd2 * yd1) / powf(sq, 1.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Antifragile,
    Fragile,
}

/// Negative curvature (convex solution region) is antifragile; zero and
/// positive are fragile.
pub fn classify_regime(k: f64) -> Regime {
    if k < 0.0 {
        Regime::Antifragile
    } else {
        Regime::Fragile
    }
}

/// Desired motion of the virtual robot at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub v: f64,
    pub omega: f64,
    /// Tangential acceleration.
    pub dv: f64,
    /// Angular acceleration.
    pub domega: f64,
    pub curvature: f64,
}

impl ReferenceSample {
    fn from_axes(t: f64, x: &AxisEval, y: &AxisEval) -> Self {
        let sq = x.d1 * x.d1 + y.d1 * y.d1;
        let v = sqrt(sq);
        if sq <= SPEED_EPS * SPEED_EPS {
            // At rest: heading follows the acceleration direction, no rotation.
            let phi = atan2(y.d2, x.d2);
            return Self { t, x: x.p, y: y.p, phi, v, ..Default::default() };
        }
        let cross = x.d1 * y.d2 - x.d2 * y.d1;
        let omega = cross / sq;
        let dcross = x.d1 * y.d3 - x.d3 * y.d1;
        let dsq = 2.0 * (x.d1 * x.d2 + y.d1 * y.d2);
        Self {
            t,
            x: x.p,
            y: y.p,
            phi: atan2(y.d1, x.d1),
            v,
            omega,
            dv: 0.5 * dsq / v,
            domega: (dcross * sq - cross * dsq) / (sq * sq),
            curvature: cross / (sq * v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    segments: Vec<QuinticSegment>,
    pub sample_rate_hz: f64,
}

impl ReferenceTrajectory {
    /// Builds a trajectory from contiguous segments.
    pub fn new(segments: Vec<QuinticSegment>, sample_rate_hz: f64) -> Result<Self, PlannerError> {
        if segments.is_empty() {
            return Err(PlannerError::TooFewWaypoints(0));
        }
        for (i, w) in segments.windows(2).enumerate() {
            if (w[0].t_end - w[1].t_start).abs() > 1e-12 {
                return Err(PlannerError::NonMonotoneTime { index: i + 1 });
            }
        }
        Ok(Self { segments, sample_rate_hz })
    }

    /// Plans through waypoints: velocities heading-aligned, magnitude the mean
    /// of the adjacent chord speeds, accelerations from central differences
    /// of those velocities.
    pub fn from_waypoints(waypoints: &[Waypoint], sample_rate_hz: f64) -> Result<Self, PlannerError> {
        let n = waypoints.len();
        if n < 2 {
            return Err(PlannerError::TooFewWaypoints(n));
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !(w.x.is_finite() && w.y.is_finite() && w.t.is_finite() && w.heading.is_none_or(f64::is_finite)) {
                return Err(PlannerError::NonFinite);
            }
            if i > 0 && !(w.t > waypoints[i - 1].t) {
                return Err(PlannerError::NonMonotoneTime { index: i });
            }
        }
        let chord = |i: usize| {
            let (a, b) = (&waypoints[i], &waypoints[i + 1]);
            let d = [b.x - a.x, b.y - a.y];
            (d, hypot(d[0], d[1]) / (b.t - a.t))
        };
        let vel: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let speed = match (i.checked_sub(1), (i + 1 < n).then_some(i)) {
                    (Some(p), Some(c)) => 0.5 * (chord(p).1 + chord(c).1),
                    (Some(p), None) => chord(p).1,
                    (None, Some(c)) => chord(c).1,
                    (None, None) => 0.0,
                };
                let dir = match waypoints[i].heading {
                    Some(h) => h,
                    None => {
                        let a = &waypoints[i.saturating_sub(1)];
                        let b = &waypoints[(i + 1).min(n - 1)];
                        atan2(b.y - a.y, b.x - a.x)
                    }
                };
                [speed * cos(dir), speed * sin(dir)]
            })
            .collect();
        let acc: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                let dt = waypoints[hi].t - waypoints[lo].t;
                [(vel[hi][0] - vel[lo][0]) / dt, (vel[hi][1] - vel[lo][1]) / dt]
            })
            .collect();
        let state = |i: usize| BoundaryState {
            t: waypoints[i].t,
            pos: [waypoints[i].x, waypoints[i].y],
            vel: vel[i],
            acc: acc[i],
        };
        let segments = (0..n - 1).map(|i| fit_quintic(&state(i), &state(i + 1))).collect::<Result<Vec<_>, _>>()?;
        Self::new(segments, sample_rate_hz)
    }

    pub fn segments(&self) -> &[QuinticSegment] {
        &self.segments
    }

    pub fn start_time(&self) -> f64 {
        self.segments[0].t_start
    }

    pub fn end_time(&self) -> f64 {
        self.segments[self.segments.len() - 1].t_end
    }

    fn segment_at(&self, t: f64) -> &QuinticSegment {
        let idx = self.segments.partition_point(|s| s.t_end <= t);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    pub fn sample(&self, t: f64) -> Result<ReferenceSample, PlannerError> {
        let (start, end) = (self.start_time(), self.end_time());
        if !(t >= start - 1e-12 && t <= end + 1e-12) {
            return Err(PlannerError::OutOfSpan { t, start, end });
        }
        let (x, y) = self.segment_at(t).eval(t);
        Ok(ReferenceSample::from_axes(t, &x, &y))
    }

    /// Samples inside the span, holding the end pose (at rest) past it and the
    /// start sample before it.
    pub fn sample_clamped(&self, t: f64) -> ReferenceSample {
        let end = self.end_time();
        if t > end {
            let last = self.sample(end).expect("end is in span");
            return ReferenceSample { t, v: 0.0, omega: 0.0, dv: 0.0, domega: 0.0, ..last };
        }
        let t0 = t.max(self.start_time());
        let mut s = self.sample(t0).expect("clamped into span");
        s.t = t;
        s
    }

    /// Evaluates position and derivatives of one side of a knot.
    pub fn eval_segment(&self, index: usize, t: f64) -> (AxisEval, AxisEval) {
        self.segments[index].eval(t)
    }
}
