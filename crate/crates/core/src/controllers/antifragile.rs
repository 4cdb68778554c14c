//! Variable-structure tracking law on two sliding manifolds with a
//! constant-plus-proportional reaching law.

use serde::{Deserialize, Serialize};

use super::{non_negative, positive, ControlCommand, ControlError, ControllerKind, FilteredDerivative, TrackingController, TrackingError};
use crate::flags::Flags;
use crate::math::{cos, guard_denominator, ln, sat, sgn, sin, wrap_angle};
use crate::planner::ReferenceSample;
use crate::vehicle::{RobotParams, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntifragileGains {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
    /// Boundary-layer width of the `sat` that replaces `sgn(s)`.
    pub sat_width: f64,
    /// Smallest magnitude allowed for either control-law denominator.
    pub denominator_eps: f64,
    /// Corner frequency of the finite-difference rate estimates.
    pub rate_filter_hz: f64,
    /// Take the robot's speed and yaw rate from the previous command instead
    /// of the measurement, treating the wheel loops as settled.
    pub command_velocity: bool,
}

impl Default for AntifragileGains {
    fn default() -> Self {
        Self {
            lambda0: 0.1,
            lambda1: 3.0,
            lambda2: 1.5,
            q1: 6.0,
            q2: 2.0,
            p1: 0.3,
            p2: 0.1,
            sat_width: 0.05,
            denominator_eps: 1e-3,
            rate_filter_hz: 20.0,
            command_velocity: true,
        }
    }
}

impl AntifragileGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        positive("antifragile.lambda0", self.lambda0)?;
        positive("antifragile.lambda1", self.lambda1)?;
        positive("antifragile.lambda2", self.lambda2)?;
        for (field, q, p) in [("antifragile.q1/p1", self.q1, self.p1), ("antifragile.q2/p2", self.q2, self.p2)] {
            if !(q.is_finite() && p.is_finite() && q * p >= 0.0) {
                return Err(ControlError::InvalidGain { field, reason: "Q_i * P_i must be >= 0" });
            }
        }
        positive("antifragile.sat_width", self.sat_width)?;
        positive("antifragile.denominator_eps", self.denominator_eps)?;
        non_negative("antifragile.rate_filter_hz", self.rate_filter_hz)
    }
}

/// `s1 = dx_e + lambda1 x_e`, `s2 = dy_e + lambda2 y_e + lambda0 sgn(y_e) phi_e`.
pub fn sliding_values(err: &TrackingError, gains: &AntifragileGains) -> (f64, f64) {
    (
        err.dx_e + gains.lambda1 * err.x_e,
        err.dy_e + gains.lambda2 * err.y_e + gains.lambda0 * sgn(err.y_e) * err.phi_e,
    )
}

/// Finite time for `s' = -p s - q sgn(s)` to reach zero from `s0`.
pub fn reaching_time(p: f64, q: f64, s0: f64) -> Result<f64, ControlError> {
    positive("p", p)?;
    positive("q", q)?;
    Ok(ln((p * s0.abs() + q) / q) / p)
}

/// Derivative of `V = (s1^2 + s2^2)/2` along the reaching law.
pub fn lyapunov_rate(s1: f64, s2: f64, gains: &AntifragileGains) -> f64 {
    -gains.q1 * s1 * s1 - gains.q2 * s2 * s2 - gains.p1 * s1.abs() - gains.p2 * s2.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AntifragileLaw {
    pub dv_c: f64,
    pub omega_c: f64,
    pub s1: f64,
    pub s2: f64,
    pub flags: Flags,
}

/// Evaluates the acceleration and angular-velocity laws. `v_r` is the
/// measured speed, `dv_r` and `dphi_e` are the rate estimates.
pub fn antifragile_law(
    err: &TrackingError,
    v_r: f64,
    dv_r: f64,
    dphi_e: f64,
    reference: &ReferenceSample,
    gains: &AntifragileGains,
) -> AntifragileLaw {
    let g = gains;
    let (s1, s2) = sliding_values(err, g);
    let (sp, cp) = (sin(err.phi_e), cos(err.phi_e));
    let mut flags = Flags::empty();

    let (cos_guarded, clamped) = guard_denominator(cp, g.denominator_eps);
    if clamped {
        flags |= Flags::COS_CLAMPED;
    }
    let dv_c = (-g.q1 * s1 - g.p1 * sat(s1, g.sat_width) - g.lambda1 * err.dx_e
        - reference.domega * err.y_e
        - reference.omega * err.dy_e
        + v_r * dphi_e * sp
        + reference.dv)
        / cos_guarded;

    let (den, clamped) = guard_denominator(v_r * cp + g.lambda0 * sgn(err.y_e), g.denominator_eps);
    if clamped {
        flags |= Flags::DENOMINATOR_CLAMPED;
    }
    let omega_c = reference.omega
        + (-g.q2 * s2 - g.p2 * sat(s2, g.sat_width) - g.lambda2 * err.dy_e - dv_r * sp
            + reference.domega * err.x_e
            + reference.omega * err.dx_e)
            / den;

    if err.phi_e != 0.0 && g.lambda0 * err.phi_e.abs() >= g.lambda2 * err.y_e.abs() {
        flags |= Flags::LAMBDA0_REGIME;
    }
    AntifragileLaw { dv_c, omega_c, s1, s2, flags }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlidingState {
    pub s1: f64,
    pub s2: f64,
    pub last: TrackingError,
}

#[derive(Debug, Clone)]
pub struct AntifragileController {
    pub gains: AntifragileGains,
    params: RobotParams,
    v_c: Option<f64>,
    last: ControlCommand,
    dv_r: FilteredDerivative,
    dphi_e: FilteredDerivative,
    phi_e_unwrapped: f64,
    pub sliding: SlidingState,
}

impl AntifragileController {
    pub fn new(gains: AntifragileGains, params: RobotParams) -> Self {
        Self {
            gains,
            params,
            v_c: None,
            last: ControlCommand::default(),
            dv_r: FilteredDerivative::new(gains.rate_filter_hz),
            dphi_e: FilteredDerivative::new(gains.rate_filter_hz),
            phi_e_unwrapped: 0.0,
            sliding: SlidingState::default(),
        }
    }
}

impl TrackingController for AntifragileController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Antifragile
    }

    fn command(&mut self, measured: &RobotState, horizon: &[ReferenceSample], dt: f64) -> ControlCommand {
        let reference = &horizon[0];
        let (v_r, omega_r) = match self.v_c {
            Some(_) if self.gains.command_velocity => (self.last.v_c, self.last.omega_c),
            _ => (measured.v, measured.omega),
        };
        let err = TrackingError::new(&measured.pose, v_r, omega_r, reference);
        if self.v_c.is_some() {
            self.phi_e_unwrapped += wrap_angle(err.phi_e - self.sliding.last.phi_e);
        } else {
            self.phi_e_unwrapped = err.phi_e;
        }
        let dphi_e = self.dphi_e.update(self.phi_e_unwrapped, dt);
        let dv_r = match self.v_c {
            Some(_) if self.gains.command_velocity => self.last.dv_c,
            _ => self.dv_r.update(measured.v, dt),
        };
        let law = antifragile_law(&err, v_r, dv_r, dphi_e, reference, &self.gains);
        let v_c = self.v_c.unwrap_or(measured.v) + law.dv_c * dt;
        self.v_c = Some(v_c);
        self.sliding = SlidingState { s1: law.s1, s2: law.s2, last: err };
        self.last = ControlCommand::new(v_c, law.dv_c, law.omega_c, &self.params, law.flags);
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;
    use crate::vehicle::{integrate_pose, Pose};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn err_with(x_e: f64, y_e: f64, phi_e: f64, dx_e: f64, dy_e: f64) -> TrackingError {
        TrackingError { x_e, y_e, phi_e, dx_e, dy_e, dphi_e: 0.0 }
    }

    #[test]
    fn sliding_value_examples() {
        let g = AntifragileGains::default();
        assert_eq!(sliding_values(&TrackingError::default(), &g), (0.0, 0.0));
        assert_eq!(sliding_values(&err_with(1.0, 0.0, 0.0, -g.lambda1, 0.0), &g).0, 0.0);
        let g2 = AntifragileGains { lambda2: 2.0, lambda0: 0.5, ..g };
        let (_, s2) = sliding_values(&err_with(0.0, -0.1, 0.2, 0.0, 0.0), &g2);
        assert!((s2 + 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_error_is_feedforward() {
        let r = ReferenceSample { v: 0.8, omega: -0.3, dv: 0.25, domega: 0.1, ..Default::default() };
        let law = antifragile_law(&TrackingError::default(), 0.8, 0.0, 0.0, &r, &AntifragileGains::default());
        assert_eq!(law.dv_c, r.dv);
        assert_eq!(law.omega_c, r.omega);
        assert!(law.flags.is_empty());
    }

    #[test]
    fn reaching_time_examples() {
        assert_eq!(reaching_time(2.0, 0.5, 0.0).unwrap(), 0.0);
        assert!((reaching_time(1.0, 1.0, core::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(reaching_time(0.0, 1.0, 1.0).is_err());
        assert!(reaching_time(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let g = AntifragileGains { q1: 2.0, p1: 1.0, ..Default::default() };
        assert_eq!(lyapunov_rate(0.0, 0.0, &g), 0.0);
        assert_eq!(lyapunov_rate(1.0, 0.0, &g), -3.0);
    }

    #[test]
    fn invalid_gains_rejected() {
        let g = AntifragileGains { lambda1: -1.0, ..Default::default() };
        assert!(matches!(g.validate(), Err(ControlError::InvalidGain { field: "antifragile.lambda1", .. })));
        let g = AntifragileGains { q1: -1.0, p1: 0.5, ..Default::default() };
        assert!(g.validate().is_err());
        assert!(AntifragileGains::default().validate().is_ok());
    }

    #[test]
    fn denominators_are_guarded() {
        let g = AntifragileGains::default();
        let r = ReferenceSample { v: 0.0, ..Default::default() };
        // v_r = 0 and y_e = 0 makes the angular-law denominator vanish
        let law = antifragile_law(&err_with(0.1, 0.0, 0.1, 0.0, 0.0), 0.0, 0.0, 0.0, &r, &g);
        assert!(law.flags.contains(Flags::DENOMINATOR_CLAMPED));
        assert!(law.omega_c.is_finite());
        let law = antifragile_law(&err_with(0.1, 0.1, core::f64::consts::FRAC_PI_2, 0.0, 0.0), 0.5, 0.0, 0.0, &r, &g);
        assert!(law.flags.contains(Flags::COS_CLAMPED));
        assert!(law.dv_c.is_finite());
    }

    /// State of robot and reference in the world frame, advanced with
    /// second-order Taylor steps so that finite differences of the manifold
    /// values see the commanded accelerations.
    #[derive(Clone, Copy)]
    struct World {
        robot: Pose,
        v_r: f64,
        reference: ReferenceSample,
    }

    impl World {
        fn error(&self, omega_r: f64) -> TrackingError {
            TrackingError::new(&self.robot, self.v_r, omega_r, &self.reference)
        }

        fn advance(&self, dv_r: f64, omega_r: f64, h: f64) -> World {
            let adv = |x: f64, y: f64, phi: f64, v: f64, dv: f64, w: f64| {
                let phi_h = phi + w * h;
                (x + v * h * cos(phi) + 0.5 * h * h * (dv * cos(phi) - v * w * sin(phi)),
                 y + v * h * sin(phi) + 0.5 * h * h * (dv * sin(phi) + v * w * cos(phi)),
                 phi_h)
            };
            let (x, y, phi) = adv(self.robot.x, self.robot.y, self.robot.phi, self.v_r, dv_r, omega_r);
            let r = self.reference;
            let (xd, yd, phid) = adv(r.x, r.y, r.phi, r.v, r.dv, r.omega);
            World {
                robot: Pose { x, y, phi },
                v_r: self.v_r + dv_r * h,
                reference: ReferenceSample {
                    x: xd,
                    y: yd,
                    phi: phid,
                    v: r.v + r.dv * h,
                    omega: r.omega + r.domega * h,
                    ..r
                },
            }
        }
    }

    /// Control law with its rate inputs made consistent: `dv_r = dv_c` and
    /// `dphi_e = omega_c - omega_d`.
    fn consistent_law(w: &World, g: &AntifragileGains) -> AntifragileLaw {
        let mut dv_r = 0.0;
        let mut dphi = 0.0;
        let mut law = AntifragileLaw::default();
        for _ in 0..200 {
            let err = w.error(w.reference.omega + dphi);
            law = antifragile_law(&err, w.v_r, dv_r, dphi, &w.reference, g);
            dv_r = law.dv_c;
            dphi = law.omega_c - w.reference.omega;
        }
        law
    }

    fn manifold(w: &World, omega_r: f64, g: &AntifragileGains) -> (f64, f64) {
        sliding_values(&w.error(omega_r), g)
    }

    #[test]
    fn law_realizes_reaching_law_off_and_on_manifold() {
        // Independent oracle: difference the manifold values along the
        // closed-loop motion and compare with -Q s - P sat(s).
        let g = AntifragileGains { sat_width: 0.5, ..Default::default() };
        let reference = ReferenceSample { x: 0.3, y: -0.2, phi: 0.5, v: 0.7, omega: 0.2, dv: 0.05, domega: -0.03, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let w = World {
                robot: Pose::new(
                    reference.x + rng.random_range(-0.2..0.2),
                    reference.y + rng.random_range(0.05..0.2),
                    reference.phi + rng.random_range(-0.3..0.3),
                ),
                v_r: reference.v + rng.random_range(-0.1..0.1),
                reference,
            };
            let law = consistent_law(&w, &g);
            let h = 1e-5;
            let (fw, bw) = (w.advance(law.dv_c, law.omega_c, h), w.advance(law.dv_c, law.omega_c, -h));
            // omega_r is the commanded rate, held over the tiny step
            let (sf, sb) = (manifold(&fw, law.omega_c, &g), manifold(&bw, law.omega_c, &g));
            let ds1 = (sf.0 - sb.0) / (2.0 * h);
            let ds2 = (sf.1 - sb.1) / (2.0 * h);
            let want1 = -g.q1 * law.s1 - g.p1 * sat(law.s1, g.sat_width);
            let want2 = -g.q2 * law.s2 - g.p2 * sat(law.s2, g.sat_width);
            assert!((ds1 - want1).abs() < 1e-5, "ds1 {ds1} vs {want1}");
            assert!((ds2 - want2).abs() < 1e-5, "ds2 {ds2} vs {want2}");
        }
    }

    #[test]
    fn on_manifold_matches_hand_evaluated_laws() {
        let g = AntifragileGains::default();
        let r = ReferenceSample { v: 0.6, omega: 0.25, dv: 0.1, domega: 0.02, ..Default::default() };
        // choose rates so that both manifolds vanish
        let (x_e, y_e, phi_e) = (0.04, 0.03, 0.05);
        let dx_e = -g.lambda1 * x_e;
        let dy_e = -g.lambda2 * y_e - g.lambda0 * phi_e;
        let err = TrackingError { x_e, y_e, phi_e, dx_e, dy_e, dphi_e: 0.0 };
        let (v_r, dv_r, dphi) = (0.62, 0.05, -0.01);
        let law = antifragile_law(&err, v_r, dv_r, dphi, &r, &g);
        assert!(law.s1.abs() < 1e-15 && law.s2.abs() < 1e-15);
        let dv_expect = (-g.lambda1 * dx_e - 0.02 * y_e - 0.25 * dy_e + v_r * dphi * sin(phi_e) + 0.1) / cos(phi_e);
        let w_expect = 0.25 + (-g.lambda2 * dy_e - dv_r * sin(phi_e) + 0.02 * x_e + 0.25 * dx_e) / (v_r * cos(phi_e) + g.lambda0);
        assert!((law.dv_c - dv_expect).abs() < 1e-14);
        assert!((law.omega_c - w_expect).abs() < 1e-14);
    }

    #[test]
    fn proportional_reaching_is_exponential() {
        // P = 0: s1 should follow exp(-Q t) s1(0) along the closed loop.
        let g = AntifragileGains { lambda1: 0.75, q1: 2.0, p1: 0.0, p2: 0.0, ..Default::default() };
        let dt = 1e-3;
        let radius = 2.0;
        let (v_d, omega_d) = (0.5, 0.25);
        let reference_at = |t: f64| {
            let th = omega_d * t;
            ReferenceSample {
                t,
                x: radius * sin(th),
                y: radius * (1.0 - cos(th)),
                phi: th,
                v: v_d,
                omega: omega_d,
                ..Default::default()
            }
        };
        let mut w = World { robot: Pose::new(-0.05, 0.04, 0.03), v_r: 0.45, reference: reference_at(0.0) };
        let s0 = consistent_law(&w, &g).s1;
        assert!(s0.abs() > 0.05);
        for k in 1..=1000 {
            let law = consistent_law(&w, &g);
            // exact integration of the unicycle under constant acceleration and
            // yaw rate over one step, fine RK4 substeps
            let mut robot = w.robot;
            let mut v = w.v_r;
            for _ in 0..10 {
                let h = dt / 10.0;
                let vm = v + 0.5 * law.dv_c * h;
                robot = integrate_pose(&robot, vm, law.omega_c, h).unwrap();
                v += law.dv_c * h;
            }
            w = World { robot, v_r: v, reference: reference_at(k as f64 * dt) };
            if k % 100 == 0 {
                let s = consistent_law(&w, &g).s1;
                let expect = s0 * exp(-g.q1 * k as f64 * dt);
                assert!((s - expect).abs() < 0.01 * expect.abs(), "t={}: {s} vs {expect}", k as f64 * dt);
            }
        }
    }

    #[test]
    fn command_velocity_ignores_measured_speed_after_first_step() {
        let params = RobotParams::default();
        let r = ReferenceSample { v: 0.5, omega: 0.1, ..Default::default() };
        let pose = Pose::new(-0.02, 0.01, 0.02);
        let state = |v: f64| RobotState { pose, v, omega: 0.1, wheels: crate::vehicle::body_to_wheels(v, 0.1, &params) };
        let run = |gains: AntifragileGains, v_second: f64| {
            let mut c = AntifragileController::new(gains, params);
            c.command(&state(0.5), &[r], 0.02);
            c.command(&state(v_second), &[r], 0.02)
        };
        let g = AntifragileGains::default();
        assert_eq!(run(g, 0.5), run(g, 0.3));
        let g = AntifragileGains { command_velocity: false, ..g };
        assert_ne!(run(g, 0.5).omega_c, run(g, 0.3).omega_c);
    }

    #[test]
    fn sat_law_converges_to_sign_law() {
        let r = ReferenceSample { v: 0.6, omega: 0.2, dv: 0.1, domega: 0.02, ..Default::default() };
        let err = err_with(0.05, -0.04, 0.1, 0.02, -0.03);
        let sign_law = |g: &AntifragileGains| {
            let (s1, s2) = sliding_values(&err, g);
            let (v_r, dv_r, dphi) = (0.55, 0.0, 0.05);
            let dv = (-g.q1 * s1 - g.p1 * sgn(s1) - g.lambda1 * err.dx_e - r.domega * err.y_e - r.omega * err.dy_e
                + v_r * dphi * sin(err.phi_e)
                + r.dv)
                / cos(err.phi_e);
            let w = r.omega
                + (-g.q2 * s2 - g.p2 * sgn(s2) - g.lambda2 * err.dy_e - dv_r * sin(err.phi_e)
                    + r.domega * err.x_e
                    + r.omega * err.dx_e)
                    / (v_r * cos(err.phi_e) + g.lambda0 * sgn(err.y_e));
            (dv, w)
        };
        let mut prev = f64::INFINITY;
        for width in [0.1, 0.01, 1e-3, 1e-4, 1e-6] {
            let g = AntifragileGains { sat_width: width, ..Default::default() };
            let law = antifragile_law(&err, 0.55, 0.0, 0.05, &r, &g);
            let (dv, w) = sign_law(&g);
            let gap = (law.dv_c - dv).abs() + (law.omega_c - w).abs();
            assert!(gap <= prev);
            prev = gap;
        }
        assert!(prev < 1e-12);
    }

    proptest! {
        #[test]
        fn lyapunov_rate_non_positive(
            s1 in -10.0f64..10.0, s2 in -10.0f64..10.0,
            q1 in 0.0f64..10.0, q2 in 0.0f64..10.0, p1 in 0.0f64..10.0, p2 in 0.0f64..10.0,
        ) {
            let g = AntifragileGains { q1, q2, p1, p2, ..Default::default() };
            prop_assert!(lyapunov_rate(s1, s2, &g) <= 0.0);
        }
    }
}
