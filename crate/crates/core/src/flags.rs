use bitflags::bitflags;

bitflags! {
    /// Numeric-health and event markers carried by commands and trace records.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Flags: u32 {
        /// A control-law denominator was clamped away from zero.
        const DENOMINATOR_CLAMPED = 1 << 0;
        /// `cos(phi_e)` was clamped in an acceleration law.
        const COS_CLAMPED = 1 << 1;
        /// The receding-horizon solve failed; feedforward was used.
        const SOLVER_FALLBACK = 1 << 2;
        /// `lambda0 < lambda2 |y_e| / |phi_e|` did not hold this step.
        const LAMBDA0_REGIME = 1 << 3;
        /// A motor voltage hit its limit.
        const VOLTAGE_SATURATED = 1 << 4;
        /// A PID integrator was clamped.
        const INTEGRAL_CLAMPED = 1 << 5;
        /// A filter covariance was re-symmetrized.
        const COVARIANCE_RESYMMETRIZED = 1 << 6;
        /// A singular innovation covariance was regularized.
        const INNOVATION_REGULARIZED = 1 << 7;
    }
}
