//! Scalar helpers shared by every module.
//!
//! All transcendental functions go through `libm` so that traces are
//! bit-identical across platforms and between `no_std` and `std` builds.

use core::f64::consts::PI;

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut w = libm::fmod(a + PI, 2.0 * PI);
    if w <= 0.0 {
        w += 2.0 * PI;
    }
    w - PI
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Boundary-layer replacement for `sgn`: `clamp(x / width, -1, 1)`.
#[inline]
pub fn sat(x: f64, width: f64) -> f64 {
    (x / width).clamp(-1.0, 1.0)
}

/// Clamps a denominator away from zero, keeping its sign (zero maps to `+eps`).
/// Returns the guarded value and whether clamping happened.
#[inline]
pub fn guard_denominator(d: f64, eps: f64) -> (f64, bool) {
    if d.abs() >= eps {
        (d, false)
    } else if d < 0.0 {
        (-eps, true)
    } else {
        (eps, true)
    }
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Rounds to 9 significant digits, the precision used by the trace writer.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let s = alloc::format!("{:.8e}", x);
    s.parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_keeps_pi_and_maps_minus_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn sgn_of_zero_is_zero() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(1e-300), 1.0);
    }

    #[test]
    fn guard_keeps_sign() {
        assert_eq!(guard_denominator(-1e-5, 1e-3), (-1e-3, true));
        assert_eq!(guard_denominator(0.0, 1e-3), (1e-3, true));
        assert_eq!(guard_denominator(0.5, 1e-3), (0.5, false));
    }

    #[test]
    fn sig9_is_idempotent() {
        let x = round_sig9(core::f64::consts::E * 1e-4);
        assert_eq!(round_sig9(x), x);
        assert_eq!(alloc::format!("{:.8e}", x), "2.71828183e-4");
    }

    proptest! {
        #[test]
        fn wrapped_angle_in_half_open_interval(a in -1e4f64..1e4) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!((sin(w) - sin(a)).abs() < 1e-9);
            prop_assert!((cos(w) - cos(a)).abs() < 1e-9);
        }
    }
}
