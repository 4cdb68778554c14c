//! Prediction and correction steps shared by every filter in the bank.

use nalgebra::{SMatrix, SVector};

use crate::flags::Flags;
use crate::math::sqrt;

/// Relative asymmetry above which a covariance is reported as repaired.
const SYMMETRY_TOL: f64 = 1e-12;

fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>, flags: &mut Flags) -> SMatrix<f64, N, N> {
    let asym = (p - p.transpose()).amax();
    if asym > SYMMETRY_TOL * (1.0 + p.amax()) {
        *flags |= Flags::COVARIANCE_RESYMMETRIZED;
    }
    (p + p.transpose()) * 0.5
}

/// Covariance propagation `P <- F P F^T + Q`. The state itself is propagated
/// by the caller through its own (possibly nonlinear) model.
pub fn kalman_predict<const N: usize>(
    p: &SMatrix<f64, N, N>,
    f: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
) -> (SMatrix<f64, N, N>, Flags) {
    let mut flags = Flags::empty();
    let p = symmetrize(&(f * p * f.transpose() + q), &mut flags);
    (p, flags)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction<const N: usize, const M: usize> {
    pub x: SVector<f64, N>,
    pub p: SMatrix<f64, N, N>,
    pub innovation: SVector<f64, M>,
    /// Mahalanobis norm `sqrt(nu^T S^-1 nu)` of the innovation.
    pub residual: f64,
    pub flags: Flags,
}

/// Innovation update with measurement `z`, predicted measurement `hx`,
/// Jacobian `h` and noise covariance `r`. The covariance uses the Joseph
/// form so it stays positive semi-definite.
pub fn kalman_correct<const N: usize, const M: usize>(
    x: &SVector<f64, N>,
    p: &SMatrix<f64, N, N>,
    z: &SVector<f64, M>,
    hx: &SVector<f64, M>,
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
) -> Correction<N, M> {
    let mut flags = Flags::empty();
    let nu = z - hx;
    let mut s = h * p * h.transpose() + r;
    let chol = match s.cholesky() {
        Some(c) => c,
        None => {
            flags |= Flags::INNOVATION_REGULARIZED;
            s += SMatrix::<f64, M, M>::identity() * 1e-9;
            match s.cholesky() {
                Some(c) => c,
                None => {
                    return Correction { x: *x, p: *p, innovation: nu, residual: f64::INFINITY, flags };
                }
            }
        }
    };
    let s_inv_nu = chol.solve(&nu);
    let residual = sqrt(nu.dot(&s_inv_nu).max(0.0));
    // K = P H^T S^-1
    let k = (chol.solve(&(h * p))).transpose();
    let x_new = x + k * nu;
    let i_kh = SMatrix::<f64, N, N>::identity() - k * h;
    let p_new = symmetrize(&(i_kh * p * i_kh.transpose() + k * r * k.transpose()), &mut flags);
    Correction { x: x_new, p: p_new, innovation: nu, residual, flags }
}
