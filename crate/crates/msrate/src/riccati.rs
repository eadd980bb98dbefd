//! The operator layer: Riccati blocks R(P), S(P), the one-step value
//! operator Phi(P), the feedback gain K(P), the regularized normalized
//! operator, and the explicit Lipschitz/contraction constants.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::model::{self, SystemSpec};

/// Slack allowed below zero when checking that P is PSD on entry.
const PSD_TOL: f64 = 1e-9;
/// Rank cutoff for the pseudoinverse fallback when R(P) is singular.
const PINV_RANK_TOL: f64 = 1e-10;

/// The quadratic-in-control, cross, and value blocks at a given P.
#[derive(Debug, Clone)]
pub struct RiccatiBlocks {
    /// `R(P) = B'PB + sigma^2 B_bar'P B_bar`, m x m.
    pub r: SymMatrix,
    /// `S(P) = A'PB + sigma^2 A_bar'P B_bar`, n x m.
    pub s: Matrix,
    /// `Phi(P) = A'PA + sigma^2 A_bar'P A_bar - S R^{-1} S'`, n x n.
    pub phi: SymMatrix,
}

/// Explicit constants of the contraction analysis.
#[derive(Debug, Clone)]
pub struct LipschitzConstants {
    pub alpha_a: f64,
    pub alpha_s: f64,
    pub alpha_r: f64,
    /// `c_R(a) = 1 / (a * lambda_min(R_0))`.
    pub c_r: f64,
    /// `L_Phi(a) = alpha_A + 2 alpha_S^2 c_R + alpha_S^2 alpha_R c_R^2`.
    pub l_phi: f64,
    /// `C_Phi(a) = alpha_A + alpha_S^2 c_R`.
    pub c_phi: f64,
    /// Sufficient contraction modulus of the normalized operator.
    pub lambda_tau: f64,
    /// Slice floor `delta_tau = (tau/n) / ((1-tau) C_A + tau)`.
    pub delta_tau: f64,
}

fn check_psd(p: &SymMatrix) -> Result<()> {
    let lambda_min = linalg::sym_eigen(p)?.values[0];
    let scale = p.frobenius_norm().max(1.0);
    if lambda_min < -PSD_TOL * scale {
        return Err(Error::NotPsd { lambda_min });
    }
    Ok(())
}

/// Assembles R(P), S(P) and Phi(P).
///
/// When R(P) is strictly positive definite the Schur term uses its true
/// inverse; on the PSD boundary it falls back to the Moore-Penrose
/// pseudoinverse. Phi is re-symmetrized after assembly.
pub fn blocks(spec: &SystemSpec, p: &SymMatrix) -> Result<RiccatiBlocks> {
    assert_eq!(p.dim(), spec.n, "P must be n x n");
    check_psd(p)?;
    let s2 = spec.sigma * spec.sigma;
    let pm = p.to_matrix();

    let r = SymMatrix::symmetrized(
        &spec
            .b
            .transpose()
            .matmul(&pm)
            .matmul(&spec.b)
            .add(&spec.b_bar.transpose().matmul(&pm).matmul(&spec.b_bar).scaled(s2)),
    );
    let s = spec
        .a
        .transpose()
        .matmul(&pm)
        .matmul(&spec.b)
        .add(&spec.a_bar.transpose().matmul(&pm).matmul(&spec.b_bar).scaled(s2));
    let affine = spec
        .a
        .transpose()
        .matmul(&pm)
        .matmul(&spec.a)
        .add(&spec.a_bar.transpose().matmul(&pm).matmul(&spec.a_bar).scaled(s2));

    let r_inv = match linalg::inverse_spd(&r) {
        Ok(inv) => inv,
        Err(Error::NotPositiveDefinite { .. }) => linalg::pinv_psd(&r, PINV_RANK_TOL)?,
        Err(e) => return Err(e),
    };
    let schur = s.matmul(&r_inv.to_matrix()).matmul(&s.transpose());
    let phi = SymMatrix::symmetrized(&affine.sub(&schur));
    Ok(RiccatiBlocks { r, s, phi })
}

/// Feedback gain `K(P) = R(P)^{-1} S(P)'`.
pub fn gain(spec: &SystemSpec, p: &SymMatrix) -> Result<Matrix> {
    let bl = blocks(spec, p)?;
    gain_from_blocks(spec, &bl)
}

pub fn gain_from_blocks(spec: &SystemSpec, bl: &RiccatiBlocks) -> Result<Matrix> {
    let st = bl.s.transpose(); // m x n
    let mut k = Matrix::zeros(spec.m, spec.n);
    for j in 0..spec.n {
        let col: Vec<f64> = (0..spec.m).map(|i| st.get(i, j)).collect();
        let x = linalg::solve_spd(&bl.r, &col)?;
        for i in 0..spec.m {
            k.set(i, j, x[i]);
        }
    }
    Ok(k)
}

/// One application of the regularized normalized operator.
///
/// Returns `(Y / trace(Y), trace(Y))` with
/// `Y = (1-tau) Phi(P) + (tau/n) I`. At a fixed point the returned trace
/// is the eigenvalue surrogate gamma.
pub fn hat_phi(spec: &SystemSpec, p: &SymMatrix, tau: f64) -> Result<(SymMatrix, f64)> {
    assert!(tau > 0.0 && tau < 1.0, "tau must lie in (0,1)");
    debug_assert!((p.trace() - 1.0).abs() <= 1e-10, "P must have unit trace");
    let n = spec.n;
    let bl = blocks(spec, p)?;
    let mut y = bl.phi.scaled(1.0 - tau);
    let reg = tau / n as f64;
    for i in 0..n {
        y.set(i, i, y.get(i, i) + reg);
    }
    let trace_y = y.trace();
    if trace_y <= 0.0 {
        return Err(Error::DegenerateTrace(trace_y));
    }
    let mut next = y.scaled(1.0 / trace_y);
    // Renormalize exactly: rounding in the scale can leave the trace a
    // few ulps off one, and the slice invariant wants it exact.
    let t = next.trace();
    if t != 1.0 {
        let excess = (t - 1.0) / n as f64;
        for i in 0..n {
            next.set(i, i, next.get(i, i) - excess);
        }
    }
    Ok((next, trace_y))
}

/// Evaluates the closed-form constants of the contraction analysis at
/// slice floor `a` and regularization `tau`. Passing `a <= 0` uses
/// `delta_tau` as the floor.
pub fn constants(spec: &SystemSpec, a: f64, tau: f64) -> Result<LipschitzConstants> {
    assert!(tau > 0.0 && tau < 1.0, "tau must lie in (0,1)");
    let n = spec.n as f64;
    let rep = model::validate(spec);
    if rep.r0_min_eig <= 0.0 {
        return Err(Error::Degenerate);
    }
    let s2 = spec.sigma * spec.sigma;
    let na = linalg::spectral_norm(&spec.a);
    let nab = linalg::spectral_norm(&spec.a_bar);
    let nb = linalg::spectral_norm(&spec.b);
    let nbb = linalg::spectral_norm(&spec.b_bar);

    let alpha_a = na * na + s2 * nab * nab;
    let alpha_s = na * nb + s2 * nab * nbb;
    let alpha_r = nb * nb + s2 * nbb * nbb;

    let delta_tau = (tau / n) / ((1.0 - tau) * rep.c_a + tau);
    let floor = if a > 0.0 { a } else { delta_tau };

    let c_r = 1.0 / (floor * rep.r0_min_eig);
    let l_phi = alpha_a + 2.0 * alpha_s * alpha_s * c_r + alpha_s * alpha_s * alpha_r * c_r * c_r;
    let c_phi = alpha_a + alpha_s * alpha_s * c_r;

    // Contraction modulus uses the constants evaluated at delta_tau.
    let c_r_d = 1.0 / (delta_tau * rep.r0_min_eig);
    let l_phi_d =
        alpha_a + 2.0 * alpha_s * alpha_s * c_r_d + alpha_s * alpha_s * alpha_r * c_r_d * c_r_d;
    let c_phi_d = alpha_a + alpha_s * alpha_s * c_r_d;
    let lambda_tau = (1.0 - tau) * l_phi_d / tau
        + (1.0 - tau) * ((1.0 - tau) * c_phi_d + tau / n) * n * l_phi_d / (tau * tau);

    Ok(LipschitzConstants {
        alpha_a,
        alpha_s,
        alpha_r,
        c_r,
        l_phi,
        c_phi,
        lambda_tau,
        delta_tau,
    })
}
