//! Law-of-large-numbers slopes and central-limit variances of
//! `(1/n) log|S_n|` for the four schemes.
//!
//! The constants split by asset update:
//!
//! * log-Euler asset: slope `-rho^2/2`, variance `rho^2 + (2/3) rho^4 beta`;
//! * Euler asset: slope `E[log|1 + rho eps|]`, variance
//!   `(2/3) (H'(0))^2 rho^2 beta + Var[log|1 + rho eps|]` with
//!   `H(x) = E[log|1 + eps x / (1 + rho eps)|]`.
//!
//! The volatility update does not enter the limit constants, so the pairs of
//! schemes sharing an asset update share an implementation here. The printed
//! variance term for the Euler-Euler scheme exists in a second, absolute-value
//! variant; [`clt_variance_euler_abs`] exposes it for comparison instead of a
//! silent choice (see that function's docs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    find_roots, gaussian_expectation, gaussian_expectation_split, linspace, QuadratureSpec,
};
use crate::schemes::SchemeKind;

/// Which asset update a scheme uses; the limit laws depend on nothing else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeFamily {
    EulerAsset,
    LogEulerAsset,
}

impl From<SchemeKind> for SchemeFamily {
    fn from(kind: SchemeKind) -> Self {
        if kind.asset_is_log() {
            SchemeFamily::LogEulerAsset
        } else {
            SchemeFamily::EulerAsset
        }
    }
}

/// The almost-sure slope and fluctuation variance of one scheme family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub lln_slope: f64,
    pub clt_variance: f64,
    pub scheme_family: SchemeFamily,
}

/// `E[log|1 + rho eps|]`, the Euler-asset LLN slope. Zero at `rho = 0`.
pub fn lln_euler(rho: f64) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be nonnegative, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let spec = QuadratureSpec::default();
    gaussian_expectation(|x| (1.0 + rho * x).abs().ln(), &spec, Some(-1.0 / rho))
}

/// The root of [`lln_euler`] in `[1, 2]`: the volatility level separating
/// almost-sure decay of `|S_n|` from almost-sure growth.
pub fn lln_root() -> Result<f64> {
    let roots = find_roots(
        |rho| lln_euler(rho).expect("lln_euler converges on [1,2]"),
        1.0,
        2.0,
        33,
    );
    roots
        .first()
        .copied()
        .ok_or_else(|| Error::NonConvergent("no root of lln_euler in [1,2]".into()))
}

/// `-rho^2 / 2`, the log-Euler-asset LLN slope (shared by both log-Euler
/// asset schemes).
pub fn lln_lognormal(rho: f64) -> f64 {
    -0.5 * rho * rho
}

/// `rho^2 + (2/3) rho^4 beta`, the log-Euler-asset CLT variance. The first
/// term is the geometric-Brownian part, the second the contribution of the
/// volatility fluctuations.
pub fn clt_variance_lognormal(rho: f64, beta: f64) -> f64 {
    rho * rho + 2.0 / 3.0 * rho.powi(4) * beta
}

/// `Var[log|1 + rho eps|]`.
pub fn var_log_euler(rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let spec = QuadratureSpec::default();
    let mean = lln_euler(rho)?;
    let second = gaussian_expectation(
        |x| {
            let l = (1.0 + rho * x).abs().ln();
            l * l
        },
        &spec,
        Some(-1.0 / rho),
    )?;
    Ok((second - mean * mean).max(0.0))
}

/// `H(x) = E[log|1 + eps x / (1 + rho eps)|]`, the mean-shift transform in
/// the Euler-asset CLT. Singular (logarithmically) at `eps = -1/rho` and
/// `eps = -1/(rho + x)`; both are declared to the quadrature.
pub fn h_transform(rho: f64, x: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let spec = QuadratureSpec::default();
    let mut sing = vec![-1.0 / rho];
    if rho + x != 0.0 {
        sing.push(-1.0 / (rho + x));
    }
    gaussian_expectation_split(
        |e| (1.0 + e * x / (1.0 + rho * e)).abs().ln(),
        &spec,
        &sing,
    )
}

/// `H'(0)` by the symmetric difference at `x = +-1e-4`, cross-checked
/// against the step `+-2e-4`; the two must agree to 1e-4 relative or the
/// derivative is declared non-convergent.
pub fn h_prime_at_zero(rho: f64) -> Result<f64> {
    let h = 1e-4;
    let d1 = (h_transform(rho, h)? - h_transform(rho, -h)?) / (2.0 * h);
    let d2 = (h_transform(rho, 2.0 * h)? - h_transform(rho, -2.0 * h)?) / (4.0 * h);
    if (d1 - d2).abs() > 1e-4 * (1.0 + d1.abs()) {
        return Err(Error::NonConvergent(format!(
            "H'(0) finite differences disagree at rho={rho}: {d1} vs {d2}"
        )));
    }
    Ok(d1)
}

/// `(2/3) (H'(0))^2 rho^2 beta + Var[log|1 + rho eps|]`, the Euler-asset CLT
/// variance (shared by Euler-Euler).
pub fn clt_variance_euler(rho: f64, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    let var = var_log_euler(rho)?;
    if beta == 0.0 {
        return Ok(var);
    }
    let hp = h_prime_at_zero(rho)?;
    Ok(2.0 / 3.0 * hp * hp * rho * rho * beta + var)
}

/// `E[|1 + rho eps|]` (quadrature; the integrand has only a kink, declared
/// as a split point for accuracy).
pub fn mean_abs_euler(rho: f64) -> Result<f64> {
    if rho == 0.0 {
        return Ok(1.0);
    }
    let spec = QuadratureSpec::default();
    gaussian_expectation(|x| (1.0 + rho * x).abs(), &spec, Some(-1.0 / rho))
}

/// The Euler-Euler variance term as literally printed in its source
/// statement: `(2/3) (H'(0))^2 rho^2 beta + Var[|1 + rho eps|]` (no log in
/// the variance). The structure of the Euler-Log-Euler result strongly
/// suggests the log belongs there, so [`clt_variance_euler`] is canonical;
/// this variant stays available so the two can be compared against
/// simulation rather than silently discarding one.
pub fn clt_variance_euler_abs(rho: f64, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let mean_abs = mean_abs_euler(rho)?;
    // E[(1 + rho eps)^2] = 1 + rho^2 exactly.
    let var_abs = (1.0 + rho * rho - mean_abs * mean_abs).max(0.0);
    if beta == 0.0 {
        return Ok(var_abs);
    }
    let hp = h_prime_at_zero(rho)?;
    Ok(2.0 / 3.0 * hp * hp * rho * rho * beta + var_abs)
}

/// LLN slope for a scheme.
pub fn lln_for_kind(kind: SchemeKind, rho: f64) -> Result<f64> {
    if kind.asset_is_log() {
        Ok(lln_lognormal(rho))
    } else {
        lln_euler(rho)
    }
}

/// CLT variance for a scheme (canonical log-variant for Euler assets).
pub fn clt_variance_for_kind(kind: SchemeKind, rho: f64, beta: f64) -> Result<f64> {
    if kind.asset_is_log() {
        Ok(clt_variance_lognormal(rho, beta))
    } else {
        clt_variance_euler(rho, beta)
    }
}

/// Bundles both limit constants for a scheme at `(rho, beta)`.
pub fn limit_constants(kind: SchemeKind, rho: f64, beta: f64) -> Result<LimitConstants> {
    Ok(LimitConstants {
        lln_slope: lln_for_kind(kind, rho)?,
        clt_variance: clt_variance_for_kind(kind, rho, beta)?,
        scheme_family: kind.into(),
    })
}

/// Samples `(rho, lln_euler(rho))` on an inclusive grid, for the CSV curve
/// of the Euler-asset LLN constant.
pub fn lln_curve(rho_lo: f64, rho_hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if !(rho_lo >= 0.0 && rho_hi > rho_lo) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= rho_lo < rho_hi, got [{rho_lo}, {rho_hi}]"
        )));
    }
    linspace(rho_lo, rho_hi, points.max(2))
        .into_iter()
        .map(|r| lln_euler(r).map(|v| (r, v)))
        .collect()
}
