//! Model inputs, the dimensionless (rho, beta) scaling, and advisory regime
//! classification.
//!
//! Every solver in this crate depends on the market quantities only through
//!
//! ```text
//! rho  = sigma0 * sqrt(tau)          (initial volatility per step, dimensionless)
//! beta = 0.5 * omega^2 * n^2 * tau   (accumulated vol-of-vol, dimensionless)
//! ```
//!
//! so the same (rho, beta) pair can be reached from many market
//! configurations. [`Regime`] records which sweep direction produced a family
//! of configurations; it is documentation output only and feeds no numerics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market-level inputs for the discretized stochastic volatility model.
///
/// Units: `s0` is a price, `sigma0` and `omega` are rates per square root of
/// time, `tau` is a time step, `n` counts steps, and `corr` is the
/// dimensionless correlation between the asset and volatility drivers
/// (only the simulation schemes consume it; the analytic solvers assume 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "S0")]
    pub s0: f64,
    pub sigma0: f64,
    pub omega: f64,
    pub tau: f64,
    pub n: u32,
    #[serde(default)]
    pub corr: f64,
}

impl ModelParams {
    pub fn new(s0: f64, sigma0: f64, omega: f64, tau: f64, n: u32, corr: f64) -> Result<Self> {
        let p = ModelParams { s0, sigma0, omega, tau, n, corr };
        p.validate()?;
        Ok(p)
    }

    /// Checks the domain invariants; deserialized values must pass through
    /// here before use.
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return Err(Error::InvalidParameter(format!("S0 must be positive, got {}", self.s0)));
        }
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "omega must be nonnegative, got {}",
                self.omega
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.corr) {
            return Err(Error::InvalidParameter(format!(
                "corr must lie in [-1, 1], got {}",
                self.corr
            )));
        }
        Ok(())
    }

    /// Total maturity `t_n = n * tau`.
    pub fn maturity(&self) -> f64 {
        self.n as f64 * self.tau
    }
}

/// Dimensionless parameters the asymptotic solvers work in.
///
/// `q` is the moment order; the Euler-type volatility schemes require it to
/// be a positive integer, while the log-Euler analyses admit real `q`.
/// Solvers validate their own requirements on `q`, so it travels here
/// unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub rho: f64,
    pub beta: f64,
    pub q: f64,
}

impl Scaling {
    pub fn new(rho: f64, beta: f64, q: f64) -> Result<Self> {
        let s = Scaling { rho, beta, q };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        if !self.q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be finite, got {}", self.q)));
        }
        Ok(())
    }
}

/// Projects market parameters onto the dimensionless scaling.
pub fn scaling_from_market(p: &ModelParams, q: f64) -> Result<Scaling> {
    p.validate()?;
    let rho = p.sigma0 * p.tau.sqrt();
    let nf = p.n as f64;
    let beta = 0.5 * p.omega * p.omega * nf * nf * p.tau;
    Scaling::new(rho, beta, q)
}

/// Reconstructs market parameters realizing a given scaling at step count `n`
/// and step size `tau`. Inverse of [`scaling_from_market`] on (rho, beta) to
/// better than 1e-12 relative.
pub fn market_from_scaling(s: &Scaling, n: u32, tau: f64, s0: f64) -> Result<ModelParams> {
    s.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let sigma0 = s.rho / tau.sqrt();
    let nf = n as f64;
    let omega = (2.0 * s.beta / (nf * nf * tau)).sqrt();
    ModelParams::new(s0, sigma0, omega, tau, n, 0.0)
}

/// Advisory tag describing how a sweep of configurations reaches the
/// asymptotic regime as `n` grows while (rho, beta) stay fixed.
///
/// The canonical embeddings are:
///
/// * `LargeMaturity`: `tau` and `sigma0` held fixed, `omega ~ 1/n`; the
///   maturity `n*tau` grows without bound.
/// * `FixedMaturity`: `n*tau` held fixed, so `tau ~ 1/n`, `sigma0 ~ sqrt(n)`,
///   `omega ~ 1/sqrt(n)`.
/// * `SmallMaturity`: `omega` held fixed, forcing `tau ~ 1/n^2`,
///   `sigma0 ~ n`; the maturity shrinks like `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    LargeMaturity,
    FixedMaturity,
    SmallMaturity,
    Other,
}

impl Regime {
    /// Classifies a sweep from the pair of configurations at its two ends.
    ///
    /// The pair must share (rho, beta) to 1e-9 relative and have distinct
    /// step counts, otherwise the direction is `Other`. Classification then
    /// keys on which market quantity the sweep held fixed.
    pub fn classify(a: &ModelParams, b: &ModelParams) -> Regime {
        let same = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()));
        if a.n == b.n {
            return Regime::Other;
        }
        let (sa, sb) = match (scaling_from_market(a, 2.0), scaling_from_market(b, 2.0)) {
            (Ok(sa), Ok(sb)) => (sa, sb),
            _ => return Regime::Other,
        };
        if !same(sa.rho, sb.rho) || !same(sa.beta, sb.beta) {
            return Regime::Other;
        }
        if same(a.tau, b.tau) && same(a.sigma0, b.sigma0) {
            Regime::LargeMaturity
        } else if same(a.maturity(), b.maturity()) {
            Regime::FixedMaturity
        } else if same(a.omega, b.omega) {
            Regime::SmallMaturity
        } else {
            Regime::Other
        }
    }
}
