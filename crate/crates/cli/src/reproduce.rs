//! Golden data series. Each target regenerates one published data set as
//! CSV with a documented column schema; grids are fixed here so reruns are
//! byte-identical.

use svasym_core::exact_moments::ln_equiv_vol;
use svasym_core::limit_laws::lln_curve;
use svasym_core::lyapunov_euler::{self, Bounds};
use svasym_core::lyapunov_lognormal::lambda_ab;
use svasym_core::numerics::linspace;
use svasym_core::params::ModelParams;

use crate::emit::{header, num, row};
use crate::{CliError, Target};

pub fn emit(target: Target) -> Result<Vec<String>, CliError> {
    match target {
        Target::Fig1 => lambda_vs_beta(2, &[0.05, 0.1, 0.2, 0.3, 0.348, 0.4, 0.5]),
        Target::Fig2 => lambda_vs_beta(3, &[0.05, 0.1, 0.201, 0.3]),
        Target::Fig3 => lambda_ab_grids(),
        Target::Fig4 => lln_expectation_curve(),
        Target::Fig5 => sigma_ln_panels(),
        Target::Fig6 => sigma_ln_two_orders(),
        Target::Table1 => critical_table(),
    }
}

/// Lyapunov exponent vs beta at fixed rho values, plus the analytic lower
/// and upper bounds along the smallest rho.
fn lambda_vs_beta(q: u32, rhos: &[f64]) -> Result<Vec<String>, CliError> {
    let betas = linspace(0.0, 10.0, 101);
    let mut lines = vec![header(&["q", "rho", "beta", "series", "value"])];
    for &rho in rhos {
        for &beta in &betas {
            let r = lyapunov_euler::lyapunov(rho, beta, q)?;
            lines.push(row(&[
                q.to_string(),
                num(rho),
                num(beta),
                "lambda".into(),
                num(r.value),
            ]));
        }
    }
    let rho = rhos[0];
    for &beta in &betas {
        let Bounds { lower, upper, .. } = lyapunov_euler::bounds_and_asymptotics(rho, beta, q)?;
        lines.push(row(&[
            q.to_string(),
            num(rho),
            num(beta),
            "lower-bound".into(),
            num(lower),
        ]));
        lines.push(row(&[
            q.to_string(),
            num(rho),
            num(beta),
            "upper-bound".into(),
            num(upper),
        ]));
    }
    Ok(lines)
}

/// The continuous-time exponent lambda(a, b) sampled against each argument.
fn lambda_ab_grids() -> Result<Vec<String>, CliError> {
    let mut lines = vec![header(&["panel", "a", "b", "lambda"])];
    for &b in &[0.5, 1.0, 2.0, 5.0] {
        for &a in &linspace(0.05, 5.0, 100) {
            lines.push(row(&["vs-a".into(), num(a), num(b), num(lambda_ab(a, b)?)]));
        }
    }
    for &a in &[0.5, 1.0, 2.0, 4.0] {
        for &b in &linspace(0.1, 10.0, 100) {
            lines.push(row(&["vs-b".into(), num(a), num(b), num(lambda_ab(a, b)?)]));
        }
    }
    Ok(lines)
}

/// `E[log|1 + rho eps|]` vs rho; negative below the root near 1.556 and
/// positive above it.
fn lln_expectation_curve() -> Result<Vec<String>, CliError> {
    let mut lines = vec![header(&["rho", "expectation"])];
    for (rho, value) in lln_curve(0.02, 3.0, 150)? {
        lines.push(row(&[num(rho), num(value)]));
    }
    Ok(lines)
}

fn sweep_lines(
    lines: &mut Vec<String>,
    panel: &str,
    q: u32,
    sigma0: f64,
    tau: f64,
    n: u32,
    omegas: &[f64],
) -> Result<(), CliError> {
    for &omega in omegas {
        let p = ModelParams::new(1.0, sigma0, omega, tau, n, 0.0)?;
        let v = ln_equiv_vol(q, &p)?;
        for (series, value) in [("finite-n", v.sigma_ln), ("asymptotic", v.sigma_ln_proxy)] {
            lines.push(row(&[
                panel.into(),
                q.to_string(),
                n.to_string(),
                num(sigma0),
                num(tau),
                num(omega),
                series.into(),
                num(value),
            ]));
        }
    }
    Ok(())
}

const SIGMA_LN_HEADER: [&str; 8] =
    ["panel", "q", "n", "sigma0", "tau", "omega", "series", "sigma_ln"];

/// Lognormal-equivalent volatility of the second moment vs omega.
/// Upper panel: fixed maturity 1 across time discretizations n = 10, 20, 40.
/// Lower panel: fixed maturity 20, step 0.25, across initial volatilities.
fn sigma_ln_panels() -> Result<Vec<String>, CliError> {
    let mut lines = vec![header(&SIGMA_LN_HEADER)];
    for &n in &[10u32, 20, 40] {
        let omegas = linspace(0.02, 1.2, 60);
        sweep_lines(&mut lines, "fixed-maturity-1", 2, 0.2, 1.0 / n as f64, n, &omegas)?;
    }
    for &sigma0 in &[0.05, 0.1, 0.2, 0.5] {
        let omegas = linspace(0.004, 0.2, 50);
        sweep_lines(&mut lines, "fixed-maturity-20", 2, sigma0, 0.25, 80, &omegas)?;
    }
    Ok(lines)
}

/// Second and third moment equivalent volatilities on one grid
/// (sigma0 = 0.2, tau = 0.25, n = 40).
fn sigma_ln_two_orders() -> Result<Vec<String>, CliError> {
    let mut lines = vec![header(&SIGMA_LN_HEADER)];
    let omegas = linspace(0.005, 0.25, 50);
    for q in [2u32, 3] {
        sweep_lines(&mut lines, "main", q, 0.2, 0.25, 40, &omegas)?;
    }
    Ok(lines)
}

/// Critical parameters of the first moments: the transition line endpoint
/// (rho_c, beta_c) for q = 2..7, with 1/beta_c alongside.
fn critical_table() -> Result<Vec<String>, CliError> {
    let mut lines = vec![header(&["q", "rho_c", "beta_c", "inv_beta_c"])];
    for q in 2..=7u32 {
        let (rho_c, beta_c) = lyapunov_euler::critical_point(q)?;
        lines.push(row(&[q.to_string(), num(rho_c), num(beta_c), num(1.0 / beta_c)]));
    }
    Ok(lines)
}
