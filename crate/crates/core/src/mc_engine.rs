//! Monte Carlo estimators cross-validating the analytic results: moments,
//! the martingale property, LLN slopes and CLT variances.
//!
//! Determinism contract: path `i` depends only on `(seed, i)`; per-path
//! statistics are materialized into an index-ordered buffer by however many
//! workers are available and then reduced sequentially. Estimates are
//! therefore bit-identical for any worker count by construction.
//!
//! Moment statistics travel as `(log-magnitude, sign)` pairs and the
//! reduction rescales by the largest magnitude before summing, so estimates
//! survive the enormous dynamic range near moment explosions. When even the
//! final mean exceeds the representable range the estimate switches to
//! log-space output (see [`Estimate::log_space`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_laws;
use crate::numerics::KahanSum;
use crate::params::{scaling_from_market, ModelParams};
use crate::schemes::{
    step, terminal_from_noises, GaussianPairStream, PathState, SchemeKind, TerminalSample,
};

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: u64,
    #[serde(default)]
    pub seed: u64,
    /// Worker-count hint; 0 uses the ambient thread pool. Results do not
    /// depend on this value.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { n_paths: 100_000, seed: 1, workers: 0, antithetic: false }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_paths must be at least 2, got {}",
                self.n_paths
            )));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::InvalidParameter(
                "antithetic sampling needs an even n_paths".into(),
            ));
        }
        Ok(())
    }

    /// Number of independent reduction units (pairs when antithetic).
    fn units(&self) -> u64 {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Point estimate; the log of the statistic when `log_space` is set.
    pub mean: f64,
    /// Standard error of `mean`; interpreted as a relative standard error
    /// when `log_space` is set.
    pub std_error: f64,
    /// Independent units behind the estimate (antithetic pairs count once).
    pub n_eff: u64,
    /// Set when the statistic overflowed 1e300 and `mean` holds its log.
    pub log_space: bool,
    /// Set when the 10 largest path contributions carry more than half of
    /// the moment sum; standard errors are unreliable in that regime.
    #[serde(default)]
    pub tail_dominated: bool,
    /// Paths discarded because the statistic was undefined there
    /// (`S_n = 0` exactly).
    #[serde(default)]
    pub excluded_paths: u64,
}

/// Runs `f` on a dedicated pool of `workers` threads (ambient pool when 0).
fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Simulates unit `m`: the raw path when plain, the (path, reflected path)
/// pair when antithetic.
fn simulate_unit(
    kind: SchemeKind,
    p: &ModelParams,
    cfg: &McConfig,
    m: u64,
) -> (TerminalSample, Option<TerminalSample>) {
    if cfg.antithetic {
        let mut stream = GaussianPairStream::new(cfg.seed, m);
        let a = terminal_from_noises(kind, p, (0..p.n).map(|_| stream.next_pair()));
        let mut stream = GaussianPairStream::new(cfg.seed, m);
        let b = terminal_from_noises(kind, p, (0..p.n).map(|_| stream.next_pair().negated()));
        (a, Some(b))
    } else {
        let mut stream = GaussianPairStream::new(cfg.seed, m);
        let a = terminal_from_noises(kind, p, (0..p.n).map(|_| stream.next_pair()));
        (a, None)
    }
}

/// Replays path `path_index` step by step, returning the `n + 1` states
/// from the initial condition to maturity. Uses the same noise addressing
/// as the estimators, so state `n` agrees with the terminal sample of that
/// path; `negate` selects the antithetic twin.
pub fn trajectory(
    kind: SchemeKind,
    p: &ModelParams,
    seed: u64,
    path_index: u64,
    negate: bool,
) -> Result<Vec<PathState>> {
    p.validate()?;
    let mut stream = GaussianPairStream::new(seed, path_index);
    let mut states = Vec::with_capacity(p.n as usize + 1);
    let mut st = PathState { s: p.s0, sigma: p.sigma0, step_index: 0 };
    states.push(st);
    for _ in 0..p.n {
        let noise = stream.next_pair();
        let noise = if negate { noise.negated() } else { noise };
        st = step(kind, st, noise, p);
        states.push(st);
    }
    Ok(states)
}

/// `(q * ln|S|, sign^q)` of one terminal sample; zero paths map to
/// `(-inf, 0)` so they contribute exactly 0 after exponentiation.
fn moment_contribution(t: &TerminalSample, q: f64, integer_q: bool) -> (f64, f64) {
    match t.log_abs {
        None => (f64::NEG_INFINITY, 0.0),
        Some(lx) => {
            let sgn = if t.sign < 0 {
                // Only reachable for integer q (validated upstream).
                if integer_q && (q as i64) % 2 != 0 {
                    -1.0
                } else {
                    1.0
                }
            } else {
                1.0
            };
            (q * lx, sgn)
        }
    }
}

const LOG_GUARD: f64 = 690.0; // ln(1e300) is about 690.8

/// Sequential reduction of scaled signed magnitudes into an [`Estimate`].
fn reduce_scaled(units: &[(f64, f64)], excluded: u64) -> Estimate {
    let n = units.len() as f64;
    let scale = units
        .iter()
        .map(|&(lx, _)| lx)
        .filter(|lx| lx.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return Estimate {
            mean: 0.0,
            std_error: 0.0,
            n_eff: units.len() as u64,
            log_space: false,
            tail_dominated: false,
            excluded_paths: excluded,
        };
    }
    let mut sum = KahanSum::new();
    let mut sum_sq = KahanSum::new();
    let mut mags: Vec<f64> = Vec::with_capacity(units.len());
    for &(lx, sgn) in units {
        let u = if lx.is_finite() { sgn * (lx - scale).exp() } else { 0.0 };
        sum.add(u);
        sum_sq.add(u * u);
        mags.push(u.abs());
    }
    let mean_scaled = sum.value() / n;
    let var_scaled = ((sum_sq.value() - n * mean_scaled * mean_scaled) / (n - 1.0)).max(0.0);
    let se_scaled = (var_scaled / n).sqrt();

    // Tail dominance: share of the 10 largest |contributions|.
    let tail_dominated = {
        let total: f64 = mags.iter().sum();
        if total > 0.0 && mags.len() > 10 {
            let k = mags.len() - 10;
            mags.select_nth_unstable_by(k - 1, f64::total_cmp);
            let top: f64 = mags[k..].iter().sum();
            top > 0.5 * total
        } else {
            false
        }
    };

    let ln_mean = if mean_scaled > 0.0 { scale + mean_scaled.ln() } else { f64::NAN };
    let ln_se = if se_scaled > 0.0 { scale + se_scaled.ln() } else { f64::NEG_INFINITY };
    if ln_mean.is_nan() && mean_scaled != 0.0 {
        // Negative mean: representable only in linear space.
        let mean = -(scale + (-mean_scaled).ln()).exp();
        return Estimate {
            mean,
            std_error: ln_se.exp(),
            n_eff: units.len() as u64,
            log_space: false,
            tail_dominated,
            excluded_paths: excluded,
        };
    }
    if ln_mean.is_finite() && (ln_mean > LOG_GUARD || ln_se > LOG_GUARD) {
        Estimate {
            mean: ln_mean,
            std_error: se_scaled / mean_scaled,
            n_eff: units.len() as u64,
            log_space: true,
            tail_dominated,
            excluded_paths: excluded,
        }
    } else {
        Estimate {
            mean: if mean_scaled == 0.0 { 0.0 } else { mean_scaled.signum() * ln_mean.exp() },
            std_error: ln_se.exp(),
            n_eff: units.len() as u64,
            log_space: false,
            tail_dominated,
            excluded_paths: excluded,
        }
    }
}

/// Estimates `E[(S_n)^q]` under `kind`.
///
/// Euler-type asset updates can turn `S_n` negative, so they require a
/// positive integer `q`; the log-Euler asset accepts any real `q`.
pub fn estimate_moment(
    kind: SchemeKind,
    q: f64,
    p: &ModelParams,
    cfg: &McConfig,
) -> Result<Estimate> {
    p.validate()?;
    cfg.validate()?;
    if !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q must be finite, got {q}")));
    }
    let integer_q = q.fract() == 0.0;
    if !kind.asset_is_log() && (!integer_q || q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scheme {kind} needs a positive integer moment order, got {q}"
        )));
    }
    let units = cfg.units();
    let contributions: Vec<(f64, f64)> = with_pool(cfg.workers, || {
        (0..units)
            .into_par_iter()
            .map(|m| {
                let (a, b) = simulate_unit(kind, p, cfg, m);
                let ca = moment_contribution(&a, q, integer_q);
                match b {
                    None => ca,
                    Some(b) => {
                        // Pair average in scaled form: keep the larger
                        // magnitude as the carrier.
                        let cb = moment_contribution(&b, q, integer_q);
                        pair_average(ca, cb)
                    }
                }
            })
            .collect()
    })?;
    Ok(reduce_scaled(&contributions, 0))
}

/// Averages two `(log-magnitude, sign)` contributions exactly:
/// `(lx, s)` representing `s * exp(lx)`.
fn pair_average(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (la, sa) = a;
    let (lb, sb) = b;
    if !la.is_finite() && !lb.is_finite() {
        return (f64::NEG_INFINITY, 0.0);
    }
    let (lmax, smax, lmin, smin) = if la >= lb { (la, sa, lb, sb) } else { (lb, sb, la, sa) };
    let rest = if lmin.is_finite() { smin * (lmin - lmax).exp() } else { 0.0 };
    let combined = smax + rest; // in units of exp(lmax)
    if combined == 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (lmax + (0.5 * combined.abs()).ln(), combined.signum())
    }
}

/// Estimates the finite-`n` LLN statistic `(1/n) log|S_n|`. Paths with
/// `S_n = 0` are excluded and counted in [`Estimate::excluded_paths`].
pub fn estimate_lln(kind: SchemeKind, p: &ModelParams, cfg: &McConfig) -> Result<Estimate> {
    p.validate()?;
    cfg.validate()?;
    let units = cfg.units();
    let inv_n = 1.0 / p.n as f64;
    let values: Vec<Option<f64>> = with_pool(cfg.workers, || {
        (0..units)
            .into_par_iter()
            .map(|m| {
                let (a, b) = simulate_unit(kind, p, cfg, m);
                match (a.log_abs, b) {
                    (Some(la), None) => Some(la * inv_n),
                    (Some(la), Some(tb)) => tb.log_abs.map(|lb| 0.5 * (la + lb) * inv_n),
                    _ => None,
                }
            })
            .collect()
    })?;
    let mut sum = KahanSum::new();
    let mut sum_sq = KahanSum::new();
    let mut kept = 0u64;
    for v in values.iter().flatten() {
        sum.add(*v);
        sum_sq.add(v * v);
        kept += 1;
    }
    let dropped_units = values.len() as u64 - kept;
    let excluded = dropped_units * if cfg.antithetic { 2 } else { 1 };
    if kept < 2 {
        return Err(Error::NonConvergent("fewer than two valid paths for LLN".into()));
    }
    let n = kept as f64;
    let mean = sum.value() / n;
    let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate {
        mean,
        std_error: (var / n).sqrt(),
        n_eff: kept,
        log_space: false,
        tail_dominated: false,
        excluded_paths: excluded,
    })
}

/// Estimates `Var[(log|S_n| - slope*n) / sqrt(n)]` with the LLN slope taken
/// from [`limit_laws`] for the given scheme, reporting a jackknife standard
/// error over up to 100 contiguous path blocks.
pub fn estimate_clt_variance(
    kind: SchemeKind,
    p: &ModelParams,
    cfg: &McConfig,
) -> Result<Estimate> {
    p.validate()?;
    cfg.validate()?;
    let scaling = scaling_from_market(p, 2.0)?;
    let slope = limit_laws::lln_for_kind(kind, scaling.rho)?;
    let sqrt_n = (p.n as f64).sqrt();
    let units = cfg.units();
    let values: Vec<Option<(f64, f64)>> = with_pool(cfg.workers, || {
        (0..units)
            .into_par_iter()
            .map(|m| {
                let (a, b) = simulate_unit(kind, p, cfg, m);
                let za = a.log_abs.map(|l| (l - slope * p.n as f64) / sqrt_n);
                match b {
                    None => za.map(|z| (z, f64::NAN)),
                    Some(tb) => match (za, tb.log_abs) {
                        (Some(z1), Some(lb)) => {
                            Some((z1, (lb - slope * p.n as f64) / sqrt_n))
                        }
                        _ => None,
                    },
                }
            })
            .collect()
    })?;
    let mut z: Vec<f64> = Vec::with_capacity(values.len() * 2);
    let mut excluded = 0u64;
    for v in &values {
        match v {
            Some((z1, z2)) => {
                z.push(*z1);
                if cfg.antithetic {
                    z.push(*z2);
                }
            }
            None => excluded += if cfg.antithetic { 2 } else { 1 },
        }
    }
    if z.len() < 4 {
        return Err(Error::NonConvergent("too few valid paths for CLT variance".into()));
    }
    let (vhat, se) = jackknife_variance(&z, 100, cfg.antithetic);
    Ok(Estimate {
        mean: vhat,
        std_error: se,
        n_eff: z.len() as u64,
        log_space: false,
        tail_dominated: false,
        excluded_paths: excluded,
    })
}

/// Sample variance of `z` plus a delete-a-block jackknife standard error.
/// Blocks are contiguous index ranges; when `pairs` is set, block sizes stay
/// even so antithetic pairs are never split.
fn jackknife_variance(z: &[f64], max_blocks: usize, pairs: bool) -> (f64, f64) {
    let n = z.len();
    let nf = n as f64;
    let mut s1 = KahanSum::new();
    let mut s2 = KahanSum::new();
    for &x in z {
        s1.add(x);
        s2.add(x * x);
    }
    let total1 = s1.value();
    let total2 = s2.value();
    let vhat = ((total2 - total1 * total1 / nf) / (nf - 1.0)).max(0.0);

    let unit = if pairs { 2 } else { 1 };
    let n_units = n / unit;
    let b = max_blocks.min(n_units).max(2);
    let mut leave_out = Vec::with_capacity(b);
    let mut start = 0usize;
    for j in 0..b {
        let end = ((j + 1) * n_units / b) * unit;
        if end <= start {
            continue;
        }
        let (mut b1, mut b2) = (0.0f64, 0.0f64);
        for &x in &z[start..end] {
            b1 += x;
            b2 += x * x;
        }
        let m = (n - (end - start)) as f64;
        if m > 1.0 {
            let r1 = total1 - b1;
            let r2 = total2 - b2;
            leave_out.push(((r2 - r1 * r1 / m) / (m - 1.0)).max(0.0));
        }
        start = end;
    }
    let bf = leave_out.len() as f64;
    if bf < 2.0 {
        return (vhat, 0.0);
    }
    let mean_lo: f64 = leave_out.iter().sum::<f64>() / bf;
    let ss: f64 = leave_out.iter().map(|v| (v - mean_lo) * (v - mean_lo)).sum();
    let se = ((bf - 1.0) / bf * ss).sqrt();
    (vhat, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sigma0: f64, omega: f64, tau: f64, n: u32, corr: f64) -> ModelParams {
        ModelParams::new(1.0, sigma0, omega, tau, n, corr).unwrap()
    }

    #[test]
    fn martingale_for_all_schemes() {
        let cfg = McConfig { n_paths: 60_000, seed: 31, workers: 0, antithetic: false };
        for kind in SchemeKind::ALL {
            for corr in [-1.0, 0.0, 1.0] {
                let p = params(0.25, 0.1, 0.25, 5, corr);
                let e = estimate_moment(kind, 1.0, &p, &cfg).unwrap();
                assert!(!e.log_space);
                assert!(
                    (e.mean - 1.0).abs() <= 3.0 * e.std_error,
                    "{kind} corr={corr}: {} +- {}",
                    e.mean,
                    e.std_error
                );
            }
        }
    }

    #[test]
    fn constant_volatility_second_moment() {
        // omega = 0: E[S_n^2] = (1 + rho^2)^n exactly.
        let p = params(0.2, 0.0, 0.25, 12, 0.0);
        let cfg = McConfig { n_paths: 80_000, seed: 7, workers: 0, antithetic: false };
        let e = estimate_moment(SchemeKind::EulerLogEuler, 2.0, &p, &cfg).unwrap();
        let want = (1.0 + 0.01f64).powi(12);
        assert!(
            (e.mean - want).abs() <= 3.0 * e.std_error,
            "mean {} se {} want {want}",
            e.mean,
            e.std_error
        );
    }

    #[test]
    fn antithetic_never_hurts_martingale_estimate() {
        let p = params(0.3, 0.12, 0.25, 8, 0.0);
        let plain = McConfig { n_paths: 40_000, seed: 5, workers: 0, antithetic: false };
        let anti = McConfig { antithetic: true, ..plain };
        let e_plain = estimate_moment(SchemeKind::LogEulerLogEuler, 1.0, &p, &plain).unwrap();
        let e_anti = estimate_moment(SchemeKind::LogEulerLogEuler, 1.0, &p, &anti).unwrap();
        assert!(
            e_anti.std_error <= e_plain.std_error,
            "anti se {} vs plain se {}",
            e_anti.std_error,
            e_plain.std_error
        );
        assert!((e_anti.mean - 1.0).abs() <= 4.0 * e_anti.std_error.max(1e-9));
    }

    #[test]
    fn estimates_are_worker_invariant() {
        let p = params(0.3, 0.15, 0.25, 10, -0.5);
        for antithetic in [false, true] {
            let base = McConfig { n_paths: 4_000, seed: 17, workers: 1, antithetic };
            let e1 = estimate_moment(SchemeKind::EulerEuler, 2.0, &p, &base).unwrap();
            for workers in [4usize, 16] {
                let cfg = McConfig { workers, ..base };
                let ew = estimate_moment(SchemeKind::EulerEuler, 2.0, &p, &cfg).unwrap();
                assert_eq!(e1, ew, "workers={workers} antithetic={antithetic}");
            }
            let l1 = estimate_lln(SchemeKind::EulerEuler, &p, &base).unwrap();
            let l4 = estimate_lln(
                SchemeKind::EulerEuler,
                &p,
                &McConfig { workers: 4, ..base },
            )
            .unwrap();
            assert_eq!(l1, l4);
        }
    }

    #[test]
    fn lln_log_euler_matches_minus_half_rho_squared() {
        // rho = 0.3, small beta so the finite-n drift correction is tiny.
        let n = 500u32;
        let beta = 0.1f64;
        let tau = 0.25f64;
        let omega = (2.0 * beta / (n as f64 * n as f64 * tau)).sqrt();
        let p = params(0.6, omega, tau, n, 0.0);
        let rho2 = 0.09;
        let cfg = McConfig { n_paths: 20_000, seed: 23, workers: 0, antithetic: false };
        let e = estimate_lln(SchemeKind::LogEulerLogEuler, &p, &cfg).unwrap();
        assert_eq!(e.excluded_paths, 0);
        assert!(
            (e.mean + 0.5 * rho2).abs() <= 3.0 * e.std_error + 1e-5,
            "mean {} se {}",
            e.mean,
            e.std_error
        );
    }

    #[test]
    fn clt_variance_gbm_limit() {
        // beta = 0 reduces to GBM: Var = rho^2.
        let p = params(0.2, 0.0, 0.25, 200, 0.0);
        let cfg = McConfig { n_paths: 20_000, seed: 29, workers: 0, antithetic: false };
        let e = estimate_clt_variance(SchemeKind::LogEulerLogEuler, &p, &cfg).unwrap();
        let want = 0.2f64 * 0.2 * 0.25;
        assert!(
            (e.mean - want).abs() <= 3.0 * e.std_error,
            "vhat {} se {} want {want}",
            e.mean,
            e.std_error
        );
    }

    #[test]
    fn se_scaling_with_path_count() {
        let p = params(0.3, 0.1, 0.25, 50, 0.0);
        let small = McConfig { n_paths: 10_000, seed: 3, workers: 0, antithetic: false };
        let large = McConfig { n_paths: 40_000, ..small };
        let e_small = estimate_lln(SchemeKind::EulerLogEuler, &p, &small).unwrap();
        let e_large = estimate_lln(SchemeKind::EulerLogEuler, &p, &large).unwrap();
        let ratio = e_small.std_error / e_large.std_error;
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn reducer_flags_tail_dominance() {
        // One contribution carries nearly all of the sum.
        let mut units: Vec<(f64, f64)> = (0..1000).map(|_| (0.0, 1.0)).collect();
        units[123] = (40.0, 1.0);
        let e = reduce_scaled(&units, 0);
        assert!(e.tail_dominated);
        assert!(!e.log_space);

        let flat: Vec<(f64, f64)> = (0..1000).map(|_| (1.0, 1.0)).collect();
        assert!(!reduce_scaled(&flat, 0).tail_dominated);
    }

    #[test]
    fn reducer_switches_to_log_space() {
        let units: Vec<(f64, f64)> = (0..64).map(|i| (800.0 + (i % 3) as f64, 1.0)).collect();
        let e = reduce_scaled(&units, 0);
        assert!(e.log_space);
        assert!(e.mean > 690.0 && e.mean < 810.0, "log mean {}", e.mean);
        assert!(e.std_error >= 0.0);
    }

    #[test]
    fn pair_average_is_exact() {
        let (l, s) = pair_average((2.0f64.ln(), 1.0), (6.0f64.ln(), 1.0));
        assert!((l - 4.0f64.ln()).abs() < 1e-14);
        assert_eq!(s, 1.0);
        let (l, s) = pair_average((3.0f64.ln(), 1.0), (1.0f64.ln(), -1.0));
        assert!((l - 1.0f64.ln()).abs() < 1e-14);
        assert_eq!(s, 1.0);
        let (l, s) = pair_average((f64::NEG_INFINITY, 0.0), (2.0f64.ln(), -1.0));
        assert!((l - 1.0f64.ln()).abs() < 1e-14);
        assert_eq!(s, -1.0);
        let (_, s) = pair_average((1.0, 1.0), (1.0, -1.0));
        assert_eq!(s, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(McConfig { n_paths: 1, ..Default::default() }.validate().is_err());
        assert!(McConfig { n_paths: 3, antithetic: true, ..Default::default() }
            .validate()
            .is_err());
        assert!(McConfig::default().validate().is_ok());
    }

    #[test]
    fn trajectory_matches_terminal_sample() {
        let p = ModelParams::new(2.0, 0.3, 0.5, 0.25, 10, 0.3).unwrap();
        for kind in SchemeKind::ALL {
            for negate in [false, true] {
                let states = trajectory(kind, &p, 99, 7, negate).unwrap();
                assert_eq!(states.len(), 11);
                assert_eq!(states[0].s, 2.0);
                assert_eq!(states[10].step_index, 10);
                let mut stream = GaussianPairStream::new(99, 7);
                let terminal = terminal_from_noises(
                    kind,
                    &p,
                    (0..10).map(|_| {
                        let n = stream.next_pair();
                        if negate {
                            n.negated()
                        } else {
                            n
                        }
                    }),
                );
                let gap = (states[10].s - terminal.s).abs();
                assert!(gap <= 1e-12 * terminal.s.abs(), "direct {} vs log-tracked {}", states[10].s, terminal.s);
            }
        }
    }
}
