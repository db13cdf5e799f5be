//! The four Euler/log-Euler discretizations of the stochastic volatility
//! model and their deterministic noise streams.
//!
//! One step advances the pair `(S, sigma)` with independent standard normal
//! draws `(eps, v)`:
//!
//! ```text
//! asset:      Euler      S <- S * (1 + sigma sqrt(tau) eps_eff)
//!             log-Euler  S <- S * exp(sigma sqrt(tau) eps_eff - sigma^2 tau / 2)
//! volatility: Euler      sigma <- sigma * (1 + omega sqrt(tau) v)
//!             log-Euler  sigma <- sigma * exp(omega sqrt(tau) v - omega^2 tau / 2)
//! ```
//!
//! The asset update always uses the pre-update volatility. An optional
//! correlation mixes the asset shock as
//! `eps_eff = corr * v + sqrt(1 - corr^2) * eps`, which leaves the martingale
//! property of `S` intact for every scheme.
//!
//! Noise is counter-based: the k-th pair of path i is a pure function of
//! `(seed, i, k)`, so simulations are bit-identical regardless of worker
//! count or scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Which update rule each coordinate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Euler asset, log-Euler volatility.
    EulerLogEuler,
    /// Log-Euler asset, log-Euler volatility.
    LogEulerLogEuler,
    /// Euler asset, Euler volatility.
    EulerEuler,
    /// Log-Euler asset, Euler volatility.
    LogEulerEuler,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::EulerLogEuler,
        SchemeKind::LogEulerLogEuler,
        SchemeKind::EulerEuler,
        SchemeKind::LogEulerEuler,
    ];

    /// Whether the asset update is multiplicative-exponential (positive S).
    pub fn asset_is_log(&self) -> bool {
        matches!(self, SchemeKind::LogEulerLogEuler | SchemeKind::LogEulerEuler)
    }

    /// Whether the volatility update is multiplicative-exponential.
    pub fn vol_is_log(&self) -> bool {
        matches!(self, SchemeKind::EulerLogEuler | SchemeKind::LogEulerLogEuler)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::EulerLogEuler => "euler-log-euler",
            SchemeKind::LogEulerLogEuler => "log-euler-log-euler",
            SchemeKind::EulerEuler => "euler-euler",
            SchemeKind::LogEulerEuler => "log-euler-euler",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler-log-euler" => Ok(SchemeKind::EulerLogEuler),
            "log-euler-log-euler" => Ok(SchemeKind::LogEulerLogEuler),
            "euler-euler" => Ok(SchemeKind::EulerEuler),
            "log-euler-euler" => Ok(SchemeKind::LogEulerEuler),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme '{other}' (expected euler-log-euler, \
                 log-euler-log-euler, euler-euler or log-euler-euler)"
            ))),
        }
    }
}

/// State of one simulated path after `step_index` steps.
///
/// `s` may be negative under Euler asset updates and `sigma` may be negative
/// under Euler volatility updates; both are legitimate states of those
/// discretizations and nothing here clamps them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub s: f64,
    pub sigma: f64,
    pub step_index: u32,
}

/// One step's pair of independent standard normal draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePair {
    /// Asset driver (before correlation mixing).
    pub eps: f64,
    /// Volatility driver.
    pub v: f64,
}

impl NoisePair {
    /// The asset shock actually applied: `corr*v + sqrt(1-corr^2)*eps`.
    pub fn effective_eps(&self, corr: f64) -> f64 {
        if corr == 0.0 {
            self.eps
        } else {
            corr * self.v + (1.0 - corr * corr).sqrt() * self.eps
        }
    }

    /// The antithetic reflection (negates both drivers).
    pub fn negated(&self) -> NoisePair {
        NoisePair { eps: -self.eps, v: -self.v }
    }
}

/// Applies one step of `kind`. The asset update uses the pre-update
/// volatility.
pub fn step(kind: SchemeKind, st: PathState, noise: NoisePair, p: &ModelParams) -> PathState {
    let sqrt_tau = p.tau.sqrt();
    let eff = noise.effective_eps(p.corr);
    let s = if kind.asset_is_log() {
        st.s * (st.sigma * sqrt_tau * eff - 0.5 * st.sigma * st.sigma * p.tau).exp()
    } else {
        st.s * (1.0 + st.sigma * sqrt_tau * eff)
    };
    let sigma = if kind.vol_is_log() {
        st.sigma * (p.omega * sqrt_tau * noise.v - 0.5 * p.omega * p.omega * p.tau).exp()
    } else {
        st.sigma * (1.0 + p.omega * sqrt_tau * noise.v)
    };
    PathState { s, sigma, step_index: st.step_index + 1 }
}

/// Deterministic per-path stream of standard normal pairs.
///
/// Pair `k` of path `i` occupies ChaCha8 words `[4k, 4k+4)` of stream `i`
/// seeded from `seed`: two 64-bit words per uniform, two uniforms per
/// Box-Muller pair.
pub struct GaussianPairStream {
    rng: ChaCha8Rng,
}

/// Maps a 64-bit word to a uniform in (0, 1] (never 0, so logs are finite).
fn uniform_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

impl GaussianPairStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        GaussianPairStream { rng }
    }

    /// The next sequential pair (Box-Muller transform of two uniforms).
    pub fn next_pair(&mut self) -> NoisePair {
        let u1 = uniform_open(self.rng.next_u64());
        let u2 = uniform_open(self.rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
        NoisePair { eps: r * cos, v: r * sin }
    }

    /// Random access to pair `k`, a pure function of `(seed, path, k)`.
    pub fn pair_at(&mut self, k: u64) -> NoisePair {
        self.rng.set_word_pos(4u128 * k as u128);
        self.next_pair()
    }
}

/// Terminal asset value of one path, with the log-magnitude carried
/// separately so moment statistics never overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSample {
    /// `sign * exp(log_abs)`; may overflow to +-inf when the log form does
    /// not. `0.0` when the path hit an exact zero.
    pub s: f64,
    /// `ln |S_n|`, `None` only when `S_n = 0` exactly (representable under
    /// Euler asset updates, probability zero).
    pub log_abs: Option<f64>,
    /// Sign of `S_n` in `{-1, 0, 1}`.
    pub sign: i8,
}

/// Runs one path to maturity from an explicit noise sequence (used directly
/// by the Monte Carlo engine for antithetic reflections).
pub fn terminal_from_noises<I>(kind: SchemeKind, p: &ModelParams, noises: I) -> TerminalSample
where
    I: IntoIterator<Item = NoisePair>,
{
    let sqrt_tau = p.tau.sqrt();
    let mut log_abs = p.s0.ln();
    let mut sign: i8 = 1;
    let mut sigma = p.sigma0;
    let mut steps = 0u32;
    for noise in noises {
        let eff = noise.effective_eps(p.corr);
        if kind.asset_is_log() {
            log_abs += sigma * sqrt_tau * eff - 0.5 * sigma * sigma * p.tau;
        } else {
            let factor = 1.0 + sigma * sqrt_tau * eff;
            if factor == 0.0 {
                sign = 0;
            } else {
                if factor < 0.0 {
                    sign = -sign;
                }
                log_abs += factor.abs().ln();
            }
        }
        sigma = if kind.vol_is_log() {
            sigma * (p.omega * sqrt_tau * noise.v - 0.5 * p.omega * p.omega * p.tau).exp()
        } else {
            sigma * (1.0 + p.omega * sqrt_tau * noise.v)
        };
        steps += 1;
        if steps == p.n {
            break;
        }
    }
    if sign == 0 {
        TerminalSample { s: 0.0, log_abs: None, sign: 0 }
    } else {
        TerminalSample { s: sign as f64 * log_abs.exp(), log_abs: Some(log_abs), sign }
    }
}

/// Terminal sample of path `path_index` under `(seed, path_index)` noise.
pub fn terminal_sample(
    kind: SchemeKind,
    p: &ModelParams,
    seed: u64,
    path_index: u64,
) -> TerminalSample {
    let mut stream = GaussianPairStream::new(seed, path_index);
    terminal_from_noises(kind, p, (0..p.n).map(|_| stream.next_pair()))
}

/// Simulates `n_paths` terminal values. Path `i` depends only on
/// `(seed, i)`, and results are collected in index order, so the output is
/// bit-identical for any worker count.
pub fn simulate_terminal(
    kind: SchemeKind,
    p: &ModelParams,
    n_paths: u64,
    seed: u64,
) -> Result<Vec<TerminalSample>> {
    p.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
    }
    Ok((0..n_paths)
        .into_par_iter()
        .map(|i| terminal_sample(kind, p, seed, i))
        .collect())
}

/// Full trajectory of one path as `(step_index, s, sigma)` rows, including
/// the initial state; used by the CSV path dump.
pub fn simulate_path_trace(
    kind: SchemeKind,
    p: &ModelParams,
    seed: u64,
    path_index: u64,
) -> Vec<(u32, f64, f64)> {
    let mut stream = GaussianPairStream::new(seed, path_index);
    let mut st = PathState { s: p.s0, sigma: p.sigma0, step_index: 0 };
    let mut rows = Vec::with_capacity(p.n as usize + 1);
    rows.push((0, st.s, st.sigma));
    for _ in 0..p.n {
        st = step(kind, st, stream.next_pair(), p);
        rows.push((st.step_index, st.s, st.sigma));
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_cdf;

    fn params(sigma0: f64, omega: f64, tau: f64, n: u32, corr: f64) -> ModelParams {
        ModelParams::new(1.0, sigma0, omega, tau, n, corr).unwrap()
    }

    #[test]
    fn step_trivial_examples() {
        let p = params(0.2, 0.0, 0.25, 1, 0.0);
        let st = PathState { s: 1.0, sigma: 0.2, step_index: 0 };
        let out = step(SchemeKind::EulerLogEuler, st, NoisePair { eps: 0.0, v: 0.0 }, &p);
        assert_eq!(out.s, 1.0);
        assert_eq!(out.sigma, 0.2);
        assert_eq!(out.step_index, 1);

        let out = step(SchemeKind::LogEulerLogEuler, st, NoisePair { eps: 1.0, v: 0.0 }, &p);
        assert!((out.s - (0.1f64 - 0.005).exp()).abs() < 1e-15);

        let p = params(1.0, 0.2, 0.25, 1, 0.0);
        let st = PathState { s: 1.0, sigma: 1.0, step_index: 0 };
        let out = step(SchemeKind::EulerEuler, st, NoisePair { eps: 0.0, v: -1.0 }, &p);
        assert!((out.sigma - 0.9).abs() < 1e-15);
    }

    #[test]
    fn asset_update_uses_pre_update_sigma() {
        let p = params(0.5, 0.4, 0.25, 1, 0.0);
        let st = PathState { s: 2.0, sigma: 0.5, step_index: 0 };
        let noise = NoisePair { eps: 1.0, v: 2.0 };
        let out = step(SchemeKind::EulerEuler, st, noise, &p);
        // S factor built from sigma=0.5 even though sigma moves to 0.7.
        assert!((out.s - 2.0 * (1.0 + 0.5 * 0.5)).abs() < 1e-15);
        assert!((out.sigma - 0.5 * 1.4).abs() < 1e-15);
    }

    #[test]
    fn log_euler_volatility_matches_exact_solution() {
        let p = params(0.3, 0.4, 0.1, 100, 0.0);
        let mut stream = GaussianPairStream::new(7, 3);
        let mut st = PathState { s: 1.0, sigma: p.sigma0, step_index: 0 };
        let mut z = 0.0;
        for _ in 0..p.n {
            let noise = stream.next_pair();
            z += p.tau.sqrt() * noise.v;
            st = step(SchemeKind::LogEulerLogEuler, st, noise, &p);
        }
        let t_n = p.maturity();
        let exact = p.sigma0 * (p.omega * z - 0.5 * p.omega * p.omega * t_n).exp();
        assert!(
            (st.sigma - exact).abs() <= 1e-12 * exact.abs(),
            "sigma {} vs exact {exact}",
            st.sigma
        );
        assert!(st.sigma > 0.0 && st.s > 0.0);
    }

    #[test]
    fn stream_is_deterministic_and_seekable() {
        let a = GaussianPairStream::new(42, 9).next_pair();
        let b = GaussianPairStream::new(42, 9).next_pair();
        assert_eq!(a, b);

        let mut seq = GaussianPairStream::new(42, 9);
        let pairs: Vec<NoisePair> = (0..10).map(|_| seq.next_pair()).collect();
        let mut seek = GaussianPairStream::new(42, 9);
        for (k, want) in pairs.iter().enumerate() {
            assert_eq!(seek.pair_at(k as u64), *want, "pair {k}");
        }

        // Distinct paths and seeds decorrelate.
        let c = GaussianPairStream::new(42, 10).next_pair();
        let d = GaussianPairStream::new(43, 9).next_pair();
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn correlation_mixing() {
        let n = NoisePair { eps: 0.7, v: -1.3 };
        assert_eq!(n.effective_eps(1.0), n.v);
        assert_eq!(n.effective_eps(-1.0), -n.v);
        assert_eq!(n.effective_eps(0.0), n.eps);
        let mixed = n.effective_eps(0.6);
        assert!((mixed - (0.6 * -1.3 + 0.8 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn stream_moments_and_uniformity() {
        let n_draws = 1_000_000usize;
        let mut stream = GaussianPairStream::new(2024, 0);
        let mut sum_v = 0.0;
        let mut sum_v2 = 0.0;
        let mut bins = [0u64; 20];
        for _ in 0..n_draws {
            let pair = stream.next_pair();
            sum_v += pair.v;
            sum_v2 += pair.v * pair.v;
            let u = normal_cdf(pair.eps);
            let b = ((u * 20.0) as usize).min(19);
            bins[b] += 1;
        }
        let mean = sum_v / n_draws as f64;
        let var = sum_v2 / n_draws as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n_draws as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
        // Chi-square smoke test on 20 equiprobable bins of eps: 99.9th
        // percentile of chi2(19) is about 43.8.
        let expect = n_draws as f64 / 20.0;
        let chi2: f64 = bins.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        assert!(chi2 < 43.8, "chi2 {chi2}, bins {bins:?}");
    }

    #[test]
    fn martingale_within_three_standard_errors() {
        // Light version of the full acceptance check: every scheme and
        // correlation keeps E[S_n] = S_0.
        let n_paths = 100_000u64;
        for kind in SchemeKind::ALL {
            for corr in [-1.0, 0.0, 1.0] {
                let p = ModelParams::new(1.0, 0.3, 0.15, 0.25, 4, corr).unwrap();
                let samples = simulate_terminal(kind, &p, n_paths, 11).unwrap();
                let mut sum = 0.0;
                let mut sum2 = 0.0;
                for t in &samples {
                    sum += t.s;
                    sum2 += t.s * t.s;
                }
                let mean = sum / n_paths as f64;
                let var = (sum2 / n_paths as f64 - mean * mean).max(0.0);
                let se = (var / n_paths as f64).sqrt();
                assert!(
                    (mean - 1.0).abs() <= 3.0 * se,
                    "{kind} corr={corr}: mean {mean}, se {se}"
                );
            }
        }
    }

    #[test]
    fn omega_zero_log_asset_reduces_to_gbm() {
        // With omega = 0 and a log-Euler asset, log S_n is an exact Gaussian
        // random walk with step mean -rho^2/2.
        let p = params(0.2, 0.0, 0.25, 10, 0.0);
        let rho2 = 0.2f64 * 0.2 * 0.25;
        let n_paths = 100_000u64;
        let samples = simulate_terminal(SchemeKind::LogEulerLogEuler, &p, n_paths, 5).unwrap();
        let logs: Vec<f64> = samples.iter().map(|t| t.log_abs.unwrap()).collect();
        let mean: f64 = logs.iter().sum::<f64>() / n_paths as f64;
        let want = -0.5 * rho2 * p.n as f64;
        let sd = (rho2 * p.n as f64 / n_paths as f64).sqrt();
        assert!((mean - want).abs() < 3.0 * sd, "mean {mean} want {want}");
        assert!(samples.iter().all(|t| t.sign == 1 && t.s > 0.0));
    }

    #[test]
    fn terminal_sample_matches_trace() {
        let p = ModelParams::new(2.0, 0.4, 0.3, 0.1, 25, -0.4).unwrap();
        for kind in SchemeKind::ALL {
            let t = terminal_sample(kind, &p, 99, 17);
            let trace = simulate_path_trace(kind, &p, 99, 17);
            assert_eq!(trace.len(), 26);
            let s_end = trace.last().unwrap().1;
            let diff = (t.s - s_end).abs();
            assert!(
                diff <= 1e-10 * s_end.abs().max(1.0),
                "{kind}: terminal {} vs trace {s_end}",
                t.s
            );
        }
    }

    #[test]
    fn antithetic_negation_flips_draws() {
        let n = NoisePair { eps: 0.25, v: -0.5 };
        let m = n.negated();
        assert_eq!(m.eps, -0.25);
        assert_eq!(m.v, 0.5);
    }
}
