//! Subcommand implementations. Each returns the CSV lines to emit; all
//! solver work lives in `svasym-core`.

use svasym_core::exact_moments::sigma_ln_sweep;
use svasym_core::limit_laws::limit_constants;
use svasym_core::lyapunov_euler;
use svasym_core::lyapunov_lognormal::{lyapunov_ln, LnLyapunov};
use svasym_core::mc_engine::{
    estimate_clt_variance, estimate_lln, estimate_moment, trajectory,
};
use svasym_core::numerics::linspace;
use svasym_core::params::{market_from_scaling, scaling_from_market, Scaling};
use svasym_core::{McConfig, ModelParams, SchemeKind};

use crate::config::{need, pick, RunConfig};
use crate::emit::{header, num, row};
use crate::{
    CliError, ExactMomentsArgs, ExplosionArgs, LimitsArgs, LyapunovArgs, MarketArgs,
    PhaseCurveArgs, SimulateArgs, Statistic,
};

pub fn parse_scheme(s: &str) -> Result<SchemeKind, svasym_core::Error> {
    s.parse()
}

fn scheme_from(
    flag: &Option<SchemeKind>,
    cfg: &RunConfig,
    default: SchemeKind,
) -> Result<SchemeKind, CliError> {
    if let Some(k) = flag {
        return Ok(*k);
    }
    match &cfg.scheme {
        Some(s) => Ok(s.parse::<SchemeKind>()?),
        None => Ok(default),
    }
}

/// Worker-count hint: flag, then config, then SVASYM_THREADS, then the
/// ambient pool. A set but unparsable environment value is a config error
/// rather than a silent fallback.
fn workers_from(flag: &Option<usize>, cfg: &RunConfig) -> Result<usize, CliError> {
    if let Some(w) = pick(flag, &cfg.workers) {
        return Ok(w);
    }
    match std::env::var("SVASYM_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("SVASYM_THREADS must be an integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

/// Builds market parameters from flags/config; s0 defaults to 1 and corr
/// to 0, everything else is required.
fn market_from(args: &MarketArgs, cfg: &RunConfig) -> Result<ModelParams, CliError> {
    let s0 = pick(&args.s0, &cfg.s0).unwrap_or(1.0);
    let corr = pick(&args.corr, &cfg.corr).unwrap_or(0.0);
    let sigma0 = need("sigma0", &args.sigma0, &cfg.sigma0)?;
    let omega = need("omega", &args.omega, &cfg.omega)?;
    let tau = need("tau", &args.tau, &cfg.tau)?;
    let n = need("n", &args.n, &cfg.n)?;
    Ok(ModelParams::new(s0, sigma0, omega, tau, n, corr)?)
}

/// Resolves `(rho, beta)` either directly or from complete market
/// parameters. Explicit scaling coordinates win.
fn scaling_from(
    rho: &Option<f64>,
    beta: &Option<f64>,
    market: &MarketArgs,
    cfg: &RunConfig,
    q: f64,
) -> Result<Scaling, CliError> {
    let rho = pick(rho, &cfg.rho);
    let beta = pick(beta, &cfg.beta);
    match (rho, beta) {
        (Some(rho), Some(beta)) => Ok(Scaling::new(rho, beta, q)?),
        (None, None) => {
            let p = market_from(market, cfg).map_err(|_| {
                CliError::Config(
                    "need either --rho and --beta, or market parameters \
                     --sigma0 --omega --tau --n"
                        .into(),
                )
            })?;
            Ok(scaling_from_market(&p, q)?)
        }
        _ => Err(CliError::Config("--rho and --beta must be given together".into())),
    }
}

fn integer_order(q: f64) -> Result<u32, CliError> {
    if q.fract() != 0.0 || !(q >= 2.0) || q > u32::MAX as f64 {
        return Err(CliError::Config(format!(
            "this route needs an integer moment order q >= 2, got {q}"
        )));
    }
    Ok(q as u32)
}

/// The config file stores `q` as a float; commands that need an integer
/// order reject fractional values instead of truncating.
fn cfg_order(cfg: &RunConfig) -> Result<Option<u32>, CliError> {
    match cfg.q {
        None => Ok(None),
        Some(v) if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) => Ok(Some(v as u32)),
        Some(v) => Err(CliError::Config(format!(
            "q must be a nonnegative integer for this subcommand, got {v}"
        ))),
    }
}

pub fn lyapunov(args: &LyapunovArgs, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let kind = scheme_from(&args.scheme, cfg, SchemeKind::EulerLogEuler)?;
    let q = pick(&args.q, &cfg.q).unwrap_or(2.0);
    let s = scaling_from(&args.rho, &args.beta, &args.market, cfg, q)?;
    let mut lines = vec![header(&["scheme", "q", "rho", "beta", "lambda", "branch", "d_star"])];
    if kind.asset_is_log() {
        let lambda = lyapunov_ln(s.rho, s.beta, q)?;
        let cell = match lambda {
            LnLyapunov::Finite(v) => num(v),
            LnLyapunov::Infinite => "infinite".into(),
        };
        lines.push(row(&[
            kind.to_string(),
            num(q),
            num(s.rho),
            num(s.beta),
            cell,
            "closed-form".into(),
            String::new(),
        ]));
    } else {
        let r = lyapunov_euler::lyapunov(s.rho, s.beta, integer_order(q)?)?;
        lines.push(row(&[
            kind.to_string(),
            num(q),
            num(s.rho),
            num(s.beta),
            num(r.value),
            r.branch.to_string(),
            num(r.d_star),
        ]));
    }
    Ok(lines)
}

pub fn phase_curve(args: &PhaseCurveArgs, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let q = need("q", &args.q, &cfg_order(cfg)?)?;
    let grid = match pick(&args.rho_grid, &cfg.rho_grid) {
        Some(g) => {
            if g.is_empty() {
                return Err(CliError::Config("--rho-grid must not be empty".into()));
            }
            g
        }
        None => {
            let lo = pick(&args.rho_min, &cfg.rho_min).unwrap_or(0.02);
            let points = pick(&args.points, &cfg.points).unwrap_or(16);
            let hi = match pick(&args.rho_max, &cfg.rho_max) {
                Some(hi) => hi,
                None => 0.98 * lyapunov_euler::critical_point(q)?.0,
            };
            if !(hi > lo) {
                return Err(CliError::Config(format!(
                    "rho range is empty: [{lo}, {hi}]"
                )));
            }
            linspace(lo, hi, points.max(2))
        }
    };
    let curve = lyapunov_euler::phase_curve(q, &grid)?;
    let mut lines =
        vec![header(&["rho", "beta_cr", "inv_beta_cr", "segment"])];
    for &(rho, beta) in &curve.samples {
        lines.push(row(&[
            num(rho),
            num(beta),
            num(1.0 / beta),
            "transition-line".into(),
        ]));
    }
    if args.mean_field || cfg.mean_field.unwrap_or(false) {
        for &rho in &grid {
            let mf = if q <= 3 {
                lyapunov_euler::meanfield_phase(q, rho)
            } else {
                lyapunov_euler::meanfield_phase_numeric(q, rho)
            };
            match mf {
                Ok(beta) => lines.push(row(&[
                    num(rho),
                    num(beta),
                    num(1.0 / beta),
                    "mean-field".into(),
                ])),
                Err(svasym_core::Error::NoTransition(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    let (rho_c, beta_c) = curve.critical_point;
    lines.push(row(&[
        num(rho_c),
        num(beta_c),
        num(1.0 / beta_c),
        "critical-point".into(),
    ]));
    Ok(lines)
}

const SWEEP_HEADER: [&str; 10] = [
    "q", "n", "omega", "sigma0", "tau", "rho", "beta", "log_moment", "lambda_qn", "sigma_ln",
];

pub fn exact_moments(args: &ExactMomentsArgs, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let q = need("q", &args.q, &cfg_order(cfg)?)?;
    let p = market_from(&args.market, cfg)?;
    let omegas = match (
        pick(&args.omega_min, &cfg.omega_min),
        pick(&args.omega_max, &cfg.omega_max),
        pick(&args.points, &cfg.points),
    ) {
        (None, None, _) => vec![p.omega],
        (Some(lo), Some(hi), points) => linspace(lo, hi, points.unwrap_or(25).max(2)),
        _ => {
            return Err(CliError::Config(
                "--omega-min and --omega-max must be given together".into(),
            ))
        }
    };
    let rows = sigma_ln_sweep(q, &p, &omegas)?;
    let mut lines = vec![header(&SWEEP_HEADER)];
    for r in rows {
        lines.push(row(&[
            r.q.to_string(),
            r.n.to_string(),
            num(r.omega),
            num(r.sigma0),
            num(r.tau),
            num(r.rho),
            num(r.beta),
            num(r.log_moment),
            num(r.lambda_qn),
            num(r.sigma_ln),
        ]));
    }
    Ok(lines)
}

pub fn simulate(args: &SimulateArgs, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let kind = scheme_from(&args.scheme, cfg, SchemeKind::EulerLogEuler)?;
    let q = pick(&args.q, &cfg.q).unwrap_or(2.0);
    let p = market_from(&args.market, cfg)?;
    let statistic = match (&args.statistic, &cfg.statistic) {
        (Some(s), _) => *s,
        (None, Some(s)) => match s.as_str() {
            "moment" => Statistic::Moment,
            "lln" => Statistic::Lln,
            "clt-variance" => Statistic::CltVariance,
            other => {
                return Err(CliError::Config(format!(
                    "unknown statistic '{other}' (expected moment, lln or clt-variance)"
                )))
            }
        },
        (None, None) => Statistic::Moment,
    };
    let mc = McConfig {
        n_paths: pick(&args.paths, &cfg.n_paths).unwrap_or(100_000),
        seed: pick(&args.seed, &cfg.seed).unwrap_or(1),
        workers: workers_from(&args.workers, cfg)?,
        antithetic: args.antithetic || cfg.antithetic.unwrap_or(false),
    };
    let (name, est) = match statistic {
        Statistic::Moment => ("moment", estimate_moment(kind, q, &p, &mc)?),
        Statistic::Lln => ("lln", estimate_lln(kind, &p, &mc)?),
        Statistic::CltVariance => ("clt-variance", estimate_clt_variance(kind, &p, &mc)?),
    };
    if let Some(dir) = pick(&args.dump_paths, &cfg.dump_paths) {
        let limit = pick(&args.dump_limit, &cfg.dump_limit).unwrap_or(8);
        dump_paths(&dir, kind, &p, &mc, limit)?;
    }
    let lines = vec![
        header(&[
            "scheme",
            "statistic",
            "q",
            "n",
            "n_paths",
            "seed",
            "antithetic",
            "mean",
            "std_error",
            "n_eff",
            "log_space",
            "tail_dominated",
            "excluded_paths",
        ]),
        row(&[
            kind.to_string(),
            name.into(),
            num(q),
            p.n.to_string(),
            mc.n_paths.to_string(),
            mc.seed.to_string(),
            mc.antithetic.to_string(),
            num(est.mean),
            num(est.std_error),
            est.n_eff.to_string(),
            est.log_space.to_string(),
            est.tail_dominated.to_string(),
            est.excluded_paths.to_string(),
        ]),
    ];
    Ok(lines)
}

/// Writes up to `limit` path trajectories as `path_<k>.csv` (plus
/// `path_<k>_anti.csv` twins under antithetic sampling).
fn dump_paths(
    dir: &std::path::Path,
    kind: SchemeKind,
    p: &ModelParams,
    mc: &McConfig,
    limit: u64,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let units = if mc.antithetic { mc.n_paths / 2 } else { mc.n_paths };
    for k in 0..units.min(limit) {
        let mut variants = vec![(false, format!("path_{k:05}.csv"))];
        if mc.antithetic {
            variants.push((true, format!("path_{k:05}_anti.csv")));
        }
        for (negate, file) in variants {
            let states = trajectory(kind, p, mc.seed, k, negate)?;
            let mut lines = vec![header(&["step", "s", "sigma"])];
            for st in states {
                lines.push(row(&[st.step_index.to_string(), num(st.s), num(st.sigma)]));
            }
            crate::emit::write_lines(&lines, Some(&dir.join(file)))?;
        }
    }
    Ok(())
}

pub fn limits(args: &LimitsArgs, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let s = scaling_from(&args.rho, &args.beta, &args.market, cfg, 2.0)?;
    let kinds: Vec<SchemeKind> = if args.scheme.is_none() && cfg.scheme.is_none() {
        SchemeKind::ALL.to_vec()
    } else {
        vec![scheme_from(&args.scheme, cfg, SchemeKind::EulerLogEuler)?]
    };
    let mut lines = vec![header(&[
        "scheme",
        "family",
        "rho",
        "beta",
        "lln_slope",
        "clt_variance",
    ])];
    for kind in kinds {
        let c = limit_constants(kind, s.rho, s.beta)?;
        let family = match c.scheme_family {
            svasym_core::limit_laws::SchemeFamily::EulerAsset => "euler-asset",
            svasym_core::limit_laws::SchemeFamily::LogEulerAsset => "log-euler-asset",
        };
        lines.push(row(&[
            kind.to_string(),
            family.into(),
            num(s.rho),
            num(s.beta),
            num(c.lln_slope),
            num(c.clt_variance),
        ]));
    }
    Ok(lines)
}

pub fn explosion_threshold(args: &ExplosionArgs, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let q = need("q", &args.q, &cfg_order(cfg)?)?;
    let sigma0 = need("sigma0", &args.sigma0, &cfg.sigma0)?;
    let tau = need("tau", &args.tau, &cfg.tau)?;
    let n = need("n", &args.n, &cfg.n)?;
    let rho = sigma0 * tau.sqrt();
    let curve = lyapunov_euler::phase_curve(q, &[rho])?;
    let beta_cr = curve.samples[0].1;
    let market = market_from_scaling(&Scaling::new(rho, beta_cr, q as f64)?, n, tau, 1.0)?;
    Ok(vec![
        header(&["q", "sigma0", "tau", "n", "rho", "beta_cr", "omega_cr"]),
        row(&[
            q.to_string(),
            num(sigma0),
            num(tau),
            n.to_string(),
            num(rho),
            num(beta_cr),
            num(market.omega),
        ]),
    ])
}
