//! Moment Lyapunov exponent of the Euler asset scheme in the scaling regime,
//! via the variational (large-deviations) representation.
//!
//! For fixed scaling parameters `(rho, beta)` and integer moment order `q`,
//! the exponent is the maximum of a reduced functional over admissible
//! volatility end levels `h(1)`.  Interior stationary levels solve the
//! bracketing-time equation `F_q(a; rho) = 2 sqrt(beta)` with
//!
//! `F_q(a; rho) = \int_{log rho}^{a} dx / sqrt(f_q(a) - f_q(x))`,
//!
//! and each stationary level `h1` yields
//!
//! `Lambda(h1) = f_q(h1) - beta^{-1/2} \int_{log rho}^{h1} sqrt(f_q(h1) - f_q(x)) dx`.
//!
//! The functional rises from the `d = 0` boundary value `f_q(log rho)`, so
//! the smallest root is always a local maximum; when `F_q` is non-monotone
//! (small `rho`) a second local maximum appears beyond the dip of `F_q` and
//! the two branches exchange dominance at a first-order transition `beta_cr`.
//! [`phase_curve`] traces that line and its termination point
//! `(rho_c, beta_c)` where the wiggle of `F_q` flattens out.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{integrate_adaptive, maximize_scan_refine, Bracket, QuadratureSpec};
use crate::rate_functions::{MomentOrder, TiltedLaw};

/// Which candidate produced the reported exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// The `d = 0` boundary (only optimal at `beta = 0`).
    BoundaryZero,
    /// An interior stationary level; the payload is the optimal `h(1)`.
    Stationary(f64),
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::BoundaryZero => write!(f, "boundary-zero"),
            Branch::Stationary(_) => write!(f, "stationary"),
        }
    }
}

/// Output of [`lyapunov`].
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovResult {
    /// `lambda(rho, beta; q)`, the moment Lyapunov exponent.
    pub value: f64,
    /// Winning candidate.
    pub branch: Branch,
    /// Optimal displacement `d* = beta^{-1/2} sqrt(f_q(h1) - f_q(log rho))`,
    /// clamped to `[0, 2 floor(q/2)]`; zero on the boundary branch.
    pub d_star: f64,
    /// Every root of `F_q(a) = 2 sqrt(beta)` found, ascending.  Odd-indexed
    /// roots (second, fourth, ...) are local minima of the functional.
    pub all_stationary_h1: Vec<f64>,
    /// True when the closed-form lower bound exceeded every evaluated
    /// candidate, i.e. the reported value is that floor.  Indicates the
    /// candidate search missed the optimum; not expected to occur.
    pub floor_dominates: bool,
}

/// Closed-form envelope of the exponent, exact in the large-`beta` and
/// large-`rho` limits.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bounds {
    /// `(4/3) beta [q/2]^2 + 2 [q/2] log rho - I_q(2 [q/2])`.
    pub lower: f64,
    /// `(4/3) beta [q/2]^2 + f_q(log rho)`.
    pub upper: f64,
    /// Common large-`beta` slope `(4/3) [q/2]^2` of both bounds.
    pub large_beta_slope: f64,
    /// Large-`rho` form of the exponent; coincides with `lower`, and
    /// `lambda - large_rho_form -> 0` as `rho -> infinity` at fixed `beta`.
    pub large_rho_form: f64,
}

/// One first-order transition line `beta_cr(rho)` in the `(rho, beta)` plane.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseCurve {
    /// `(rho, beta_cr)` samples, ascending in `rho`, only for `rho < rho_c`.
    pub samples: Vec<(f64, f64)>,
    /// `(rho_c, beta_c)` where the transition line terminates.
    pub critical_point: (f64, f64),
    /// Moment order.
    pub q: u32,
}

/// Mean-field (independent-increment) exponent and its maximizer.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanField {
    /// `max_a { a log rho + beta a^2 / 3 - I_q(a) }` over `[0, 2 floor(q/2)]`.
    pub value: f64,
    /// The maximizing `a`.
    pub a_star: f64,
}

/// Shared state for one `(q, rho)` slice: the lattice law plus quadrature
/// settings, so repeated `F_q` evaluations do not rebuild the weights.
struct Slice {
    law: TiltedLaw,
    rho: f64,
    lr: f64,
    qh: f64,
    spec: QuadratureSpec,
}

fn validate_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive and finite, got {rho}")));
    }
    Ok(())
}

fn validate_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must be nonnegative and finite, got {beta}"
        )));
    }
    Ok(())
}

impl Slice {
    fn new(q: u32, rho: f64) -> Result<Self> {
        validate_rho(rho)?;
        let order = MomentOrder::new(q)?;
        let law = TiltedLaw::new(order)?;
        Ok(Slice {
            qh: order.qhalf() as f64,
            law,
            rho,
            lr: rho.ln(),
            spec: QuadratureSpec::default(),
        })
    }

    fn f(&self, x: f64) -> f64 {
        self.law.cgf(x)
    }

    /// `F_q(a; rho)` after the substitution `x = a - t^2`, which removes the
    /// inverse-square-root endpoint singularity: the integrand tends to
    /// `2 / sqrt(f_q'(a))` as `t -> 0`.
    fn big_f(&self, a: f64) -> Result<f64> {
        if !a.is_finite() || a < self.lr {
            return Err(Error::Domain(format!(
                "F_q argument {a} below log rho = {}",
                self.lr
            )));
        }
        if a == self.lr {
            return Ok(0.0);
        }
        let fa = self.f(a);
        let fp = self.law.cgf_deriv(a);
        let fpp = self.law.cgf_deriv2(a);
        let t_max = (a - self.lr).sqrt();
        // Below t_switch the difference f(a) - f(a - t^2) loses relative
        // accuracy to cancellation, so a second-order Taylor form takes over.
        let t_switch = 1e-4 * (1.0 + t_max);
        let integrand = |t: f64| {
            if t <= t_switch {
                2.0 / (fp - 0.5 * fpp * t * t).sqrt()
            } else {
                let diff = (fa - self.f(a - t * t)).max(f64::MIN_POSITIVE);
                2.0 * t / diff.sqrt()
            }
        };
        integrate_adaptive(integrand, 0.0, t_max, &self.spec)
    }

    /// `Lambda(h1) = f_q(h1) - beta^{-1/2} \int_{log rho}^{h1}
    /// sqrt(f_q(h1) - f_q(x)) dx`, same substitution as [`Self::big_f`].
    fn lambda_h1(&self, h1: f64, beta: f64) -> Result<f64> {
        if !h1.is_finite() || h1 < self.lr {
            return Err(Error::Domain(format!(
                "stationary level {h1} below log rho = {}",
                self.lr
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("lambda_from_h1 needs beta > 0, got {beta}")));
        }
        if h1 == self.lr {
            return Ok(self.f(self.lr));
        }
        let fh = self.f(h1);
        let t_max = (h1 - self.lr).sqrt();
        let integrand =
            |t: f64| 2.0 * t * (fh - self.f(h1 - t * t)).max(0.0).sqrt();
        let integral = integrate_adaptive(integrand, 0.0, t_max, &self.spec)?;
        Ok(fh - integral / beta.sqrt())
    }

    /// Displacement reached from level `h1`.
    fn displacement(&self, h1: f64, beta: f64) -> f64 {
        let d = ((self.f(h1) - self.f(self.lr)).max(0.0) / beta).sqrt();
        d.min(2.0 * self.qh)
    }

    /// Inverse of the strictly increasing `f_q` for `y >= f_q(log rho)`.
    fn f_inverse(&self, y: f64) -> Result<f64> {
        let f_lo = self.f(self.lr);
        if y < f_lo {
            return Err(Error::Domain(format!("f_q inverse target {y} below f_q(log rho) = {f_lo}")));
        }
        if y == f_lo {
            return Ok(self.lr);
        }
        let mut hi = self.lr + 1.0;
        let mut f_hi = self.f(hi);
        let mut guard = 0;
        while f_hi < y {
            hi = self.lr + (hi - self.lr) * 2.0;
            f_hi = self.f(hi);
            guard += 1;
            if guard > 200 {
                return Err(Error::NonConvergent(format!("f_q inverse bracket for target {y}")));
            }
        }
        let b = Bracket::new(self.lr, hi, f_lo - y, f_hi - y)?;
        Ok(b.bisect(|x| self.f(x) - y, 1e-12 * (1.0 + hi.abs())))
    }

    /// Dense `F_q` profile over the wiggle window
    /// `[log rho + eps, log rho + 12 floor(q/2)]`.
    fn profile(&self, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let eps = 1e-9 * (1.0 + self.lr.abs());
        let lo = self.lr + eps;
        let hi = self.lr + 12.0 * self.qh;
        let xs = crate::numerics::linspace(lo, hi, points);
        let mut fs = Vec::with_capacity(points);
        for &a in &xs {
            fs.push(self.big_f(a)?);
        }
        Ok((xs, fs))
    }

    /// Index of the first interior local maximum and of the following local
    /// minimum of the profile, when the wiggle exists.
    fn wiggle(xs: &[f64], fs: &[f64]) -> Option<(usize, usize)> {
        let n = fs.len();
        let _ = xs;
        let mut i_max = None;
        for i in 1..n - 1 {
            if fs[i] > fs[i - 1] && fs[i] > fs[i + 1] {
                i_max = Some(i);
                break;
            }
        }
        let i_max = i_max?;
        for i in i_max + 1..n - 1 {
            if fs[i] < fs[i - 1] && fs[i] < fs[i + 1] {
                return Some((i_max, i));
            }
        }
        None
    }

    /// Bisects `F_q(a) = target` inside `(lo, hi)` given opposite-signed
    /// endpoint residuals.
    fn root_between(&self, lo: f64, hi: f64, g_lo: f64, g_hi: f64, target: f64) -> Result<f64> {
        let b = Bracket::new(lo, hi, g_lo, g_hi)?;
        let width = 1e-10 * (1.0 + hi.abs());
        Ok(b.bisect(
            |a| self.big_f(a).map(|v| v - target).unwrap_or(f64::NAN),
            width,
        ))
    }

    /// All roots of `F_q(a) = 2 sqrt(beta)`, ascending.  A dense scan covers
    /// the wiggle window; geometric marching continues beyond it.  Since
    /// `f_q' <= 2 floor(q/2)` gives `F_q(a) >= sqrt(2 (a - log rho) / [q/2])`,
    /// every root lies below `log rho + 2 beta [q/2]`, so the march is
    /// guaranteed to terminate once `F_q` exceeds the target.
    fn stationary(&self, beta: f64) -> Result<Vec<f64>> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stationary levels need beta > 0, got {beta}"
            )));
        }
        let target = 2.0 * beta.sqrt();
        let (xs, fs) = self.profile(300)?;
        let mut roots = Vec::new();
        let mut prev = (xs[0], fs[0] - target);
        for i in 1..xs.len() {
            let cur = (xs[i], fs[i] - target);
            if prev.1 == 0.0 {
                roots.push(prev.0);
            } else if prev.1 * cur.1 < 0.0 {
                roots.push(self.root_between(prev.0, cur.0, prev.1, cur.1, target)?);
            }
            prev = cur;
        }
        if prev.1 == 0.0 {
            roots.push(prev.0);
        }
        // March past the window until F_q clears the target for good.
        let cap = self.lr + 2.0 * beta * self.qh + 1.0;
        let mut a = xs[xs.len() - 1];
        let mut g = prev.1;
        let mut iter = 0;
        while g < 0.0 && a < cap {
            let next = self.lr + (a - self.lr) * 1.35;
            let g_next = self.big_f(next)? - target;
            if g * g_next < 0.0 {
                roots.push(self.root_between(a, next, g, g_next, target)?);
            }
            a = next;
            g = g_next;
            iter += 1;
            if iter > 300 {
                return Err(Error::NonConvergent(format!(
                    "stationary-level march at beta = {beta}"
                )));
            }
        }
        roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * (1.0 + y.abs()));
        Ok(roots)
    }
}

/// Bracketing-time integral `F_q(a; rho)` for `a >= log rho`.
pub fn f_q(q: u32, a: f64, rho: f64) -> Result<f64> {
    Slice::new(q, rho)?.big_f(a)
}

/// Ascending roots of `F_q(a; rho) = 2 sqrt(beta)` over
/// `a in (log rho, log rho + 2 beta floor(q/2)]`.
pub fn stationary_h1(rho: f64, beta: f64, q: u32) -> Result<Vec<f64>> {
    Slice::new(q, rho)?.stationary(beta)
}

/// Reduced-functional value at stationary level `h1`.
pub fn lambda_from_h1(h1: f64, rho: f64, beta: f64, q: u32) -> Result<f64> {
    Slice::new(q, rho)?.lambda_h1(h1, beta)
}

/// Direct displacement-variable evaluation of the reduced functional for
/// `q in {2, 3}` and `d in [0, 2]`:
///
/// `Lambda_q(d) = beta d^2 + log(1 + c rho^2)
///   - beta d^3 (1 + c rho^2) \int_0^1 y^2 dy / (1 + c rho^2 - e^{beta d^2 (y^2 - 1)})`
///
/// with `c = 1` for `q = 2` and `c = 3` for `q = 3`.
pub fn lambda_d(q: u32, d: f64, rho: f64, beta: f64) -> Result<f64> {
    validate_rho(rho)?;
    validate_beta(beta)?;
    let c = match q {
        2 => 1.0,
        3 => 3.0,
        _ => {
            return Err(Error::Domain(format!(
                "displacement-variable form is only available for q in {{2, 3}}, got q={q}"
            )))
        }
    };
    if !(0.0..=2.0 + 1e-12).contains(&d) {
        return Err(Error::Domain(format!("displacement {d} outside [0, 2]")));
    }
    let crr = c * rho * rho;
    let base = (1.0 + crr).ln();
    if d == 0.0 || beta == 0.0 {
        return Ok(base);
    }
    let bd2 = beta * d * d;
    let integrand = |y: f64| y * y / (1.0 + crr - (bd2 * (y * y - 1.0)).exp());
    let integral = integrate_adaptive(integrand, 0.0, 1.0, &QuadratureSpec::default())?;
    Ok(bd2 + base - beta * d.powi(3) * (1.0 + crr) * integral)
}

/// Closed-form bounds and asymptotic forms of the exponent.
pub fn bounds_and_asymptotics(rho: f64, beta: f64, q: u32) -> Result<Bounds> {
    validate_rho(rho)?;
    validate_beta(beta)?;
    let order = MomentOrder::new(q)?;
    let law = TiltedLaw::new(order)?;
    let qh = order.qhalf() as f64;
    let lr = rho.ln();
    let common = 4.0 / 3.0 * beta * qh * qh;
    let lower = common + 2.0 * qh * lr - law.rate(2.0 * qh)?;
    let upper = common + law.cgf(lr);
    Ok(Bounds {
        lower,
        upper,
        large_beta_slope: 4.0 / 3.0 * qh * qh,
        large_rho_form: lower,
    })
}

/// The moment Lyapunov exponent `lambda(rho, beta; q)` with branch
/// diagnostics.  Candidates: the `d = 0` boundary, every stationary level,
/// and the `d = 2 floor(q/2)` endpoint (exactly for `q <= 3`, as the
/// closed-form lower bound floor for all `q`).
pub fn lyapunov(rho: f64, beta: f64, q: u32) -> Result<LyapunovResult> {
    let slice = Slice::new(q, rho)?;
    validate_beta(beta)?;
    let boundary = slice.f(slice.lr);
    if beta == 0.0 {
        return Ok(LyapunovResult {
            value: boundary,
            branch: Branch::BoundaryZero,
            d_star: 0.0,
            all_stationary_h1: Vec::new(),
            floor_dominates: false,
        });
    }
    let roots = slice.stationary(beta)?;
    let mut value = boundary;
    let mut branch = Branch::BoundaryZero;
    let mut d_star = 0.0;
    for &r in &roots {
        let v = slice.lambda_h1(r, beta)?;
        if v > value {
            value = v;
            branch = Branch::Stationary(r);
            d_star = slice.displacement(r, beta);
        }
    }
    if q <= 3 {
        let d_end = 2.0 * slice.qh;
        let v = lambda_d(q, d_end, rho, beta)?;
        if v > value {
            value = v;
            let h1 = slice.f_inverse(boundary + beta * d_end * d_end)?;
            branch = Branch::Stationary(h1);
            d_star = d_end;
        }
    }
    let floor = bounds_and_asymptotics(rho, beta, q)?.lower;
    let floor_dominates = floor > value;
    if floor_dominates {
        value = floor;
    }
    Ok(LyapunovResult { value, branch, d_star, all_stationary_h1: roots, floor_dominates })
}

/// Mean-field exponent: `max_a { a log rho + beta a^2 / 3 - I_q(a) }` over
/// the lattice range `[0, 2 floor(q/2)]`.  Lower-bounds [`lyapunov`] and
/// equals it at `beta = 0` (Legendre duality with `f_q`).
pub fn meanfield(rho: f64, beta: f64, q: u32) -> Result<MeanField> {
    validate_rho(rho)?;
    validate_beta(beta)?;
    let order = MomentOrder::new(q)?;
    let law = TiltedLaw::new(order)?;
    let lr = rho.ln();
    let top = 2.0 * order.qhalf() as f64;
    let objective = |a: f64| {
        a * lr + beta * a * a / 3.0
            - law.rate(a).expect("rate argument stays inside [0, 2 qhalf]")
    };
    let (a_star, value) = maximize_scan_refine(objective, 0.0, top, 801);
    Ok(MeanField { value, a_star })
}

/// Closed-form mean-field transition point for `q in {2, 3}`:
/// `beta_cr^MF = -(3/2) log rho` (q=2), `-(3/4) log(3 rho^2)` (q=3).
/// Errors with [`Error::NoTransition`] beyond the mean-field critical
/// `rho_c^MF` (`1/e` and `1/(sqrt(3) e)` respectively, both at `beta = 3/2`).
pub fn meanfield_phase(q: u32, rho: f64) -> Result<f64> {
    validate_rho(rho)?;
    let beta = match q {
        2 => -1.5 * rho.ln(),
        3 => -0.75 * (3.0 * rho * rho).ln(),
        _ => {
            return Err(Error::Domain(format!(
                "mean-field transition line is closed-form only for q in {{2, 3}}, got q={q}"
            )))
        }
    };
    if beta < 1.5 {
        return Err(Error::NoTransition(format!(
            "rho = {rho} is beyond the mean-field critical point for q = {q}"
        )));
    }
    Ok(beta)
}

/// Numeric mean-field transition for `q in {2, 3}`: bisection on whether the
/// maximizer `a*(beta)` has jumped across the symmetry point `a = 1`.
pub fn meanfield_phase_numeric(q: u32, rho: f64) -> Result<f64> {
    if !(q == 2 || q == 3) {
        return Err(Error::Domain(format!(
            "numeric mean-field transition implemented for q in {{2, 3}}, got q={q}"
        )));
    }
    let jumped = |beta: f64| -> Result<bool> { Ok(meanfield(rho, beta, q)?.a_star >= 1.0) };
    if jumped(1e-9)? {
        return Err(Error::NoTransition(format!(
            "mean-field maximizer already above 1 at beta = 0 for rho = {rho}"
        )));
    }
    let mut hi = 1.5;
    let mut guard = 0;
    while !jumped(hi)? {
        hi *= 1.5;
        guard += 1;
        if guard > 60 {
            return Err(Error::NonConvergent(format!(
                "mean-field transition bracket for rho = {rho}, q = {q}"
            )));
        }
    }
    let mut lo = hi / if guard == 0 { 1.5e9 } else { 1.5 };
    for _ in 0..80 {
        if hi - lo <= 1e-5 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if jumped(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Small-`rho` asymptote of the full transition line, `q in {2, 3}`:
/// `beta_cr -> -(2/3) log(c rho^2 / (1 + c rho^2))` with `c = 1, 3`.
pub fn beta_cr_small_rho_approx(q: u32, rho: f64) -> Result<f64> {
    validate_rho(rho)?;
    let c = match q {
        2 => 1.0,
        3 => 3.0,
        _ => {
            return Err(Error::Domain(format!(
                "small-rho transition asymptote available for q in {{2, 3}}, got q={q}"
            )))
        }
    };
    let crr = c * rho * rho;
    Ok(-(2.0 / 3.0) * (crr / (1.0 + crr)).ln())
}

/// Locates `beta_cr(rho)`: the branch-exchange point where the outer local
/// maximum overtakes the inner one.  Requires the wiggle of `F_q` to exist
/// at this `rho`; errors with [`Error::NoTransition`] otherwise.
fn beta_cr_at(slice: &Slice, profile_pts: usize) -> Result<f64> {
    let (xs, fs) = slice.profile(profile_pts)?;
    let Some((i_max, i_min)) = Slice::wiggle(&xs, &fs) else {
        return Err(Error::NoTransition(format!(
            "F_q is monotone at rho = {}: no branch exchange",
            slice.rho
        )));
    };
    let f_max = fs[i_max];
    let f_min = fs[i_min];
    let pad = 1e-6 * (f_max - f_min);
    let mut b_lo = (0.5 * (f_min + pad)).powi(2);
    let mut b_hi = (0.5 * (f_max - pad)).powi(2);
    // Gap between the outer and inner local maxima of the functional; the
    // outer branch gains with beta, so the gap is increasing.
    let gap = |beta: f64| -> Result<f64> {
        let target = 2.0 * beta.sqrt();
        let inner = slice.root_between(
            xs[0],
            xs[i_max],
            fs[0] - target,
            f_max - target,
            target,
        )?;
        // Outer bracket: F_q rises from the dip to infinity; march for the
        // upper end.
        let mut hi = xs[i_min];
        let mut g_hi = f_min - target;
        let mut guard = 0;
        while g_hi < 0.0 {
            hi = slice.lr + (hi - slice.lr) * 1.35;
            g_hi = slice.big_f(hi)? - target;
            guard += 1;
            if guard > 300 {
                return Err(Error::NonConvergent(format!(
                    "outer-branch bracket at rho = {}, beta = {beta}",
                    slice.rho
                )));
            }
        }
        let outer = slice.root_between(xs[i_min], hi, f_min - target, g_hi, target)?;
        Ok(slice.lambda_h1(outer, beta)? - slice.lambda_h1(inner, beta)?)
    };
    let g_lo = gap(b_lo)?;
    let g_hi = gap(b_hi)?;
    if g_lo >= 0.0 || g_hi <= 0.0 {
        return Err(Error::NonConvergent(format!(
            "branch gap does not change sign in ({b_lo}, {b_hi}) at rho = {}; \
             gap({b_lo}) = {g_lo}, gap({b_hi}) = {g_hi}",
            slice.rho
        )));
    }
    // Bisect well past the 1e-4 reporting tolerance so the two branch values
    // agree to ~1e-5 at the returned point.
    for _ in 0..200 {
        if b_hi - b_lo <= 1e-6 {
            break;
        }
        let mid = 0.5 * (b_lo + b_hi);
        if gap(mid)? > 0.0 {
            b_hi = mid;
        } else {
            b_lo = mid;
        }
    }
    Ok(0.5 * (b_lo + b_hi))
}

/// Termination point `(rho_c, beta_c)` of the transition line: the largest
/// `rho` at which `F_q` is still non-monotone, found by bisection to 1e-3 in
/// `rho`; `beta_c = ((F_max + F_min) / 4)^2` at the merge.
pub fn critical_point(q: u32) -> Result<(f64, f64)> {
    let has_wiggle = |rho: f64| -> Result<bool> {
        let slice = Slice::new(q, rho)?;
        let (xs, fs) = slice.profile(600)?;
        Ok(Slice::wiggle(&xs, &fs).is_some())
    };
    let mut lo = 0.02;
    if !has_wiggle(lo)? {
        return Err(Error::NonConvergent(format!(
            "no transition wiggle found even at rho = {lo} for q = {q}"
        )));
    }
    let mut hi = 0.6;
    let mut guard = 0;
    while has_wiggle(hi)? {
        hi *= 1.5;
        guard += 1;
        if guard > 20 {
            return Err(Error::NonConvergent(format!(
                "transition wiggle persists to rho = {hi} for q = {q}"
            )));
        }
    }
    while hi - lo > 2e-4 {
        let mid = 0.5 * (lo + hi);
        if has_wiggle(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho_c = 0.5 * (lo + hi);
    // Just inside the wiggle region the two extrema have nearly merged, so
    // their mean pins the critical target level.
    let slice = Slice::new(q, lo)?;
    let (xs, fs) = slice.profile(600)?;
    let Some((i_max, i_min)) = Slice::wiggle(&xs, &fs) else {
        return Err(Error::NonConvergent(format!(
            "wiggle vanished during critical-point refinement for q = {q}"
        )));
    };
    let beta_c = (0.25 * (fs[i_max] + fs[i_min])).powi(2);
    Ok((rho_c, beta_c))
}

/// Traces `beta_cr(rho)` over `rho_grid` (ascending), together with the
/// critical point.  Grid points at or beyond `rho_c` are skipped; if none
/// remain the result is [`Error::NoTransition`].
pub fn phase_curve(q: u32, rho_grid: &[f64]) -> Result<PhaseCurve> {
    let critical = critical_point(q)?;
    let mut grid: Vec<f64> = rho_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut samples = Vec::new();
    for &rho in &grid {
        validate_rho(rho)?;
        if rho >= critical.0 {
            continue;
        }
        let slice = Slice::new(q, rho)?;
        match beta_cr_at(&slice, 400) {
            Ok(beta) => samples.push((rho, beta)),
            // Right below the bisected rho_c the 600-point critical scan can
            // see a wiggle that the 400-point curve scan cannot; treat such
            // points as beyond the line rather than failing the whole curve.
            Err(Error::NoTransition(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(Error::NoTransition(format!(
            "every requested rho lies at or beyond rho_c = {:.4} for q = {q}",
            critical.0
        )));
    }
    Ok(PhaseCurve { samples, critical_point: critical, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn big_f_at_lower_endpoint_is_zero() {
        assert_eq!(f_q(2, 0.1f64.ln(), 0.1).unwrap(), 0.0);
        assert!(f_q(2, 0.1f64.ln() - 1e-6, 0.1).is_err());
    }

    #[test]
    fn big_f_small_interval_leading_order() {
        // For a = log rho + delta, F ~ 2 sqrt(delta / f'(log rho)).
        let rho = 0.3f64;
        let slice = Slice::new(2, rho).unwrap();
        let delta = 1e-6;
        let expect = 2.0 * (delta / slice.law.cgf_deriv(slice.lr)).sqrt();
        let got = slice.big_f(slice.lr + delta).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-3);
    }

    #[test]
    fn big_f_matches_untransformed_quadrature() {
        // Independent route: integrate the raw 1/sqrt(f(a) - f(x)) form up to
        // a small endpoint offset whose truncated tail is provably below the
        // comparison tolerance.
        let rho = 0.1f64;
        let a = 1.0;
        let slice = Slice::new(2, rho).unwrap();
        let fa = slice.law.cgf(a);
        let offset = 1e-12;
        let spec = QuadratureSpec { abs_tol: 1e-9, rel_tol: 1e-8, max_depth: 80, min_depth: 6 };
        let raw = integrate_adaptive(
            |x| 1.0 / (fa - slice.law.cgf(x)).sqrt(),
            rho.ln(),
            a - offset,
            &spec,
        )
        .unwrap();
        let tail = 2.0 * (offset / slice.law.cgf_deriv(a)).sqrt();
        let substituted = slice.big_f(a).unwrap();
        // The raw route keeps its inverse-square-root endpoint and is the
        // less accurate of the two; 1e-5 is well within its error budget.
        assert_relative_eq!(substituted, raw + tail, max_relative = 1e-5);
    }

    #[test]
    fn stationary_root_counts_match_branch_structure() {
        // Strongly wiggling slice: three roots inside the exchange window.
        let roots = stationary_h1(0.05, 4.0, 2).unwrap();
        assert_eq!(roots.len(), 3, "roots: {roots:?}");
        assert!(roots.windows(2).all(|w| w[0] < w[1]));
        // Large rho: F_q is monotone, a single root.
        let roots = stationary_h1(0.5, 0.5, 2).unwrap();
        assert_eq!(roots.len(), 1);
        // Tiny beta: the single root collapses onto log rho.
        let roots = stationary_h1(0.3, 1e-6, 2).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 0.3f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn lambda_from_h1_boundary_value() {
        let rho = 0.2f64;
        let v = lambda_from_h1(rho.ln(), rho, 1.0, 2).unwrap();
        assert_relative_eq!(v, (1.0 + rho * rho).ln(), max_relative = 1e-12);
    }

    #[test]
    fn beta_zero_returns_cgf_at_log_rho() {
        for (q, rho) in [(2u32, 0.1f64), (3, 0.4), (6, 1.3)] {
            let r = lyapunov(rho, 0.0, q).unwrap();
            let expect = crate::rate_functions::cgf(q, rho.ln()).unwrap();
            assert_relative_eq!(r.value, expect, max_relative = 1e-12);
            assert_eq!(r.branch, Branch::BoundaryZero);
            assert_eq!(r.d_star, 0.0);
            assert!(!r.floor_dominates);
        }
    }

    #[test]
    fn lyapunov_is_nondecreasing_in_beta() {
        for q in [2u32, 4] {
            for rho in [0.05f64, 0.3, 1.0] {
                let mut prev = f64::NEG_INFINITY;
                for ib in 0..=12 {
                    let beta = ib as f64 * 0.5;
                    let v = lyapunov(rho, beta, q).unwrap().value;
                    assert!(
                        v >= prev - 1e-9,
                        "lambda decreased at q={q} rho={rho} beta={beta}: {prev} -> {v}"
                    );
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn bounds_sandwich_the_exponent() {
        for q in [2u32, 3, 5, 8] {
            for rho in [0.05f64, 0.3, 1.5] {
                for beta in [0.0f64, 0.7, 3.0, 20.0] {
                    let b = bounds_and_asymptotics(rho, beta, q).unwrap();
                    let v = lyapunov(rho, beta, q).unwrap().value;
                    assert!(
                        b.lower - 1e-8 <= v && v <= b.upper + 1e-8,
                        "q={q} rho={rho} beta={beta}: {} <= {v} <= {} violated",
                        b.lower,
                        b.upper
                    );
                    assert_relative_eq!(b.large_rho_form, b.lower);
                }
            }
        }
    }

    #[test]
    fn upper_bound_is_tight_at_beta_zero() {
        let b = bounds_and_asymptotics(0.2, 0.0, 4).unwrap();
        let v = lyapunov(0.2, 0.0, 4).unwrap().value;
        assert_relative_eq!(b.upper, v, max_relative = 1e-12);
    }

    #[test]
    fn large_beta_slope_emerges() {
        // (lambda(2 beta) - lambda(beta)) / beta -> (4/3) qh^2.
        let rho = 0.05f64;
        for q in [2u32, 5] {
            let qh = (q / 2) as f64;
            let beta = 150.0;
            let v1 = lyapunov(rho, beta, q).unwrap().value;
            let v2 = lyapunov(rho, 2.0 * beta, q).unwrap().value;
            let slope = (v2 - v1) / beta;
            assert_relative_eq!(slope, 4.0 / 3.0 * qh * qh, max_relative = 0.02);
        }
    }

    #[test]
    fn displacement_form_matches_level_form() {
        // Exact reparametrization: Lambda_d at d(h1) equals Lambda(h1).
        for (rho, beta) in [(0.1f64, 2.0f64), (0.05, 4.0), (0.3, 1.0)] {
            let slice = Slice::new(2, rho).unwrap();
            for r in stationary_h1(rho, beta, 2).unwrap() {
                let d = slice.displacement(r, beta);
                if d >= 2.0 {
                    continue;
                }
                let via_d = lambda_d(2, d, rho, beta).unwrap();
                let via_h1 = lambda_from_h1(r, rho, beta, 2).unwrap();
                assert_relative_eq!(via_d, via_h1, max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn lambda_d_boundary_and_domain() {
        assert_relative_eq!(lambda_d(2, 0.0, 0.2, 3.0).unwrap(), (1.0 + 0.04f64).ln());
        assert_relative_eq!(lambda_d(3, 0.0, 0.2, 3.0).unwrap(), (1.0 + 0.12f64).ln());
        assert!(lambda_d(4, 1.0, 0.2, 3.0).is_err());
        assert!(lambda_d(2, 2.5, 0.2, 3.0).is_err());
        assert!(lambda_d(2, -0.1, 0.2, 3.0).is_err());
    }

    #[test]
    fn lambda_d_approaches_cubic_form_at_large_beta() {
        // Lambda_2(d) = -beta d^3/3 + beta d^2 + (d/2) log(rho^2/(1+rho^2))
        //   + log(1+rho^2) + O(1/beta); the residual should shrink with beta.
        let rho = 0.1f64;
        let d = 1.5f64;
        let cubic = |beta: f64| {
            -beta * d.powi(3) / 3.0
                + beta * d * d
                + 0.5 * d * (rho * rho / (1.0 + rho * rho)).ln()
                + (1.0 + rho * rho).ln()
        };
        let r1 = lambda_d(2, d, rho, 25.0).unwrap() - cubic(25.0);
        let r2 = lambda_d(2, d, rho, 50.0).unwrap() - cubic(50.0);
        assert!(r1.abs() < 0.2, "residual at beta=25: {r1}");
        assert!(r2.abs() < 0.75 * r1.abs() + 1e-9, "residuals {r1} -> {r2}");
    }

    #[test]
    fn optimal_displacement_matches_quadratic_root_form() {
        // d* = 1 + sqrt(1 + log(rho^2/(1+rho^2)) / (2 beta)) on the upper
        // branch of q = 2, up to O(1/beta) corrections.
        let rho = 0.1f64;
        let beta = 12.0;
        let r = lyapunov(rho, beta, 2).unwrap();
        let l = (rho * rho / (1.0 + rho * rho)).ln();
        let root_form = 1.0 + (1.0 + l / (2.0 * beta)).sqrt();
        assert!(
            (r.d_star - root_form).abs() < 0.05,
            "d_star {} vs quadratic-root form {root_form}",
            r.d_star
        );
    }

    #[test]
    fn meanfield_duality_at_beta_zero() {
        for (q, rho) in [(2u32, 0.1f64), (3, 0.5), (7, 1.2)] {
            let mf = meanfield(rho, 0.0, q).unwrap();
            let expect = crate::rate_functions::cgf(q, rho.ln()).unwrap();
            assert_relative_eq!(mf.value, expect, max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    #[test]
    fn meanfield_lower_bounds_lyapunov() {
        for q in [2u32, 3, 4] {
            for rho in [0.05f64, 0.2] {
                for beta in [0.5f64, 2.0] {
                    let mf = meanfield(rho, beta, q).unwrap().value;
                    let full = lyapunov(rho, beta, q).unwrap().value;
                    assert!(
                        mf <= full + 1e-7,
                        "mean-field {mf} above full exponent {full} at q={q} rho={rho} beta={beta}"
                    );
                }
            }
        }
    }

    #[test]
    fn meanfield_endpoint_matches_lower_bound() {
        // At a = 2 qh the mean-field objective equals the closed-form floor.
        let (rho, beta, q) = (0.2f64, 5.0f64, 4u32);
        let law = TiltedLaw::new(MomentOrder::new(q).unwrap()).unwrap();
        let a = 4.0;
        let obj = a * rho.ln() + beta * a * a / 3.0 - law.rate(a).unwrap();
        let b = bounds_and_asymptotics(rho, beta, q).unwrap();
        assert_relative_eq!(obj, b.lower, max_relative = 1e-12);
    }

    #[test]
    fn meanfield_phase_closed_forms() {
        assert_relative_eq!(meanfield_phase(2, 0.1).unwrap(), -1.5 * 0.1f64.ln());
        assert_relative_eq!(meanfield_phase(3, 0.1).unwrap(), -0.75 * 0.03f64.ln());
        // At the mean-field critical rho the line ends at beta = 3/2.
        let rc2 = (-1.0f64).exp();
        assert_relative_eq!(
            meanfield_phase(2, rc2 - 1e-6).unwrap(),
            1.5,
            max_relative = 1e-4
        );
        assert!(matches!(meanfield_phase(2, rc2 + 1e-6), Err(Error::NoTransition(_))));
        let rc3 = 1.0 / (3.0f64.sqrt() * 1.0f64.exp());
        assert!(matches!(meanfield_phase(3, rc3 + 1e-6), Err(Error::NoTransition(_))));
        assert!(meanfield_phase(4, 0.1).is_err());
    }

    #[test]
    fn meanfield_numeric_transition_matches_closed_form() {
        for (q, rho) in [(2u32, 0.1f64), (2, 0.25), (3, 0.1)] {
            let closed = meanfield_phase(q, rho).unwrap();
            let numeric = meanfield_phase_numeric(q, rho).unwrap();
            assert!(
                (closed - numeric).abs() < 1e-3,
                "q={q} rho={rho}: closed {closed} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn critical_point_q2_matches_frozen_location() {
        let (rho_c, beta_c) = critical_point(2).unwrap();
        assert!((rho_c - 0.348).abs() <= 0.01, "rho_c = {rho_c}");
        assert!((1.0 / beta_c - 0.787).abs() <= 0.02, "1/beta_c = {}", 1.0 / beta_c);
    }

    #[test]
    fn phase_curve_q2_regression_and_monotonicity() {
        let grid = [0.05f64, 0.1, 0.2, 0.3];
        let curve = phase_curve(2, &grid).unwrap();
        assert_eq!(curve.samples.len(), 4);
        assert!(curve
            .samples
            .windows(2)
            .all(|w| w[1].1 < w[0].1), "beta_cr not strictly decreasing: {:?}", curve.samples);
        let b01 = curve.samples[1].1;
        assert!((b01 - 2.9892).abs() < 0.02, "beta_cr(0.1) = {b01}");
        let b005 = curve.samples[0].1;
        assert!((b005 - 3.9302).abs() < 0.02, "beta_cr(0.05) = {b005}");
    }

    #[test]
    fn phase_curve_beyond_critical_rho_is_no_transition() {
        assert!(matches!(phase_curve(2, &[0.5]), Err(Error::NoTransition(_))));
    }

    #[test]
    fn small_rho_asymptote_tracks_transition_line() {
        let curve = phase_curve(2, &[0.02]).unwrap();
        let approx = beta_cr_small_rho_approx(2, 0.02).unwrap();
        let exact = curve.samples[0].1;
        assert!(
            ((exact - approx) / approx).abs() < 0.05,
            "beta_cr(0.02) = {exact} vs asymptote {approx}"
        );
    }

    #[test]
    fn displacement_jumps_across_transition() {
        let rho = 0.1f64;
        let curve = phase_curve(2, &[rho]).unwrap();
        let beta_cr = curve.samples[0].1;
        let below = lyapunov(rho, beta_cr - 0.05, 2).unwrap();
        let above = lyapunov(rho, beta_cr + 0.05, 2).unwrap();
        assert!(below.d_star < 0.2, "lower-branch d* = {}", below.d_star);
        assert!(
            (above.d_star - 1.5).abs() < 0.15,
            "upper-branch d* = {}",
            above.d_star
        );
        assert!(!below.floor_dominates && !above.floor_dominates);
    }

    #[test]
    fn lyapunov_is_continuous_across_transition() {
        let rho = 0.1f64;
        let curve = phase_curve(2, &[rho]).unwrap();
        let beta_cr = curve.samples[0].1;
        let slice = Slice::new(2, rho).unwrap();
        let roots = slice.stationary(beta_cr).unwrap();
        assert_eq!(roots.len(), 3);
        let inner = slice.lambda_h1(roots[0], beta_cr).unwrap();
        let outer = slice.lambda_h1(roots[2], beta_cr).unwrap();
        assert!(
            (inner - outer).abs() < 1e-5,
            "branch values at beta_cr differ: {inner} vs {outer}"
        );
    }

    #[test]
    fn rejects_bad_scaling_parameters() {
        assert!(lyapunov(-0.1, 1.0, 2).is_err());
        assert!(lyapunov(0.1, -1.0, 2).is_err());
        assert!(lyapunov(0.1, f64::NAN, 2).is_err());
        assert!(lyapunov(0.1, 1.0, 1).is_err());
        assert!(stationary_h1(0.1, 0.0, 2).is_err());
    }
}
