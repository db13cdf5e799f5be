//! Shared quadrature, root-bracketing and scan-and-refine maximization
//! primitives used by all analytic solvers.
//!
//! Design notes:
//!
//! * The quadrature kernel is adaptive Simpson with a recursion-depth cap.
//!   Integrands must be finite on the closed interval; callers remove
//!   square-root endpoint singularities themselves with the substitution
//!   `x = a - t^2` and logarithmic ones via [`gaussian_expectation`]'s
//!   declared split points. The kernel never special-cases singularities.
//! * Gaussian expectations are truncated at |x| <= 12 standard deviations;
//!   the discarded tail mass is below 1e-30, far under every tolerance used
//!   in this crate.
//! * Everything here is a deterministic pure function of its arguments.

use crate::error::{Error, Result};

/// Tolerances and recursion budget for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the whole integral.
    pub abs_tol: f64,
    /// Relative tolerance on the whole integral.
    pub rel_tol: f64,
    /// Maximum bisection depth before giving up.
    pub max_depth: u32,
    /// Bisection levels forced before the error estimate may accept, so an
    /// integrand whose structure is invisible to the first coarse probes
    /// (e.g. masses concentrated far from the interval midpoint) cannot pass
    /// by accident.
    pub min_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-10, rel_tol: 1e-9, max_depth: 60, min_depth: 6 }
    }
}

impl QuadratureSpec {
    /// A spec with both tolerances tightened by `factor` and doubled depth,
    /// used for self-consistency cross-checks.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureSpec {
            abs_tol: self.abs_tol / factor,
            rel_tol: self.rel_tol / factor,
            max_depth: self.max_depth * 2,
            min_depth: self.min_depth,
        }
    }
}

/// A sign-changing bracket `[lo, hi]` with cached endpoint values.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Builds a bracket, checking `lo < hi` and that the endpoint values have
    /// opposite (nonzero) signs.
    pub fn new(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("bracket endpoints not ordered: {lo} >= {hi}")));
        }
        if !(f_lo * f_hi < 0.0) {
            return Err(Error::Domain(format!(
                "bracket values do not change sign: f({lo})={f_lo}, f({hi})={f_hi}"
            )));
        }
        Ok(Bracket { lo, hi, f_lo, f_hi })
    }

    /// Bisects to an interval of width `width` (or an exact zero) and returns
    /// the midpoint of the final interval.
    pub fn bisect<F: Fn(f64) -> f64>(&self, f: F, width: f64) -> f64 {
        let (mut lo, mut hi, mut f_lo) = (self.lo, self.hi, self.f_lo);
        for _ in 0..200 {
            if hi - lo <= width {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = f(mid);
            if f_mid == 0.0 {
                return mid;
            }
            if f_lo * f_mid < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                f_lo = f_mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Compensated (Kahan) summation accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// `log(sum_i exp(v_i))` evaluated stably; `-inf` entries are transparent and
/// an empty slice returns `-inf`.
pub fn logsumexp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // Either empty, all -inf (sum is 0, log is -inf) or a +inf entry.
        return m;
    }
    let mut rest = 0.0;
    let mut seen_max = false;
    for &v in vals {
        if !seen_max && v == m {
            seen_max = true; // the max contributes the implicit leading 1
        } else {
            rest += (v - m).exp();
        }
    }
    m + rest.ln_1p()
}

/// `grid` equally spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    assert!(grid >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (grid - 1) as f64;
    (0..grid)
        .map(|i| if i == grid - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Adaptive Simpson integral of `f` over `[a, b]` within `spec` tolerances.
///
/// `f` must be finite on the closed interval; endpoint singularities are the
/// caller's responsibility (see module docs). Fails with
/// [`Error::NonConvergent`] if `max_depth` is exhausted before the local
/// error estimates meet the tolerance.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("non-finite integration bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let f_lo = f(lo);
    let f_hi = f(hi);
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid);
    let whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
    let tol = spec.abs_tol.max(spec.rel_tol * whole.abs());
    // Subdivision below this width chases floating-point noise in the
    // integrand rather than structure; such slivers are accepted as long as
    // their residual is small on the scale of sqrt(tol) (a genuinely
    // divergent integrand keeps an O(1) residual and still errors out).
    let floor = Floors { width: 1e-13 * (hi - lo), residual: tol.sqrt() };
    let value = simpson_recurse(
        &f,
        lo,
        hi,
        f_lo,
        f_mid,
        f_hi,
        whole,
        tol,
        spec.max_depth,
        spec.min_depth.min(spec.max_depth),
        &floor,
    )?;
    Ok(sign * value)
}

struct Floors {
    width: f64,
    residual: f64,
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    forced: u32,
    floor: &Floors,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    // No representable interior points left: accept the current estimate.
    if lm <= a || rm <= m || lm >= m || rm >= b {
        return Ok(whole);
    }
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if forced == 0 && delta.abs() <= 15.0 * tol
        || (b - a <= floor.width && delta.abs() <= floor.residual)
    {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::NonConvergent(format!(
            "adaptive Simpson depth exhausted on [{a}, {b}] (residual {delta:e})"
        )));
    }
    let half = 0.5 * tol;
    let next_forced = forced.saturating_sub(1);
    let l = simpson_recurse(f, a, m, fa, flm, fm, left, half, depth - 1, next_forced, floor)?;
    let r = simpson_recurse(f, m, b, fm, frm, fb, right, half, depth - 1, next_forced, floor)?;
    Ok(l + r)
}

/// Hard truncation for Gaussian expectations; the tail mass beyond 12
/// standard deviations is ~1.8e-33.
const GAUSS_XMAX: f64 = 12.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `E[g(eps)]` for a standard normal `eps`, with an optional declared
/// singular point of `g` (at most logarithmic, as in `log|1 + rho eps|`).
///
/// The integration domain is `[-12, 12]`; it is split at the singularity and
/// each singular endpoint is removed with the substitution `x = s +- t^2`,
/// under which `2t * g(s + t^2)` extends continuously by 0 at `t = 0`.
pub fn gaussian_expectation<G: Fn(f64) -> f64>(
    g: G,
    spec: &QuadratureSpec,
    singularity: Option<f64>,
) -> Result<f64> {
    match singularity {
        Some(s) => gaussian_expectation_split(g, spec, &[s]),
        None => gaussian_expectation_split(g, spec, &[]),
    }
}

/// [`gaussian_expectation`] generalized to several declared singular points
/// (needed for integrands like `log|1 + eps x / (1 + rho eps)|` which are
/// singular at two abscissas).
pub fn gaussian_expectation_split<G: Fn(f64) -> f64>(
    g: G,
    spec: &QuadratureSpec,
    singularities: &[f64],
) -> Result<f64> {
    let mut sing: Vec<f64> = singularities
        .iter()
        .copied()
        .filter(|s| s.is_finite() && s.abs() < GAUSS_XMAX)
        .collect();
    sing.sort_by(f64::total_cmp);
    sing.dedup();

    // Build segments [-12, s_1], [s_1, s_2], ..., [s_k, 12]; any segment with
    // two singular endpoints is halved so each piece has at most one.
    #[derive(Clone, Copy)]
    enum SingAt {
        No,
        Lo,
        Hi,
    }
    let mut segments: Vec<(f64, f64, SingAt)> = Vec::new();
    let mut prev = -GAUSS_XMAX;
    let mut prev_singular = false;
    for &s in &sing {
        if s <= prev {
            continue;
        }
        if prev_singular {
            let mid = 0.5 * (prev + s);
            segments.push((prev, mid, SingAt::Lo));
            segments.push((mid, s, SingAt::Hi));
        } else {
            segments.push((prev, s, SingAt::Hi));
        }
        prev = s;
        prev_singular = true;
    }
    segments.push((
        prev,
        GAUSS_XMAX,
        if prev_singular { SingAt::Lo } else { SingAt::No },
    ));

    // Substituted integrand 2 t g(x) pdf(x) near a declared singular point.
    // Within a few ulps of the singularity, g itself can round to -inf (for a
    // log singularity `1 + rho x` can hit exact 0); the true limit of the
    // substituted integrand is 0, so non-finite samples are clamped there.
    fn singular_leg<G: Fn(f64) -> f64>(g: &G, x: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let v = g(x);
        if !v.is_finite() {
            return 0.0;
        }
        2.0 * t * v * normal_pdf(x)
    }

    let mut total = KahanSum::new();
    for (lo, hi, s) in segments {
        let piece = match s {
            SingAt::No => integrate_adaptive(|x| g(x) * normal_pdf(x), lo, hi, spec)?,
            SingAt::Lo => {
                let t_max = (hi - lo).sqrt();
                integrate_adaptive(
                    |t| singular_leg(&g, lo + t * t, t),
                    0.0,
                    t_max,
                    spec,
                )?
            }
            SingAt::Hi => {
                let t_max = (hi - lo).sqrt();
                integrate_adaptive(
                    |t| singular_leg(&g, hi - t * t, t),
                    0.0,
                    t_max,
                    spec,
                )?
            }
        };
        total.add(piece);
    }
    Ok(total.value())
}

/// Scans `grid` equally spaced points of `[lo, hi]`, refines every
/// sign-change bracket by bisection to interval width 1e-12 and returns the
/// roots in ascending order.
///
/// A tangential root that does not produce a sign change between neighboring
/// grid points is missed; callers choose `grid` accordingly.
pub fn find_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    let grid = grid.max(2);
    let xs = linspace(lo, hi, grid);
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots: Vec<f64> = Vec::new();
    for i in 0..grid {
        if vals[i] == 0.0 {
            roots.push(xs[i]);
        }
        if i + 1 < grid && vals[i] * vals[i + 1] < 0.0 {
            let bracket = Bracket {
                lo: xs[i],
                hi: xs[i + 1],
                f_lo: vals[i],
                f_hi: vals[i + 1],
            };
            roots.push(bracket.bisect(&f, 1e-12));
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 2e-12);
    roots
}

/// Error function, rational Chebyshev approximation with fractional error
/// below 1.2e-7 everywhere. Accurate enough for bin boundaries and
/// cross-checks at the 1e-6 level; precision-critical Gaussian integrals go
/// through [`gaussian_expectation`] instead.
pub fn erf(x: f64) -> f64 {
    1.0 - erfc(x)
}

/// Complementary error function companion to [`erf`].
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Standard normal CDF via [`erfc`]; same accuracy caveat.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Golden-section ratio (sqrt(5) - 1) / 2.
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Evaluates `f` on `grid` points of `[lo, hi]` (endpoints included), refines
/// the best interior bracket by golden-section search to 1e-10 in the
/// argument, compares against the endpoint values and returns
/// `(argmax, max)`. Ties are broken toward the smaller argument.
pub fn maximize_scan_refine<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    grid: usize,
) -> (f64, f64) {
    let grid = grid.max(3);
    let xs = linspace(lo, hi, grid);
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = 0usize;
    for i in 1..grid {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let (mut arg_best, mut val_best) = (xs[best], vals[best]);
    if best > 0 && best + 1 < grid {
        let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut fc = f(c);
        let mut fd = f(d);
        while b - a > 1e-10 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = f(d);
            }
        }
        let xm = 0.5 * (a + b);
        let fm = f(xm);
        if fm > val_best || (fm == val_best && xm < arg_best) {
            arg_best = xm;
            val_best = fm;
        }
    }
    // Endpoints compete on equal terms; smaller argument wins ties.
    for (&x, &v) in [(&xs[0], &vals[0]), (&xs[grid - 1], &vals[grid - 1])] {
        if v > val_best || (v == val_best && x < arg_best) {
            arg_best = x;
            val_best = v;
        }
    }
    (arg_best, val_best)
}
