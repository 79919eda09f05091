//! Gumbel-Hougaard and Frank copula families.
//!
//! CDFs, densities, Kendall-tau maps in both directions, and the stress
//! links that turn a two-parameter regression into a dependence parameter.
//! All functions here are pure; they are safe to call from any thread.

use crate::error::{Error, Result};
use crate::inference::ThetaVector;

/// The two supported copula families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopulaFamily {
    GumbelHougaard,
    Frank,
}

impl CopulaFamily {
    /// Short stable identifier used in reports and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::GumbelHougaard => "gh",
            CopulaFamily::Frank => "frank",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gh" | "gumbel-hougaard" | "gumbel" => Ok(CopulaFamily::GumbelHougaard),
            "frank" => Ok(CopulaFamily::Frank),
            other => Err(Error::Domain(format!("unknown copula family {other:?}"))),
        }
    }
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("{name} must lie in [0,1], got {x}")));
    }
    Ok(())
}

fn check_gh_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!(
            "Gumbel-Hougaard alpha must be >= 1, got {alpha}"
        )));
    }
    Ok(())
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("{name} must be finite, got {x}")));
    }
    Ok(())
}

/// Gumbel-Hougaard CDF, `exp(-[(-ln u)^a + (-ln v)^a]^(1/a))`.
///
/// Boundary convention: 0 when either argument is 0, uniform margins at 1.
pub fn gh_cdf(u: f64, v: f64, alpha: f64) -> Result<f64> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    check_gh_alpha(alpha)?;
    Ok(gh_cdf_raw(u, v, alpha))
}

/// Unchecked core used by the fitting hot path; callers guarantee
/// u, v in [0,1] and alpha >= 1 (the link enforces the latter).
pub(crate) fn gh_cdf_raw(u: f64, v: f64, alpha: f64) -> f64 {
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    if u == 1.0 {
        return v;
    }
    if v == 1.0 {
        return u;
    }
    if !alpha.is_finite() {
        // alpha -> infinity is the comonotone limit.
        return u.min(v);
    }
    let x = -u.ln();
    let y = -v.ln();
    // Factor out the larger exponent: with m = max(x, y) and r = min/max,
    //   (x^a + y^a)^(1/a) = m (1 + r^a)^(1/a) = m exp(ln_1p(r^a) / a).
    // r^a lies in [0, 1] for any a >= 1, so the form never overflows; the
    // naive x^a does for a in the hundreds, which the stress link produces
    // while the optimizer explores. As a -> infinity this tends to m, the
    // comonotone limit.
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    let ratio_pow = (alpha * (lo / hi).ln()).exp();
    (-hi * (ratio_pow.ln_1p() / alpha).exp()).exp()
}

/// Gumbel-Hougaard density. Defined on the open square only; the density
/// is unbounded/undefined on the boundary and no caller needs it there.
pub fn gh_pdf(u: f64, v: f64, alpha: f64) -> Result<f64> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    check_gh_alpha(alpha)?;
    if u == 0.0 || u == 1.0 || v == 0.0 || v == 1.0 {
        return Err(Error::Domain(format!(
            "gh_pdf requires u, v in the open interval (0,1), got ({u}, {v})"
        )));
    }
    let x = -u.ln();
    let y = -v.ln();
    let s = x.powf(alpha) + y.powf(alpha);
    let c = (-s.powf(1.0 / alpha)).exp();
    Ok(c * (x * y).powf(alpha - 1.0) / (u * v)
        * s.powf(2.0 / alpha - 2.0)
        * (1.0 + (alpha - 1.0) * s.powf(-1.0 / alpha)))
}

/// Frank CDF, `-(1/a) ln(1 + (e^(-au)-1)(e^(-av)-1)/(e^(-a)-1))`,
/// with the independence limit `uv` at a = 0.
///
/// Stable over |alpha| <= 50 on the whole unit square: small and negative
/// alpha go through expm1/ln_1p directly, while large positive alpha uses a
/// cancellation-free decomposition of the log argument.
pub fn frank_cdf(u: f64, v: f64, alpha: f64) -> Result<f64> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    check_finite("alpha", alpha)?;
    Ok(frank_cdf_raw(u, v, alpha))
}

pub(crate) fn frank_cdf_raw(u: f64, v: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return u * v;
    }
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    if u == 1.0 {
        return v;
    }
    if v == 1.0 {
        return u;
    }
    let num = (-alpha * u).exp_m1() * (-alpha * v).exp_m1();
    let den = (-alpha).exp_m1();
    let r = num / den;
    if !r.is_finite() {
        // Only reachable for |alpha| far beyond the supported range; return
        // the appropriate Frechet limit instead of propagating inf/NaN.
        return if alpha > 0.0 {
            u.min(v)
        } else {
            (u + v - 1.0).max(0.0)
        };
    }
    if r > -0.5 {
        return -r.ln_1p() / alpha;
    }
    // Large positive alpha: 1 + r collapses to 0 in double precision. Use
    // C = -(ln(D - AB) - ln D)/alpha where, with q = min(u,v), p = max(u,v),
    //   D - AB = e^(-ap) (1 - e^(-aq)) + e^(-aq) (1 - e^(-a(1-q)))
    // is a sum of two positive terms, free of cancellation.
    let (q, p) = if u <= v { (u, v) } else { (v, u) };
    let t1 = (-alpha * p).exp() * (-(-alpha * q).exp_m1());
    let t2 = (-alpha * q).exp() * (-(-alpha * (1.0 - q)).exp_m1());
    if t1 + t2 == 0.0 {
        // Underflows only when alpha*min(u,v) > ~700, far past the supported
        // range; the value is then indistinguishable from the comonotone
        // bound.
        return q;
    }
    let ln_d = (-(-alpha).exp_m1()).ln();
    -((t1 + t2).ln() - ln_d) / alpha
}

/// Frank density, 1 at alpha = 0. Finite on the closed unit square.
pub fn frank_pdf(u: f64, v: f64, alpha: f64) -> Result<f64> {
    check_unit("u", u)?;
    check_unit("v", v)?;
    check_finite("alpha", alpha)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    let ea = (-alpha).exp_m1();
    let eu = (-alpha * u).exp_m1();
    let ev = (-alpha * v).exp_m1();
    let den = ea + eu * ev;
    Ok(-alpha * ea * (-alpha * (u + v)).exp() / (den * den))
}

/// Kendall's tau of the Gumbel-Hougaard family: `1 - 1/alpha`.
pub fn gh_tau(alpha: f64) -> Result<f64> {
    check_gh_alpha(alpha)?;
    Ok(1.0 - 1.0 / alpha)
}

/// Inverse of [`gh_tau`]: `1/(1 - tau)` for tau in [0, 1).
pub fn gh_alpha_from_tau(tau: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Domain(format!(
            "Gumbel-Hougaard tau must lie in [0,1), got {tau}"
        )));
    }
    Ok(1.0 / (1.0 - tau))
}

/// Kendall's tau of the Frank family,
/// `1 + (4/a) [ (1/a) \int_0^a t/(e^t - 1) dt - 1 ]`.
///
/// The integral is evaluated by adaptive quadrature well below the 1e-10
/// absolute-error requirement. Odd symmetry tau(-a) = -tau(a) holds exactly
/// because negative arguments are reflected.
pub fn frank_tau(alpha: f64) -> Result<f64> {
    check_finite("alpha", alpha)?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if alpha < 0.0 {
        return Ok(-frank_tau_positive(-alpha));
    }
    Ok(frank_tau_positive(alpha))
}

fn frank_tau_positive(alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    // The quadrature error is amplified by 4/alpha^2; below 0.01 a Taylor
    // expansion is more accurate than any reasonable tolerance.
    if alpha <= 0.01 {
        return alpha / 9.0 - alpha.powi(3) / 900.0;
    }
    let integral = adaptive_simpson(
        &|t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() },
        0.0,
        alpha,
        1e-12,
    );
    1.0 + 4.0 / alpha * (integral / alpha - 1.0)
}

/// First-order approximation `alpha / 9`, advisory range -3 <= alpha <= 3.
pub fn frank_tau_approx(alpha: f64) -> f64 {
    alpha / 9.0
}

/// Inverse of [`frank_tau`] by bracketed bisection seeded at `9 tau`,
/// resolved to |delta alpha| <= 1e-8. Returns 0 at tau = 0.
pub fn frank_alpha_from_tau(tau: f64) -> Result<f64> {
    if !(tau > -1.0 && tau < 1.0) {
        return Err(Error::Domain(format!(
            "Frank tau must lie in (-1,1), got {tau}"
        )));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau < 0.0 {
        return Ok(-frank_alpha_from_tau_positive(-tau)?);
    }
    frank_alpha_from_tau_positive(tau)
}

fn frank_alpha_from_tau_positive(tau: f64) -> Result<f64> {
    // frank_tau is strictly increasing with tau(alpha) < alpha/9 for
    // alpha > 0, so doubling from the seed always finds an upper bracket.
    let mut lo = 0.0_f64;
    let mut hi = (9.0 * tau).max(1e-4);
    let mut guard = 0;
    while frank_tau_positive(hi) < tau {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Domain(format!(
                "tau {tau} too close to 1 to invert"
            )));
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if frank_tau_positive(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stress link for the dependence parameter.
///
/// Gumbel-Hougaard: `1 + exp(a0 + a1 x)`, which keeps alpha >= 1 for any
/// theta. Frank: the identity link `a0 + a1 x`.
pub fn link_alpha(family: CopulaFamily, theta: ThetaVector, x: f64) -> f64 {
    match family {
        CopulaFamily::GumbelHougaard => 1.0 + (theta.a0 + theta.a1 * x).exp(),
        CopulaFamily::Frank => theta.a0 + theta.a1 * x,
    }
}

/// Inverse link: returns the linear predictor that [`link_alpha`] maps to
/// `alpha`. Gumbel-Hougaard requires alpha > 1.
pub fn link_inverse(family: CopulaFamily, alpha: f64) -> Result<f64> {
    match family {
        CopulaFamily::GumbelHougaard => {
            if !(alpha > 1.0) {
                return Err(Error::Domain(format!(
                    "Gumbel-Hougaard inverse link requires alpha > 1, got {alpha}"
                )));
            }
            Ok((alpha - 1.0).ln())
        }
        CopulaFamily::Frank => Ok(alpha),
    }
}

/// Family-dispatched CDF used by the cell-probability construction.
pub fn copula_cdf(family: CopulaFamily, u: f64, v: f64, alpha: f64) -> Result<f64> {
    match family {
        CopulaFamily::GumbelHougaard => gh_cdf(u, v, alpha),
        CopulaFamily::Frank => frank_cdf(u, v, alpha),
    }
}

pub(crate) fn copula_cdf_raw(family: CopulaFamily, u: f64, v: f64, alpha: f64) -> f64 {
    match family {
        CopulaFamily::GumbelHougaard => gh_cdf_raw(u, v, alpha),
        CopulaFamily::Frank => frank_cdf_raw(u, v, alpha),
    }
}

/// Kendall's tau for a family at the given parameter value.
pub fn copula_tau(family: CopulaFamily, alpha: f64) -> Result<f64> {
    match family {
        CopulaFamily::GumbelHougaard => gh_tau(alpha),
        CopulaFamily::Frank => frank_tau(alpha),
    }
}

/// Adaptive Simpson quadrature with the classic Richardson error estimate.
/// Absolute tolerance; the integrands used here are smooth.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
