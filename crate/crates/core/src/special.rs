//! Scalar special functions: the normal, Student-t and beta distributions,
//! plus the gamma-family functions they are built from.
//!
//! Everything here is pure and exact up to floating point. Nothing clamps
//! its input; callers that need to keep probabilities away from 0 and 1 do
//! so at their own named clamp points.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

fn check_finite(function: &'static str, name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(function, format!("{name} must be finite, got {x}")))
    }
}

fn check_positive(function: &'static str, name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(function, format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_unit(function: &'static str, u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::domain(function, format!("argument must lie in [0, 1], got {u}")))
    }
}

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Upper tail Q(z) = 1 - Φ(z) for z >= 0, accurate in relative terms.
///
/// Below z = 2√2 the complement of a positive-term erf series is used (the
/// tail is at least 2e-3 there, so the subtraction costs under two digits).
/// Above it, Laplace's continued fraction for the Mills ratio.
fn upper_tail_nonneg(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 2.0 * SQRT_2 {
        0.5 * (1.0 - erf_series(z / SQRT_2))
    } else {
        normal_pdf(z) / mills_denominator(z)
    }
}

// erf(x) = 2/√π e^{-x²} Σ_{n≥0} 2^n x^{2n+1} / (2n+1)!!
fn erf_series(x: f64) -> f64 {
    let x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..500 {
        term *= x2 / (2.0 * n as f64 + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x * x).exp() * sum
}

// z + 1/(z + 2/(z + 3/(z + ...))), modified Lentz.
fn mills_denominator(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for n in 1..5000 {
        let a = n as f64;
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Standard normal distribution function Φ(z).
///
/// Relative accuracy is about 1e-14 in both tails down to the subnormal
/// range. Below z ≈ -37.5 the result is subnormal and loses precision
/// gradually; it stays strictly positive until z ≈ -38.4 and is 0 beyond.
pub fn normal_cdf(z: f64) -> Result<f64> {
    check_finite("normal_cdf", "z", z)?;
    Ok(normal_cdf_unchecked(z))
}

/// Standard normal upper tail 1 - Φ(z), without cancellation for large z.
pub fn normal_sf(z: f64) -> Result<f64> {
    check_finite("normal_sf", "z", z)?;
    Ok(normal_cdf_unchecked(-z))
}

pub(crate) fn normal_cdf_unchecked(z: f64) -> f64 {
    if z < 0.0 {
        upper_tail_nonneg(-z)
    } else {
        1.0 - upper_tail_nonneg(z)
    }
}

// Acklam's rational approximation, relative error below 1.2e-9.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam_lower(p: f64) -> f64 {
    const P_LOW: f64 = 0.024_25;
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Standard normal quantile Φ⁻¹(p) for p in the open interval (0, 1).
///
/// Works in the lower half (1 - p is exact for p >= 1/2), starting from a
/// rational approximation and polishing with one Newton step on Φ.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "normal_quantile",
            format!("p must lie strictly inside (0, 1), got {p}"),
        ));
    }
    Ok(normal_quantile_unchecked(p))
}

pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile_unchecked(1.0 - p);
    }
    let x = acklam_lower(p);
    let density = normal_pdf(x);
    if density > 0.0 {
        x - (normal_cdf_unchecked(x) - p) / density
    } else {
        x
    }
}

// ---------------------------------------------------------------------------
// Gamma family
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7, with reflection below 1/2).
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", "x", x)?;
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - log_gamma_unchecked(1.0 - x);
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let z = x - 1.0;
    let mut series = LANCZOS[0];
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + series.ln()
}

/// ψ(x) = d/dx ln Γ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", "x", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - tail
}

/// ψ'(x), used for the Newton step of the beta likelihood.
pub fn trigamma(x: f64) -> Result<f64> {
    check_positive("trigamma", "x", x)?;
    Ok(trigamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = 1.0 / 6.0
        - inv2
            * (1.0 / 30.0
                - inv2
                    * (1.0 / 42.0
                        - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2_730.0 - inv2 * 7.0 / 6.0)))));
    shift + inv + 0.5 * inv2 + inv * inv2 * series
}

/// ln B(a, b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_positive("log_beta", "a", a)?;
    check_positive("log_beta", "b", b)?;
    Ok(log_beta_unchecked(a, b))
}

pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    log_gamma_unchecked(a) + log_gamma_unchecked(b) - log_gamma_unchecked(a + b)
}

// ---------------------------------------------------------------------------
// Incomplete beta
// ---------------------------------------------------------------------------

// Continued fraction for I_x(a, b) (modified Lentz), valid for
// x < (a + 1) / (a + b + 2).
fn inc_beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b), given both x and y = 1 - x so
/// that callers holding an accurate complement do not lose it.
pub(crate) fn inc_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    if a == 1.0 && b == 1.0 {
        return x;
    }
    if a == 1.0 {
        return -(b * y.ln()).exp_m1();
    }
    if b == 1.0 {
        return (a * x.ln()).exp();
    }
    let ln_front = a * x.ln() + b * y.ln() - log_beta_unchecked(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * inc_beta_cf(a, b, x) / a
    } else {
        1.0 - front * inc_beta_cf(b, a, y) / b
    }
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    check_unit("regularized_inc_beta", x)?;
    check_positive("regularized_inc_beta", "a", a)?;
    check_positive("regularized_inc_beta", "b", b)?;
    Ok(inc_beta(a, b, x, 1.0 - x))
}

// ---------------------------------------------------------------------------
// Student-t
// ---------------------------------------------------------------------------

// Lower tail P(T <= -|t|) = I_{df/(df+t²)}(df/2, 1/2) / 2.
fn student_t_lower_tail(t: f64, df: f64) -> f64 {
    let t2 = t * t;
    if !t2.is_finite() {
        return 0.0;
    }
    let denom = df + t2;
    0.5 * inc_beta(0.5 * df, 0.5, df / denom, t2 / denom)
}

/// Student-t distribution function with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    check_finite("student_t_cdf", "t", t)?;
    check_positive("student_t_cdf", "df", df)?;
    Ok(student_t_cdf_unchecked(t, df))
}

pub(crate) fn student_t_cdf_unchecked(t: f64, df: f64) -> f64 {
    let tail = student_t_lower_tail(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn student_t_pdf(t: f64, df: f64) -> Result<f64> {
    check_finite("student_t_pdf", "t", t)?;
    check_positive("student_t_pdf", "df", df)?;
    Ok(student_t_pdf_unchecked(t, df))
}

pub(crate) fn student_t_pdf_unchecked(t: f64, df: f64) -> f64 {
    let ln_norm = log_gamma_unchecked(0.5 * (df + 1.0))
        - log_gamma_unchecked(0.5 * df)
        - 0.5 * (df * PI).ln();
    (ln_norm - 0.5 * (df + 1.0) * (t * t / df).ln_1p()).exp()
}

// ---------------------------------------------------------------------------
// Beta distribution
// ---------------------------------------------------------------------------

/// Beta density. At u = 0 (resp. 1) with the matching shape below one the
/// density diverges and `f64::INFINITY` is returned.
pub fn beta_pdf(u: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_unit("beta_pdf", u)?;
    check_positive("beta_pdf", "alpha", alpha)?;
    check_positive("beta_pdf", "beta", beta)?;
    Ok(beta_pdf_uw(u, 1.0 - u, alpha, beta))
}

/// Beta density from u and its complement w = 1 - u.
pub(crate) fn beta_pdf_uw(u: f64, w: f64, alpha: f64, beta: f64) -> f64 {
    let edge = |shape: f64, other: f64| -> f64 {
        if shape < 1.0 {
            f64::INFINITY
        } else if shape == 1.0 {
            (-log_beta_unchecked(1.0, other)).exp()
        } else {
            0.0
        }
    };
    if u <= 0.0 {
        return edge(alpha, beta);
    }
    if w <= 0.0 {
        return edge(beta, alpha);
    }
    ((alpha - 1.0) * u.ln() + (beta - 1.0) * w.ln() - log_beta_unchecked(alpha, beta)).exp()
}

/// Beta distribution function F_B(u; α, β).
pub fn beta_cdf(u: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_unit("beta_cdf", u)?;
    check_positive("beta_cdf", "alpha", alpha)?;
    check_positive("beta_cdf", "beta", beta)?;
    Ok(inc_beta(alpha, beta, u, 1.0 - u))
}
