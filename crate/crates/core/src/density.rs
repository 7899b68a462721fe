//! Beta-preflattened comparison density estimation.
//!
//! The density of the p-values is written as
//! `d(u) = f_B(u; α̂, β̂) · s(F_B(u; α̂, β̂))` where `s(v) = 1 + Σ θ̂_j S_j(v)`
//! is a short Legendre series for the density of the smooth p-values.
//! Coefficients are sample means of `S_j(v_i)`, hard-thresholded at
//! `2 ln(n) / n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{self, MAX_DEGREE};
use crate::prewhiten::{clamp_pvalue, BetaFit, MIN_FIT_SAMPLES};
use crate::quadrature::integrate_unit;
use crate::special::{beta_pdf_uw, inc_beta};

pub const DEFAULT_DENSITY_TERMS: usize = 6;
pub const DEFAULT_FLOOR: f64 = 1e-3;

const CLIP_GRID: usize = 10_000;

/// Selection threshold `2 ln(n) / n` for squared score coefficients.
pub fn selection_threshold(n: usize) -> f64 {
    let n = n as f64;
    2.0 * n.ln() / n
}

/// Raw and thresholded Legendre score coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub m: usize,
    pub theta_tilde: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub n: usize,
    pub threshold: f64,
}

impl CoefficientSet {
    /// Applies the hard-threshold rule to raw coefficients estimated from
    /// `n` observations.
    pub fn from_raw(theta_tilde: Vec<f64>, n: usize) -> Result<Self> {
        let m = theta_tilde.len();
        if !(1..=MAX_DEGREE).contains(&m) {
            return Err(Error::Config(format!(
                "number of series terms must lie in [1, {MAX_DEGREE}], got {m}"
            )));
        }
        let threshold = selection_threshold(n);
        let theta_hat = theta_tilde
            .iter()
            .map(|&t| if t * t > threshold { t } else { 0.0 })
            .collect();
        Ok(Self {
            m,
            theta_tilde,
            theta_hat,
            n,
            threshold,
        })
    }

    /// All-zero coefficients: the smooth density is identically one.
    pub fn zeros(m: usize, n: usize) -> Result<Self> {
        Self::from_raw(vec![0.0; m], n)
    }

    /// Surviving coefficients as (1-based index, value).
    pub fn selected(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.theta_hat
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != 0.0)
            .map(|(i, &t)| (i + 1, t))
    }

    pub fn n_selected(&self) -> usize {
        self.selected().count()
    }
}

/// Score coefficients `θ̃_j = n⁻¹ Σ_i S_j(v_i)` for j = 1..=m, thresholded.
pub fn score_coefficients(smooth_pvalues: &[f64], m: usize) -> Result<CoefficientSet> {
    if !(1..=MAX_DEGREE).contains(&m) {
        return Err(Error::Config(format!(
            "number of series terms must lie in [1, {MAX_DEGREE}], got {m}"
        )));
    }
    let n = smooth_pvalues.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: n,
        });
    }
    let mut sums = vec![0.0; m];
    let mut row = vec![0.0; m];
    for (i, &v) in smooth_pvalues.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(
                "score_coefficients",
                format!("smooth p-value at position {i} is {v}, outside [0, 1]"),
            ));
        }
        legendre::fill_basis(v, &mut row);
        for (s, r) in sums.iter_mut().zip(&row) {
            *s += r;
        }
    }
    let theta_tilde = sums.into_iter().map(|s| s / n as f64).collect();
    CoefficientSet::from_raw(theta_tilde, n)
}

/// `1 + Σ θ̂_j S_j(v)`. May be negative.
pub fn eval_smooth_density(coeffs: &CoefficientSet, v: f64) -> f64 {
    legendre::series_value(&coeffs.theta_hat, v)
}

/// Fitted comparison density `d̂(u; F₀, F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDensityModel {
    pub fit: BetaFit,
    pub coeffs: CoefficientSet,
    pub floor: f64,
}

impl ComparisonDensityModel {
    pub fn new(fit: BetaFit, coeffs: CoefficientSet) -> Self {
        Self::with_floor(fit, coeffs, DEFAULT_FLOOR)
    }

    pub fn with_floor(fit: BetaFit, coeffs: CoefficientSet, floor: f64) -> Self {
        Self { fit, coeffs, floor }
    }

    /// The model d̂ ≡ 1 (uniform fit, no coefficients).
    pub fn uniform(m: usize, n: usize) -> Result<Self> {
        Ok(Self::new(BetaFit::uniform(n), CoefficientSet::zeros(m, n)?))
    }

    pub fn smooth_pvalue(&self, u: f64) -> f64 {
        self.fit.smooth_pvalue(u)
    }

    /// Series value `1 + Σ θ̂_j S_j(F_B(u))` at the clamped u.
    pub fn smooth_factor(&self, u: f64) -> f64 {
        eval_smooth_density(&self.coeffs, self.smooth_pvalue(u))
    }

    /// Assembled density before flooring, at the clamped u.
    pub fn raw_density(&self, u: f64) -> f64 {
        let u = clamp_pvalue(u);
        self.raw_density_uw(u, 1.0 - u)
    }

    // u and w = 1 - u, no clamping; used by the normalization integrals.
    fn raw_density_uw(&self, u: f64, w: f64) -> f64 {
        let (a, b) = (self.fit.alpha, self.fit.beta);
        let pdf = beta_pdf_uw(u, w, a, b);
        let v = inc_beta(a, b, u, w);
        pdf * eval_smooth_density(&self.coeffs, v)
    }

    /// `max(floor, d̂_raw(u))`. Arguments at or beyond the p-value clamp
    /// are evaluated at the clamp.
    pub fn eval(&self, u: f64) -> f64 {
        self.raw_density(u).max(self.floor)
    }

    /// ∫₀¹ of the unfloored, unclamped density. Equal to one up to
    /// quadrature error, since every S_j integrates to zero.
    pub fn total_mass(&self) -> f64 {
        integrate_unit(|u, w| self.raw_density_uw(u, w), 1e-9)
    }

    /// Lebesgue measure of `{u : d̂_raw(u) < floor}`, estimated on a
    /// 10⁴-point midpoint grid.
    pub fn clipped_measure(&self) -> f64 {
        if self.coeffs.n_selected() == 0 {
            return 0.0;
        }
        let h = 1.0 / CLIP_GRID as f64;
        let clipped = (0..CLIP_GRID)
            .filter(|&i| {
                let u = (i as f64 + 0.5) * h;
                self.raw_density_uw(u, 1.0 - u) < self.floor
            })
            .count();
        clipped as f64 * h
    }
}

/// `max(floor, f_B(u) · s(F_B(u)))`.
pub fn eval_comparison_density(model: &ComparisonDensityModel, u: f64) -> f64 {
    model.eval(u)
}

/// Density reconstruction `f̂(x) = f₀(x) · d̂(F₀(x))` around a parametric
/// start `f₀`.
pub fn reconstruct_density<P, C>(null_pdf: P, null_cdf: C, model: &ComparisonDensityModel, x: f64) -> f64
where
    P: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    null_pdf(x) * model.eval(null_cdf(x))
}
