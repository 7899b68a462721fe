//! End-to-end local fdr estimation.
//!
//! Statistics are mapped to p-values under a user-supplied null, the
//! p-values are pre-flattened with a beta fit, the comparison density is
//! estimated by a thresholded Legendre series on the smooth p-values, π₀ is
//! chosen by minimum deviance, and the local fdr is `π̂₀ / d̂(u)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{score_coefficients, ComparisonDensityModel, DEFAULT_DENSITY_TERMS, DEFAULT_FLOOR};
use crate::error::{Error, Result};
use crate::mdc::{estimate_pi0, DeviancePath, DEFAULT_LAMBDA_STEP, DEFAULT_MDC_TERMS};
use crate::prewhiten::{fit_beta_mle, smooth_pvalues};
use crate::quadrature::integrate_unit;
use crate::special::{
    normal_cdf_unchecked, normal_pdf, normal_quantile_unchecked, student_t_cdf_unchecked,
    student_t_pdf_unchecked,
};

/// Smallest sample `fit_cdfdr` accepts.
pub const MIN_CASES: usize = 100;
/// Below this many cases the fit succeeds with a warning.
pub const RECOMMENDED_CASES: usize = 1000;
pub const DEFAULT_FDR_THRESHOLD: f64 = 0.2;

/// Null distribution F₀ of the test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullSpec {
    StandardNormal,
    Normal { mu: f64, sigma: f64 },
    StudentT { df: f64 },
    /// Inputs are already p-values; no transformation is applied.
    PrecomputedPvalues,
}

impl NullSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NullSpec::Normal { mu, sigma } if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) => Err(
                Error::Config(format!("normal null needs finite mu and sigma > 0, got ({mu}, {sigma})")),
            ),
            NullSpec::StudentT { df } if !(df.is_finite() && df > 0.0) => {
                Err(Error::Config(format!("t null needs df > 0, got {df}")))
            }
            _ => Ok(()),
        }
    }

    /// F₀(t). For precomputed p-values this is the identity.
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            NullSpec::StandardNormal => normal_cdf_unchecked(t),
            NullSpec::Normal { mu, sigma } => normal_cdf_unchecked((t - mu) / sigma),
            NullSpec::StudentT { df } => student_t_cdf_unchecked(t, df),
            NullSpec::PrecomputedPvalues => t,
        }
    }

    /// 1 - F₀(t), computed without cancellation in the upper tail.
    pub fn sf(&self, t: f64) -> f64 {
        match *self {
            NullSpec::StandardNormal => normal_cdf_unchecked(-t),
            NullSpec::Normal { mu, sigma } => normal_cdf_unchecked((mu - t) / sigma),
            NullSpec::StudentT { df } => student_t_cdf_unchecked(-t, df),
            NullSpec::PrecomputedPvalues => 1.0 - t,
        }
    }

    /// f₀(t). The uniform density on [0, 1] for precomputed p-values.
    pub fn pdf(&self, t: f64) -> f64 {
        match *self {
            NullSpec::StandardNormal => normal_pdf(t),
            NullSpec::Normal { mu, sigma } => normal_pdf((t - mu) / sigma) / sigma,
            NullSpec::StudentT { df } => student_t_pdf_unchecked(t, df),
            NullSpec::PrecomputedPvalues => {
                if (0.0..=1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            NullSpec::Normal { mu, .. } => mu,
            NullSpec::PrecomputedPvalues => 0.5,
            _ => 0.0,
        }
    }

    pub fn is_pvalue(&self) -> bool {
        matches!(self, NullSpec::PrecomputedPvalues)
    }
}

impl fmt::Display for NullSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullSpec::StandardNormal => write!(f, "std-normal"),
            NullSpec::Normal { mu, sigma } => write!(f, "normal:{mu},{sigma}"),
            NullSpec::StudentT { df } => write!(f, "t:{df}"),
            NullSpec::PrecomputedPvalues => write!(f, "pvalues"),
        }
    }
}

/// Parses `std-normal`, `normal:MU,SIGMA`, `t:DF` and `pvalues`.
impl FromStr for NullSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognized null specification '{s}'"));
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let spec = match s.trim() {
            "std-normal" | "standard-normal" => NullSpec::StandardNormal,
            "pvalues" => NullSpec::PrecomputedPvalues,
            other => match other.split_once(':') {
                Some(("normal", rest)) => {
                    let (mu, sigma) = rest.split_once(',').ok_or_else(bad)?;
                    NullSpec::Normal {
                        mu: num(mu)?,
                        sigma: num(sigma)?,
                    }
                }
                Some(("t", df)) => NullSpec::StudentT { df: num(df)? },
                _ => return Err(bad()),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// How statistics become p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformMode {
    /// u = F₀(t): signal shows up in both tails of u.
    #[default]
    Pit,
    /// u = 2·min(F₀(t), 1 - F₀(t)): signal shows up near zero.
    TwoSided,
}

impl FromStr for TransformMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pit" => Ok(TransformMode::Pit),
            "two-sided" => Ok(TransformMode::TwoSided),
            _ => Err(Error::Config(format!("unrecognized transform '{s}', expected pit or two-sided"))),
        }
    }
}

// Keeps the t→z map finite at the extreme tails.
const T_TO_Z_CLAMP: f64 = 1e-300;

/// `z = Φ⁻¹(T_df(t))`, evaluated through the lower tail on both sides so
/// large |t| do not collapse to ±∞ or to a common value.
pub fn t_to_z(t_stats: &[f64], df: f64) -> Result<Vec<f64>> {
    if !(df.is_finite() && df > 0.0) {
        return Err(Error::domain("t_to_z", format!("df must be positive, got {df}")));
    }
    t_stats
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if !t.is_finite() {
                return Err(Error::domain("t_to_z", format!("statistic at position {i} is {t}")));
            }
            let lower = student_t_cdf_unchecked(-t.abs(), df).max(T_TO_Z_CLAMP);
            let z = -normal_quantile_unchecked(lower);
            Ok(if t < 0.0 { -z } else { z })
        })
        .collect()
}

fn pvalue_one(null: &NullSpec, mode: TransformMode, t: f64) -> f64 {
    match (null, mode) {
        (NullSpec::PrecomputedPvalues, _) | (_, TransformMode::Pit) => null.cdf(t),
        (_, TransformMode::TwoSided) => (2.0 * null.cdf(t).min(null.sf(t))).min(1.0),
    }
}

/// Maps statistics to p-values. Precomputed p-values are checked and
/// passed through unchanged.
pub fn to_pvalues(stats: &[f64], null: &NullSpec, mode: TransformMode) -> Result<Vec<f64>> {
    null.validate()?;
    for (i, &t) in stats.iter().enumerate() {
        if null.is_pvalue() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::domain("to_pvalues", format!("p-value at position {i} is {t}, outside [0, 1]")));
            }
        } else if !t.is_finite() {
            return Err(Error::domain("to_pvalues", format!("statistic at position {i} is {t}")));
        }
    }
    Ok(stats.iter().map(|&t| pvalue_one(null, mode, t)).collect())
}

/// Tuning of [`fit_cdfdr`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub m_density: usize,
    pub m_mdc: usize,
    pub grid_step: f64,
    pub mode: TransformMode,
    pub floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m_density: DEFAULT_DENSITY_TERMS,
            m_mdc: DEFAULT_MDC_TERMS,
            grid_step: DEFAULT_LAMBDA_STEP,
            mode: TransformMode::Pit,
            floor: DEFAULT_FLOOR,
        }
    }
}

/// A fitted local fdr model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfrModel {
    pub null_spec: NullSpec,
    pub transform_mode: TransformMode,
    pub config: FitConfig,
    pub cd_model: ComparisonDensityModel,
    pub pi0: f64,
    pub deviance_path: DeviancePath,
    pub n: usize,
    pub warnings: Vec<String>,
}

/// A fitted model together with the per-case intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfrFit {
    pub model: CdfrModel,
    pub pvalues: Vec<f64>,
    pub smooth_pvalues: Vec<f64>,
}

/// Runs the full pipeline on statistics (or p-values, when the null is
/// [`NullSpec::PrecomputedPvalues`]).
///
/// Failures are wrapped in [`Error::Step`] naming the stage: `transform`,
/// `beta-fit`, `smooth-pvalues`, `series` or `pi0`.
pub fn fit_cdfdr(values: &[f64], null: &NullSpec, config: &FitConfig) -> Result<CdfrFit> {
    let n = values.len();
    if n < MIN_CASES {
        return Err(Error::InsufficientData { needed: MIN_CASES, got: n }.at_step("transform"));
    }
    let mut warnings = Vec::new();
    if n < RECOMMENDED_CASES {
        warnings.push(format!(
            "only {n} cases; the estimator is designed for large-scale problems (>= {RECOMMENDED_CASES})"
        ));
    }
    if !(config.floor.is_finite() && config.floor > 0.0) {
        return Err(Error::Config(format!("density floor must be positive, got {}", config.floor)).at_step("transform"));
    }

    let pvalues = to_pvalues(values, null, config.mode).map_err(|e| e.at_step("transform"))?;
    let fit = fit_beta_mle(&pvalues).map_err(|e| e.at_step("beta-fit"))?;
    if !fit.converged {
        warnings.push(format!("beta fit stopped after {} iterations without converging", fit.iterations));
    }
    let smooth = smooth_pvalues(&pvalues, &fit).map_err(|e| e.at_step("smooth-pvalues"))?;
    let coeffs = score_coefficients(&smooth, config.m_density).map_err(|e| e.at_step("series"))?;
    let cd_model = ComparisonDensityModel::with_floor(fit, coeffs, config.floor);
    let path = estimate_pi0(&pvalues, &cd_model, config.m_mdc, config.grid_step).map_err(|e| e.at_step("pi0"))?;
    if path.flat {
        warnings.push("deviance path is flat; lambda* set to the first usable grid level".to_string());
    }

    Ok(CdfrFit {
        model: CdfrModel {
            null_spec: *null,
            transform_mode: config.mode,
            config: *config,
            cd_model,
            pi0: path.pi0_hat,
            deviance_path: path,
            n,
            warnings,
        },
        pvalues,
        smooth_pvalues: smooth,
    })
}

impl CdfrModel {
    /// u(t) under the model's null and transform.
    pub fn pvalue(&self, t: f64) -> f64 {
        pvalue_one(&self.null_spec, self.transform_mode, t)
    }

    pub fn density_at_pvalue(&self, u: f64) -> f64 {
        self.cd_model.eval(u)
    }

    /// π̂₀ / d̂(u), uncapped.
    pub fn local_fdr_raw_at_pvalue(&self, u: f64) -> f64 {
        self.pi0 / self.cd_model.eval(u)
    }

    pub fn local_fdr_at_pvalue(&self, u: f64) -> f64 {
        self.local_fdr_raw_at_pvalue(u).min(1.0)
    }

    /// π̂₀ / d̂(u(t)), uncapped.
    pub fn local_fdr_raw(&self, t: f64) -> f64 {
        self.local_fdr_raw_at_pvalue(self.pvalue(t))
    }

    /// Local fdr capped at one.
    pub fn local_fdr(&self, t: f64) -> f64 {
        self.local_fdr_raw(t).min(1.0)
    }

    fn nonnull_weight(&self, u: f64) -> f64 {
        (self.cd_model.eval(u) - self.pi0).max(0.0) / (1.0 - self.pi0)
    }

    fn check_signal(&self) -> Result<()> {
        if self.pi0 >= 1.0 {
            Err(Error::NoSignal)
        } else {
            Ok(())
        }
    }

    /// `max(0, d̂(u(t)) - π̂₀) · f₀(t) / (1 - π̂₀)`.
    pub fn nonnull_density(&self, t: f64) -> Result<f64> {
        self.check_signal()?;
        Ok(self.nonnull_weight(self.pvalue(t)) * self.null_spec.pdf(t))
    }

    /// Nonnull density on the p-value scale.
    pub fn nonnull_density_at_pvalue(&self, u: f64) -> Result<f64> {
        self.check_signal()?;
        Ok(self.nonnull_weight(u))
    }

    /// Total mass of the reconstructed nonnull density. Not exactly one
    /// because of the clipping at zero.
    pub fn nonnull_mass(&self) -> Result<f64> {
        self.check_signal()?;
        Ok(integrate_unit(|u, _| self.nonnull_weight(u), 1e-8))
    }

    /// Cases with capped fdr at or below `threshold`, split at the null
    /// median into left and right.
    pub fn discoveries(&self, stats: &[f64], threshold: f64) -> DiscoveryReport {
        let median = self.null_spec.median();
        let mut report = DiscoveryReport {
            threshold,
            n_discoveries: 0,
            n_left: 0,
            n_right: 0,
            indices: Vec::new(),
            cases: Vec::new(),
        };
        for (index, &statistic) in stats.iter().enumerate() {
            let pvalue = self.pvalue(statistic);
            let fdr = self.local_fdr_at_pvalue(pvalue);
            if fdr <= threshold {
                if statistic < median {
                    report.n_left += 1;
                } else {
                    report.n_right += 1;
                }
                report.indices.push(index);
                report.cases.push(DiscoveryCase {
                    index,
                    statistic,
                    pvalue,
                    fdr,
                });
            }
        }
        report.n_discoveries = report.indices.len();
        report
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryCase {
    pub index: usize,
    pub statistic: f64,
    pub pvalue: f64,
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub threshold: f64,
    pub n_discoveries: usize,
    pub n_left: usize,
    pub n_right: usize,
    pub indices: Vec<usize>,
    pub cases: Vec<DiscoveryCase>,
}
