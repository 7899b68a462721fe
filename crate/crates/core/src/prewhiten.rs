//! Beta pre-flattening: a maximum-likelihood beta fit to the p-values and
//! the map from p-values to smooth p-values `v = F_B(u; α̂, β̂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    digamma_unchecked, inc_beta, log_beta_unchecked, trigamma_unchecked,
};

/// P-values are clamped to `[PVALUE_CLAMP, 1 - PVALUE_CLAMP]` before the
/// fit and before the smoothing transform; the beta log-likelihood is
/// unbounded at exact 0 or 1.
pub const PVALUE_CLAMP: f64 = 1e-10;

pub const MIN_FIT_SAMPLES: usize = 10;

const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 200;
const MAX_LOG_STEP: f64 = 2.0;

pub fn clamp_pvalue(u: f64) -> f64 {
    u.clamp(PVALUE_CLAMP, 1.0 - PVALUE_CLAMP)
}

/// Fitted pre-flattening beta density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub alpha: f64,
    pub beta: f64,
    /// Σ log f_B(u_i') over the clamped sample.
    pub log_likelihood: f64,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl BetaFit {
    /// The uniform fit Beta(1, 1), under which smooth p-values equal the
    /// p-values.
    pub fn uniform(n: usize) -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            log_likelihood: 0.0,
            n,
            iterations: 0,
            converged: true,
        }
    }

    /// Shapes from an external source (e.g. a serialized report).
    pub fn from_shapes(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(
                "BetaFit::from_shapes",
                format!("shapes must be positive and finite, got ({alpha}, {beta})"),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            log_likelihood: f64::NAN,
            n: 0,
            iterations: 0,
            converged: true,
        })
    }

    /// v = F_B(clamp(u)).
    pub fn smooth_pvalue(&self, u: f64) -> f64 {
        let u = clamp_pvalue(u);
        inc_beta(self.alpha, self.beta, u, 1.0 - u)
    }
}

/// Sufficient statistics of the beta family: mean log u and mean log(1-u).
#[derive(Debug, Clone, Copy)]
struct LogMoments {
    n: f64,
    mean_log: f64,
    mean_log1m: f64,
}

impl LogMoments {
    // per-observation log-likelihood
    fn loglik(&self, alpha: f64, beta: f64) -> f64 {
        (alpha - 1.0) * self.mean_log + (beta - 1.0) * self.mean_log1m
            - log_beta_unchecked(alpha, beta)
    }

    // per-observation gradient in (α, β)
    fn gradient(&self, alpha: f64, beta: f64) -> [f64; 2] {
        let common = digamma_unchecked(alpha + beta);
        [
            self.mean_log - digamma_unchecked(alpha) + common,
            self.mean_log1m - digamma_unchecked(beta) + common,
        ]
    }
}

fn validate_pvalues(function: &'static str, pvalues: &[f64]) -> Result<()> {
    if let Some((i, &u)) = pvalues
        .iter()
        .enumerate()
        .find(|(_, u)| !(0.0..=1.0).contains(*u))
    {
        return Err(Error::domain(
            function,
            format!("p-value at position {i} is {u}, outside [0, 1]"),
        ));
    }
    Ok(())
}

/// Log-likelihood of Beta(alpha, beta) on the clamped sample.
pub fn beta_log_likelihood(pvalues: &[f64], alpha: f64, beta: f64) -> f64 {
    let ln_b = log_beta_unchecked(alpha, beta);
    pvalues
        .iter()
        .map(|&u| {
            let u = clamp_pvalue(u);
            (alpha - 1.0) * u.ln() + (beta - 1.0) * (-u).ln_1p() - ln_b
        })
        .sum()
}

fn method_of_moments(pvalues: &[f64]) -> (f64, f64) {
    let n = pvalues.len() as f64;
    let mean = pvalues.iter().map(|&u| clamp_pvalue(u)).sum::<f64>() / n;
    let var = pvalues
        .iter()
        .map(|&u| (clamp_pvalue(u) - mean).powi(2))
        .sum::<f64>()
        / n;
    let common = mean * (1.0 - mean) / var - 1.0;
    if common.is_finite() && common > 0.0 {
        (mean * common, (1.0 - mean) * common)
    } else {
        (1.0, 1.0)
    }
}

/// Maximum-likelihood Beta(α, β) fit to p-values.
///
/// Newton iterations run on (log α, log β) from the method-of-moments
/// start, with a backtracking line search on the likelihood. When the
/// log-scale Hessian is indefinite the Fisher direction in (α, β) is used
/// instead; if no ascent step can be found the iterate is moved by one
/// sweep of coordinate-wise bisection on the score. The fit stops once the
/// score has sup-norm at most 1e-8 or after 200 iterations, in which case
/// `converged` is false.
pub fn fit_beta_mle(pvalues: &[f64]) -> Result<BetaFit> {
    if pvalues.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: pvalues.len(),
        });
    }
    validate_pvalues("fit_beta_mle", pvalues)?;

    let first = clamp_pvalue(pvalues[0]);
    if pvalues.iter().all(|&u| clamp_pvalue(u) == first) {
        return Err(Error::DegenerateSample(format!(
            "all {} p-values equal {first} after clamping",
            pvalues.len()
        )));
    }

    let n = pvalues.len() as f64;
    let (sum_log, sum_log1m) = pvalues.iter().fold((0.0, 0.0), |(a, b), &u| {
        let u = clamp_pvalue(u);
        (a + u.ln(), b + (-u).ln_1p())
    });
    let moments = LogMoments {
        n,
        mean_log: sum_log / n,
        mean_log1m: sum_log1m / n,
    };

    let (mut alpha, mut beta) = method_of_moments(pvalues);
    let mut value = moments.loglik(alpha, beta);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        let grad = moments.gradient(alpha, beta);
        if moments.n * grad[0].abs().max(grad[1].abs()) <= GRADIENT_TOL {
            converged = true;
            break;
        }
        iterations += 1;

        let direction = newton_direction(alpha, beta, grad);
        match line_search(&moments, alpha, beta, value, direction) {
            Some((a, b, v)) => {
                alpha = a;
                beta = b;
                value = v;
            }
            None => {
                let (a, b) = coordinate_bisection(&moments, alpha, beta);
                if a == alpha && b == beta {
                    // numerically stationary: nothing left to gain
                    break;
                }
                alpha = a;
                beta = b;
                value = moments.loglik(alpha, beta);
            }
        }
    }

    Ok(BetaFit {
        alpha,
        beta,
        log_likelihood: beta_log_likelihood(pvalues, alpha, beta),
        n: pvalues.len(),
        iterations,
        converged,
    })
}

// Ascent direction in (log α, log β).
fn newton_direction(alpha: f64, beta: f64, grad: [f64; 2]) -> [f64; 2] {
    let t_ab = trigamma_unchecked(alpha + beta);
    // Hessian of the per-observation log-likelihood in (α, β); always
    // negative definite for the beta family.
    let h_aa = -(trigamma_unchecked(alpha) - t_ab);
    let h_bb = -(trigamma_unchecked(beta) - t_ab);
    let h_ab = t_ab;

    // Chain rule to (a, b) = (log α, log β).
    let g = [alpha * grad[0], beta * grad[1]];
    let l_aa = alpha * alpha * h_aa + alpha * grad[0];
    let l_bb = beta * beta * h_bb + beta * grad[1];
    let l_ab = alpha * beta * h_ab;
    let det = l_aa * l_bb - l_ab * l_ab;

    if l_aa < 0.0 && det > 0.0 {
        [
            -(l_bb * g[0] - l_ab * g[1]) / det,
            -(-l_ab * g[0] + l_aa * g[1]) / det,
        ]
    } else {
        let det = h_aa * h_bb - h_ab * h_ab;
        let d_alpha = -(h_bb * grad[0] - h_ab * grad[1]) / det;
        let d_beta = -(-h_ab * grad[0] + h_aa * grad[1]) / det;
        [d_alpha / alpha, d_beta / beta]
    }
}

fn line_search(
    moments: &LogMoments,
    alpha: f64,
    beta: f64,
    value: f64,
    direction: [f64; 2],
) -> Option<(f64, f64, f64)> {
    let len = direction[0].abs().max(direction[1].abs());
    if !len.is_finite() || len == 0.0 {
        return None;
    }
    let mut step = if len > MAX_LOG_STEP { MAX_LOG_STEP / len } else { 1.0 };
    for _ in 0..60 {
        let a = alpha * (step * direction[0]).exp();
        let b = beta * (step * direction[1]).exp();
        let v = moments.loglik(a, b);
        if v.is_finite() && v >= value && (a != alpha || b != beta) {
            return Some((a, b, v));
        }
        step *= 0.5;
    }
    None
}

// The score in α is strictly decreasing in α for fixed β (and likewise in
// β), so each coordinate has a unique root that bisection in log scale
// finds.
fn coordinate_bisection(moments: &LogMoments, alpha: f64, beta: f64) -> (f64, f64) {
    let alpha = bisect_log(|a| moments.gradient(a, beta)[0], alpha);
    let beta = bisect_log(|b| moments.gradient(alpha, b)[1], beta);
    (alpha, beta)
}

fn bisect_log<F: Fn(f64) -> f64>(score: F, start: f64) -> f64 {
    let (mut lo, mut hi) = (start, start);
    while score(lo) < 0.0 && lo > 1e-12 {
        lo *= 0.5;
    }
    while score(hi) > 0.0 && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Maps p-values to smooth p-values `v_i = F_B(clamp(u_i); α̂, β̂)`.
pub fn smooth_pvalues(pvalues: &[f64], fit: &BetaFit) -> Result<Vec<f64>> {
    validate_pvalues("smooth_pvalues", pvalues)?;
    Ok(pvalues.iter().map(|&u| fit.smooth_pvalue(u)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::beta_cdf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution};

    fn beta_sample(alpha: f64, beta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Beta::new(alpha, beta).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    fn assert_stationary(u: &[f64], fit: &BetaFit) {
        let n = u.len() as f64;
        let (s1, s2) = u.iter().fold((0.0, 0.0), |(a, b), &x| {
            let x = clamp_pvalue(x);
            (a + x.ln(), b + (-x).ln_1p())
        });
        let common = digamma_unchecked(fit.alpha + fit.beta);
        let g_alpha = n * (common - digamma_unchecked(fit.alpha)) + s1;
        let g_beta = n * (common - digamma_unchecked(fit.beta)) + s2;
        assert!(g_alpha.abs() <= 1e-6 * n, "dl/dalpha = {g_alpha}");
        assert!(g_beta.abs() <= 1e-6 * n, "dl/dbeta = {g_beta}");
    }

    #[test]
    fn recovers_skewed_shapes() {
        let u = beta_sample(0.32, 0.75, 7129, 11);
        let fit = fit_beta_mle(&u).unwrap();
        assert!(fit.converged);
        assert!((fit.alpha - 0.32).abs() < 0.05, "alpha {}", fit.alpha);
        assert!((fit.beta - 0.75).abs() < 0.05, "beta {}", fit.beta);
        assert_stationary(&u, &fit);
    }

    #[test]
    fn uniform_sample_fits_beta_one_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let fit = fit_beta_mle(&u).unwrap();
        assert!(fit.converged);
        assert!((fit.alpha - 1.0).abs() < 0.02);
        assert!((fit.beta - 1.0).abs() < 0.02);
        assert_stationary(&u, &fit);
    }

    #[test]
    fn fit_never_worse_than_moment_start() {
        for (seed, (a, b)) in [(0.3, 0.3), (0.8, 2.0), (4.0, 1.5), (0.5, 6.0)]
            .into_iter()
            .enumerate()
        {
            let u = beta_sample(a, b, 500, seed as u64);
            let fit = fit_beta_mle(&u).unwrap();
            let (a0, b0) = method_of_moments(&u);
            assert!(fit.log_likelihood >= beta_log_likelihood(&u, a0, b0));
            assert!(fit.converged);
            assert_stationary(&u, &fit);
        }
    }

    #[test]
    fn log_likelihood_field_is_recomputable() {
        let u = beta_sample(0.9, 1.3, 300, 2);
        let fit = fit_beta_mle(&u).unwrap();
        assert_eq!(fit.log_likelihood, beta_log_likelihood(&u, fit.alpha, fit.beta));
    }

    #[test]
    fn handles_exact_zeros_and_ones() {
        let mut u = beta_sample(0.4, 0.9, 1000, 3);
        u[0] = 0.0;
        u[1] = 1.0;
        u[2] = 0.0;
        let fit = fit_beta_mle(&u).unwrap();
        assert!(fit.alpha > 0.0 && fit.beta > 0.0 && fit.log_likelihood.is_finite());
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            fit_beta_mle(&[0.5; 9]),
            Err(Error::InsufficientData { needed: 10, got: 9 })
        ));
        assert!(matches!(fit_beta_mle(&[0.3; 20]), Err(Error::DegenerateSample(_))));
        // 0 and 1e-12 coincide after clamping
        let mut u = vec![0.0; 15];
        u[3] = 1e-12;
        assert!(matches!(fit_beta_mle(&u), Err(Error::DegenerateSample(_))));
        let mut bad = vec![0.5; 15];
        bad[4] = 1.5;
        bad[5] = 0.2;
        assert!(matches!(fit_beta_mle(&bad), Err(Error::Domain { .. })));
    }

    #[test]
    fn uniform_fit_is_identity() {
        let fit = BetaFit::uniform(10);
        let u = [1e-3, 0.25, 0.5, 0.999];
        assert_eq!(smooth_pvalues(&u, &fit).unwrap(), u.to_vec());
    }

    #[test]
    fn smooth_pvalue_matches_beta_cdf() {
        let fit = BetaFit::from_shapes(0.81, 0.82).unwrap();
        let v = smooth_pvalues(&[0.5], &fit).unwrap()[0];
        assert_eq!(v, beta_cdf(0.5, 0.81, 0.82).unwrap());
        assert!((v - 0.504_007_033_703_616_3).abs() < 1e-12);
    }

    #[test]
    fn refit_on_smooth_pvalues_is_near_uniform() {
        for (seed, (a, b)) in [(0.32, 0.75), (0.81, 0.82), (1.5, 0.6)].into_iter().enumerate() {
            let u = beta_sample(a, b, 5000, 40 + seed as u64);
            let fit = fit_beta_mle(&u).unwrap();
            let v = smooth_pvalues(&u, &fit).unwrap();
            let refit = fit_beta_mle(&v).unwrap();
            assert!((refit.alpha - 1.0).abs() < 0.05, "alpha {}", refit.alpha);
            assert!((refit.beta - 1.0).abs() < 0.05, "beta {}", refit.beta);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn smoothing_preserves_ranks(
                u in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 10..200),
                alpha in 0.2f64..5.0,
                beta in 0.2f64..5.0,
            ) {
                let fit = BetaFit::from_shapes(alpha, beta).unwrap();
                let v = smooth_pvalues(&u, &fit).unwrap();
                for i in 0..u.len() {
                    for j in 0..u.len() {
                        if u[i] < u[j] {
                            prop_assert!(v[i] <= v[j]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kendall_tau_is_one_on_simulated_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: Vec<f64> = (0..400).map(|_| rng.random::<f64>().powi(3)).collect();
        let fit = fit_beta_mle(&u).unwrap();
        let v = smooth_pvalues(&u, &fit).unwrap();
        let mut discordant = 0;
        for i in 0..u.len() {
            for j in (i + 1)..u.len() {
                if (u[i] - u[j]) * (v[i] - v[j]) <= 0.0 {
                    discordant += 1;
                }
            }
        }
        assert_eq!(discordant, 0);
    }
}
