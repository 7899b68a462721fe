//! Null-proportion estimation by minimum deviance.
//!
//! For each level λ on a grid over [1, 3.5] the cases whose fitted
//! comparison density is below λ form a candidate null set. Its Legendre
//! score coefficients (on the p-values themselves) measure how far that set
//! is from uniform; the level with the smallest deviance `Σ θ_j²` wins and
//! π̂₀ is the fraction of cases below it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::density::ComparisonDensityModel;
use crate::error::{Error, Result};
use crate::legendre::{self, MAX_DEGREE};
use crate::prewhiten::clamp_pvalue;

pub const DEFAULT_MDC_TERMS: usize = 10;
pub const DEFAULT_LAMBDA_STEP: f64 = 0.01;
pub const LAMBDA_MIN: f64 = 1.0;
pub const LAMBDA_MAX: f64 = 3.5;

/// Paths whose deviances all agree within this are reported as flat.
const FLAT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviancePath {
    /// Grid levels with a non-empty null set, ascending.
    pub lambdas: Vec<f64>,
    pub deviances: Vec<f64>,
    pub n_lambda: Vec<usize>,
    /// Grid levels skipped because no case fell below them.
    pub skipped: Vec<f64>,
    pub lambda_star: f64,
    pub pi0_hat: f64,
    pub flat: bool,
    pub n: usize,
}

/// `1.00, 1.00 + step, ..., 3.50`, computed as `1 + k·step`.
pub fn lambda_grid(step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0 && step <= LAMBDA_MAX - LAMBDA_MIN) {
        return Err(Error::Config(format!(
            "lambda grid step must lie in (0, {}], got {step}",
            LAMBDA_MAX - LAMBDA_MIN
        )));
    }
    let count = ((LAMBDA_MAX - LAMBDA_MIN) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| LAMBDA_MIN + k as f64 * step).collect())
}

/// Runs the minimum-deviance search over the grid.
///
/// The cases are sorted once by (d̂(u), u) so every null set is a prefix,
/// and the basis sums are accumulated while walking up the grid. The sort
/// key fixes the summation order, so the path does not depend on the
/// order of the input.
pub fn estimate_pi0(
    pvalues: &[f64],
    model: &ComparisonDensityModel,
    m: usize,
    grid_step: f64,
) -> Result<DeviancePath> {
    if !(1..=MAX_DEGREE).contains(&m) {
        return Err(Error::Config(format!(
            "number of deviance terms must lie in [1, {MAX_DEGREE}], got {m}"
        )));
    }
    if pvalues.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if let Some((i, &u)) = pvalues
        .iter()
        .enumerate()
        .find(|(_, u)| !(0.0..=1.0).contains(*u))
    {
        return Err(Error::domain(
            "estimate_pi0",
            format!("p-value at position {i} is {u}, outside [0, 1]"),
        ));
    }
    let grid = lambda_grid(grid_step)?;

    let mut cases: Vec<(f64, f64)> = pvalues
        .iter()
        .map(|&u| {
            let u = clamp_pvalue(u);
            (model.eval(u), u)
        })
        .collect();
    cases.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => a.1.total_cmp(&b.1),
        other => other,
    });

    let mut sums = vec![0.0; m];
    let mut row = vec![0.0; m];
    let mut taken = 0usize;

    let mut path = DeviancePath {
        lambdas: Vec::with_capacity(grid.len()),
        deviances: Vec::with_capacity(grid.len()),
        n_lambda: Vec::with_capacity(grid.len()),
        skipped: Vec::new(),
        lambda_star: f64::NAN,
        pi0_hat: f64::NAN,
        flat: false,
        n: pvalues.len(),
    };

    for &lambda in &grid {
        while taken < cases.len() && cases[taken].0 < lambda {
            legendre::fill_basis(cases[taken].1, &mut row);
            for (s, r) in sums.iter_mut().zip(&row) {
                *s += r;
            }
            taken += 1;
        }
        if taken == 0 {
            path.skipped.push(lambda);
            continue;
        }
        let count = taken as f64;
        let deviance = sums.iter().map(|s| (s / count).powi(2)).sum();
        path.lambdas.push(lambda);
        path.deviances.push(deviance);
        path.n_lambda.push(taken);
    }

    if path.lambdas.is_empty() {
        return Err(Error::Estimation(format!(
            "no case has fitted density below {LAMBDA_MAX}; every grid level was empty"
        )));
    }

    let (lo, hi) = path
        .deviances
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let best = if hi - lo <= FLAT_TOLERANCE {
        path.flat = true;
        0
    } else {
        // strict comparison keeps the smallest λ among ties
        let mut best = 0;
        for (k, &d) in path.deviances.iter().enumerate() {
            if d < path.deviances[best] {
                best = k;
            }
        }
        best
    };
    path.lambda_star = path.lambdas[best];
    path.pi0_hat = path.n_lambda[best] as f64 / path.n as f64;
    Ok(path)
}
