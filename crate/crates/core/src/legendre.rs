//! Shifted orthonormal Legendre polynomials on [0, 1].
//!
//! `S_j(v) = √(2j+1) · P_j(2v - 1)`, with `P_j` the classical Legendre
//! polynomial. `{1, S_1, S_2, ...}` is orthonormal in L²[0, 1], so every
//! `S_j` with j ≥ 1 integrates to zero.

use crate::error::{Error, Result};

/// Largest basis index the estimators accept.
pub const MAX_DEGREE: usize = 16;

/// S_j(v) for 1 ≤ j ≤ [`MAX_DEGREE`].
pub fn shifted_legendre(j: usize, v: f64) -> Result<f64> {
    check_degree(j)?;
    check_arg(v)?;
    let mut row = [0.0; MAX_DEGREE];
    fill_basis(v, &mut row[..j]);
    Ok(row[j - 1])
}

/// `[S_1(v), ..., S_m(v)]` from a single recurrence pass.
pub fn basis_row(m: usize, v: f64) -> Result<Vec<f64>> {
    check_degree(m)?;
    check_arg(v)?;
    let mut row = vec![0.0; m];
    fill_basis(v, &mut row);
    Ok(row)
}

/// Writes S_1(v)..S_len(v) into `out`. No argument checks.
pub(crate) fn fill_basis(v: f64, out: &mut [f64]) {
    let x = 2.0 * v - 1.0;
    let mut prev = 1.0;
    let mut cur = x;
    for (idx, slot) in out.iter_mut().enumerate() {
        let j = idx + 1;
        if j > 1 {
            let n = (j - 1) as f64;
            let next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
            prev = cur;
            cur = next;
        }
        *slot = (2.0 * j as f64 + 1.0).sqrt() * cur;
    }
}

/// 1 + Σ_j θ_j S_j(v).
pub(crate) fn series_value(coeffs: &[f64], v: f64) -> f64 {
    let mut row = [0.0; MAX_DEGREE];
    let row = &mut row[..coeffs.len()];
    fill_basis(v, row);
    1.0 + coeffs.iter().zip(row.iter()).map(|(c, s)| c * s).sum::<f64>()
}

fn check_degree(j: usize) -> Result<()> {
    if (1..=MAX_DEGREE).contains(&j) {
        Ok(())
    } else {
        Err(Error::domain(
            "shifted_legendre",
            format!("basis index must lie in [1, {MAX_DEGREE}], got {j}"),
        ))
    }
}

fn check_arg(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain("shifted_legendre", format!("argument must lie in [0, 1], got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussRule;

    #[test]
    fn low_order_values() {
        assert_eq!(shifted_legendre(1, 0.5).unwrap(), 0.0);
        assert!((shifted_legendre(1, 1.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(basis_row(1, 0.5).unwrap(), vec![0.0]);
    }

    #[test]
    fn endpoint_values_alternate() {
        let row = basis_row(3, 0.0).unwrap();
        let want = [-(3f64.sqrt()), 5f64.sqrt(), -(7f64.sqrt())];
        for (g, w) in row.iter().zip(want) {
            assert!((g - w).abs() < 1e-14);
        }
        for j in 1..=MAX_DEGREE {
            let sup = (2.0 * j as f64 + 1.0).sqrt();
            assert!((shifted_legendre(j, 1.0).unwrap() - sup).abs() < 1e-12);
        }
    }

    #[test]
    fn index_and_argument_checks() {
        assert!(shifted_legendre(0, 0.3).is_err());
        assert!(shifted_legendre(MAX_DEGREE + 1, 0.3).is_err());
        assert!(basis_row(0, 0.3).is_err());
        assert!(shifted_legendre(2, -0.01).is_err());
        assert!(shifted_legendre(2, f64::NAN).is_err());
    }

    #[test]
    fn zero_mean_and_bounded() {
        let rule = GaussRule::new(64);
        for j in 1..=MAX_DEGREE {
            let mean = rule.integrate(0.0, 1.0, |v| shifted_legendre(j, v).unwrap());
            assert!(mean.abs() < 1e-12, "j={j} mean={mean}");
            let sup = (2.0 * j as f64 + 1.0).sqrt();
            for i in 0..=1000 {
                let v = i as f64 / 1000.0;
                assert!(shifted_legendre(j, v).unwrap().abs() <= sup + 1e-12);
            }
        }
    }

    #[test]
    fn series_value_matches_row() {
        let coeffs = [0.1, -0.2, 0.05];
        let v = 0.37;
        let row = basis_row(3, v).unwrap();
        let want = 1.0 + coeffs.iter().zip(&row).map(|(c, s)| c * s).sum::<f64>();
        assert!((series_value(&coeffs, v) - want).abs() < 1e-15);
    }
}
