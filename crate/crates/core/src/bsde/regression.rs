//! Per-time-slice least-squares machinery: polynomial basis in the state,
//! centered and scaled by the slice mean and standard deviation.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const CONDITION_LIMIT: f64 = 1e12;

pub(crate) struct SliceFit {
    pub fitted: Vec<f64>,
    /// Condition number of the normal equations.
    pub condition: f64,
    /// Typical standard error of a fitted value:
    /// residual sd times sqrt(basis dim / n).
    pub fitted_se: f64,
    /// Largest scaled basis row sup-norm, for the contraction estimate.
    pub basis_row_bound: f64,
}

/// Regresses `targets` on polynomials of the state up to `degree`. A slice
/// whose state is (numerically) constant keeps only the intercept, so the
/// fit degenerates to the sample mean.
pub(crate) fn regress_on_state(
    states: &[f64],
    targets: &[f64],
    degree: usize,
    step: usize,
) -> Result<SliceFit> {
    let n = states.len();
    assert_eq!(n, targets.len());
    let mean = states.iter().sum::<f64>() / n as f64;
    let var = states.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    let degenerate = sd <= 1e-12 * (1.0 + mean.abs());
    let p = if degenerate { 1 } else { degree + 1 };

    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    let mut basis_row_bound = 0.0_f64;
    for (j, &x) in states.iter().enumerate() {
        let s = if degenerate { 0.0 } else { (x - mean) / sd };
        let mut pw = 1.0;
        for r in row.iter_mut() {
            *r = pw;
            pw *= s;
            basis_row_bound = basis_row_bound.max(r.abs());
        }
        for a in 0..p {
            for b in a..p {
                xtx[(a, b)] += row[a] * row[b];
            }
            xty[a] += row[a] * targets[j];
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }

    let svd = xtx.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::IllConditionedBasis { step, condition });
    }
    let coeffs = svd
        .solve(&xty, 0.0)
        .map_err(|e| Error::Numeric(format!("normal equations solve failed: {e}")))?;

    let mut fitted = vec![0.0; n];
    let mut rss = 0.0;
    for (j, &x) in states.iter().enumerate() {
        let s = if degenerate { 0.0 } else { (x - mean) / sd };
        let mut acc = 0.0;
        let mut pw = 1.0;
        for a in 0..p {
            acc += coeffs[a] * pw;
            pw *= s;
        }
        fitted[j] = acc;
        let r = targets[j] - acc;
        rss += r * r;
    }
    let residual_sd = (rss / (n.saturating_sub(p)).max(1) as f64).sqrt();
    let fitted_se = residual_sd * (p as f64 / n as f64).sqrt();

    Ok(SliceFit {
        fitted,
        condition,
        fitted_se,
        basis_row_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_polynomial_exactly() {
        let states: Vec<f64> = (0..500).map(|i| -2.0 + 4.0 * i as f64 / 499.0).collect();
        let targets: Vec<f64> = states.iter().map(|x| 1.0 + 2.0 * x - 0.5 * x * x).collect();
        let fit = regress_on_state(&states, &targets, 4, 0).unwrap();
        for (f, t) in fit.fitted.iter().zip(targets.iter()) {
            assert!((f - t).abs() < 1e-9);
        }
        assert!(fit.fitted_se < 1e-9);
    }

    #[test]
    fn constant_state_degenerates_to_the_mean() {
        let states = vec![3.0; 100];
        let targets: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let fit = regress_on_state(&states, &targets, 4, 0).unwrap();
        let mean = targets.iter().sum::<f64>() / 100.0;
        for f in &fit.fitted {
            assert!((f - mean).abs() < 1e-9);
        }
    }
}
