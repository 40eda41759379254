//! Box-Cox linearization of the response, fitted by maximum likelihood and
//! applied consistently to the data and to the detection threshold.

use crate::error::{Error, Result};
use crate::math::optimize::golden_section;

/// Below this magnitude the transform switches to its continuous log limit.
const LOG_LIMIT: f64 = 1e-6;

/// A fitted power transform, with the detection threshold mapped into the
/// transformed scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCoxTransform {
    pub lambda: f64,
    /// Profile log-likelihood attained at `lambda`.
    pub log_likelihood: f64,
    /// The raw threshold `s` pushed through the transform.
    pub transformed_threshold: f64,
}

impl BoxCoxTransform {
    /// Applies the fitted transform to a batch of positive values.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_boxcox(x, self.lambda)
    }

    /// Inverse transform of a single value.
    pub fn invert(&self, y: f64) -> f64 {
        invert_boxcox(y, self.lambda)
    }
}

/// `y = (x^lambda - 1) / lambda`, with the log limit at `lambda = 0`.
///
/// All inputs must be strictly positive.
pub fn apply_boxcox(x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if let Some(bad) = x.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "box-cox input must be positive, got {} at index {bad}",
            x[bad]
        )));
    }
    Ok(x.iter().map(|&v| boxcox_value(v, lambda)).collect())
}

/// Scalar transform without the positivity check (caller guarantees x > 0).
pub fn boxcox_value(x: f64, lambda: f64) -> f64 {
    if lambda.abs() < LOG_LIMIT {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

/// Inverse of [`boxcox_value`].
pub fn invert_boxcox(y: f64, lambda: f64) -> f64 {
    if lambda.abs() < LOG_LIMIT {
        y.exp()
    } else {
        (lambda * y + 1.0).powf(1.0 / lambda)
    }
}

/// Profile log-likelihood of the linear model `y(lambda) = b0 + b1 a + eps`
/// with Gaussian errors, including the Jacobian term `(lambda-1) sum ln x`.
fn profile_log_likelihood(a: &[f64], x: &[f64], sum_log_x: f64, lambda: f64) -> f64 {
    let n = x.len() as f64;
    let y: Vec<f64> = x.iter().map(|&v| boxcox_value(v, lambda)).collect();

    // OLS of y on [1, a]
    let a_mean = a.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (ai, yi) in a.iter().zip(&y) {
        sxx += (ai - a_mean) * (ai - a_mean);
        sxy += (ai - a_mean) * (yi - y_mean);
    }
    let beta1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let beta0 = y_mean - beta1 * a_mean;
    let rss: f64 = a
        .iter()
        .zip(&y)
        .map(|(ai, yi)| {
            let r = yi - beta0 - beta1 * ai;
            r * r
        })
        .sum();
    let sigma2 = (rss / n).max(f64::MIN_POSITIVE);
    -0.5 * n * sigma2.ln() + (lambda - 1.0) * sum_log_x
}

/// Fits the transform parameter by maximizing the profile log-likelihood
/// over `lambda_range` with a golden-section search (tolerance 1e-4), and
/// records the transformed threshold.
pub fn fit_boxcox(
    a: &[f64],
    response: &[f64],
    threshold: f64,
    lambda_range: (f64, f64),
) -> Result<BoxCoxTransform> {
    let (lo, hi) = lambda_range;
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "empty lambda range [{lo}, {hi}]"
        )));
    }
    if a.len() != response.len() {
        return Err(Error::InvalidArgument(format!(
            "a has {} values, response has {}",
            a.len(),
            response.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData {
            op: "fit_boxcox",
            needed: 3,
            got: a.len(),
        });
    }
    if let Some(bad) = response.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "box-cox response must be positive, got {} at index {bad}",
            response[bad]
        )));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "detection threshold must be positive, got {threshold}"
        )));
    }

    let sum_log_x: f64 = response.iter().map(|v| v.ln()).sum();
    let objective = |lambda: f64| -profile_log_likelihood(a, response, sum_log_x, lambda);
    let (lambda, neg_llf) = golden_section(objective, lo, hi, 1e-4);

    Ok(BoxCoxTransform {
        lambda,
        log_likelihood: -neg_llf,
        transformed_threshold: boxcox_value(threshold, lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rng::rng_for;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_shift_at_lambda_one() {
        let y = apply_boxcox(&[5.0], 1.0).unwrap();
        assert_abs_diff_eq!(y[0], 4.0, epsilon = 1e-15);
    }

    #[test]
    fn one_is_a_fixed_point() {
        for lambda in [-1.5, -0.3, 0.0, 0.7, 2.0] {
            let y = apply_boxcox(&[1.0], lambda).unwrap();
            assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn log_limit_at_lambda_zero() {
        let y = apply_boxcox(&[std::f64::consts::E], 0.0).unwrap();
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn continuity_near_zero() {
        for i in 1..=100 {
            let x = 0.1 * i as f64;
            let y = boxcox_value(x, 1e-8);
            assert!((y - x.ln()).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn non_positive_input_is_domain_error() {
        assert!(apply_boxcox(&[1.0, 0.0], 0.5).is_err());
        assert!(apply_boxcox(&[-2.0], 0.5).is_err());
    }

    #[test]
    fn round_trip_recovers_input() {
        for lambda in [-1.2, -0.3, 0.0, 0.3, 1.0, 1.8] {
            for x in [0.05, 0.5, 1.0, 3.0, 40.0] {
                let y = boxcox_value(x, lambda);
                let back = invert_boxcox(y, lambda);
                assert!(
                    (back - x).abs() <= 1e-9 * x,
                    "lambda {lambda} x {x} back {back}"
                );
            }
        }
    }

    #[test]
    fn monotone_preserves_threshold_exceedance() {
        let mut rng = rng_for(11, 0);
        for _ in 0..500 {
            let x: f64 = 0.01 + 20.0 * rng.random::<f64>();
            let s: f64 = 0.01 + 20.0 * rng.random::<f64>();
            let lambda: f64 = -2.0 + 4.0 * rng.random::<f64>();
            let (tx, ts) = (boxcox_value(x, lambda), boxcox_value(s, lambda));
            assert_eq!(x > s, tx > ts, "x {x} s {s} lambda {lambda}");
        }
    }

    fn synthetic_a(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| 1.0 + rng.random::<f64>()).collect()
    }

    #[test]
    fn recovers_lambda_one_on_linear_data() {
        let mut rng = rng_for(42, 1);
        let a = synthetic_a(200, &mut rng);
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                3.0 + 2.0 * ai + 0.05 * e
            })
            .collect();
        let fit = fit_boxcox(&a, &y, 5.0, (-2.0, 2.0)).unwrap();
        assert!(
            fit.lambda > 0.8 && fit.lambda < 1.2,
            "lambda = {}",
            fit.lambda
        );
    }

    #[test]
    fn recovers_lambda_zero_on_lognormal_data() {
        let mut rng = rng_for(42, 2);
        let a = synthetic_a(200, &mut rng);
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (1.0 + ai + 0.05 * e).exp()
            })
            .collect();
        let fit = fit_boxcox(&a, &y, 5.0, (-2.0, 2.0)).unwrap();
        assert!(
            fit.lambda > -0.1 && fit.lambda < 0.1,
            "lambda = {}",
            fit.lambda
        );
    }

    #[test]
    fn degenerate_range_returns_the_point() {
        let a = vec![1.0, 1.5, 2.0, 2.5];
        let y = vec![2.0, 3.0, 4.0, 5.0];
        let fit = fit_boxcox(&a, &y, 3.0, (0.3, 0.3)).unwrap();
        assert_eq!(fit.lambda, 0.3);
        assert_abs_diff_eq!(
            fit.transformed_threshold,
            boxcox_value(3.0, 0.3),
            epsilon = 1e-15
        );
    }

    #[test]
    fn reversed_range_is_an_error() {
        let a = vec![1.0, 1.5, 2.0];
        let y = vec![2.0, 3.0, 4.0];
        assert!(fit_boxcox(&a, &y, 3.0, (1.0, -1.0)).is_err());
    }

    #[test]
    fn profile_likelihood_dominates_grid() {
        let mut rng = rng_for(42, 3);
        let a = synthetic_a(150, &mut rng);
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                let lin: f64 = 2.0 + 1.5 * ai + 0.1 * e;
                // true lambda 0.3
                (0.3 * lin + 1.0).powf(1.0 / 0.3)
            })
            .collect();
        let fit = fit_boxcox(&a, &y, 5.0, (-2.0, 2.0)).unwrap();
        let sum_log: f64 = y.iter().map(|v| v.ln()).sum();
        let mut grid = -2.0;
        while grid <= 2.0 {
            let llf = profile_log_likelihood(&a, &y, sum_log, grid);
            assert!(
                fit.log_likelihood >= llf - 1e-6,
                "grid lambda {grid}: {llf} > fitted {}",
                fit.log_likelihood
            );
            grid += 0.01;
        }
    }
}
