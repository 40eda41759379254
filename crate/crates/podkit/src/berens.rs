//! Linear-regression POD ("Berens" model) on the transformed response:
//! maximum-likelihood fit, residual diagnostic tests, the Gaussian POD
//! formula with exact posterior-sampling confidence bands, and the binomial
//! variant that replaces the Gaussian residual law by the empirical
//! residual sample with Clopper-Pearson intervals.

use rand::Rng;
use rand_distr::{ChiSquared as ChiSquaredSampler, Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::math::rng::rng_for_chunk;
use crate::math::special::{anderson_darling_pvalue, kolmogorov_sf, norm_cdf};
use crate::math::stats::{mean, quantile_sorted, variance};
use crate::pod::{exceedance_probability, BandSource, PodBand, PodCurve};

/// Ordinary-least-squares fit of the transformed response on the defect
/// size, `y = beta0 + beta1 a + eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub beta0: f64,
    pub beta1: f64,
    /// Residual standard deviation, RSS/(N-2) under the square root.
    pub sigma: f64,
    /// (X^T X)^-1 for the design [1, a]; symmetric positive definite.
    pub xtx_inverse: [[f64; 2]; 2],
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    /// The defect sizes of the fit, kept for the residual diagnostics.
    pub a: Vec<f64>,
}

impl LinearFit {
    /// Fitted value at defect size `a`.
    pub fn predict(&self, a: f64) -> f64 {
        self.beta0 + self.beta1 * a
    }
}

/// Fits the linear model by least squares (the maximum-likelihood estimate
/// under Gaussian errors), with the N-2 divisor for the residual variance.
pub fn fit_linear(a: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = a.len();
    if n != y.len() {
        return Err(Error::InvalidArgument(format!(
            "a has {n} values, y has {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            op: "fit_linear",
            needed: 2,
            got: n,
        });
    }
    let nf = n as f64;
    let a_mean = mean(a);
    let y_mean = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (ai, yi) in a.iter().zip(y) {
        sxx += (ai - a_mean) * (ai - a_mean);
        sxy += (ai - a_mean) * (yi - y_mean);
        syy += (yi - y_mean) * (yi - y_mean);
    }
    if sxx <= 0.0 {
        return Err(Error::SingularDesign(
            "defect sizes are all equal; slope is unidentifiable".into(),
        ));
    }
    let beta1 = sxy / sxx;
    let beta0 = y_mean - beta1 * a_mean;

    let residuals: Vec<f64> = a
        .iter()
        .zip(y)
        .map(|(ai, yi)| yi - beta0 - beta1 * ai)
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma = if n > 2 { (rss / (nf - 2.0)).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 {
        (1.0 - rss / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };

    let sum_a: f64 = a.iter().sum();
    let sum_a2: f64 = a.iter().map(|v| v * v).sum();
    let det = nf * sxx; // = n sum(a^2) - (sum a)^2
    let xtx_inverse = [
        [sum_a2 / det, -sum_a / det],
        [-sum_a / det, nf / det],
    ];

    Ok(LinearFit {
        beta0,
        beta1,
        sigma,
        xtx_inverse,
        residuals,
        r_squared,
        n,
        a: a.to_vec(),
    })
}

/// Statistic and p-value of one residual test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// The four residual diagnostics backing the Berens assumptions: two
/// normality tests, homoscedasticity against the defect size, and serial
/// non-correlation in design order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub kolmogorov_smirnov: TestResult,
    pub anderson_darling: TestResult,
    pub breusch_pagan: TestResult,
    pub durbin_watson: TestResult,
}

impl DiagnosticsReport {
    /// True when every test clears the significance threshold.
    pub fn all_pass(&self, alpha: f64) -> bool {
        self.kolmogorov_smirnov.p_value >= alpha
            && self.anderson_darling.p_value >= alpha
            && self.breusch_pagan.p_value >= alpha
            && self.durbin_watson.p_value >= alpha
    }
}

/// Runs the four residual tests on a fit. Needs at least eight residuals.
///
/// The Kolmogorov-Smirnov test is run against the Gaussian with the fitted
/// (mean, sd), without the Lilliefors small-sample correction; it is
/// slightly conservative in consequence. The Breusch-Pagan variant is the
/// studentized n R^2 form with one regressor, and the Durbin-Watson p-value
/// comes from the normal approximation of the statistic.
pub fn residual_diagnostics(fit: &LinearFit) -> Result<DiagnosticsReport> {
    let e = &fit.residuals;
    let n = e.len();
    if n < 8 {
        return Err(Error::InsufficientData {
            op: "residual_diagnostics",
            needed: 8,
            got: n,
        });
    }
    let nf = n as f64;
    let e_mean = mean(e);
    let e_sd = variance(e).sqrt();
    if e_sd <= 0.0 {
        // all residuals identical: normality trivially untestable; report
        // degenerate statistics with p 1 so the pipeline can proceed
        let unit = TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
        return Ok(DiagnosticsReport {
            kolmogorov_smirnov: unit,
            anderson_darling: unit,
            breusch_pagan: unit,
            durbin_watson: TestResult {
                statistic: 2.0,
                p_value: 1.0,
            },
        });
    }

    let mut sorted = e.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let cdf: Vec<f64> = sorted
        .iter()
        .map(|x| norm_cdf((x - e_mean) / e_sd))
        .collect();

    // Kolmogorov-Smirnov
    let mut d: f64 = 0.0;
    for (i, f) in cdf.iter().enumerate() {
        d = d.max(((i + 1) as f64 / nf - f).abs());
        d = d.max((f - i as f64 / nf).abs());
    }
    let ks_t = d * (nf.sqrt() + 0.12 + 0.11 / nf.sqrt());
    let kolmogorov_smirnov = TestResult {
        statistic: d,
        p_value: kolmogorov_sf(ks_t),
    };

    // Anderson-Darling
    let mut a2 = -nf;
    for i in 0..n {
        let f_lo = cdf[i].clamp(1e-300, 1.0 - 1e-16);
        let f_hi = cdf[n - 1 - i].clamp(1e-300, 1.0 - 1e-16);
        a2 -= (2.0 * i as f64 + 1.0) / nf * (f_lo.ln() + (1.0 - f_hi).ln());
    }
    let anderson_darling = TestResult {
        statistic: a2,
        p_value: anderson_darling_pvalue(a2, n),
    };

    // Breusch-Pagan: squared residuals regressed on a, studentized LM = n R^2
    let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
    let aux = fit_linear(&fit.a, &e2)?;
    let lm = nf * aux.r_squared;
    let chi2 = ChiSquared::new(1.0).expect("valid dof");
    let breusch_pagan = TestResult {
        statistic: lm,
        p_value: (1.0 - chi2.cdf(lm)).clamp(0.0, 1.0),
    };

    // Durbin-Watson with two-sided normal approximation
    let num: f64 = e.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    let den: f64 = e.iter().map(|v| v * v).sum();
    let dw = num / den;
    let z = (dw - 2.0) * nf.sqrt() / 2.0;
    let durbin_watson = TestResult {
        statistic: dw,
        p_value: (2.0 * (1.0 - norm_cdf(z.abs()))).clamp(0.0, 1.0),
    };

    Ok(DiagnosticsReport {
        kolmogorov_smirnov,
        anderson_darling,
        breusch_pagan,
        durbin_watson,
    })
}

/// Plug-in Berens POD curve: `POD(a) = 1 - Phi((s - b0 - b1 a) / sigma)`,
/// the indicator step when the residual sd is zero.
pub fn berens_pod(fit: &LinearFit, s: f64, grid: &[f64]) -> Result<PodCurve> {
    let pod: Vec<f64> = grid
        .iter()
        .map(|&a| exceedance_probability(fit.predict(a), fit.sigma, s))
        .collect();
    PodCurve::new(grid.to_vec(), pod)
}

fn pod_draw_curve(
    fit: &LinearFit,
    s: f64,
    grid: &[f64],
    chol: &[[f64; 2]; 2],
    rng: &mut impl Rng,
) -> Vec<f64> {
    let n = fit.n as f64;
    let sigma2 = if fit.sigma > 0.0 {
        let chi2: f64 = ChiSquaredSampler::new(n - 2.0)
            .expect("valid dof")
            .sample(rng);
        (n - 2.0) * fit.sigma * fit.sigma / chi2
    } else {
        0.0
    };
    let sigma = sigma2.sqrt();
    let z0: f64 = StandardNormal.sample(rng);
    let z1: f64 = StandardNormal.sample(rng);
    let beta0 = fit.beta0 + sigma * chol[0][0] * z0;
    let beta1 = fit.beta1 + sigma * (chol[1][0] * z0 + chol[1][1] * z1);
    grid.iter()
        .map(|&a| exceedance_probability(beta0 + beta1 * a, sigma, s))
        .collect()
}

const BAND_CHUNK: usize = 256;
const TAG_BERENS_BAND: u64 = 0x42_45_52;

/// Posterior-sampling confidence band for the Berens POD curve.
///
/// Each draw samples the residual variance from its scaled inverse
/// chi-square law and the coefficient pair from its conditional Gaussian,
/// then evaluates the POD formula; the band is made of pointwise empirical
/// quantiles. `lower`/`upper` are two-sided at `level`, and the one-sided
/// lower curve (the paper-of-record summary for a90/95) sits at the
/// `1 - level` quantile.
pub fn berens_pod_band(
    fit: &LinearFit,
    s: f64,
    grid: &[f64],
    n_draws: usize,
    level: f64,
    seed: u64,
) -> Result<PodBand> {
    if n_draws < 100 {
        return Err(Error::InvalidArgument(format!(
            "berens band needs at least 100 draws, got {n_draws}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let estimate = berens_pod(fit, s, grid)?;

    // Cholesky factor of the 2x2 (X^T X)^-1
    let m = &fit.xtx_inverse;
    let l00 = m[0][0].sqrt();
    let l10 = m[0][1] / l00;
    let l11 = (m[1][1] - l10 * l10).max(0.0).sqrt();
    let chol = [[l00, 0.0], [l10, l11]];

    let n_chunks = n_draws.div_ceil(BAND_CHUNK);
    let curves: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = rng_for_chunk(seed, TAG_BERENS_BAND, chunk as u64);
            let take = BAND_CHUNK.min(n_draws - chunk * BAND_CHUNK);
            (0..take)
                .map(|_| pod_draw_curve(fit, s, grid, &chol, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();

    band_from_curves(estimate, &curves, level, vec![BandSource::ParameterPosterior])
}

/// Pointwise empirical quantile envelopes from a set of sampled curves,
/// clamped so the plug-in estimate stays inside the band.
pub(crate) fn band_from_curves(
    estimate: PodCurve,
    curves: &[Vec<f64>],
    level: f64,
    sources: Vec<BandSource>,
) -> Result<PodBand> {
    let grid_len = estimate.len();
    let alpha = 1.0 - level;
    let mut lower = Vec::with_capacity(grid_len);
    let mut upper = Vec::with_capacity(grid_len);
    let mut one_sided = Vec::with_capacity(grid_len);
    let mut column = vec![0.0; curves.len()];
    for i in 0..grid_len {
        for (j, curve) in curves.iter().enumerate() {
            column[j] = curve[i];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        let est = estimate.pod()[i];
        lower.push(quantile_sorted(&column, alpha / 2.0).min(est).clamp(0.0, 1.0));
        upper.push(quantile_sorted(&column, 1.0 - alpha / 2.0).max(est).clamp(0.0, 1.0));
        one_sided.push(quantile_sorted(&column, alpha).min(est).clamp(0.0, 1.0));
    }
    PodBand::new(estimate, lower, upper, one_sided, level, sources)
}

/// Empirical-residual POD curve plus the exceedance counts that feed the
/// binomial confidence intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialPod {
    pub curve: PodCurve,
    pub counts: Vec<usize>,
    pub n: usize,
}

/// Binomial-Berens POD: the fraction of fitted residuals whose implied
/// response exceeds the threshold, `N_s(a) / N` with strict `>`.
pub fn binomial_pod(fit: &LinearFit, s: f64, grid: &[f64]) -> Result<BinomialPod> {
    let mut sorted = fit.residuals.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut counts = Vec::with_capacity(grid.len());
    let mut pod = Vec::with_capacity(grid.len());
    for &a in grid {
        let t = s - fit.predict(a);
        // residuals strictly greater than t
        let count = n - sorted.partition_point(|&e| e <= t);
        counts.push(count);
        pod.push(count as f64 / n as f64);
    }
    Ok(BinomialPod {
        curve: PodCurve::new(grid.to_vec(), pod)?,
        counts,
        n,
    })
}

/// Exact (Clopper-Pearson) two-sided binomial interval at `level`.
pub fn clopper_pearson(count: usize, n: usize, level: f64) -> Result<(f64, f64)> {
    if count > n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "count {count} out of range for n = {n}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let alpha = 1.0 - level;
    let lower = if count == 0 {
        0.0
    } else {
        Beta::new(count as f64, (n - count + 1) as f64)
            .expect("valid shapes")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if count == n {
        1.0
    } else {
        Beta::new((count + 1) as f64, (n - count) as f64)
            .expect("valid shapes")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((lower, upper))
}

/// One-sided Clopper-Pearson lower bound at confidence `level`.
pub fn clopper_pearson_lower(count: usize, n: usize, level: f64) -> Result<f64> {
    if count > n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "count {count} out of range for n = {n}"
        )));
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(Beta::new(count as f64, (n - count + 1) as f64)
        .expect("valid shapes")
        .inverse_cdf(1.0 - level))
}

/// Pointwise Clopper-Pearson band around a binomial POD curve.
pub fn binomial_band(pod: &BinomialPod, level: f64) -> Result<PodBand> {
    let mut lower = Vec::with_capacity(pod.counts.len());
    let mut upper = Vec::with_capacity(pod.counts.len());
    let mut one_sided = Vec::with_capacity(pod.counts.len());
    for &count in &pod.counts {
        let (lo, hi) = clopper_pearson(count, pod.n, level)?;
        lower.push(lo);
        upper.push(hi);
        one_sided.push(clopper_pearson_lower(count, pod.n, level)?);
    }
    PodBand::new(
        pod.curve.clone(),
        lower,
        upper,
        one_sided,
        level,
        vec![BandSource::Binomial],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rng::rng_for;
    use crate::pod::{a_at_level_with_confidence, linear_grid};
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn seeded_normal(n: usize, tag: u64) -> Vec<f64> {
        let mut rng = rng_for(977, tag);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn noise_free_line_recovers_exactly() {
        let a = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let y: Vec<f64> = a.iter().map(|v| 2.0 + 3.0 * v).collect();
        let fit = fit_linear(&a, &y).unwrap();
        assert_abs_diff_eq!(fit.beta0, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta1, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.sigma, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_points_interpolate() {
        let fit = fit_linear(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(fit.beta0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta1, 1.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn constant_defect_size_is_singular() {
        let err = fit_linear(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign(_)));
    }

    /// Independent oracle: solve the raw 2x2 normal equations directly.
    fn normal_equations(a: &[f64], y: &[f64]) -> (f64, f64) {
        let n = a.len() as f64;
        let sa: f64 = a.iter().sum();
        let sa2: f64 = a.iter().map(|v| v * v).sum();
        let sy: f64 = y.iter().sum();
        let say: f64 = a.iter().zip(y).map(|(x, v)| x * v).sum();
        let det = n * sa2 - sa * sa;
        let beta0 = (sa2 * sy - sa * say) / det;
        let beta1 = (n * say - sa * sy) / det;
        (beta0, beta1)
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = rng_for(977, 1);
        let a: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 2.0).collect();
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.3 - 0.7 * ai + 0.4 * e
            })
            .collect();
        let fit = fit_linear(&a, &y).unwrap();
        let (b0, b1) = normal_equations(&a, &y);
        assert_abs_diff_eq!(fit.beta0, b0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.beta1, b1, epsilon = 1e-10);
    }

    #[test]
    fn residuals_center_and_variance_divisor() {
        let mut rng = rng_for(977, 2);
        let a: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                2.0 + ai + 0.3 * e
            })
            .collect();
        let fit = fit_linear(&a, &y).unwrap();
        let mean_res = mean(&fit.residuals);
        assert!(mean_res.abs() < 1e-10 * fit.sigma.max(1e-300));
        let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
        assert_abs_diff_eq!(fit.sigma * fit.sigma, rss / 48.0, epsilon = 1e-12);
    }

    fn fit_with_residuals(residuals: Vec<f64>) -> LinearFit {
        let n = residuals.len();
        LinearFit {
            beta0: 0.0,
            beta1: 0.0,
            sigma: variance(&residuals).sqrt(),
            xtx_inverse: [[1.0, 0.0], [0.0, 1.0]],
            residuals,
            r_squared: 0.5,
            n,
            a: (0..n).map(|i| i as f64).collect(),
        }
    }

    #[test]
    fn diagnostics_accept_gaussian_residuals() {
        let fit = fit_with_residuals(seeded_normal(500, 3));
        let report = residual_diagnostics(&fit).unwrap();
        assert!(report.kolmogorov_smirnov.p_value > 0.01);
        assert!(report.anderson_darling.p_value > 0.01);
        assert!(report.breusch_pagan.p_value > 0.01);
        assert!(report.durbin_watson.p_value > 0.01);
    }

    #[test]
    fn diagnostics_rejection_rate_is_near_nominal() {
        let mut rejections = [0usize; 4];
        let replicates = 200;
        for r in 0..replicates {
            let fit = fit_with_residuals(seeded_normal(120, 100 + r as u64));
            let report = residual_diagnostics(&fit).unwrap();
            for (k, p) in [
                report.kolmogorov_smirnov.p_value,
                report.anderson_darling.p_value,
                report.breusch_pagan.p_value,
                report.durbin_watson.p_value,
            ]
            .iter()
            .enumerate()
            {
                if *p < 0.01 {
                    rejections[k] += 1;
                }
            }
        }
        // nominal 1% rate: expect ~2 of 200; allow generous slack, and the
        // uncorrected KS may only be conservative (fewer rejections)
        for (k, count) in rejections.iter().enumerate() {
            assert!(*count <= 8, "test {k} rejected {count}/200 at 1%");
        }
    }

    #[test]
    fn heteroscedastic_residuals_fail_breusch_pagan() {
        let mut rng = rng_for(977, 4);
        let n = 400;
        let a: Vec<f64> = (0..n).map(|i| 0.1 + i as f64 / n as f64).collect();
        let residuals: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                2.0 * ai * e
            })
            .collect();
        let mut fit = fit_with_residuals(residuals);
        fit.a = a;
        let report = residual_diagnostics(&fit).unwrap();
        assert!(
            report.breusch_pagan.p_value < 0.01,
            "p = {}",
            report.breusch_pagan.p_value
        );
    }

    #[test]
    fn alternating_residuals_push_durbin_watson_to_four() {
        let residuals: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 0.8 } else { -0.8 })
            .collect();
        let fit = fit_with_residuals(residuals);
        let report = residual_diagnostics(&fit).unwrap();
        assert!(report.durbin_watson.statistic > 3.9);
        assert!(report.durbin_watson.p_value < 0.01);
    }

    #[test]
    fn persistent_residuals_push_durbin_watson_to_zero() {
        // AR(1) with rho near 1
        let mut rng = rng_for(977, 5);
        let mut state = 0.0;
        let residuals: Vec<f64> = (0..200)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                state = 0.98 * state + 0.05 * e;
                state
            })
            .collect();
        let fit = fit_with_residuals(residuals);
        let report = residual_diagnostics(&fit).unwrap();
        assert!(report.durbin_watson.statistic < 0.5);
    }

    #[test]
    fn diagnostics_need_eight_points() {
        let fit = fit_with_residuals(seeded_normal(7, 6));
        assert!(matches!(
            residual_diagnostics(&fit),
            Err(Error::InsufficientData { .. })
        ));
    }

    fn synthetic_fit() -> LinearFit {
        LinearFit {
            beta0: 2.5,
            beta1: 43.5,
            sigma: 1.95,
            xtx_inverse: [[0.04, -0.1], [-0.1, 0.4]],
            residuals: vec![],
            r_squared: 0.9,
            n: 100,
            a: vec![],
        }
    }

    #[test]
    fn pod_half_at_median_crossing() {
        let fit = synthetic_fit();
        // a where prediction equals s
        let s = 13.0;
        let a_cross = (s - fit.beta0) / fit.beta1;
        let curve = berens_pod(&fit, s, &[a_cross]).unwrap();
        assert_abs_diff_eq!(curve.pod()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pod_one_sigma_above_threshold() {
        let fit = synthetic_fit();
        let s = 13.0;
        let a = (s + fit.sigma - fit.beta0) / fit.beta1;
        let curve = berens_pod(&fit, s, &[a]).unwrap();
        assert_abs_diff_eq!(curve.pod()[0], 0.841344746068543, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_miss_when_sigma_zero() {
        let mut fit = synthetic_fit();
        fit.sigma = 0.0;
        let s = 13.0;
        let a_low = (s - fit.beta0) / fit.beta1 - 0.01;
        let curve = berens_pod(&fit, s, &[a_low]).unwrap();
        assert_eq!(curve.pod()[0], 0.0);
    }

    #[test]
    fn pod_monotone_for_positive_slope() {
        let fit = synthetic_fit();
        let grid = linear_grid(0.1, 0.5, 101);
        let curve = berens_pod(&fit, 13.0, &grid).unwrap();
        assert!(curve.pod().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn band_collapses_when_sigma_zero() {
        let a: Vec<f64> = (0..20).map(|i| 0.1 + 0.02 * i as f64).collect();
        let y: Vec<f64> = a.iter().map(|v| 2.0 + 40.0 * v).collect();
        let fit = fit_linear(&a, &y).unwrap();
        let grid = linear_grid(0.1, 0.5, 21);
        let band = berens_pod_band(&fit, 13.0, &grid, 200, 0.95, 7).unwrap();
        for i in 0..grid.len() {
            assert_eq!(band.lower[i], band.curve.pod()[i]);
            assert_eq!(band.upper[i], band.curve.pod()[i]);
        }
    }

    #[test]
    fn band_brackets_estimate() {
        let mut rng = rng_for(977, 8);
        let a: Vec<f64> = (0..100).map(|_| 0.1 + 0.4 * rng.random::<f64>()).collect();
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                2.5 + 43.5 * ai + 1.95 * e
            })
            .collect();
        let fit = fit_linear(&a, &y).unwrap();
        let grid = linear_grid(0.1, 0.5, 51);
        let band = berens_pod_band(&fit, 13.05, &grid, 2000, 0.95, 11).unwrap();
        for i in 0..grid.len() {
            assert!(band.lower[i] <= band.curve.pod()[i]);
            assert!(band.curve.pod()[i] <= band.upper[i]);
            assert!(band.lower_one_sided[i] <= band.curve.pod()[i]);
        }
    }

    #[test]
    fn band_readout_matches_high_draw_reference() {
        let mut rng = rng_for(977, 9);
        let a: Vec<f64> = (0..100).map(|_| 0.1 + 0.4 * rng.random::<f64>()).collect();
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                2.5 + 43.5 * ai + 1.95 * e
            })
            .collect();
        let fit = fit_linear(&a, &y).unwrap();
        let grid = linear_grid(0.15, 0.45, 41);
        let s = 13.05;
        let band = berens_pod_band(&fit, s, &grid, 10_000, 0.95, 21).unwrap();
        let reference = berens_pod_band(&fit, s, &grid, 1_000_000, 0.95, 22).unwrap();
        let a90_band = a_at_level_with_confidence(&band, 0.9).unwrap();
        let a90_ref = a_at_level_with_confidence(&reference, 0.9).unwrap();
        assert!(
            (a90_band - a90_ref).abs() < 0.02,
            "{a90_band} vs {a90_ref}"
        );
    }

    #[test]
    fn band_doubling_draws_is_stable() {
        let mut rng = rng_for(977, 12);
        let a: Vec<f64> = (0..100).map(|_| 0.1 + 0.4 * rng.random::<f64>()).collect();
        let y: Vec<f64> = a
            .iter()
            .map(|ai| {
                let e: f64 = StandardNormal.sample(&mut rng);
                2.5 + 43.5 * ai + 1.95 * e
            })
            .collect();
        let fit = fit_linear(&a, &y).unwrap();
        let grid = linear_grid(0.15, 0.45, 41);
        let band1 = berens_pod_band(&fit, 13.05, &grid, 20_000, 0.95, 31).unwrap();
        let band2 = berens_pod_band(&fit, 13.05, &grid, 40_000, 0.95, 32).unwrap();
        let r1 = a_at_level_with_confidence(&band1, 0.9).unwrap();
        let r2 = a_at_level_with_confidence(&band2, 0.9).unwrap();
        assert!((r1 - r2).abs() < 0.01, "{r1} vs {r2}");
    }

    #[test]
    fn band_requires_minimum_draws() {
        let fit = synthetic_fit();
        let grid = linear_grid(0.1, 0.5, 11);
        assert!(berens_pod_band(&fit, 13.0, &grid, 99, 0.95, 1).is_err());
    }

    #[test]
    fn binomial_full_exceedance() {
        let mut fit = synthetic_fit();
        fit.residuals = vec![0.5, 1.0, 2.0];
        let s = fit.predict(0.3); // every residual pushes above s
        let pod = binomial_pod(&fit, s - 0.6, &[0.3]).unwrap();
        assert_eq!(pod.curve.pod()[0], 1.0);
        assert_eq!(pod.counts[0], 3);
    }

    #[test]
    fn binomial_strict_inequality_hand_count() {
        let mut fit = synthetic_fit();
        fit.residuals = vec![-1.0, 0.0, 1.0];
        let s = fit.predict(0.3);
        // residuals {-1, 0, 1} against threshold exactly at the prediction:
        // only +1 exceeds strictly
        let pod = binomial_pod(&fit, s, &[0.3]).unwrap();
        assert_eq!(pod.counts[0], 1);
        assert_abs_diff_eq!(pod.curve.pod()[0], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn binomial_monotone_and_matches_bruteforce() {
        let mut rng = rng_for(977, 10);
        let mut fit = synthetic_fit();
        fit.residuals = (0..60)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.95 * e
            })
            .collect();
        let grid = linear_grid(0.1, 0.5, 33);
        let pod = binomial_pod(&fit, 13.0, &grid).unwrap();
        assert!(pod.curve.pod().windows(2).all(|w| w[1] >= w[0]));
        for (i, &a) in grid.iter().enumerate() {
            let brute = fit
                .residuals
                .iter()
                .filter(|&&e| fit.predict(a) + e > 13.0)
                .count();
            assert_eq!(pod.counts[i], brute);
        }
    }

    /// Independent interval oracle: bisection on exact binomial tail sums.
    fn binomial_tail_ge(n: usize, k: usize, p: f64) -> f64 {
        // P(X >= k)
        let mut pmf = (1.0 - p).powi(n as i32);
        let mut cdf_below = 0.0;
        for i in 0..k {
            cdf_below += pmf;
            pmf *= (n - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
        }
        1.0 - cdf_below
    }

    fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn clopper_pearson_matches_tail_oracle() {
        let (lo, hi) = clopper_pearson(90, 100, 0.95).unwrap();
        // lower solves P(X >= 90 | p) = alpha/2; upper solves P(X <= 90) = alpha/2
        let oracle_lo = bisect(|p| binomial_tail_ge(100, 90, p) - 0.025, 1e-9, 1.0 - 1e-9);
        let oracle_hi = bisect(
            |p| (1.0 - binomial_tail_ge(100, 91, p)) - 0.025,
            1e-9,
            1.0 - 1e-9,
        );
        assert_abs_diff_eq!(lo, oracle_lo, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, oracle_hi, epsilon = 1e-6);
        // frozen reference values from the oracle
        assert_abs_diff_eq!(lo, 0.823752, epsilon = 5e-5);
        assert_abs_diff_eq!(hi, 0.950993, epsilon = 5e-5);
    }

    #[test]
    fn clopper_pearson_boundaries() {
        let (lo, hi) = clopper_pearson(100, 100, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.9);
        let (lo, hi) = clopper_pearson(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi < 0.1);
        assert!(clopper_pearson(101, 100, 0.95).is_err());
    }

    #[test]
    fn binomial_band_brackets_curve() {
        let mut fit = synthetic_fit();
        let mut rng = rng_for(977, 11);
        fit.residuals = (0..80)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                1.95 * e
            })
            .collect();
        let grid = linear_grid(0.1, 0.5, 21);
        let pod = binomial_pod(&fit, 13.0, &grid).unwrap();
        let band = binomial_band(&pod, 0.95).unwrap();
        for i in 0..grid.len() {
            assert!(band.lower[i] <= band.curve.pod()[i] + 1e-12);
            assert!(band.curve.pod()[i] <= band.upper[i] + 1e-12);
        }
    }
}
