//! Gaussian-process surrogate with a linear trend in the defect size and an
//! anisotropic Matern-5/2 covariance: maximum-likelihood hyperparameters
//! (trend and variance profiled out analytically), universal-kriging
//! prediction, virtual leave-one-out Q2, Monte Carlo POD curves and
//! uncertainty bands with the Monte Carlo / Gaussian-process decomposition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{MarginalLaw, MetamodelFrame};
use crate::error::{Error, Result};
use crate::math::optimize::nelder_mead;
use crate::math::rng::rng_for;
use crate::math::special::norm_ppf;
use crate::math::stats::{mean, quantile_sorted, variance};
use crate::pod::{exceedance_probability, BandSource, PodBand, PodCurve};

/// Matern-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    let sqrt5_r = 5f64.sqrt() * r;
    (1.0 + sqrt5_r + sqrt5_r * sqrt5_r / 3.0) * (-sqrt5_r).exp()
}

/// Nugget handling during the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuggetPolicy {
    /// Deterministic simulator: no nugget, jitter only on factorization
    /// failure.
    Zero,
    /// Estimate a homoscedastic nugget ratio by maximum likelihood.
    Estimate,
}

/// Fit options; the defaults follow the standardized-unit search bounds
/// `[1e-2, 1e2]` with ten Sobol' starts.
#[derive(Debug, Clone)]
pub struct KrigingOptions {
    pub nugget: NuggetPolicy,
    pub multistart: usize,
    pub theta_bounds: (f64, f64),
    pub nugget_bounds: (f64, f64),
}

impl Default for KrigingOptions {
    fn default() -> Self {
        Self {
            nugget: NuggetPolicy::Zero,
            multistart: 10,
            theta_bounds: (1e-2, 1e2),
            nugget_bounds: (1e-8, 1e4),
        }
    }
}

/// Escalating diagonal jitter applied when the correlation matrix fails to
/// factor; relative to the unit diagonal of the correlation matrix.
const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-9, 1e-8, 1e-6];

/// Gaussian predictive distribution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

struct Standardization {
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Standardization {
    fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let mut means = vec![0.0; d];
        let mut sds = vec![0.0; d];
        for k in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            means[k] = mean(&col);
            let sd = variance(&col).sqrt();
            sds[k] = if sd > 0.0 { sd } else { 1.0 };
        }
        Self { means, sds }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, v)| (v - self.means[k]) / self.sds[k])
            .collect()
    }
}

fn scaled_distance(a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for ((x, y), t) in a.iter().zip(b).zip(theta) {
        let h = (x - y) / t;
        d2 += h * h;
    }
    d2.sqrt()
}

/// Fitted Gaussian-process surrogate.
#[derive(Debug, Clone)]
pub struct KrigingFit {
    frame: MetamodelFrame,
    /// Trend coefficients (intercept, slope on the raw defect size).
    pub trend: (f64, f64),
    /// Process variance.
    pub sigma2: f64,
    /// Lengthscales in standardized input units.
    pub lengthscales: Vec<f64>,
    /// Nugget-to-process variance ratio (0 under [`NuggetPolicy::Zero`]).
    pub nugget_ratio: f64,
    /// Diagonal jitter that was needed to factor the correlation matrix.
    pub jitter: f64,
    /// Profile log-likelihood at the optimum.
    pub log_likelihood: f64,
    /// Virtual leave-one-out predictivity coefficient.
    pub q2: f64,
    std: StandardizationState,
    x_std: Vec<Vec<f64>>,
    a_raw: Vec<f64>,
    y: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    /// C^-1 (y - F beta)
    alpha: DVector<f64>,
    /// F^T C^-1 (2 x N)
    ft_cinv: DMatrix<f64>,
    /// (F^T C^-1 F)^-1 (2 x 2)
    ftcf_inv: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct StandardizationState {
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl KrigingFit {
    pub fn frame(&self) -> &MetamodelFrame {
        &self.frame
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.x_std[0].len()
    }

    /// Lengthscales mapped back to raw input units.
    pub fn lengthscales_raw(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .zip(&self.std.sds)
            .map(|(t, sd)| t * sd)
            .collect()
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(k, v)| (v - self.std.means[k]) / self.std.sds[k])
            .collect()
    }

    /// Cross-correlation vector between one standardized point and the
    /// training set.
    fn cross_correlations(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.x_std.len(), |i, _| {
            matern52(scaled_distance(&self.x_std[i], z, &self.lengthscales))
        })
    }

    /// Universal-kriging predictive distribution at a batch of points
    /// (each row is a full metamodel coordinate vector).
    ///
    /// The variance includes the trend-estimation contribution and, when a
    /// nugget was fitted, the observation-noise term, so it describes the
    /// quantity compared against the detection threshold.
    pub fn predict(&self, points: &[Vec<f64>]) -> Result<Vec<PredictiveDistribution>> {
        let d = self.dim();
        if let Some(bad) = points.iter().position(|p| p.len() != d) {
            return Err(Error::InvalidArgument(format!(
                "point {bad} has dimension {}, expected {d}",
                points[bad].len()
            )));
        }
        let n = self.n();
        let m = points.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        // cross-correlation matrix K (N x M)
        let mut k = DMatrix::zeros(n, m);
        for (j, p) in points.iter().enumerate() {
            let z = self.standardize(p);
            for i in 0..n {
                k[(i, j)] = matern52(scaled_distance(&self.x_std[i], &z, &self.lengthscales));
            }
        }
        let l_inv_k = self
            .chol
            .l()
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Conditioning("triangular solve failed".into()))?;
        // u = f* - F^T C^-1 k  (2 x M)
        let ft_cinv_k = &self.ft_cinv * &k;
        let (beta0, beta1) = self.trend;
        let mut out = Vec::with_capacity(m);
        for (j, p) in points.iter().enumerate() {
            let a = p[0];
            let mean = beta0 + beta1 * a + k.column(j).dot(&self.alpha);
            let rc_r: f64 = l_inv_k.column(j).norm_squared();
            let u0 = 1.0 - ft_cinv_k[(0, j)];
            let u1 = a - ft_cinv_k[(1, j)];
            let trend_term = self.ftcf_inv[(0, 0)] * u0 * u0
                + 2.0 * self.ftcf_inv[(0, 1)] * u0 * u1
                + self.ftcf_inv[(1, 1)] * u1 * u1;
            let variance =
                (self.sigma2 * (1.0 + self.nugget_ratio - rc_r + trend_term)).max(0.0);
            out.push(PredictiveDistribution { mean, variance });
        }
        Ok(out)
    }

    /// Posterior covariance matrix of the process at a point batch
    /// (standardized internally). Includes the trend-estimation term and
    /// the nugget diagonal when one was fitted.
    fn posterior_covariance(&self, points: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n();
        let m = points.len();
        let z: Vec<Vec<f64>> = points.iter().map(|p| self.standardize(p)).collect();
        let mut k = DMatrix::zeros(n, m);
        for (j, zj) in z.iter().enumerate() {
            for i in 0..n {
                k[(i, j)] = matern52(scaled_distance(&self.x_std[i], zj, &self.lengthscales));
            }
        }
        let l_inv_k = self
            .chol
            .l()
            .solve_lower_triangular(&k)
            .ok_or_else(|| Error::Conditioning("triangular solve failed".into()))?;
        let ft_cinv_k = &self.ft_cinv * &k;
        // U columns: u_j = f_j - F^T C^-1 k_j
        let mut u = DMatrix::zeros(2, m);
        for (j, p) in points.iter().enumerate() {
            u[(0, j)] = 1.0 - ft_cinv_k[(0, j)];
            u[(1, j)] = p[0] - ft_cinv_k[(1, j)];
        }
        let (beta0, beta1) = self.trend;
        let mean_vec = DVector::from_fn(m, |j, _| {
            beta0 + beta1 * points[j][0] + k.column(j).dot(&self.alpha)
        });
        // prior correlations among the prediction points
        let mut cov = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let rho = matern52(scaled_distance(&z[i], &z[j], &self.lengthscales));
                cov[(i, j)] = rho;
                cov[(j, i)] = rho;
            }
        }
        let cross = l_inv_k.transpose() * &l_inv_k;
        let trend = u.transpose() * &self.ftcf_inv * &u;
        for i in 0..m {
            for j in 0..m {
                cov[(i, j)] = self.sigma2 * (cov[(i, j)] - cross[(i, j)] + trend[(i, j)]);
            }
        }
        for i in 0..m {
            cov[(i, i)] += self.sigma2 * self.nugget_ratio;
        }
        Ok((mean_vec, cov))
    }

    /// Draws joint conditional simulations of the surrogate at `points`.
    ///
    /// Small batches use an eigendecomposition with hard clamping of
    /// negligible eigenvalues (so simulations at training points reproduce
    /// the data essentially exactly); larger batches fall back to a
    /// jittered Cholesky factorization.
    pub fn conditional_paths(
        &self,
        points: &[Vec<f64>],
        n_paths: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let m = points.len();
        let (mean_vec, cov) = self.posterior_covariance(points)?;
        let factor = if m <= 512 {
            let eig = nalgebra::SymmetricEigen::new(cov);
            let lambda_max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
            let threshold = 1e-12 * lambda_max.max(self.sigma2);
            let mut factor = eig.eigenvectors;
            for j in 0..m {
                let scale = if eig.eigenvalues[j] > threshold {
                    eig.eigenvalues[j].sqrt()
                } else {
                    0.0
                };
                factor.column_mut(j).scale_mut(scale);
            }
            factor
        } else {
            let mean_diag = cov.diagonal().iter().sum::<f64>() / m as f64;
            let mut factor = None;
            for &j in &JITTER_LADDER {
                let mut jittered = cov.clone();
                for i in 0..m {
                    jittered[(i, i)] += j * mean_diag.max(self.sigma2);
                }
                if let Some(c) = Cholesky::new(jittered) {
                    factor = Some(c.unpack());
                    break;
                }
            }
            factor.ok_or_else(|| {
                Error::Conditioning("posterior covariance failed to factor".into())
            })?
        };

        let mut rng = rng_for(seed, TAG_PATHS);
        let mut paths = Vec::with_capacity(n_paths);
        for _ in 0..n_paths {
            let zvec = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let draw = &mean_vec + &factor * zvec;
            paths.push(draw.iter().copied().collect());
        }
        Ok(paths)
    }
}

impl crate::pod::Surrogate for KrigingFit {
    fn predictive(&self, a: f64, x: &[f64]) -> (f64, f64) {
        let point = self.frame.row(a, x);
        let pd = self.predict(std::slice::from_ref(&point)).expect("dimension checked")[0];
        (pd.mean, pd.variance.sqrt())
    }

    fn nuisance_laws(&self) -> Vec<MarginalLaw> {
        self.frame.nuisance_laws()
    }
}

struct GlsSolution {
    nll: f64,
    beta: (f64, f64),
    sigma2: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
}

/// Profiled negative log-likelihood at fixed lengthscales and nugget ratio:
/// trend by generalized least squares, variance in closed form.
fn profile_nll(
    x_std: &[Vec<f64>],
    a_raw: &[f64],
    y: &DVector<f64>,
    theta: &[f64],
    eta: f64,
) -> Option<GlsSolution> {
    let n = x_std.len();
    let mut corr = DMatrix::zeros(n, n);
    for i in 0..n {
        corr[(i, i)] = 1.0 + eta;
        for j in (i + 1)..n {
            let rho = matern52(scaled_distance(&x_std[i], &x_std[j], theta));
            corr[(i, j)] = rho;
            corr[(j, i)] = rho;
        }
    }
    let mut chol = None;
    let mut used_jitter = 0.0;
    for &j in &JITTER_LADDER {
        let mut c = corr.clone();
        for i in 0..n {
            c[(i, i)] += j;
        }
        if let Some(ch) = Cholesky::new(c) {
            chol = Some(ch);
            used_jitter = j;
            break;
        }
    }
    let chol = chol?;

    let f = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { a_raw[i] });
    let cinv_f = chol.solve(&f);
    let cinv_y = chol.solve(y);
    let ftcf = f.transpose() * &cinv_f; // 2x2
    let fty = f.transpose() * &cinv_y; // 2x1
    let det = ftcf[(0, 0)] * ftcf[(1, 1)] - ftcf[(0, 1)] * ftcf[(1, 0)];
    if det.abs() < 1e-300 {
        return None;
    }
    let beta0 = (ftcf[(1, 1)] * fty[0] - ftcf[(0, 1)] * fty[1]) / det;
    let beta1 = (ftcf[(0, 0)] * fty[1] - ftcf[(1, 0)] * fty[0]) / det;
    let residual = y - &f * DVector::from_column_slice(&[beta0, beta1]);
    let cinv_r = chol.solve(&residual);
    let rss = residual.dot(&cinv_r);
    let sigma2 = (rss / n as f64).max(1e-300);
    let log_det: f64 = (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
    let nf = n as f64;
    let nll = 0.5
        * (nf * sigma2.ln()
            + log_det
            + nf * (1.0 + (2.0 * std::f64::consts::PI).ln()));
    Some(GlsSolution {
        nll,
        beta: (beta0, beta1),
        sigma2,
        jitter: used_jitter,
        chol,
    })
}

/// Profile log-likelihood of given hyperparameters on a dataset, using the
/// same internal standardization as [`fit_kriging`]. Exposed for
/// diagnostics and for grid-search comparisons.
pub fn profile_log_likelihood(
    rows: &[Vec<f64>],
    y: &[f64],
    theta_std: &[f64],
    nugget_ratio: f64,
) -> Result<f64> {
    let std = Standardization::from_rows(rows);
    let x_std: Vec<Vec<f64>> = rows.iter().map(|r| std.apply(r)).collect();
    let a_raw: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let yv = DVector::from_column_slice(y);
    profile_nll(&x_std, &a_raw, &yv, theta_std, nugget_ratio)
        .map(|s| -s.nll)
        .ok_or_else(|| Error::Conditioning("correlation matrix failed to factor".into()))
}

const TAG_PATHS: u64 = 0x4b_52_01;
const TAG_KRIG_X: u64 = 0x4b_52_02;
const TAG_BAND_X: u64 = 0x4b_52_03;
const TAG_BAND_NOISE: u64 = 0x4b_52_04;

/// Fits the Gaussian process by maximum likelihood: bounded multistart over
/// log-lengthscales (and the log nugget ratio when enabled) from a Sobol'
/// design, each start polished by Nelder-Mead.
pub fn fit_kriging(
    frame: &MetamodelFrame,
    rows: &[Vec<f64>],
    y: &[f64],
    options: &KrigingOptions,
) -> Result<KrigingFit> {
    let n = rows.len();
    if n != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{n} rows for {} responses",
            y.len()
        )));
    }
    if n == 0 {
        return Err(Error::InsufficientData {
            op: "fit_kriging",
            needed: 3,
            got: 0,
        });
    }
    let d = rows[0].len();
    if n < d + 3 {
        return Err(Error::InsufficientData {
            op: "fit_kriging",
            needed: d + 3,
            got: n,
        });
    }
    if options.nugget == NuggetPolicy::Zero {
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i] == rows[j] {
                    return Err(Error::Conditioning(format!(
                        "duplicate rows {i} and {j} with zero nugget"
                    )));
                }
            }
        }
    }

    let std = Standardization::from_rows(rows);
    let x_std: Vec<Vec<f64>> = rows.iter().map(|r| std.apply(r)).collect();
    let a_raw: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let yv = DVector::from_column_slice(y);

    let (theta_lo, theta_hi) = options.theta_bounds;
    let (eta_lo, eta_hi) = options.nugget_bounds;
    let estimate_nugget = options.nugget == NuggetPolicy::Estimate;
    let search_dim = if estimate_nugget { d + 1 } else { d };

    let decode = |z: &[f64]| -> (Vec<f64>, f64) {
        let theta: Vec<f64> = z[..d].iter().map(|v| v.exp()).collect();
        let eta = if estimate_nugget { z[d].exp() } else { 0.0 };
        (theta, eta)
    };
    let objective = |z: &[f64]| -> f64 {
        for (k, v) in z.iter().enumerate() {
            let (lo, hi) = if k < d {
                (theta_lo.ln(), theta_hi.ln())
            } else {
                (eta_lo.ln(), eta_hi.ln())
            };
            if *v < lo || *v > hi {
                return f64::INFINITY;
            }
        }
        let (theta, eta) = decode(z);
        match profile_nll(&x_std, &a_raw, &yv, &theta, eta) {
            Some(sol) => sol.nll,
            None => f64::INFINITY,
        }
    };

    // Sobol' starts in log space
    let starts = crate::doe::sobol_sequence(search_dim, options.multistart.max(1))?;
    let candidates: Vec<(Vec<f64>, f64)> = starts
        .points
        .par_iter()
        .map(|point| {
            let z0: Vec<f64> = point
                .iter()
                .enumerate()
                .map(|(k, u)| {
                    let (lo, hi) = if k < d {
                        (theta_lo.ln(), theta_hi.ln())
                    } else {
                        (eta_lo.ln(), eta_hi.ln())
                    };
                    lo + u * (hi - lo)
                })
                .collect();
            let scale = 0.5;
            nelder_mead(objective, &z0, scale, 120 * search_dim, 1e-9)
        })
        .collect();

    let best = candidates
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| {
            Error::Fit("no hyperparameter start produced a finite likelihood".into())
        })?;

    let (theta, eta) = decode(&best.0);
    let sol = profile_nll(&x_std, &a_raw, &yv, &theta, eta)
        .ok_or_else(|| Error::Fit("optimum failed to refactor".into()))?;

    // F^T C^-1 and (F^T C^-1 F)^-1 for prediction
    let f = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { a_raw[i] });
    let cinv_f = sol.chol.solve(&f);
    let ft_cinv = cinv_f.transpose();
    let ftcf = f.transpose() * &cinv_f;
    let ftcf_inv = ftcf
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("trend information matrix singular".into()))?;
    let residual = &yv - &f * DVector::from_column_slice(&[sol.beta.0, sol.beta.1]);
    let alpha = sol.chol.solve(&residual);

    let mut fit = KrigingFit {
        frame: frame.clone(),
        trend: sol.beta,
        sigma2: sol.sigma2,
        lengthscales: theta,
        nugget_ratio: eta,
        jitter: sol.jitter,
        log_likelihood: -sol.nll,
        q2: f64::NAN,
        std: StandardizationState {
            means: std.means,
            sds: std.sds,
        },
        x_std,
        a_raw,
        y: y.to_vec(),
        chol: sol.chol,
        alpha,
        ft_cinv,
        ftcf_inv,
    };
    fit.q2 = virtual_loo_q2(&fit)?;
    Ok(fit)
}

/// Virtual leave-one-out Q2 with hyperparameters fixed at the full-data
/// optimum, through the bending-matrix identity
/// `e_(i) = (Q y)_i / Q_ii` with
/// `Q = C^-1 - C^-1 F (F^T C^-1 F)^-1 F^T C^-1`.
fn virtual_loo_q2(fit: &KrigingFit) -> Result<f64> {
    let n = fit.n();
    let identity = DMatrix::identity(n, n);
    let cinv = fit.chol.solve(&identity);
    let cinv_f = fit.ft_cinv.transpose(); // N x 2
    let q = &cinv - &cinv_f * &fit.ftcf_inv * cinv_f.transpose();
    let yv = DVector::from_column_slice(&fit.y);
    let qy = &q * &yv;
    let y_mean = mean(&fit.y);
    let sst: f64 = fit.y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    if sst <= 0.0 {
        return Err(Error::DegenerateVariance(
            "response variance is zero; Q2 undefined".into(),
        ));
    }
    let mut press = 0.0;
    for i in 0..n {
        let qii = q[(i, i)];
        if qii.abs() < 1e-14 {
            return Err(Error::Leverage { index: i });
        }
        let e = qy[i] / qii;
        press += e * e;
    }
    Ok(1.0 - press / sst)
}

/// Leave-one-out predictivity coefficient of a fitted surrogate.
pub fn kriging_q2(fit: &KrigingFit) -> f64 {
    fit.q2
}

fn sample_nuisance(frame: &MetamodelFrame, n: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
    let laws = frame.nuisance_laws();
    let mut rng = rng_for(seed, tag);
    (0..n)
        .map(|_| {
            laws.iter()
                .map(|law| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    law.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16))
                })
                .collect()
        })
        .collect()
}

/// Monte Carlo POD curve of the kriging surrogate:
/// the average over nuisance draws of the per-point Gaussian exceedance
/// probability, with the per-grid-point MC standard error recorded.
pub fn kriging_pod(
    fit: &KrigingFit,
    s: f64,
    grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<PodCurve> {
    if n_mc < 1000 {
        return Err(Error::InvalidArgument(format!(
            "kriging POD needs n_mc >= 1000, got {n_mc}"
        )));
    }
    let x_draws = sample_nuisance(&fit.frame, n_mc, seed, TAG_KRIG_X);
    let stats: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&a| -> Result<(f64, f64)> {
            let points: Vec<Vec<f64>> = x_draws.iter().map(|x| fit.frame.row(a, x)).collect();
            let preds = fit.predict(&points)?;
            let qs: Vec<f64> = preds
                .iter()
                .map(|pd| exceedance_probability(pd.mean, pd.variance.sqrt(), s))
                .collect();
            let p = mean(&qs);
            let se = (variance(&qs) / n_mc as f64).sqrt();
            Ok((p, se))
        })
        .collect::<Result<_>>()?;
    let pod: Vec<f64> = stats.iter().map(|(p, _)| p.clamp(0.0, 1.0)).collect();
    let stderr: Vec<f64> = stats.iter().map(|(_, se)| *se).collect();
    Ok(PodCurve::new(grid.to_vec(), pod)?.with_stderr(stderr))
}

/// Sizes of the reduced point set used by the conditional-simulation band.
#[derive(Debug, Clone)]
pub struct KrigingBandOptions {
    /// Nuisance draws shared by every path (common random numbers).
    pub band_x: usize,
    /// Maximum number of grid points carried into the joint simulation;
    /// envelopes are interpolated back to the full grid.
    pub sim_grid: usize,
}

impl Default for KrigingBandOptions {
    fn default() -> Self {
        Self {
            band_x: 100,
            sim_grid: 61,
        }
    }
}

/// The three uncertainty envelopes of the kriging POD curve.
#[derive(Debug, Clone)]
pub struct KrigingPodBand {
    /// Monte-Carlo-integration component (central-limit interval).
    pub mc: PodBand,
    /// Metamodel component from joint conditional simulations.
    pub gp: PodBand,
    /// Both sources combined.
    pub total: PodBand,
}

fn interp_envelope(sim_a: &[f64], values: &[f64], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&a| {
            if a <= sim_a[0] {
                return values[0];
            }
            if a >= *sim_a.last().unwrap() {
                return *values.last().unwrap();
            }
            let idx = sim_a.partition_point(|&v| v < a);
            let (a0, a1) = (sim_a[idx - 1], sim_a[idx]);
            let t = (a - a0) / (a1 - a0);
            values[idx - 1] * (1.0 - t) + values[idx] * t
        })
        .collect()
}

/// POD confidence band decomposed into Monte Carlo, Gaussian-process and
/// total components.
///
/// The MC envelope is the central-limit interval of the nuisance average.
/// The GP envelope comes from `n_paths` joint conditional simulations of
/// the surrogate at a reduced (grid x nuisance-draw) point set sharing one
/// nuisance sample, so the spread across paths isolates metamodel
/// uncertainty; path deviations are recentered on the plug-in estimate.
/// The total band draws fresh central-limit noise on top of each path.
pub fn kriging_pod_band(
    fit: &KrigingFit,
    s: f64,
    grid: &[f64],
    n_mc: usize,
    n_paths: usize,
    level: f64,
    seed: u64,
    options: &KrigingBandOptions,
) -> Result<KrigingPodBand> {
    if n_paths < 50 {
        return Err(Error::InvalidArgument(format!(
            "kriging band needs n_paths >= 50, got {n_paths}"
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let estimate = kriging_pod(fit, s, grid, n_mc, seed)?;
    let se = estimate.mc_stderr.clone().expect("kriging_pod records stderr");

    // Monte Carlo component
    let z_two = norm_ppf(0.5 + level / 2.0);
    let z_one = norm_ppf(level);
    let est = estimate.pod().to_vec();
    let mc_lower: Vec<f64> = est
        .iter()
        .zip(&se)
        .map(|(p, e)| (p - z_two * e).clamp(0.0, 1.0))
        .collect();
    let mc_upper: Vec<f64> = est
        .iter()
        .zip(&se)
        .map(|(p, e)| (p + z_two * e).clamp(0.0, 1.0))
        .collect();
    let mc_one_sided: Vec<f64> = est
        .iter()
        .zip(&se)
        .map(|(p, e)| (p - z_one * e).clamp(0.0, 1.0))
        .collect();
    let mc = PodBand::new(
        estimate.clone(),
        mc_lower,
        mc_upper,
        mc_one_sided,
        level,
        vec![BandSource::MonteCarlo],
    )?;

    // reduced simulation set: subsampled grid x shared nuisance draws
    let n_sim = options.sim_grid.max(2).min(grid.len());
    let sim_idx: Vec<usize> = (0..n_sim)
        .map(|k| (k as f64 * (grid.len() - 1) as f64 / (n_sim - 1) as f64).round() as usize)
        .collect();
    let sim_a: Vec<f64> = sim_idx.iter().map(|&i| grid[i]).collect();
    let x_band = sample_nuisance(&fit.frame, options.band_x, seed, TAG_BAND_X);
    let mut points = Vec::with_capacity(sim_a.len() * x_band.len());
    for &a in &sim_a {
        for x in &x_band {
            points.push(fit.frame.row(a, x));
        }
    }
    let paths = fit.conditional_paths(&points, n_paths, seed)?;

    // per-path POD curves on the simulation grid
    let nb = x_band.len() as f64;
    let mut path_curves: Vec<Vec<f64>> = Vec::with_capacity(n_paths);
    for path in &paths {
        let curve: Vec<f64> = (0..sim_a.len())
            .map(|i| {
                let base = i * x_band.len();
                let count = (0..x_band.len())
                    .filter(|&j| path[base + j] > s)
                    .count();
                count as f64 / nb
            })
            .collect();
        path_curves.push(curve);
    }
    // center the deviations on the plug-in estimate
    let path_mean: Vec<f64> = (0..sim_a.len())
        .map(|i| path_curves.iter().map(|c| c[i]).sum::<f64>() / n_paths as f64)
        .collect();
    let est_sim: Vec<f64> = sim_idx.iter().map(|&i| est[i]).collect();
    let se_sim: Vec<f64> = sim_idx.iter().map(|&i| se[i]).collect();

    let mut noise_rng = rng_for(seed, TAG_BAND_NOISE);
    let mut gp_lower = Vec::with_capacity(sim_a.len());
    let mut gp_upper = Vec::with_capacity(sim_a.len());
    let mut gp_one = Vec::with_capacity(sim_a.len());
    let mut total_lower = Vec::with_capacity(sim_a.len());
    let mut total_upper = Vec::with_capacity(sim_a.len());
    let mut total_one = Vec::with_capacity(sim_a.len());
    // fresh CLT noise per (path, sim point) for the total band
    let noise: Vec<Vec<f64>> = (0..n_paths)
        .map(|_| {
            (0..sim_a.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    z
                })
                .collect()
        })
        .collect();
    let alpha = 1.0 - level;
    for i in 0..sim_a.len() {
        let mut gp_vals: Vec<f64> = path_curves
            .iter()
            .map(|c| (est_sim[i] + c[i] - path_mean[i]).clamp(0.0, 1.0))
            .collect();
        gp_vals.sort_by(|a, b| a.total_cmp(b));
        gp_lower.push(quantile_sorted(&gp_vals, alpha / 2.0).min(est_sim[i]));
        gp_upper.push(quantile_sorted(&gp_vals, 1.0 - alpha / 2.0).max(est_sim[i]));
        gp_one.push(quantile_sorted(&gp_vals, alpha).min(est_sim[i]));

        let mut tot_vals: Vec<f64> = path_curves
            .iter()
            .zip(&noise)
            .map(|(c, z)| (est_sim[i] + c[i] - path_mean[i] + z[i] * se_sim[i]).clamp(0.0, 1.0))
            .collect();
        tot_vals.sort_by(|a, b| a.total_cmp(b));
        total_lower.push(quantile_sorted(&tot_vals, alpha / 2.0).min(est_sim[i]));
        total_upper.push(quantile_sorted(&tot_vals, 1.0 - alpha / 2.0).max(est_sim[i]));
        total_one.push(quantile_sorted(&tot_vals, alpha).min(est_sim[i]));
    }

    let expand = |vals: &[f64], bound_below: bool| -> Vec<f64> {
        let on_grid = interp_envelope(&sim_a, vals, grid);
        on_grid
            .iter()
            .zip(&est)
            .map(|(v, p)| {
                if bound_below {
                    v.min(*p).clamp(0.0, 1.0)
                } else {
                    v.max(*p).clamp(0.0, 1.0)
                }
            })
            .collect()
    };

    let gp = PodBand::new(
        estimate.clone(),
        expand(&gp_lower, true),
        expand(&gp_upper, false),
        expand(&gp_one, true),
        level,
        vec![BandSource::GaussianProcess],
    )?;
    let total = PodBand::new(
        estimate,
        expand(&total_lower, true),
        expand(&total_upper, false),
        expand(&total_one, true),
        level,
        vec![BandSource::GaussianProcess, BandSource::MonteCarlo],
    )?;

    Ok(KrigingPodBand { mc, gp, total })
}
