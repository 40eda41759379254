//! Polynomial-chaos surrogate: tensorized orthonormal bases (normalized
//! Legendre for uniform coordinates, normalized probabilists' Hermite for
//! Gaussian ones), least-squares coefficients with leave-one-out degree
//! selection, and Monte Carlo POD curves with coefficient-posterior bands.

use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared as ChiSquaredSampler, Distribution, StandardNormal};

use crate::data::{MarginalLaw, MetamodelFrame};
use crate::error::{Error, Result};
use crate::math::rng::rng_for;
use crate::math::stats::mean;
use crate::pod::{BandSource, PodBand, PodCurve, Surrogate};

/// Orthonormal polynomial basis over the metamodel coordinates, truncated
/// at a total degree.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    frame: MetamodelFrame,
    degree: usize,
    /// Multi-indices over the coordinates, graded by total degree; the
    /// first term is the constant.
    terms: Vec<Vec<usize>>,
}

/// All multi-indices of dimension `dim` with total degree <= `degree`,
/// graded by total degree then lexicographic.
fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; dim];
    for total in 0..=degree {
        fill_indices(dim, total, 0, &mut current, &mut out);
    }
    out
}

fn fill_indices(
    dim: usize,
    remaining: usize,
    pos: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if pos == dim - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill_indices(dim, remaining - k, pos + 1, current, out);
    }
}

/// Values of the normalized univariate family for one coordinate at `x`,
/// degrees 0..=max_degree.
fn univariate_values(law: MarginalLaw, x: f64, max_degree: usize) -> Vec<f64> {
    match law {
        MarginalLaw::Gaussian { mean, sd } => {
            let z = (x - mean) / sd;
            let mut values = Vec::with_capacity(max_degree + 1);
            let mut prev = 1.0; // He_0
            let mut curr = z; // He_1
            let mut factorial = 1.0f64;
            values.push(1.0);
            for k in 1..=max_degree {
                factorial *= k as f64;
                values.push(curr / factorial.sqrt());
                let next = z * curr - k as f64 * prev;
                prev = curr;
                curr = next;
            }
            values
        }
        MarginalLaw::Uniform { lo, hi } => legendre_values(2.0 * (x - lo) / (hi - lo) - 1.0, max_degree),
        MarginalLaw::Unit => legendre_values(2.0 * x - 1.0, max_degree),
    }
}

/// Normalized Legendre values sqrt(2k+1) P_k(t) on [-1, 1].
fn legendre_values(t: f64, max_degree: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(max_degree + 1);
    let mut prev = 1.0; // P_0
    let mut curr = t; // P_1
    values.push(1.0);
    for k in 1..=max_degree {
        values.push(curr * (2.0 * k as f64 + 1.0).sqrt());
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * curr - kf * prev) / (kf + 1.0);
        prev = curr;
        curr = next;
    }
    values
}

impl OrthonormalBasis {
    /// Builds the basis of total degree `degree` over the frame coordinates.
    pub fn new(frame: &MetamodelFrame, degree: usize) -> Self {
        Self {
            frame: frame.clone(),
            degree,
            terms: multi_indices(frame.dim(), degree),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis terms P.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Vec<usize>] {
        &self.terms
    }

    pub fn frame(&self) -> &MetamodelFrame {
        &self.frame
    }

    /// Evaluates every basis term at one coordinate row.
    pub fn eval_row(&self, row: &[f64]) -> Vec<f64> {
        let uni: Vec<Vec<f64>> = self
            .frame
            .vars()
            .iter()
            .zip(row)
            .map(|(var, &x)| univariate_values(var.law, x, self.degree))
            .collect();
        self.terms
            .iter()
            .map(|term| term.iter().zip(&uni).map(|(&k, u)| u[k]).product())
            .collect()
    }

    /// Design matrix of the basis over a set of rows (N x P).
    pub fn design_matrix(&self, rows: &[Vec<f64>]) -> DMatrix<f64> {
        let p = self.len();
        let mut m = DMatrix::zeros(rows.len(), p);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in self.eval_row(row).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Basis values split per term into a defect-size factor and a nuisance
    /// factor, so grids and Monte Carlo samples can be combined by one
    /// matrix product. Returns (a-degree per term, nuisance products N x P).
    fn nuisance_products(&self, x_rows: &[Vec<f64>]) -> DMatrix<f64> {
        let p = self.len();
        let mut m = DMatrix::zeros(x_rows.len(), p);
        for (j, x) in x_rows.iter().enumerate() {
            let uni: Vec<Vec<f64>> = self
                .frame
                .vars()
                .iter()
                .skip(1)
                .zip(x)
                .map(|(var, &v)| univariate_values(var.law, v, self.degree))
                .collect();
            for (k, term) in self.terms.iter().enumerate() {
                m[(j, k)] = term[1..]
                    .iter()
                    .zip(&uni)
                    .map(|(&deg, u)| u[deg])
                    .product();
            }
        }
        m
    }
}

/// Fitted chaos expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosFit {
    pub basis: OrthonormalBasis,
    pub coefficients: Vec<f64>,
    /// Residual standard deviation with the N - P divisor.
    pub sigma_eps: f64,
    /// Leave-one-out predictivity coefficient.
    pub q2: f64,
    /// (Psi^T Psi)^-1, the coefficient-posterior shape matrix.
    pub information_matrix_inverse: DMatrix<f64>,
    pub n: usize,
}

impl ChaosFit {
    /// Surrogate mean at one coordinate row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.basis
            .eval_row(row)
            .iter()
            .zip(&self.coefficients)
            .map(|(psi, c)| psi * c)
            .sum()
    }
}

impl Surrogate for ChaosFit {
    fn predictive(&self, a: f64, x: &[f64]) -> (f64, f64) {
        let row = self.basis.frame().row(a, x);
        (self.predict_row(&row), self.sigma_eps)
    }

    fn nuisance_laws(&self) -> Vec<MarginalLaw> {
        self.basis.frame().nuisance_laws()
    }
}

struct LeastSquares {
    coefficients: DVector<f64>,
    residuals: DVector<f64>,
    leverages: Vec<f64>,
    r_inverse: DMatrix<f64>,
}

fn solve_least_squares(psi: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let n = psi.nrows();
    let p = psi.ncols();
    if n <= p {
        return Err(Error::Underdetermined { n, p });
    }
    let qr = psi.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let diag_max = (0..p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() < 1e-10 * diag_max) {
        return Err(Error::SingularDesign(
            "chaos design matrix is rank deficient".into(),
        ));
    }
    let qty = q.transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;
    let residuals = y - psi * &coefficients;
    // hat diagonal h_ii = || q_i ||^2 from the thin Q
    let leverages: Vec<f64> = (0..n)
        .map(|i| (0..p).map(|j| q[(i, j)] * q[(i, j)]).sum())
        .collect();
    let r_inverse = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::SingularDesign("triangular inversion failed".into()))?;
    Ok(LeastSquares {
        coefficients,
        residuals,
        leverages,
        r_inverse,
    })
}

/// Leave-one-out predictivity coefficient via the hat-matrix shortcut,
/// `Q2 = 1 - sum((e_i / (1 - h_ii))^2) / sum((y_i - mean)^2)`.
pub fn loo_q2(rows: &[Vec<f64>], y: &[f64], basis: &OrthonormalBasis) -> Result<f64> {
    let psi = basis.design_matrix(rows);
    let yv = DVector::from_column_slice(y);
    let ls = solve_least_squares(&psi, &yv)?;
    loo_q2_from(&ls, y)
}

fn loo_q2_from(ls: &LeastSquares, y: &[f64]) -> Result<f64> {
    let y_mean = mean(y);
    let sst: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    if sst <= 0.0 {
        return Err(Error::DegenerateVariance(
            "response variance is zero; Q2 undefined".into(),
        ));
    }
    let mut press = 0.0;
    for (i, &h) in ls.leverages.iter().enumerate() {
        let denom = 1.0 - h;
        if denom < 1e-10 {
            return Err(Error::Leverage { index: i });
        }
        let e = ls.residuals[i] / denom;
        press += e * e;
    }
    Ok(1.0 - press / sst)
}

/// Fits the chaos expansion by least squares over the candidate total
/// degrees and keeps the one with the best leave-one-out Q2 (ties and
/// near-ties resolve to the lower degree).
pub fn fit_chaos(
    frame: &MetamodelFrame,
    rows: &[Vec<f64>],
    y: &[f64],
    candidate_degrees: &[usize],
) -> Result<ChaosFit> {
    if candidate_degrees.is_empty() {
        return Err(Error::InvalidArgument(
            "no candidate degrees supplied".into(),
        ));
    }
    if rows.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows for {} responses",
            rows.len(),
            y.len()
        )));
    }
    let mut degrees = candidate_degrees.to_vec();
    degrees.sort_unstable();
    degrees.dedup();

    let yv = DVector::from_column_slice(y);
    let mut best: Option<(f64, ChaosFit)> = None;
    let mut last_err: Option<Error> = None;
    for &degree in &degrees {
        let basis = OrthonormalBasis::new(frame, degree);
        let p = basis.len();
        if rows.len() <= p {
            last_err = Some(Error::Underdetermined { n: rows.len(), p });
            continue;
        }
        let psi = basis.design_matrix(rows);
        let ls = match solve_least_squares(&psi, &yv) {
            Ok(ls) => ls,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let q2 = loo_q2_from(&ls, y)?;
        let rss: f64 = ls.residuals.iter().map(|r| r * r).sum();
        let dof = (rows.len() - p) as f64;
        let sigma_eps = (rss / dof).sqrt();
        let info_inv = &ls.r_inverse * ls.r_inverse.transpose();
        let fit = ChaosFit {
            basis,
            coefficients: ls.coefficients.iter().copied().collect(),
            sigma_eps,
            q2,
            information_matrix_inverse: info_inv,
            n: rows.len(),
        };
        let better = match &best {
            None => true,
            Some((best_q2, _)) => q2 > *best_q2,
        };
        if better {
            best = Some((q2, fit));
        }
    }
    match best {
        Some((_, fit)) => Ok(fit),
        None => Err(last_err.unwrap_or_else(|| Error::Fit("no candidate degree fitted".into()))),
    }
}

const TAG_CHAOS_X: u64 = 0x43_48_01;
const TAG_CHAOS_EPS: u64 = 0x43_48_02;
const TAG_CHAOS_POST: u64 = 0x43_48_03;

/// Shared Monte Carlo sample for the chaos POD estimators: nuisance draws
/// (common random numbers across the grid) and standard-normal residual
/// seeds.
struct ChaosSample {
    nuisance_products: DMatrix<f64>,
    eps_z: Vec<f64>,
}

fn draw_sample(fit: &ChaosFit, n_mc: usize, seed: u64) -> ChaosSample {
    let laws = fit.basis.frame().nuisance_laws();
    let mut rng_x = rng_for(seed, TAG_CHAOS_X);
    let x_rows: Vec<Vec<f64>> = (0..n_mc)
        .map(|_| {
            laws.iter()
                .map(|law| {
                    let u: f64 = rand::Rng::random(&mut rng_x);
                    law.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16))
                })
                .collect()
        })
        .collect();
    let mut rng_e = rng_for(seed, TAG_CHAOS_EPS);
    let eps_z: Vec<f64> = (0..n_mc)
        .map(|_| StandardNormal.sample(&mut rng_e))
        .collect();
    ChaosSample {
        nuisance_products: fit.basis.nuisance_products(&x_rows),
        eps_z,
    }
}

/// POD curves for a batch of coefficient vectors sharing one MC sample.
fn pod_curves_for(
    fit: &ChaosFit,
    sample: &ChaosSample,
    grid: &[f64],
    coefficient_sets: &[(Vec<f64>, f64)],
    s: f64,
) -> Vec<Vec<f64>> {
    let p = fit.basis.len();
    let n_mc = sample.eps_z.len();
    // per-grid-point defect-size factors
    let a_values: Vec<Vec<f64>> = grid
        .iter()
        .map(|&a| univariate_values(fit.basis.frame().vars()[0].law, a, fit.basis.degree()))
        .collect();

    let mut curves = Vec::with_capacity(coefficient_sets.len());
    let mut w = DMatrix::zeros(grid.len(), p);
    for (coeffs, sigma) in coefficient_sets {
        for (i, a_vals) in a_values.iter().enumerate() {
            for (k, term) in fit.basis.terms().iter().enumerate() {
                w[(i, k)] = coeffs[k] * a_vals[term[0]];
            }
        }
        // predictions: grid x n_mc
        let pred = &w * sample.nuisance_products.transpose();
        let mut pod = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let mut count = 0usize;
            for j in 0..n_mc {
                if pred[(i, j)] + sigma * sample.eps_z[j] > s {
                    count += 1;
                }
            }
            pod.push(count as f64 / n_mc as f64);
        }
        curves.push(pod);
    }
    curves
}

/// Monte Carlo POD curve of the chaos surrogate: nuisance inputs and the
/// Gaussian residual are sampled jointly and the exceedance fraction is
/// reported per grid point, with its MC standard error.
///
/// The same nuisance draws are reused across the grid (common random
/// numbers), which keeps the curve smooth in `a`.
pub fn chaos_pod(fit: &ChaosFit, s: f64, grid: &[f64], n_mc: usize, seed: u64) -> Result<PodCurve> {
    if n_mc < 1000 {
        return Err(Error::InvalidArgument(format!(
            "chaos POD needs n_mc >= 1000, got {n_mc}"
        )));
    }
    let sample = draw_sample(fit, n_mc, seed);
    let sets = vec![(fit.coefficients.clone(), fit.sigma_eps)];
    let pod = pod_curves_for(fit, &sample, grid, &sets, s).pop().expect("one curve");
    let stderr: Vec<f64> = pod
        .iter()
        .map(|&p| (p * (1.0 - p) / n_mc as f64).sqrt())
        .collect();
    Ok(PodCurve::new(grid.to_vec(), pod)?.with_stderr(stderr))
}

/// Coefficient-uncertainty band: `n_sets` draws of (coefficients, sigma)
/// from the linear-regression posterior, one POD curve per draw with common
/// random numbers, and pointwise empirical quantiles. The one-sided lower
/// envelope at `level` is the conservative POD curve.
pub fn chaos_pod_band(
    fit: &ChaosFit,
    s: f64,
    grid: &[f64],
    n_sets: usize,
    n_mc: usize,
    level: f64,
    seed: u64,
) -> Result<PodBand> {
    if n_sets < 50 {
        return Err(Error::InvalidArgument(format!(
            "chaos band needs n_sets >= 50, got {n_sets}"
        )));
    }
    if n_mc < 1000 {
        return Err(Error::InvalidArgument(format!(
            "chaos band needs n_mc >= 1000, got {n_mc}"
        )));
    }
    let sample = draw_sample(fit, n_mc, seed);
    let p = fit.basis.len();
    let dof = (fit.n - p) as f64;

    let chol = nalgebra::Cholesky::new(fit.information_matrix_inverse.clone())
        .ok_or_else(|| Error::Conditioning("coefficient covariance not positive definite".into()))?;
    let l = chol.l();

    let mut rng = rng_for(seed, TAG_CHAOS_POST);
    let mut sets = Vec::with_capacity(n_sets);
    for _ in 0..n_sets {
        let sigma2 = if fit.sigma_eps > 0.0 {
            let chi2: f64 = ChiSquaredSampler::new(dof).expect("dof > 0").sample(&mut rng);
            dof * fit.sigma_eps * fit.sigma_eps / chi2
        } else {
            0.0
        };
        let sigma = sigma2.sqrt();
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let delta = &l * z * sigma;
        let coeffs: Vec<f64> = fit
            .coefficients
            .iter()
            .zip(delta.iter())
            .map(|(c, d)| c + d)
            .collect();
        sets.push((coeffs, sigma));
    }

    let estimate_pod = pod_curves_for(
        fit,
        &sample,
        grid,
        &[(fit.coefficients.clone(), fit.sigma_eps)],
        s,
    )
    .pop()
    .expect("one curve");
    let estimate = PodCurve::new(grid.to_vec(), estimate_pod)?;
    let curves = pod_curves_for(fit, &sample, grid, &sets, s);
    crate::berens::band_from_curves(estimate, &curves, level, vec![BandSource::ParameterPosterior])
}
