//! Variance-based global sensitivity analysis: Sobol' indices of scalar
//! quantities, of the whole POD curve (L2 over the defect-size grid), of
//! the detection probability at a fixed size, and of the inverse
//! detectable-size function.
//!
//! All estimators work in the independent metamodel parameterization
//! (conditional-uniform inputs enter through their u-quantile) and use the
//! pick-freeze scheme at a cost of `(d + 2) * n_base` evaluations:
//! the correlation-form estimator for first-order indices and the Jansen
//! estimator for totals, with bootstrap standard errors.

use rand::Rng;
use rayon::prelude::*;

use crate::data::MarginalLaw;
use crate::error::{Error, Result};
use crate::math::rng::rng_for;
use crate::math::stats::mean;
use crate::pod::{a_at_level, pod_x_curve, Surrogate};

const TAG_SAMPLE_A: u64 = 0x53_4f_01;
const TAG_SAMPLE_B: u64 = 0x53_4f_02;
const TAG_BOOTSTRAP: u64 = 0x53_4f_03;

const BOOTSTRAP_RESAMPLES: usize = 200;

/// A named block of input coordinates whose indices are estimated jointly
/// (a singleton per input in the default case).
#[derive(Debug, Clone, PartialEq)]
pub struct InputGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

impl InputGroup {
    /// One group per coordinate.
    pub fn singletons(names: &[String]) -> Vec<InputGroup> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| InputGroup {
                name: n.clone(),
                columns: vec![i],
            })
            .collect()
    }
}

/// First-order and total index of one input (or group), with bootstrap
/// standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolIndex {
    pub name: String,
    pub first_order: f64,
    pub first_order_stderr: f64,
    pub total: f64,
    pub total_stderr: f64,
}

/// Scalar Sobol' index estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolResult {
    pub indices: Vec<SobolIndex>,
    pub n_base: usize,
    pub estimator: &'static str,
}

/// Norm used to compare POD curves on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// L2 over the defect-size axis with trapezoidal weights (grid-density
    /// independent).
    Trapezoid,
    /// Plain Euclidean norm of the grid values.
    Unweighted,
}

/// Whole-curve POD Sobol' indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSobolIndex {
    pub name: String,
    pub s_pod: f64,
    pub t_pod: f64,
}

/// Result of [`pod_sobol_indices`]: per-input curve indices and the total
/// dispersion D that normalizes them.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSobolResult {
    pub indices: Vec<FunctionalSobolIndex>,
    pub grid: Vec<f64>,
    pub dispersion: f64,
    pub n_base: usize,
}

/// Result of [`inverse_pod_sobol`]: indices of the detectable size at a
/// probability level, with the Monte Carlo rejection bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePodSobol {
    pub result: SobolResult,
    /// Fraction of sampled nuisance rows whose conditional POD curve never
    /// attains the level.
    pub rejection_fraction: f64,
}

fn sample_matrix(laws: &[MarginalLaw], n: usize, seed: u64, tag: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, tag);
    (0..n)
        .map(|_| {
            laws.iter()
                .map(|law| {
                    let u: f64 = rng.random();
                    law.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16))
                })
                .collect()
        })
        .collect()
}

fn freeze(a: &[Vec<f64>], b: &[Vec<f64>], columns: &[usize]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| {
            let mut row = ra.clone();
            for &c in columns {
                row[c] = rb[c];
            }
            row
        })
        .collect()
}

/// Correlation-form first-order estimate on a pick-freeze pair.
fn first_order_from(yb: &[f64], yab: &[f64], idx: &[usize]) -> f64 {
    let n = idx.len() as f64;
    let mut cross = 0.0;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for &j in idx {
        cross += yb[j] * yab[j];
        sum += 0.5 * (yb[j] + yab[j]);
        sq += 0.5 * (yb[j] * yb[j] + yab[j] * yab[j]);
    }
    let m = sum / n;
    let denom = sq / n - m * m;
    if denom <= 0.0 {
        return 0.0;
    }
    (cross / n - m * m) / denom
}

/// Jansen total-effect estimate.
fn total_from(ya: &[f64], yab: &[f64], idx: &[usize], variance: f64) -> f64 {
    let n = idx.len() as f64;
    let mut acc = 0.0;
    for &j in idx {
        let d = ya[j] - yab[j];
        acc += d * d;
    }
    acc / (2.0 * n * variance)
}

fn pooled_variance(ya: &[f64], yb: &[f64], idx: &[usize]) -> f64 {
    let n = (2 * idx.len()) as f64;
    let mut sum = 0.0;
    for &j in idx {
        sum += ya[j] + yb[j];
    }
    let m = sum / n;
    let mut var = 0.0;
    for &j in idx {
        var += (ya[j] - m) * (ya[j] - m) + (yb[j] - m) * (yb[j] - m);
    }
    var / (n - 1.0)
}

/// Shared estimator core: evaluations already available for A, B and every
/// frozen block.
fn indices_from_evaluations(
    groups: &[InputGroup],
    ya: &[f64],
    yb: &[f64],
    yabs: &[Vec<f64>],
    valid: &[usize],
    n_base: usize,
    seed: u64,
) -> Result<SobolResult> {
    let var = pooled_variance(ya, yb, valid);
    let scale = mean(&valid.iter().map(|&j| ya[j]).collect::<Vec<_>>())
        .abs()
        .max(1.0);
    if var <= 1e-12 * scale * scale {
        return Err(Error::DegenerateVariance(format!(
            "output variance {var} too small for Sobol' estimation"
        )));
    }

    let mut rng = rng_for(seed, TAG_BOOTSTRAP);
    let n_valid = valid.len();
    let mut indices = Vec::with_capacity(groups.len());
    for (g, group) in groups.iter().enumerate() {
        let s = first_order_from(yb, &yabs[g], valid);
        let t = total_from(ya, &yabs[g], valid, var);
        // bootstrap over rows (common resample per replicate)
        let mut s_boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut t_boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let resample: Vec<usize> = (0..n_valid)
                .map(|_| valid[rng.random_range(0..n_valid)])
                .collect();
            let var_b = pooled_variance(ya, yb, &resample).max(1e-300);
            s_boot.push(first_order_from(yb, &yabs[g], &resample));
            t_boot.push(total_from(ya, &yabs[g], &resample, var_b));
        }
        indices.push(SobolIndex {
            name: group.name.clone(),
            first_order: s,
            first_order_stderr: crate::math::stats::variance(&s_boot).sqrt(),
            total: t,
            total_stderr: crate::math::stats::variance(&t_boot).sqrt(),
        });
    }
    Ok(SobolResult {
        indices,
        n_base,
        estimator: "pick-freeze (correlation form / jansen), bootstrap stderr",
    })
}

/// Scalar Sobol' indices of `evaluator` over independent inputs with the
/// given marginal laws, for arbitrary input groups.
pub fn sobol_indices_grouped<F>(
    evaluator: F,
    laws: &[MarginalLaw],
    groups: &[InputGroup],
    n_base: usize,
    seed: u64,
) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_base < 256 {
        return Err(Error::InvalidArgument(format!(
            "sobol estimation needs n_base >= 256, got {n_base}"
        )));
    }
    if groups.is_empty() || laws.is_empty() {
        return Err(Error::InvalidArgument("no inputs to analyze".into()));
    }
    for group in groups {
        if group.columns.iter().any(|&c| c >= laws.len()) {
            return Err(Error::InvalidArgument(format!(
                "group `{}` references a column out of range",
                group.name
            )));
        }
    }
    let a = sample_matrix(laws, n_base, seed, TAG_SAMPLE_A);
    let b = sample_matrix(laws, n_base, seed, TAG_SAMPLE_B);
    let eval_all = |rows: &[Vec<f64>]| -> Vec<f64> {
        rows.par_iter().map(|r| evaluator(r)).collect()
    };
    let ya = eval_all(&a);
    let yb = eval_all(&b);
    let yabs: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| eval_all(&freeze(&a, &b, &g.columns)))
        .collect();
    let valid: Vec<usize> = (0..n_base).collect();
    indices_from_evaluations(groups, &ya, &yb, &yabs, &valid, n_base, seed)
}

/// Scalar Sobol' indices with one group per input.
pub fn sobol_indices_scalar<F>(
    evaluator: F,
    laws: &[MarginalLaw],
    names: &[String],
    n_base: usize,
    seed: u64,
) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let groups = InputGroup::singletons(names);
    sobol_indices_grouped(evaluator, laws, &groups, n_base, seed)
}

fn trapezoid_weights(grid: &[f64], norm: NormKind) -> Vec<f64> {
    match norm {
        NormKind::Unweighted => vec![1.0; grid.len()],
        NormKind::Trapezoid => {
            let n = grid.len();
            let mut w = vec![0.0; n];
            for i in 0..n {
                let left = if i == 0 { grid[0] } else { grid[i - 1] };
                let right = if i == n - 1 { grid[n - 1] } else { grid[i + 1] };
                w[i] = 0.5 * (right - left);
            }
            w
        }
    }
}

fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), wi)| x * y * wi).sum()
}

/// Whole-curve POD Sobol' indices:
/// `S_i = E<POD_Xi - POD, POD_Xi' - POD> / D` and the Jansen analog for
/// totals, with the L2 norm discretized on the grid.
pub fn pod_sobol_indices<S: Surrogate + Sync + ?Sized>(
    surrogate: &S,
    s: f64,
    grid: &[f64],
    groups: Option<&[InputGroup]>,
    norm: NormKind,
    n_base: usize,
    seed: u64,
) -> Result<FunctionalSobolResult> {
    if n_base < 256 {
        return Err(Error::InvalidArgument(format!(
            "pod sobol estimation needs n_base >= 256, got {n_base}"
        )));
    }
    let laws = surrogate.nuisance_laws();
    if laws.is_empty() {
        return Err(Error::DegenerateDispersion(
            "surrogate has no nuisance inputs".into(),
        ));
    }
    let names: Vec<String> = (0..laws.len()).map(|i| format!("x{i}")).collect();
    let default_groups = InputGroup::singletons(&names);
    let groups = groups.unwrap_or(&default_groups);

    let a_mat = sample_matrix(&laws, n_base, seed, TAG_SAMPLE_A);
    let b_mat = sample_matrix(&laws, n_base, seed, TAG_SAMPLE_B);
    let curve_of = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(pod_x_curve(surrogate, x, s, grid)?.pod().to_vec())
    };
    let curves_of = |rows: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        rows.par_iter().map(|r| curve_of(r)).collect()
    };
    let ca = curves_of(&a_mat)?;
    let cb = curves_of(&b_mat)?;
    let cabs: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| curves_of(&freeze(&a_mat, &b_mat, &g.columns)))
        .collect::<Result<_>>()?;

    let w = trapezoid_weights(grid, norm);
    // unconditional curve estimate: mean over the A and B samples
    let g_len = grid.len();
    let mut pod_bar = vec![0.0; g_len];
    for c in ca.iter().chain(cb.iter()) {
        for (acc, v) in pod_bar.iter_mut().zip(c) {
            *acc += v / (2.0 * n_base as f64);
        }
    }

    let centered = |c: &[f64]| -> Vec<f64> {
        c.iter().zip(&pod_bar).map(|(v, m)| v - m).collect()
    };
    // dispersion D = E || POD - POD_X ||^2, pooled over A and B
    let mut dispersion = 0.0;
    for c in ca.iter().chain(cb.iter()) {
        let d = centered(c);
        dispersion += weighted_dot(&d, &d, &w) / (2.0 * n_base as f64);
    }
    if dispersion <= 1e-12 {
        return Err(Error::DegenerateDispersion(format!(
            "POD-curve dispersion {dispersion} is numerically zero"
        )));
    }

    let mut indices = Vec::with_capacity(groups.len());
    for (g, group) in groups.iter().enumerate() {
        let mut s_num = 0.0;
        let mut t_num = 0.0;
        for j in 0..n_base {
            let db = centered(&cb[j]);
            let dab = centered(&cabs[g][j]);
            s_num += weighted_dot(&db, &dab, &w) / n_base as f64;
            let diff: Vec<f64> = ca[j]
                .iter()
                .zip(&cabs[g][j])
                .map(|(x, y)| x - y)
                .collect();
            t_num += weighted_dot(&diff, &diff, &w) / (2.0 * n_base as f64);
        }
        indices.push(FunctionalSobolIndex {
            name: group.name.clone(),
            s_pod: s_num / dispersion,
            t_pod: t_num / dispersion,
        });
    }
    Ok(FunctionalSobolResult {
        indices,
        grid: grid.to_vec(),
        dispersion,
        n_base,
    })
}

/// Sobol' indices of the detection probability at one fixed defect size:
/// the scalar machinery applied to `x -> POD_X(a)`.
pub fn pod_value_sobol<S: Surrogate + Sync + ?Sized>(
    surrogate: &S,
    s: f64,
    a: f64,
    groups: Option<&[InputGroup]>,
    n_base: usize,
    seed: u64,
) -> Result<SobolResult> {
    let laws = surrogate.nuisance_laws();
    let names: Vec<String> = (0..laws.len()).map(|i| format!("x{i}")).collect();
    let default_groups = InputGroup::singletons(&names);
    let groups = groups.unwrap_or(&default_groups);
    let evaluator = |x: &[f64]| -> f64 {
        let (mean, sd) = surrogate.predictive(a, x);
        crate::pod::exceedance_probability(mean, sd, s)
    };
    sobol_indices_grouped(evaluator, &laws, groups, n_base, seed)
}

/// Sobol' indices of the inverse POD function `POD_X^-1(p)`: the defect
/// size at which the conditional curve first attains `p`.
///
/// Rows whose conditional curve never attains `p` anywhere on the grid are
/// rejected consistently across all pick-freeze blocks; more than 20%
/// rejection aborts with a coverage error.
pub fn inverse_pod_sobol<S: Surrogate + Sync + ?Sized>(
    surrogate: &S,
    s: f64,
    grid: &[f64],
    p: f64,
    groups: Option<&[InputGroup]>,
    n_base: usize,
    seed: u64,
) -> Result<InversePodSobol> {
    if n_base < 256 {
        return Err(Error::InvalidArgument(format!(
            "sobol estimation needs n_base >= 256, got {n_base}"
        )));
    }
    let laws = surrogate.nuisance_laws();
    if laws.is_empty() {
        return Err(Error::DegenerateVariance(
            "surrogate has no nuisance inputs".into(),
        ));
    }
    let names: Vec<String> = (0..laws.len()).map(|i| format!("x{i}")).collect();
    let default_groups = InputGroup::singletons(&names);
    let groups = groups.unwrap_or(&default_groups);

    let a_mat = sample_matrix(&laws, n_base, seed, TAG_SAMPLE_A);
    let b_mat = sample_matrix(&laws, n_base, seed, TAG_SAMPLE_B);
    let eval = |x: &[f64]| -> Option<f64> {
        let curve = pod_x_curve(surrogate, x, s, grid).ok()?;
        a_at_level(&curve, p).ok()
    };
    let eval_all = |rows: &[Vec<f64>]| -> Vec<Option<f64>> {
        rows.par_iter().map(|r| eval(r)).collect()
    };
    let ya = eval_all(&a_mat);
    let yb = eval_all(&b_mat);
    let yabs: Vec<Vec<Option<f64>>> = groups
        .iter()
        .map(|g| eval_all(&freeze(&a_mat, &b_mat, &g.columns)))
        .collect();

    let valid: Vec<usize> = (0..n_base)
        .filter(|&j| {
            ya[j].is_some() && yb[j].is_some() && yabs.iter().all(|col| col[j].is_some())
        })
        .collect();
    let rejected = n_base - valid.len();
    let rejection_fraction = rejected as f64 / n_base as f64;
    if rejection_fraction > 0.2 {
        return Err(Error::Coverage {
            rejected,
            total: n_base,
        });
    }

    let unwrap_all = |ys: &[Option<f64>]| -> Vec<f64> {
        ys.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    };
    let result = indices_from_evaluations(
        groups,
        &unwrap_all(&ya),
        &unwrap_all(&yb),
        &yabs.iter().map(|c| unwrap_all(c)).collect::<Vec<_>>(),
        &valid,
        n_base,
        seed,
    )?;
    Ok(InversePodSobol {
        result,
        rejection_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::linear_grid;

    fn uniform_laws(d: usize, lo: f64, hi: f64) -> Vec<MarginalLaw> {
        vec![MarginalLaw::Uniform { lo, hi }; d]
    }

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn single_active_input() {
        let laws = uniform_laws(3, 0.0, 1.0);
        let result =
            sobol_indices_scalar(|x| 3.0 * x[0], &laws, &names(3), 1 << 12, 7).unwrap();
        assert!((result.indices[0].first_order - 1.0).abs() < 0.05);
        assert!((result.indices[0].total - 1.0).abs() < 0.05);
        for idx in &result.indices[1..] {
            assert!(idx.first_order.abs() < 0.05, "{idx:?}");
            assert!(idx.total.abs() < 0.05, "{idx:?}");
        }
    }

    #[test]
    fn additive_gaussian_model_matches_analytic_ratios() {
        let laws = vec![
            MarginalLaw::Gaussian { mean: 0.0, sd: 1.0 },
            MarginalLaw::Gaussian { mean: 0.0, sd: 1.0 },
        ];
        let result =
            sobol_indices_scalar(|x| x[0] + 2.0 * x[1], &laws, &names(2), 1 << 14, 9).unwrap();
        assert!((result.indices[0].first_order - 0.2).abs() < 0.02);
        assert!((result.indices[1].first_order - 0.8).abs() < 0.02);
        // additive model: S == T within noise
        for idx in &result.indices {
            assert!((idx.first_order - idx.total).abs() < 3.0 * (idx.first_order_stderr + idx.total_stderr) + 0.02);
        }
    }

    /// Ishigami analytic indices for a = 7, b = 0.1.
    fn ishigami(x: &[f64]) -> f64 {
        let (a, b) = (7.0, 0.1);
        x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
    }

    fn ishigami_analytic() -> (f64, f64, f64, f64) {
        let (a, b) = (7.0f64, 0.1f64);
        let pi = std::f64::consts::PI;
        let v1 = 0.5 * (1.0 + b * pi.powi(4) / 5.0).powi(2);
        let v2 = a * a / 8.0;
        let v13 = b * b * pi.powi(8) * 8.0 / 225.0;
        let v = v1 + v2 + v13;
        (v1 / v, v2 / v, 0.0, (v13) / v)
    }

    #[test]
    fn ishigami_matches_analytic_values() {
        let pi = std::f64::consts::PI;
        let laws = uniform_laws(3, -pi, pi);
        let result = sobol_indices_scalar(ishigami, &laws, &names(3), 1 << 14, 11).unwrap();
        let (s1, s2, s3, t3) = ishigami_analytic();
        assert!((result.indices[0].first_order - s1).abs() < 0.02, "{result:?}");
        assert!((result.indices[1].first_order - s2).abs() < 0.02);
        assert!((result.indices[2].first_order - s3).abs() < 0.02);
        assert!((result.indices[2].total - t3).abs() < 0.02);
    }

    #[test]
    fn first_order_sum_bounded_by_one() {
        let laws = uniform_laws(3, 0.0, 1.0);
        let result = sobol_indices_scalar(
            |x| x[0] * x[1] + x[2] + 0.3 * x[0] * x[2],
            &laws,
            &names(3),
            1 << 13,
            13,
        )
        .unwrap();
        let sum: f64 = result.indices.iter().map(|i| i.first_order).sum();
        let se: f64 = result.indices.iter().map(|i| i.first_order_stderr).sum();
        assert!(sum <= 1.0 + 3.0 * se, "sum = {sum}, se = {se}");
    }

    #[test]
    fn location_shift_leaves_indices_unchanged() {
        let laws = uniform_laws(2, 0.0, 1.0);
        let base =
            sobol_indices_scalar(|x| x[0] + 3.0 * x[1], &laws, &names(2), 1 << 12, 17).unwrap();
        let shifted =
            sobol_indices_scalar(|x| 42.0 + x[0] + 3.0 * x[1], &laws, &names(2), 1 << 12, 17)
                .unwrap();
        for (a, b) in base.indices.iter().zip(&shifted.indices) {
            assert!((a.first_order - b.first_order).abs() < 1e-9);
            assert!((a.total - b.total).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let laws = uniform_laws(2, 0.0, 1.0);
        let err = sobol_indices_scalar(|_| 5.0, &laws, &names(2), 1 << 10, 19).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
    }

    #[test]
    fn deterministic_given_seed() {
        let laws = uniform_laws(2, 0.0, 1.0);
        let r1 = sobol_indices_scalar(|x| x[0] * x[1], &laws, &names(2), 1 << 10, 23).unwrap();
        let r2 = sobol_indices_scalar(|x| x[0] * x[1], &laws, &names(2), 1 << 10, 23).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn grouped_indices_pool_variance_shares() {
        let laws = uniform_laws(3, -1.0, 1.0);
        let groups = vec![
            InputGroup {
                name: "x12".into(),
                columns: vec![0, 1],
            },
            InputGroup {
                name: "x3".into(),
                columns: vec![2],
            },
        ];
        let result =
            sobol_indices_grouped(|x| x[0] + x[1] + 2.0 * x[2], &laws, &groups, 1 << 13, 29)
                .unwrap();
        // additive variances 1/3 + 1/3 vs 4/3: group share = 2/6, x3 = 4/6
        assert!((result.indices[0].first_order - 1.0 / 3.0).abs() < 0.03, "{result:?}");
        assert!((result.indices[1].first_order - 2.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn double_loop_oracle_agrees() {
        // brute-force conditional-variance estimation on a two-input model
        let laws = uniform_laws(2, 0.0, 1.0);
        let f = |x: &[f64]| x[0].powi(2) + 0.5 * x[1];
        let result = sobol_indices_scalar(f, &laws, &names(2), 1 << 13, 31).unwrap();

        let mut rng = rng_for(31, 999);
        let outer = 300;
        let inner = 300;
        let mut cond_means = [Vec::new(), Vec::new()];
        let mut all = Vec::new();
        for _ in 0..outer {
            let x0: f64 = rng.random();
            let x1: f64 = rng.random();
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            for _ in 0..inner {
                let u0: f64 = rng.random();
                let u1: f64 = rng.random();
                m0 += f(&[x0, u1]) / inner as f64;
                m1 += f(&[u0, x1]) / inner as f64;
                all.push(f(&[u0, u1]));
            }
            cond_means[0].push(m0);
            cond_means[1].push(m1);
        }
        let v = crate::math::stats::variance(&all);
        for k in 0..2 {
            let s_brute = crate::math::stats::variance(&cond_means[k]) / v;
            assert!(
                (result.indices[k].first_order - s_brute).abs() < 0.05,
                "input {k}: {} vs {s_brute}",
                result.indices[k].first_order
            );
        }
    }

    /// Test surrogate: mean = a + weights . x with constant predictive sd.
    struct LinearSurrogate {
        weights: Vec<f64>,
        sd: f64,
        laws: Vec<MarginalLaw>,
    }

    impl Surrogate for LinearSurrogate {
        fn predictive(&self, a: f64, x: &[f64]) -> (f64, f64) {
            let mean = a + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            (mean, self.sd)
        }
        fn nuisance_laws(&self) -> Vec<MarginalLaw> {
            self.laws.clone()
        }
    }

    #[test]
    fn pod_sobol_single_active_input() {
        let surrogate = LinearSurrogate {
            weights: vec![0.8, 0.0, 0.0],
            sd: 0.1,
            laws: uniform_laws(3, -1.0, 1.0),
        };
        let grid = linear_grid(-1.5, 1.5, 61);
        let result =
            pod_sobol_indices(&surrogate, 0.0, &grid, None, NormKind::Trapezoid, 1 << 11, 37)
                .unwrap();
        assert!((result.indices[0].s_pod - 1.0).abs() < 0.05, "{result:?}");
        assert!((result.indices[0].t_pod - 1.0).abs() < 0.05);
        for idx in &result.indices[1..] {
            assert!(idx.s_pod.abs() < 0.05);
            assert!(idx.t_pod.abs() < 0.05);
        }
    }

    #[test]
    fn pod_sobol_degenerate_when_nuisance_inert() {
        let surrogate = LinearSurrogate {
            weights: vec![0.0, 0.0],
            sd: 0.1,
            laws: uniform_laws(2, -1.0, 1.0),
        };
        let grid = linear_grid(-1.0, 1.0, 31);
        let err = pod_sobol_indices(&surrogate, 0.0, &grid, None, NormKind::Trapezoid, 1 << 10, 41)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateDispersion(_)));
    }

    #[test]
    fn pod_sobol_stable_under_grid_refinement() {
        let surrogate = LinearSurrogate {
            weights: vec![0.5, 0.9],
            sd: 0.2,
            laws: uniform_laws(2, -1.0, 1.0),
        };
        let coarse = linear_grid(-2.0, 2.0, 51);
        let fine = linear_grid(-2.0, 2.0, 101);
        let r1 = pod_sobol_indices(&surrogate, 0.0, &coarse, None, NormKind::Trapezoid, 1 << 11, 43)
            .unwrap();
        let r2 = pod_sobol_indices(&surrogate, 0.0, &fine, None, NormKind::Trapezoid, 1 << 11, 43)
            .unwrap();
        for (a, b) in r1.indices.iter().zip(&r2.indices) {
            assert!((a.s_pod - b.s_pod).abs() < 0.02);
            assert!((a.t_pod - b.t_pod).abs() < 0.02);
        }
    }

    #[test]
    fn pod_sobol_ranking_matches_integrated_scalar_oracle() {
        let surrogate = LinearSurrogate {
            weights: vec![0.3, 1.1],
            sd: 0.2,
            laws: uniform_laws(2, -1.0, 1.0),
        };
        let grid = linear_grid(-2.0, 2.0, 61);
        let functional =
            pod_sobol_indices(&surrogate, 0.0, &grid, None, NormKind::Trapezoid, 1 << 11, 47)
                .unwrap();
        // brute-force comparison quantity: the integrated conditional curve
        let w = trapezoid_weights(&grid, NormKind::Trapezoid);
        let integrated = |x: &[f64]| -> f64 {
            let curve = pod_x_curve(&surrogate, x, 0.0, &grid).unwrap();
            weighted_dot(curve.pod(), &vec![1.0; grid.len()], &w)
        };
        let scalar = sobol_indices_scalar(
            integrated,
            &uniform_laws(2, -1.0, 1.0),
            &names(2),
            1 << 12,
            47,
        )
        .unwrap();
        // input 1 dominates in both views
        assert!(functional.indices[1].s_pod > functional.indices[0].s_pod);
        assert!(scalar.indices[1].first_order > scalar.indices[0].first_order);
    }

    #[test]
    fn pod_value_sobol_in_transition_region() {
        let surrogate = LinearSurrogate {
            weights: vec![1.0, 0.0],
            sd: 0.05,
            laws: uniform_laws(2, -1.0, 1.0),
        };
        let result = pod_value_sobol(&surrogate, 0.0, 0.0, None, 1 << 12, 53).unwrap();
        assert!((result.indices[0].first_order - 1.0).abs() < 0.05, "{result:?}");
        assert!(result.indices[1].first_order.abs() < 0.05);
    }

    #[test]
    fn pod_value_sobol_saturated_is_degenerate() {
        let surrogate = LinearSurrogate {
            weights: vec![1.0, 0.0],
            sd: 0.0,
            laws: uniform_laws(2, -1.0, 1.0),
        };
        // far below every threshold: POD_X identically zero
        let err = pod_value_sobol(&surrogate, 0.0, -50.0, None, 1 << 10, 59).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)));
    }

    #[test]
    fn pod_value_matches_direct_evaluator() {
        let surrogate = LinearSurrogate {
            weights: vec![0.7, 0.4],
            sd: 0.3,
            laws: uniform_laws(2, -1.0, 1.0),
        };
        let a = 0.2;
        let via_pod = pod_value_sobol(&surrogate, 0.0, a, None, 1 << 11, 61).unwrap();
        let direct = sobol_indices_scalar(
            |x| {
                let (m, sd) = surrogate.predictive(a, x);
                crate::pod::exceedance_probability(m, sd, 0.0)
            },
            &uniform_laws(2, -1.0, 1.0),
            &names(2),
            1 << 11,
            61,
        )
        .unwrap();
        for (p, d) in via_pod.indices.iter().zip(&direct.indices) {
            assert!((p.first_order - d.first_order).abs() < 1e-12);
            assert!((p.total - d.total).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_pod_explicit_inverse() {
        // POD_X(a) = indicator(a > x0): the inverse at any level is x0
        let surrogate = LinearSurrogate {
            weights: vec![-1.0, 0.0],
            sd: 0.0,
            laws: uniform_laws(2, 0.2, 0.8),
        };
        let grid = linear_grid(0.0, 1.0, 201);
        let out = inverse_pod_sobol(&surrogate, 0.0, &grid, 0.9, None, 1 << 12, 67).unwrap();
        assert!(out.rejection_fraction < 1e-12);
        assert!(
            (out.result.indices[0].first_order - 1.0).abs() < 0.05,
            "{:?}",
            out.result
        );
        assert!(out.result.indices[1].first_order.abs() < 0.05);
    }

    #[test]
    fn inverse_pod_coverage_error_when_level_unreachable() {
        // curves that never attain the level for most draws
        let surrogate = LinearSurrogate {
            weights: vec![-1.0, 0.0],
            sd: 0.0,
            laws: uniform_laws(2, 5.0, 9.0),
        };
        let grid = linear_grid(0.0, 1.0, 51);
        let err = inverse_pod_sobol(&surrogate, 0.0, &grid, 0.9, None, 1 << 10, 71).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn inverse_pod_double_loop_oracle() {
        // mean = a - (0.6 x0 + 0.3 x1), sd = 0: inverse at p is exactly
        // 0.6 x0 + 0.3 x1 (up to grid resolution)
        let surrogate = LinearSurrogate {
            weights: vec![-0.6, -0.3],
            sd: 0.0,
            laws: uniform_laws(2, 0.1, 0.9),
        };
        let grid = linear_grid(0.0, 1.0, 401);
        let out = inverse_pod_sobol(&surrogate, 0.0, &grid, 0.9, None, 1 << 12, 73).unwrap();
        // analytic additive shares: 0.36 / (0.36 + 0.09), 0.09 / 0.45
        assert!(
            (out.result.indices[0].first_order - 0.8).abs() < 0.05,
            "{:?}",
            out.result
        );
        assert!((out.result.indices[1].first_order - 0.2).abs() < 0.05);
    }
}
