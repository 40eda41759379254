//! Shared POD-curve machinery: grids, curve and band containers,
//! detectable-size summaries, curve inversion and conditional POD curves.

use crate::data::MarginalLaw;
use crate::error::{Error, Result};
use crate::math::special::norm_cdf;

/// Number of grid points used by default (equally spaced over the observed
/// defect-size range).
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Equally spaced grid of `n` defect sizes spanning `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo < hi);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Source of the uncertainty captured by a band envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSource {
    /// Posterior of the regression parameters (Berens and chaos bands).
    ParameterPosterior,
    /// Exact binomial (Clopper-Pearson) count intervals.
    Binomial,
    /// Monte Carlo integration error over the nuisance inputs.
    MonteCarlo,
    /// Gaussian-process (metamodel) uncertainty via conditional simulation.
    GaussianProcess,
}

impl std::fmt::Display for BandSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BandSource::ParameterPosterior => "parameter-posterior",
            BandSource::Binomial => "binomial",
            BandSource::MonteCarlo => "mc",
            BandSource::GaussianProcess => "gp",
        };
        f.write_str(s)
    }
}

/// POD values over a strictly increasing defect-size grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PodCurve {
    grid: Vec<f64>,
    pod: Vec<f64>,
    /// Per-point Monte Carlo standard error, when the curve was estimated by
    /// sampling.
    pub mc_stderr: Option<Vec<f64>>,
}

impl PodCurve {
    /// Validates lengths, the [0, 1] range and grid monotonicity.
    pub fn new(grid: Vec<f64>, pod: Vec<f64>) -> Result<Self> {
        if grid.len() != pod.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} points, pod has {}",
                grid.len(),
                pod.len()
            )));
        }
        if grid.is_empty() {
            return Err(Error::InvalidArgument("empty POD grid".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "POD grid must be strictly increasing".into(),
            ));
        }
        if let Some(bad) = pod.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!(
                "POD value {} at grid index {bad} outside [0, 1]",
                pod[bad]
            )));
        }
        Ok(Self {
            grid,
            pod,
            mc_stderr: None,
        })
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Self {
        debug_assert_eq!(stderr.len(), self.grid.len());
        self.mc_stderr = Some(stderr);
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn pod(&self) -> &[f64] {
        &self.pod
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Pointwise confidence envelopes around a POD curve.
///
/// `lower`/`upper` are the two-sided envelopes at `level`;
/// `lower_one_sided` is the one-sided lower curve at the same confidence
/// (the curve such that POD exceeds it with probability `level`), which is
/// what the `a90/95` summary inverts.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBand {
    pub curve: PodCurve,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_one_sided: Vec<f64>,
    pub level: f64,
    pub sources: Vec<BandSource>,
}

impl PodBand {
    /// Validates envelope ordering (`lower <= pod <= upper`, all in [0,1]).
    pub fn new(
        curve: PodCurve,
        lower: Vec<f64>,
        upper: Vec<f64>,
        lower_one_sided: Vec<f64>,
        level: f64,
        sources: Vec<BandSource>,
    ) -> Result<Self> {
        let n = curve.len();
        if lower.len() != n || upper.len() != n || lower_one_sided.len() != n {
            return Err(Error::InvalidArgument(
                "band envelopes must match the curve length".into(),
            ));
        }
        if !(0.0 < level && level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence level must lie in (0, 1), got {level}"
            )));
        }
        for i in 0..n {
            let p = curve.pod()[i];
            let ok = (0.0..=1.0).contains(&lower[i])
                && (0.0..=1.0).contains(&upper[i])
                && lower[i] <= p + 1e-12
                && p <= upper[i] + 1e-12;
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "band ordering violated at grid index {i}: {} <= {} <= {}",
                    lower[i], p, upper[i]
                )));
            }
        }
        Ok(Self {
            curve,
            lower,
            upper,
            lower_one_sided,
            level,
            sources,
        })
    }
}

/// Detectable-size summary for one estimation method.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectabilitySummary {
    /// Smallest size detected with 90% probability (mm).
    pub a90: f64,
    /// Its conservative counterpart from the one-sided lower band (mm).
    pub a90_95: f64,
    pub method: String,
}

/// Smallest `a` at which the curve reaches probability `p`.
///
/// The first grid point attaining `p` is refined by linear interpolation on
/// the up-crossing segment. A degenerate 0-to-1 jump carries no slope
/// information and returns the attaining grid point itself. Non-monotone
/// curves are inverted at their first up-crossing.
pub fn a_at_level(curve: &PodCurve, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "probability level must lie in [0, 1], got {p}"
        )));
    }
    let grid = curve.grid();
    let pod = curve.pod();
    let first = pod.iter().position(|&v| v >= p);
    let Some(i) = first else {
        let max_pod = pod.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NotAttained { level: p, max_pod });
    };
    if i == 0 {
        return Ok(grid[0]);
    }
    let (p0, p1) = (pod[i - 1], pod[i]);
    if p0 <= 0.0 && p1 >= 1.0 {
        // degenerate 0-to-1 jump: no slope information to interpolate
        return Ok(grid[i]);
    }
    let t = (p - p0) / (p1 - p0);
    Ok(grid[i - 1] + t * (grid[i] - grid[i - 1]))
}

/// [`a_at_level`] applied to the one-sided lower envelope of a band.
pub fn a_at_level_with_confidence(band: &PodBand, p: f64) -> Result<f64> {
    let lower = PodCurve::new(band.curve.grid().to_vec(), band.lower_one_sided.clone())?;
    a_at_level(&lower, p)
}

/// Builds the per-method detectability summary (a90 from the estimate,
/// a90/95 from the one-sided lower envelope).
pub fn detectability_summary(band: &PodBand, method: &str) -> Result<DetectabilitySummary> {
    let a90 = a_at_level(&band.curve, 0.9)?;
    let a90_95 = a_at_level_with_confidence(band, 0.9)?;
    Ok(DetectabilitySummary {
        a90,
        a90_95,
        method: method.to_string(),
    })
}

/// A fitted surrogate able to produce the Gaussian predictive distribution
/// of the (transformed) response at a full input point.
///
/// Implemented by the chaos fit (predictive sd is the residual sd) and the
/// kriging fit (predictive sd is the kriging sd); test doubles implement it
/// directly.
pub trait Surrogate {
    /// Predictive mean and standard deviation at defect size `a` and
    /// nuisance coordinates `x` (metamodel parameterization).
    fn predictive(&self, a: f64, x: &[f64]) -> (f64, f64);

    /// Marginal laws of the nuisance coordinates.
    fn nuisance_laws(&self) -> Vec<MarginalLaw>;
}

/// Conditional POD curve at a frozen nuisance realization:
/// `POD_X(a) = 1 - Phi((s - mean(a, x)) / sd(a, x))`, with the indicator
/// limit when the predictive sd vanishes.
pub fn pod_x_curve<S: Surrogate + ?Sized>(
    surrogate: &S,
    x: &[f64],
    s: f64,
    grid: &[f64],
) -> Result<PodCurve> {
    let pod: Vec<f64> = grid
        .iter()
        .map(|&a| {
            let (mean, sd) = surrogate.predictive(a, x);
            exceedance_probability(mean, sd, s)
        })
        .collect();
    PodCurve::new(grid.to_vec(), pod)
}

/// P(N(mean, sd^2) > s), degenerating to the indicator when sd = 0.
pub fn exceedance_probability(mean: f64, sd: f64, s: f64) -> f64 {
    if sd > 0.0 {
        1.0 - norm_cdf((s - mean) / sd)
    } else if mean > s {
        1.0
    } else {
        0.0
    }
}
