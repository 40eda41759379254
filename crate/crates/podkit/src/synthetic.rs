//! Synthetic forward models standing in for an expensive field simulator,
//! with known ground truth for end-to-end validation: a linear-Gaussian
//! response, a power-law response that a Box-Cox transform linearizes
//! exactly, and a nonlinear variant with interaction terms whose Sobol'
//! indices are known in closed form.

use rand_distr::{Distribution, StandardNormal};

use crate::data::{derive_defect_size, InputSet, MarginalLaw, MetamodelFrame, SimulationDataset};
use crate::doe::sample_inputs;
use crate::error::{Error, Result};
use crate::math::rng::rng_for;
use crate::math::special::{norm_cdf, norm_ppf};

/// Response model family.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticKind {
    /// `y = beta0 + beta1 a + sigma eps`.
    LinearGaussian { beta0: f64, beta1: f64, sigma: f64 },
    /// `y = (1 + lambda (beta0 + beta1 a + sigma eps))^(1/lambda)`, so the
    /// Box-Cox transform with the true lambda linearizes it exactly.
    PowerLaw {
        lambda: f64,
        beta0: f64,
        beta1: f64,
        sigma: f64,
    },
    /// Linear trend plus nuisance terms with known variance decomposition:
    /// `y = beta0 + beta1 a + g1 x1 + g2 x2 + g3 x1 x2 + sigma eps`, where
    /// `x1, x2` are the first two nuisance coordinates normalized to
    /// [-1, 1].
    NonlinearInteraction {
        beta0: f64,
        beta1: f64,
        sigma: f64,
        gamma: (f64, f64, f64),
    },
}

/// A reproducible synthetic model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModelSpec {
    pub kind: SyntheticKind,
    pub seed: u64,
}

/// The fitted-scale parameters used as the reference regime throughout the
/// validation suites.
pub const REFERENCE_BETA0: f64 = 2.5;
pub const REFERENCE_BETA1: f64 = 43.5;
pub const REFERENCE_SIGMA: f64 = 1.95;

/// Threshold placing the true a90 of the linear-Gaussian model at
/// `a90_target`.
pub fn threshold_for_a90(beta0: f64, beta1: f64, sigma: f64, a90_target: f64) -> f64 {
    beta0 + beta1 * a90_target - norm_ppf(0.9) * sigma
}

/// Closed-form a90 of the linear-Gaussian model.
pub fn true_a90(beta0: f64, beta1: f64, sigma: f64, s: f64) -> f64 {
    (s - beta0 + norm_ppf(0.9) * sigma) / beta1
}

/// Closed-form POD of the linear-Gaussian model.
pub fn true_pod(beta0: f64, beta1: f64, sigma: f64, s: f64, a: f64) -> f64 {
    if sigma > 0.0 {
        1.0 - norm_cdf((s - beta0 - beta1 * a) / sigma)
    } else if beta0 + beta1 * a > s {
        1.0
    } else {
        0.0
    }
}

const TAG_NOISE: u64 = 0x53_59_4e;

fn normalize_nuisance(law: MarginalLaw, x: f64) -> f64 {
    match law {
        MarginalLaw::Gaussian { mean, sd } => (x - mean) / sd,
        MarginalLaw::Uniform { lo, hi } => 2.0 * (x - lo) / (hi - lo) - 1.0,
        MarginalLaw::Unit => 2.0 * x - 1.0,
    }
}

/// Evaluates the synthetic model on a design.
///
/// The defect size is derived from the dataset; the interaction variant
/// additionally reads the first two nuisance coordinates of the metamodel
/// parameterization.
pub fn evaluate(
    model: &SyntheticModelSpec,
    inputs: &InputSet,
    ds: &SimulationDataset,
) -> Result<Vec<f64>> {
    let a = defect_sizes(ds, inputs)?;
    let mut rng = rng_for(model.seed, TAG_NOISE);
    let eps: Vec<f64> = (0..ds.len()).map(|_| StandardNormal.sample(&mut rng)).collect();

    match &model.kind {
        SyntheticKind::LinearGaussian { beta0, beta1, sigma } => {
            check_sigma(*sigma)?;
            Ok(a
                .iter()
                .zip(&eps)
                .map(|(ai, e)| beta0 + beta1 * ai + sigma * e)
                .collect())
        }
        SyntheticKind::PowerLaw {
            lambda,
            beta0,
            beta1,
            sigma,
        } => {
            check_sigma(*sigma)?;
            a.iter()
                .zip(&eps)
                .enumerate()
                .map(|(i, (ai, e))| {
                    let lin = beta0 + beta1 * ai + sigma * e;
                    if lambda.abs() < 1e-6 {
                        Ok(lin.exp())
                    } else {
                        let base = 1.0 + lambda * lin;
                        if base <= 0.0 {
                            Err(Error::Spec(format!(
                                "power-law response non-positive at row {i} (1 + lambda lin = {base})"
                            )))
                        } else {
                            Ok(base.powf(1.0 / lambda))
                        }
                    }
                })
                .collect()
        }
        SyntheticKind::NonlinearInteraction {
            beta0,
            beta1,
            sigma,
            gamma,
        } => {
            check_sigma(*sigma)?;
            let frame = MetamodelFrame::from_input_set(
                inputs,
                MarginalLaw::Uniform { lo: 0.0, hi: 1.0 },
            );
            let laws = frame.nuisance_laws();
            if laws.len() < 2 {
                return Err(Error::Spec(
                    "interaction model needs at least two nuisance inputs".into(),
                ));
            }
            let rows = frame.assemble(ds, &crate::data::DefectSizeColumn { a: a.clone() })?;
            Ok(rows
                .iter()
                .zip(&eps)
                .map(|(row, e)| {
                    let x1 = normalize_nuisance(laws[0], row[1]);
                    let x2 = normalize_nuisance(laws[1], row[2]);
                    beta0 + beta1 * row[0]
                        + gamma.0 * x1
                        + gamma.1 * x2
                        + gamma.2 * x1 * x2
                        + sigma * e
                })
                .collect())
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma < 0.0 {
        return Err(Error::Spec(format!("noise sd must be >= 0, got {sigma}")));
    }
    Ok(())
}

/// Defect sizes for a dataset under an input set: the standard `P1`/`P2`
/// derivation when those columns exist, otherwise the single defect-role
/// column, otherwise the row-wise maximum of all defect-role columns.
pub fn defect_sizes(ds: &SimulationDataset, inputs: &InputSet) -> Result<Vec<f64>> {
    if ds.column_index("P1").is_some() {
        return Ok(derive_defect_size(ds)?.a);
    }
    let contributors: Vec<&str> = inputs
        .specs()
        .iter()
        .filter(|s| s.role == crate::data::Role::DefectSize)
        .map(|s| s.name.as_str())
        .collect();
    if contributors.is_empty() {
        return Err(Error::Spec(
            "no defect-size contributor among the inputs".into(),
        ));
    }
    let columns: Vec<Vec<Option<f64>>> = contributors
        .iter()
        .map(|name| ds.column(name))
        .collect::<Result<_>>()?;
    (0..ds.len())
        .map(|i| {
            let mut best: Option<f64> = None;
            for col in &columns {
                if let Some(v) = col[i] {
                    best = Some(best.map_or(v, |b| b.max(v)));
                }
            }
            let a = best.ok_or_else(|| {
                Error::Data(format!("row {i}: every defect-size cell is absent"))
            })?;
            if !(a > 0.0) {
                return Err(Error::Data(format!(
                    "row {i}: defect size must be positive, got {a}"
                )));
            }
            Ok(a)
        })
        .collect()
}

/// Samples a Sobol' design from the input set and evaluates the model on
/// it, returning a complete dataset with a `ProjY` response.
pub fn generate_dataset(
    model: &SyntheticModelSpec,
    inputs: &InputSet,
    n: usize,
) -> Result<SimulationDataset> {
    let design = sample_inputs(inputs, n)?;
    let y = evaluate(model, inputs, &design)?;
    design.with_response("ProjY", y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Family, InputSpec, Role};
    use crate::transform::apply_boxcox;
    use approx::assert_abs_diff_eq;

    fn defect_only_inputs(lo: f64, hi: f64) -> InputSet {
        InputSet::new(vec![InputSpec {
            name: "P1".into(),
            family: Family::Uniform { lo, hi },
            role: Role::DefectSize,
            second_flaw: false,
        }])
        .unwrap()
    }

    #[test]
    fn noise_free_linear_value() {
        let inputs = defect_only_inputs(0.1, 0.5);
        let ds = sample_inputs(&inputs, 3).unwrap();
        let model = SyntheticModelSpec {
            kind: SyntheticKind::LinearGaussian {
                beta0: 2.5,
                beta1: 43.5,
                sigma: 0.0,
            },
            seed: 1,
        };
        let y = evaluate(&model, &inputs, &ds).unwrap();
        // first Sobol point: P1 at the midpoint 0.3 -> y = 2.5 + 43.5 * 0.3
        assert_abs_diff_eq!(ds.rows()[0][0].unwrap(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(y[0], 15.55, epsilon = 1e-12);
    }

    #[test]
    fn power_law_is_linearized_by_its_own_lambda() {
        let inputs = defect_only_inputs(0.1, 0.5);
        let ds = sample_inputs(&inputs, 16).unwrap();
        let lin_model = SyntheticModelSpec {
            kind: SyntheticKind::LinearGaussian {
                beta0: 2.5,
                beta1: 10.0,
                sigma: 0.5,
            },
            seed: 7,
        };
        let power_model = SyntheticModelSpec {
            kind: SyntheticKind::PowerLaw {
                lambda: 0.3,
                beta0: 2.5,
                beta1: 10.0,
                sigma: 0.5,
            },
            seed: 7,
        };
        let lin = evaluate(&lin_model, &inputs, &ds).unwrap();
        let power = evaluate(&power_model, &inputs, &ds).unwrap();
        let back = apply_boxcox(&power, 0.3).unwrap();
        for (b, l) in back.iter().zip(&lin) {
            assert_abs_diff_eq!(b, l, epsilon = 1e-9);
        }
    }

    #[test]
    fn power_law_rejects_non_positive_branch() {
        let inputs = defect_only_inputs(0.1, 0.5);
        let ds = sample_inputs(&inputs, 4).unwrap();
        let model = SyntheticModelSpec {
            kind: SyntheticKind::PowerLaw {
                lambda: 1.0,
                beta0: -10.0,
                beta1: 0.1,
                sigma: 0.0,
            },
            seed: 3,
        };
        assert!(matches!(
            evaluate(&model, &inputs, &ds),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn reproducible_given_seed() {
        let inputs = defect_only_inputs(0.1, 0.5);
        let model = SyntheticModelSpec {
            kind: SyntheticKind::LinearGaussian {
                beta0: 2.5,
                beta1: 43.5,
                sigma: 1.95,
            },
            seed: 42,
        };
        let d1 = generate_dataset(&model, &inputs, 32).unwrap();
        let d2 = generate_dataset(&model, &inputs, 32).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn ground_truth_identities() {
        let s = threshold_for_a90(REFERENCE_BETA0, REFERENCE_BETA1, REFERENCE_SIGMA, 0.30);
        assert_abs_diff_eq!(
            true_a90(REFERENCE_BETA0, REFERENCE_BETA1, REFERENCE_SIGMA, s),
            0.30,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            true_pod(REFERENCE_BETA0, REFERENCE_BETA1, REFERENCE_SIGMA, s, 0.30),
            0.9,
            epsilon = 1e-12
        );
    }

    #[test]
    fn interaction_terms_have_known_variance_decomposition() {
        // estimate Sobol' indices of the nuisance part directly and compare
        // with the analytic shares
        let (g1, g2, g3) = (0.8, 0.5, 0.6);
        let f = |x: &[f64]| g1 * x[0] + g2 * x[1] + g3 * x[0] * x[1];
        let laws = vec![MarginalLaw::Uniform { lo: -1.0, hi: 1.0 }; 2];
        let names = vec!["x1".to_string(), "x2".to_string()];
        let result =
            crate::sensitivity::sobol_indices_scalar(f, &laws, &names, 1 << 14, 5).unwrap();
        // Var(x) = 1/3 for U(-1,1); Var(x1 x2) = 1/9
        let v1 = g1 * g1 / 3.0;
        let v2 = g2 * g2 / 3.0;
        let v12 = g3 * g3 / 9.0;
        let v = v1 + v2 + v12;
        assert!((result.indices[0].first_order - v1 / v).abs() < 0.02);
        assert!((result.indices[1].first_order - v2 / v).abs() < 0.02);
        assert!((result.indices[0].total - (v1 + v12) / v).abs() < 0.02);
        assert!((result.indices[1].total - (v2 + v12) / v).abs() < 0.02);
    }
}
