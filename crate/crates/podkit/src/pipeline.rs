//! Batch pipeline behind the command-line tool: dataset acquisition,
//! linearization, the progressive method cascade (Berens, Binomial-Berens,
//! chaos, kriging) with per-method artifacts, the cross-method comparison
//! table, optional sensitivity analysis, and the run manifest.
//!
//! Per-method failures do not abort the run; they are recorded and the
//! remaining methods still execute.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::berens::{self, DiagnosticsReport, LinearFit};
use crate::chaos::{self, ChaosFit};
use crate::config::{Method, RunConfig};
use crate::data::{
    load_dataset, write_dataset, CsvSchema, DefectSizeColumn, InputSet, MarginalLaw,
    MetamodelFrame, SimulationDataset,
};
use crate::error::{Error, Result};
use crate::kriging::{self, KrigingBandOptions, KrigingFit, KrigingOptions, NuggetPolicy};
use crate::pod::{
    detectability_summary, linear_grid, DetectabilitySummary, PodBand, PodCurve, Surrogate,
};
use crate::sensitivity::{self, InputGroup, NormKind};
use crate::synthetic;

/// Significance level at which the report flags violated assumptions.
const FLAG_ALPHA: f64 = 0.10;

/// Everything produced by one pipeline run.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summaries: Vec<DetectabilitySummary>,
    /// (stage name, error message) for stages that failed.
    pub failures: Vec<(String, String)>,
    pub lambda: Option<f64>,
}

impl RunArtifacts {
    /// Process exit code implied by the run: 0 clean, 1 with failures.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

struct Prepared {
    specs: InputSet,
    dataset: SimulationDataset,
    defect: DefectSizeColumn,
    grid: Vec<f64>,
    /// Transformed response and threshold actually used by the fits.
    y: Vec<f64>,
    s: f64,
    lambda: Option<f64>,
    frame: MetamodelFrame,
    rows: Vec<Vec<f64>>,
}

/// Writes a file atomically (temp file + rename) and records it.
fn atomic_write(path: &Path, content: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    files.push(path.to_path_buf());
    Ok(())
}

fn curve_csv(curve: &PodCurve) -> String {
    let mut out = String::new();
    if curve.mc_stderr.is_some() {
        out.push_str("a,pod,mc_stderr\n");
    } else {
        out.push_str("a,pod\n");
    }
    for i in 0..curve.len() {
        match &curve.mc_stderr {
            Some(se) => {
                let _ = writeln!(out, "{},{},{}", curve.grid()[i], curve.pod()[i], se[i]);
            }
            None => {
                let _ = writeln!(out, "{},{}", curve.grid()[i], curve.pod()[i]);
            }
        }
    }
    out
}

fn band_csv_rows(out: &mut String, band: &PodBand, component: Option<&str>) {
    for i in 0..band.curve.len() {
        if let Some(c) = component {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            band.curve.grid()[i],
            band.curve.pod()[i],
            band.lower[i],
            band.upper[i],
            band.lower_one_sided[i]
        );
    }
}

fn band_csv(band: &PodBand) -> String {
    let mut out = String::from("a,pod,lower,upper,lower_one_sided\n");
    band_csv_rows(&mut out, band, None);
    out
}

fn diagnostics_text(report: &DiagnosticsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "kolmogorov_smirnov_statistic = {}",
        report.kolmogorov_smirnov.statistic
    );
    let _ = writeln!(
        out,
        "kolmogorov_smirnov_p_value = {}",
        report.kolmogorov_smirnov.p_value
    );
    let _ = writeln!(
        out,
        "anderson_darling_statistic = {}",
        report.anderson_darling.statistic
    );
    let _ = writeln!(
        out,
        "anderson_darling_p_value = {}",
        report.anderson_darling.p_value
    );
    let _ = writeln!(
        out,
        "breusch_pagan_statistic = {}",
        report.breusch_pagan.statistic
    );
    let _ = writeln!(out, "breusch_pagan_p_value = {}", report.breusch_pagan.p_value);
    let _ = writeln!(
        out,
        "durbin_watson_statistic = {}",
        report.durbin_watson.statistic
    );
    let _ = writeln!(out, "durbin_watson_p_value = {}", report.durbin_watson.p_value);
    let _ = writeln!(
        out,
        "note = kolmogorov-smirnov uses the fitted (mean, sd) without small-sample correction"
    );
    out
}

fn defect_column(ds: &SimulationDataset, specs: &InputSet) -> Result<DefectSizeColumn> {
    Ok(DefectSizeColumn {
        a: synthetic::defect_sizes(ds, specs)?,
    })
}

fn prepare(config: &RunConfig, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Prepared> {
    let specs = InputSet::new(config.inputs.clone())?;

    let needs_metamodel = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::Chaos | Method::Kriging))
        || config.sensitivity.is_some();
    if needs_metamodel && specs.is_empty() {
        return Err(Error::Config {
            field: "inputs".into(),
            message: "metamodel methods need input specifications".into(),
        });
    }

    let dataset = match (&config.data, &config.synthetic) {
        (Some(data), None) => {
            let columns = data.columns.clone().unwrap_or_else(|| specs.names());
            if columns.is_empty() {
                return Err(Error::Config {
                    field: "data.columns".into(),
                    message: "no input columns declared".into(),
                });
            }
            let schema = CsvSchema {
                inputs: columns,
                response: Some(data.response.clone()),
                flaw_indicator: data.flaw_indicator.clone(),
            };
            load_dataset(&data.path, &schema)?
        }
        (None, Some(synth)) => {
            let model = config.synthetic_model()?;
            let ds = synthetic::generate_dataset(&model, &specs, synth.n)?;
            let path = out_dir.join("dataset.csv");
            write_dataset(&path, &ds)?;
            files.push(path);
            ds
        }
        _ => {
            return Err(Error::Config {
                field: "data".into(),
                message: "exactly one of [data] or [synthetic] must be present".into(),
            })
        }
    };

    let defect = defect_column(&dataset, &specs)?;
    let a_min = defect.min();
    let a_max = defect.max();
    if !(a_min < a_max) {
        return Err(Error::Data(
            "defect sizes span an empty range; POD grid undefined".into(),
        ));
    }
    let grid_lo = config.grid.min.unwrap_or(a_min);
    let grid_hi = config.grid.max.unwrap_or(a_max);
    if !(grid_lo < grid_hi) {
        return Err(Error::Config {
            field: "grid".into(),
            message: format!("grid range [{grid_lo}, {grid_hi}] is empty"),
        });
    }
    let grid = linear_grid(grid_lo, grid_hi, config.grid.points);

    let y_raw = dataset
        .response()
        .ok_or_else(|| Error::Data("dataset has no response column".into()))?
        .to_vec();

    let (y, s, lambda) = if config.boxcox.enabled {
        let fit = crate::transform::fit_boxcox(
            &defect.a,
            &y_raw,
            config.threshold,
            (config.boxcox.lambda_range[0], config.boxcox.lambda_range[1]),
        )?;
        let y = fit.apply(&y_raw)?;
        (y, fit.transformed_threshold, Some(fit.lambda))
    } else {
        (y_raw.clone(), config.threshold, None)
    };

    let frame = MetamodelFrame::from_input_set(
        &specs,
        MarginalLaw::Uniform {
            lo: a_min,
            hi: a_max,
        },
    );
    let rows = frame.assemble(&dataset, &defect)?;

    Ok(Prepared {
        specs,
        dataset,
        defect,
        grid,
        y,
        s,
        lambda,
        frame,
        rows,
    })
}

fn linear_fit_report(fit: &LinearFit, summary: &DetectabilitySummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {}", summary.method);
    let _ = writeln!(out, "n = {}", fit.n);
    let _ = writeln!(out, "beta0 = {}", fit.beta0);
    let _ = writeln!(out, "beta1 = {}", fit.beta1);
    let _ = writeln!(out, "sigma = {}", fit.sigma);
    let _ = writeln!(out, "r_squared = {}", fit.r_squared);
    let _ = writeln!(out, "a90 = {}", summary.a90);
    let _ = writeln!(out, "a90_95 = {}", summary.a90_95);
    out
}

struct MethodRun {
    summary: DetectabilitySummary,
    report_block: String,
}

#[allow(clippy::too_many_arguments)]
fn run_berens(
    prep: &Prepared,
    fit: &LinearFit,
    diagnostics: &Option<DiagnosticsReport>,
    config: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<MethodRun> {
    let curve = berens::berens_pod(fit, prep.s, &prep.grid)?;
    let band = berens::berens_pod_band(
        fit,
        prep.s,
        &prep.grid,
        config.berens.n_draws,
        config.band.level,
        config.seed,
    )?;
    let summary = detectability_summary(&band, "berens")?;

    atomic_write(&out_dir.join("berens_pod.csv"), &curve_csv(&curve), files)?;
    atomic_write(&out_dir.join("berens_band.csv"), &band_csv(&band), files)?;
    atomic_write(
        &out_dir.join("berens_fit.txt"),
        &linear_fit_report(fit, &summary),
        files,
    )?;
    let diag_text = match diagnostics {
        Some(d) => diagnostics_text(d),
        None => "note = diagnostics skipped (need at least 8 observations)\n".to_string(),
    };
    atomic_write(&out_dir.join("berens_diagnostics.txt"), &diag_text, files)?;

    let mut block = String::new();
    let _ = writeln!(block, "method: berens");
    let _ = writeln!(
        block,
        "  linearity: R^2 = {:.4} on the transformed scale",
        fit.r_squared
    );
    if let Some(d) = diagnostics {
        let _ = writeln!(
            block,
            "  residual tests (p-values): ks = {:.3}, ad = {:.3}, bp = {:.3}, dw = {:.3}",
            d.kolmogorov_smirnov.p_value,
            d.anderson_darling.p_value,
            d.breusch_pagan.p_value,
            d.durbin_watson.p_value
        );
        let mut violated = Vec::new();
        if d.kolmogorov_smirnov.p_value < FLAG_ALPHA || d.anderson_darling.p_value < FLAG_ALPHA {
            violated.push("normality");
        }
        if d.breusch_pagan.p_value < FLAG_ALPHA {
            violated.push("homoscedasticity");
        }
        if d.durbin_watson.p_value < FLAG_ALPHA {
            violated.push("non-correlation");
        }
        if violated.is_empty() {
            let _ = writeln!(block, "  assumptions: none rejected at {FLAG_ALPHA:.2}");
        } else {
            let _ = writeln!(
                block,
                "  assumptions: {} rejected at {FLAG_ALPHA:.2}; the binomial variant (and the metamodels further down) relax them",
                violated.join(", ")
            );
        }
    }
    let _ = writeln!(block, "  a90 = {:.4} mm, a90/95 = {:.4} mm", summary.a90, summary.a90_95);
    Ok(MethodRun {
        summary,
        report_block: block,
    })
}

fn run_binomial(
    prep: &Prepared,
    fit: &LinearFit,
    config: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<MethodRun> {
    let pod = berens::binomial_pod(fit, prep.s, &prep.grid)?;
    let band = berens::binomial_band(&pod, config.band.level)?;
    let summary = detectability_summary(&band, "binomial-berens")?;

    atomic_write(
        &out_dir.join("binomial_pod.csv"),
        &curve_csv(&pod.curve),
        files,
    )?;
    atomic_write(&out_dir.join("binomial_band.csv"), &band_csv(&band), files)?;
    atomic_write(
        &out_dir.join("binomial_fit.txt"),
        &linear_fit_report(fit, &summary),
        files,
    )?;

    let mut block = String::new();
    let _ = writeln!(block, "method: binomial-berens");
    let _ = writeln!(
        block,
        "  empirical residual law over {} residuals; only linearity assumed (R^2 = {:.4})",
        pod.n, fit.r_squared
    );
    let _ = writeln!(block, "  a90 = {:.4} mm, a90/95 = {:.4} mm", summary.a90, summary.a90_95);
    Ok(MethodRun {
        summary,
        report_block: block,
    })
}

fn chaos_fit_report(fit: &ChaosFit, summary: &DetectabilitySummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {}", summary.method);
    let _ = writeln!(out, "degree = {}", fit.basis.degree());
    let _ = writeln!(out, "terms = {}", fit.basis.len());
    let _ = writeln!(out, "q2 = {}", fit.q2);
    let _ = writeln!(out, "sigma_eps = {}", fit.sigma_eps);
    let names: Vec<String> = fit
        .basis
        .frame()
        .vars()
        .iter()
        .map(|v| v.name.clone())
        .collect();
    for (term, c) in fit.basis.terms().iter().zip(&fit.coefficients) {
        let label: Vec<String> = term
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(k, &d)| {
                if d == 1 {
                    names[k].clone()
                } else {
                    format!("{}^{}", names[k], d)
                }
            })
            .collect();
        let label = if label.is_empty() {
            "1".to_string()
        } else {
            label.join("*")
        };
        let _ = writeln!(out, "coefficient[{label}] = {c}");
    }
    let _ = writeln!(out, "a90 = {}", summary.a90);
    let _ = writeln!(out, "a90_95 = {}", summary.a90_95);
    let _ = writeln!(
        out,
        "note = monte carlo uses common random numbers across the defect-size grid"
    );
    out
}

fn run_chaos(
    prep: &Prepared,
    config: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(MethodRun, ChaosFit)> {
    let fit = chaos::fit_chaos(&prep.frame, &prep.rows, &prep.y, &config.chaos.degrees)?;
    let curve = chaos::chaos_pod(&fit, prep.s, &prep.grid, config.chaos.n_mc, config.seed)?;
    let band = chaos::chaos_pod_band(
        &fit,
        prep.s,
        &prep.grid,
        config.chaos.n_sets,
        config.chaos.n_mc,
        config.band.level,
        config.seed,
    )?;
    let summary = detectability_summary(&band, "chaos")?;

    atomic_write(&out_dir.join("chaos_pod.csv"), &curve_csv(&curve), files)?;
    atomic_write(&out_dir.join("chaos_band.csv"), &band_csv(&band), files)?;
    atomic_write(
        &out_dir.join("chaos_fit.txt"),
        &chaos_fit_report(&fit, &summary),
        files,
    )?;

    let mut block = String::new();
    let _ = writeln!(block, "method: chaos");
    let _ = writeln!(
        block,
        "  degree {} expansion, {} terms, leave-one-out Q^2 = {:.4}, sigma_eps = {:.4}",
        fit.basis.degree(),
        fit.basis.len(),
        fit.q2,
        fit.sigma_eps
    );
    let _ = writeln!(
        block,
        "  (assumes Gaussian expansion residuals; kriging below relaxes independence)"
    );
    let _ = writeln!(block, "  a90 = {:.4} mm, a90/95 = {:.4} mm", summary.a90, summary.a90_95);
    Ok((
        MethodRun {
            summary,
            report_block: block,
        },
        fit,
    ))
}

fn kriging_fit_report(fit: &KrigingFit, summary: &DetectabilitySummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {}", summary.method);
    let _ = writeln!(out, "beta0 = {}", fit.trend.0);
    let _ = writeln!(out, "beta1 = {}", fit.trend.1);
    let _ = writeln!(out, "sigma2 = {}", fit.sigma2);
    let names: Vec<String> = fit.frame().vars().iter().map(|v| v.name.clone()).collect();
    for ((name, std_t), raw_t) in names
        .iter()
        .zip(&fit.lengthscales)
        .zip(fit.lengthscales_raw())
    {
        let _ = writeln!(out, "lengthscale_std[{name}] = {std_t}");
        let _ = writeln!(out, "lengthscale_raw[{name}] = {raw_t}");
    }
    let _ = writeln!(out, "nugget_ratio = {}", fit.nugget_ratio);
    let _ = writeln!(out, "jitter = {}", fit.jitter);
    let _ = writeln!(out, "q2 = {}", fit.q2);
    let _ = writeln!(out, "log_likelihood = {}", fit.log_likelihood);
    let _ = writeln!(out, "a90 = {}", summary.a90);
    let _ = writeln!(out, "a90_95 = {}", summary.a90_95);
    out
}

fn run_kriging(
    prep: &Prepared,
    config: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<(MethodRun, KrigingFit)> {
    let options = KrigingOptions {
        nugget: if config.kriging.nugget {
            NuggetPolicy::Estimate
        } else {
            NuggetPolicy::Zero
        },
        multistart: config.kriging.multistart,
        ..KrigingOptions::default()
    };
    let fit = kriging::fit_kriging(&prep.frame, &prep.rows, &prep.y, &options)?;
    let curve = kriging::kriging_pod(&fit, prep.s, &prep.grid, config.kriging.n_mc, config.seed)?;
    let band = kriging::kriging_pod_band(
        &fit,
        prep.s,
        &prep.grid,
        config.kriging.n_mc,
        config.kriging.n_paths,
        config.band.level,
        config.seed,
        &KrigingBandOptions {
            band_x: config.kriging.band_x,
            sim_grid: config.kriging.sim_grid,
        },
    )?;
    // a90/95 reads the total band (both uncertainty sources)
    let summary = detectability_summary(&band.total, "kriging")?;

    atomic_write(&out_dir.join("kriging_pod.csv"), &curve_csv(&curve), files)?;
    let mut bands_text = String::from("component,a,pod,lower,upper,lower_one_sided\n");
    band_csv_rows(&mut bands_text, &band.mc, Some("mc"));
    band_csv_rows(&mut bands_text, &band.gp, Some("gp"));
    band_csv_rows(&mut bands_text, &band.total, Some("total"));
    atomic_write(&out_dir.join("kriging_band.csv"), &bands_text, files)?;
    atomic_write(
        &out_dir.join("kriging_fit.txt"),
        &kriging_fit_report(&fit, &summary),
        files,
    )?;

    let mut block = String::new();
    let _ = writeln!(block, "method: kriging");
    let _ = writeln!(
        block,
        "  linear trend + Matern-5/2 GP, leave-one-out Q^2 = {:.4}, nugget ratio = {:.3e}",
        fit.q2, fit.nugget_ratio
    );
    let _ = writeln!(
        block,
        "  band components written: mc, gp, total (a90/95 from the total envelope)"
    );
    let _ = writeln!(block, "  a90 = {:.4} mm, a90/95 = {:.4} mm", summary.a90, summary.a90_95);
    Ok((
        MethodRun {
            summary,
            report_block: block,
        },
        fit,
    ))
}

fn sobol_result_csv(result: &sensitivity::SobolResult) -> String {
    let mut out = String::from("input,first_order,first_order_stderr,total,total_stderr\n");
    for idx in &result.indices {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            idx.name, idx.first_order, idx.first_order_stderr, idx.total, idx.total_stderr
        );
    }
    out
}

fn run_sensitivity(
    prep: &Prepared,
    surrogate: &(dyn Surrogate + Sync),
    config: &RunConfig,
    out_dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<String> {
    let sens = config.sensitivity.as_ref().expect("checked by caller");
    let nuisance_names = prep.frame.nuisance_names();
    let groups: Option<Vec<InputGroup>> = match &sens.groups {
        None => None,
        Some(gs) => {
            let mut groups = Vec::new();
            for g in gs {
                let mut columns = Vec::new();
                for input in &g.inputs {
                    let idx = nuisance_names
                        .iter()
                        .position(|n| n == input || n == &format!("u_{input}"))
                        .ok_or_else(|| Error::Config {
                            field: "sensitivity.groups".into(),
                            message: format!("unknown nuisance input `{input}`"),
                        })?;
                    columns.push(idx);
                }
                groups.push(InputGroup {
                    name: g.name.clone(),
                    columns,
                });
            }
            Some(groups)
        }
    };
    let named_groups = groups.clone().unwrap_or_else(|| {
        InputGroup::singletons(&nuisance_names)
    });

    let functional = sensitivity::pod_sobol_indices(
        surrogate,
        prep.s,
        &prep.grid,
        Some(&named_groups),
        NormKind::Trapezoid,
        sens.n_base,
        config.seed,
    )?;
    let mut out = String::from("input,s_pod,t_pod\n");
    for idx in &functional.indices {
        let _ = writeln!(out, "{},{},{}", idx.name, idx.s_pod, idx.t_pod);
    }
    atomic_write(&out_dir.join("sensitivity_pod.csv"), &out, files)?;

    let mut block = String::new();
    let _ = writeln!(block, "sensitivity (POD curve, L2 over the grid):");
    let _ = writeln!(block, "  dispersion D = {:.6e}", functional.dispersion);
    for idx in &functional.indices {
        let _ = writeln!(
            block,
            "  {}: s_pod = {:.4}, t_pod = {:.4}",
            idx.name, idx.s_pod, idx.t_pod
        );
    }

    if let Some(a) = sens.fixed_a {
        let value = sensitivity::pod_value_sobol(
            surrogate,
            prep.s,
            a,
            Some(&named_groups),
            sens.n_base,
            config.seed,
        )?;
        atomic_write(
            &out_dir.join("sensitivity_value.csv"),
            &sobol_result_csv(&value),
            files,
        )?;
        let _ = writeln!(block, "  pointwise indices at a = {a} written");
    }
    if let Some(p) = sens.inverse_p {
        let inverse = sensitivity::inverse_pod_sobol(
            surrogate,
            prep.s,
            &prep.grid,
            p,
            Some(&named_groups),
            sens.n_base,
            config.seed,
        )?;
        atomic_write(
            &out_dir.join("sensitivity_inverse.csv"),
            &sobol_result_csv(&inverse.result),
            files,
        )?;
        let _ = writeln!(
            block,
            "  inverse-size indices at p = {p} written (rejection fraction {:.4})",
            inverse.rejection_fraction
        );
    }
    Ok(block)
}

#[derive(Serialize)]
struct ManifestMethod {
    name: String,
    status: String,
}

#[derive(Serialize)]
struct Manifest {
    version: String,
    seed: u64,
    threshold: f64,
    transformed_threshold: f64,
    lambda: Option<f64>,
    n_rows: usize,
    grid_points: usize,
    grid_min: f64,
    grid_max: f64,
    band_level: f64,
    methods: Vec<ManifestMethod>,
}

/// Runs the full progressive pipeline described by the configuration.
///
/// Returns `Err` only for configuration- or data-level failures; individual
/// method failures are recorded in [`RunArtifacts::failures`] while the
/// other methods still run.
pub fn execute(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("podkit-out"));
    std::fs::create_dir_all(&out_dir)?;

    let mut files = Vec::new();
    let prep = prepare(config, &out_dir, &mut files)?;

    let mut summaries = Vec::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    let mut report_blocks: Vec<String> = Vec::new();
    let mut method_status: Vec<ManifestMethod> = Vec::new();
    let mut chaos_fit: Option<ChaosFit> = None;
    let mut kriging_fit: Option<KrigingFit> = None;

    // shared regression for the Berens-family methods
    let needs_linear = config
        .methods
        .iter()
        .any(|m| matches!(m, Method::Berens | Method::Binomial));
    let linear = if needs_linear {
        Some(berens::fit_linear(&prep.defect.a, &prep.y))
    } else {
        None
    };
    let diagnostics = match &linear {
        Some(Ok(fit)) => berens::residual_diagnostics(fit).ok(),
        _ => None,
    };

    for method in Method::PROGRESSION {
        if !config.methods.contains(&method) {
            continue;
        }
        let outcome: Result<MethodRun> = match method {
            Method::Berens => match &linear {
                Some(Ok(fit)) => {
                    run_berens(&prep, fit, &diagnostics, config, &out_dir, &mut files)
                }
                Some(Err(e)) => Err(Error::Fit(format!("linear fit failed: {e}"))),
                None => unreachable!("linear fit requested for berens"),
            },
            Method::Binomial => match &linear {
                Some(Ok(fit)) => run_binomial(&prep, fit, config, &out_dir, &mut files),
                Some(Err(e)) => Err(Error::Fit(format!("linear fit failed: {e}"))),
                None => unreachable!("linear fit requested for binomial"),
            },
            Method::Chaos => run_chaos(&prep, config, &out_dir, &mut files).map(|(run, fit)| {
                chaos_fit = Some(fit);
                run
            }),
            Method::Kriging => {
                run_kriging(&prep, config, &out_dir, &mut files).map(|(run, fit)| {
                    kriging_fit = Some(fit);
                    run
                })
            }
        };
        match outcome {
            Ok(run) => {
                summaries.push(run.summary);
                report_blocks.push(run.report_block);
                method_status.push(ManifestMethod {
                    name: method.name().into(),
                    status: "ok".into(),
                });
            }
            Err(e) => {
                failures.push((method.name().into(), e.to_string()));
                report_blocks.push(format!("method: {}\n  FAILED: {e}\n", method.name()));
                method_status.push(ManifestMethod {
                    name: method.name().into(),
                    status: format!("failed: {e}"),
                });
            }
        }
    }

    // cross-method synthesis table
    let mut comparison = String::from("method,a90,a90_95\n");
    for s in &summaries {
        let _ = writeln!(comparison, "{},{},{}", s.method, s.a90, s.a90_95);
    }
    atomic_write(&out_dir.join("comparison.csv"), &comparison, &mut files)?;

    // optional sensitivity stage on the best available metamodel
    if let Some(sens) = &config.sensitivity {
        let chosen: Option<&(dyn Surrogate + Sync)> = match sens.method.as_deref() {
            Some("chaos") => chaos_fit.as_ref().map(|f| f as _),
            Some("kriging") => kriging_fit.as_ref().map(|f| f as _),
            _ => kriging_fit
                .as_ref()
                .map(|f| f as _)
                .or(chaos_fit.as_ref().map(|f| f as _)),
        };
        match chosen {
            Some(surrogate) => {
                match run_sensitivity(&prep, surrogate, config, &out_dir, &mut files) {
                    Ok(block) => report_blocks.push(block),
                    Err(e) => failures.push(("sensitivity".into(), e.to_string())),
                }
            }
            None => failures.push((
                "sensitivity".into(),
                "no fitted metamodel available (add chaos or kriging to methods)".into(),
            )),
        }
    }

    // run report
    let mut report = String::new();
    let _ = writeln!(report, "progressive POD analysis");
    let _ = writeln!(report, "========================");
    let _ = writeln!(
        report,
        "dataset: {} rows, defect sizes in [{:.4}, {:.4}] mm",
        prep.dataset.len(),
        prep.defect.min(),
        prep.defect.max()
    );
    match prep.lambda {
        Some(l) => {
            let _ = writeln!(
                report,
                "box-cox: lambda = {l:.4}, transformed threshold = {:.6}",
                prep.s
            );
        }
        None => {
            let _ = writeln!(report, "box-cox: disabled, raw threshold = {}", prep.s);
        }
    }
    let _ = writeln!(report);
    for block in &report_blocks {
        let _ = writeln!(report, "{block}");
    }
    let _ = writeln!(report, "synthesis of detectable defect sizes (mm):");
    let _ = writeln!(report, "  method            a90      a90/95");
    for s in &summaries {
        let _ = writeln!(report, "  {:<16} {:>7.4} {:>9.4}", s.method, s.a90, s.a90_95);
    }
    atomic_write(&out_dir.join("report.txt"), &report, &mut files)?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.seed,
        threshold: config.threshold,
        transformed_threshold: prep.s,
        lambda: prep.lambda,
        n_rows: prep.dataset.len(),
        grid_points: prep.grid.len(),
        grid_min: prep.grid[0],
        grid_max: *prep.grid.last().unwrap(),
        band_level: config.band.level,
        methods: method_status,
    };
    let manifest_text = toml::to_string(&manifest).map_err(|e| Error::Config {
        field: "manifest".into(),
        message: e.to_string(),
    })?;
    atomic_write(&out_dir.join("manifest.toml"), &manifest_text, &mut files)?;

    Ok(RunArtifacts {
        out_dir,
        files,
        summaries,
        failures,
        lambda: prep.lambda,
    })
}

/// Generates a quasi-Monte Carlo design (`doe` subcommand): the Sobol'
/// design mapped through the input laws, written as a response-less CSV.
pub fn generate_design(config: &RunConfig) -> Result<PathBuf> {
    let specs = InputSet::new(config.inputs.clone())?;
    if specs.is_empty() {
        return Err(Error::Config {
            field: "inputs".into(),
            message: "design generation needs input specifications".into(),
        });
    }
    let n = config
        .doe
        .as_ref()
        .map(|d| d.n)
        .or(config.synthetic.as_ref().map(|s| s.n))
        .ok_or_else(|| Error::Config {
            field: "doe.n".into(),
            message: "design size missing ([doe] n or [synthetic] n)".into(),
        })?;
    let design = crate::doe::sample_inputs(&specs, n)?;
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("podkit-out"));
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("design.csv");
    write_dataset(&path, &design)?;
    Ok(path)
}

/// Generates a synthetic dataset (`synth` subcommand).
pub fn generate_synthetic(config: &RunConfig) -> Result<PathBuf> {
    let specs = InputSet::new(config.inputs.clone())?;
    let synth = config.synthetic.as_ref().ok_or_else(|| Error::Config {
        field: "synthetic".into(),
        message: "no [synthetic] section".into(),
    })?;
    let model = config.synthetic_model()?;
    let ds = synthetic::generate_dataset(&model, &specs, synth.n)?;
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("podkit-out"));
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("dataset.csv");
    write_dataset(&path, &ds)?;
    Ok(path)
}

/// Sensitivity-only entry point (`sensitivity` subcommand): fits the
/// requested metamodel and writes the index tables without the POD-curve
/// artifacts.
pub fn execute_sensitivity(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let sens = config.sensitivity.as_ref().ok_or_else(|| Error::Config {
        field: "sensitivity".into(),
        message: "no [sensitivity] section".into(),
    })?;
    let out_dir = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("podkit-out"));
    std::fs::create_dir_all(&out_dir)?;

    let mut files = Vec::new();
    let prep = prepare(config, &out_dir, &mut files)?;

    let method = sens.method.as_deref().unwrap_or("kriging");
    let mut failures = Vec::new();
    let block = match method {
        "chaos" => {
            let fit = chaos::fit_chaos(&prep.frame, &prep.rows, &prep.y, &config.chaos.degrees)?;
            run_sensitivity(&prep, &fit, config, &out_dir, &mut files)
        }
        "kriging" => {
            let options = KrigingOptions {
                nugget: if config.kriging.nugget {
                    NuggetPolicy::Estimate
                } else {
                    NuggetPolicy::Zero
                },
                multistart: config.kriging.multistart,
                ..KrigingOptions::default()
            };
            let fit = kriging::fit_kriging(&prep.frame, &prep.rows, &prep.y, &options)?;
            run_sensitivity(&prep, &fit, config, &out_dir, &mut files)
        }
        other => {
            return Err(Error::Config {
                field: "sensitivity.method".into(),
                message: format!("unknown metamodel `{other}`"),
            })
        }
    };
    match block {
        Ok(text) => {
            atomic_write(&out_dir.join("sensitivity_report.txt"), &text, &mut files)?;
        }
        Err(e) => failures.push(("sensitivity".into(), e.to_string())),
    }

    Ok(RunArtifacts {
        out_dir,
        files,
        summaries: Vec::new(),
        failures,
        lambda: prep.lambda,
    })
}
