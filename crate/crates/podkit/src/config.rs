//! Run configuration: a single TOML file drives the whole pipeline, with
//! every Monte Carlo size, grid size and seed explicit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::InputSpec;
use crate::error::{Error, Result};

/// Estimation methods, in the progressive order they are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Berens,
    Binomial,
    Chaos,
    Kriging,
}

impl Method {
    pub const PROGRESSION: [Method; 4] = [
        Method::Berens,
        Method::Binomial,
        Method::Chaos,
        Method::Kriging,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Berens => "berens",
            Method::Binomial => "binomial",
            Method::Chaos => "chaos",
            Method::Kriging => "kriging",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "berens" => Ok(Method::Berens),
            "binomial" | "binomial-berens" => Ok(Method::Binomial),
            "chaos" => Ok(Method::Chaos),
            "kriging" => Ok(Method::Kriging),
            other => Err(Error::Config {
                field: "methods".into(),
                message: format!("unknown method `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default = "default_response")]
    pub response: String,
    /// CSV column names for the inputs; defaults to the input-spec names.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    #[serde(default)]
    pub flaw_indicator: Option<String>,
}

fn default_response() -> String {
    "ProjY".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub kind: String,
    pub n: usize,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub gamma: Option<[f64; 3]>,
}

fn default_beta0() -> f64 {
    crate::synthetic::REFERENCE_BETA0
}
fn default_beta1() -> f64 {
    crate::synthetic::REFERENCE_BETA1
}
fn default_sigma() -> f64 {
    crate::synthetic::REFERENCE_SIGMA
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_grid_points")]
    pub points: usize,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

fn default_grid_points() -> usize {
    crate::pod::DEFAULT_GRID_POINTS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: default_grid_points(),
            min: None,
            max: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxcoxConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_lambda_range")]
    pub lambda_range: [f64; 2],
}

fn default_true() -> bool {
    true
}
fn default_lambda_range() -> [f64; 2] {
    [-2.0, 2.0]
}

impl Default for BoxcoxConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda_range: default_lambda_range(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerensConfig {
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
}

fn default_n_draws() -> usize {
    10_000
}

impl Default for BerensConfig {
    fn default() -> Self {
        Self {
            n_draws: default_n_draws(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChaosConfig {
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_n_sets")]
    pub n_sets: usize,
}

fn default_degrees() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_n_mc() -> usize {
    10_000
}
fn default_n_sets() -> usize {
    150
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self {
            degrees: default_degrees(),
            n_mc: default_n_mc(),
            n_sets: default_n_sets(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrigingConfig {
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_band_x")]
    pub band_x: usize,
    #[serde(default = "default_sim_grid")]
    pub sim_grid: usize,
    #[serde(default)]
    pub nugget: bool,
}

fn default_multistart() -> usize {
    10
}
fn default_n_paths() -> usize {
    200
}
fn default_band_x() -> usize {
    100
}
fn default_sim_grid() -> usize {
    61
}

impl Default for KrigingConfig {
    fn default() -> Self {
        Self {
            multistart: default_multistart(),
            n_mc: default_n_mc(),
            n_paths: default_n_paths(),
            band_x: default_band_x(),
            sim_grid: default_sim_grid(),
            nugget: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandConfig {
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_level() -> f64 {
    0.95
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            level: default_level(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupConfig {
    pub name: String,
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityConfig {
    /// Metamodel backing the indices; defaults to kriging when fitted,
    /// otherwise chaos.
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default = "default_n_base")]
    pub n_base: usize,
    /// Fixed defect size for the pointwise indices.
    #[serde(default)]
    pub fixed_a: Option<f64>,
    /// Probability level for the inverse (detectable-size) indices.
    #[serde(default)]
    pub inverse_p: Option<f64>,
    #[serde(default)]
    pub groups: Option<Vec<GroupConfig>>,
}

fn default_n_base() -> usize {
    4096
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoeConfig {
    pub n: usize,
}

/// Full run configuration. `threshold` is the raw-unit detection threshold
/// and is mandatory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub doe: Option<DoeConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub boxcox: BoxcoxConfig,
    #[serde(default)]
    pub berens: BerensConfig,
    #[serde(default)]
    pub chaos: ChaosConfig,
    #[serde(default)]
    pub kriging: KrigingConfig,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub sensitivity: Option<SensitivityConfig>,
}

fn default_methods() -> Vec<Method> {
    Method::PROGRESSION.to_vec()
}

impl RunConfig {
    /// Parses a TOML configuration file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            message: e.to_string(),
        })
    }

    /// Structural validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config {
                field: "threshold".into(),
                message: format!("must be positive in raw units, got {}", self.threshold),
            });
        }
        if self.methods.is_empty() {
            return Err(Error::Config {
                field: "methods".into(),
                message: "at least one method is required".into(),
            });
        }
        match (&self.data, &self.synthetic) {
            (None, None) => {
                return Err(Error::Config {
                    field: "data".into(),
                    message: "either [data] or [synthetic] must be present".into(),
                })
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    field: "data".into(),
                    message: "[data] and [synthetic] are mutually exclusive".into(),
                })
            }
            _ => {}
        }
        if self.synthetic.is_some() && self.inputs.is_empty() {
            return Err(Error::Config {
                field: "inputs".into(),
                message: "synthetic generation needs input specifications".into(),
            });
        }
        if let Some(synth) = &self.synthetic {
            match synth.kind.as_str() {
                "linear-gaussian" | "power-law" | "nonlinear-interaction" => {}
                other => {
                    return Err(Error::Config {
                        field: "synthetic.kind".into(),
                        message: format!("unknown synthetic model `{other}`"),
                    })
                }
            }
            if synth.n < 3 {
                return Err(Error::Config {
                    field: "synthetic.n".into(),
                    message: "need at least 3 design points".into(),
                });
            }
        }
        if self.grid.points < 2 {
            return Err(Error::Config {
                field: "grid.points".into(),
                message: "need at least 2 grid points".into(),
            });
        }
        if let (Some(lo), Some(hi)) = (self.grid.min, self.grid.max) {
            if !(lo < hi) {
                return Err(Error::Config {
                    field: "grid".into(),
                    message: format!("grid range [{lo}, {hi}] is empty"),
                });
            }
        }
        if !(0.0 < self.band.level && self.band.level < 1.0) {
            return Err(Error::Config {
                field: "band.level".into(),
                message: format!("confidence level must lie in (0, 1), got {}", self.band.level),
            });
        }
        if self.boxcox.lambda_range[0] > self.boxcox.lambda_range[1] {
            return Err(Error::Config {
                field: "boxcox.lambda_range".into(),
                message: "empty lambda range".into(),
            });
        }
        Ok(())
    }

    /// The synthetic model described by `[synthetic]`.
    pub fn synthetic_model(&self) -> Result<crate::synthetic::SyntheticModelSpec> {
        let synth = self.synthetic.as_ref().ok_or_else(|| Error::Config {
            field: "synthetic".into(),
            message: "no [synthetic] section".into(),
        })?;
        let kind = match synth.kind.as_str() {
            "linear-gaussian" => crate::synthetic::SyntheticKind::LinearGaussian {
                beta0: synth.beta0,
                beta1: synth.beta1,
                sigma: synth.sigma,
            },
            "power-law" => crate::synthetic::SyntheticKind::PowerLaw {
                lambda: synth.lambda.unwrap_or(0.3),
                beta0: synth.beta0,
                beta1: synth.beta1,
                sigma: synth.sigma,
            },
            "nonlinear-interaction" => {
                let g = synth.gamma.unwrap_or([1.0, 0.5, 0.5]);
                crate::synthetic::SyntheticKind::NonlinearInteraction {
                    beta0: synth.beta0,
                    beta1: synth.beta1,
                    sigma: synth.sigma,
                    gamma: (g[0], g[1], g[2]),
                }
            }
            other => {
                return Err(Error::Config {
                    field: "synthetic.kind".into(),
                    message: format!("unknown synthetic model `{other}`"),
                })
            }
        };
        Ok(crate::synthetic::SyntheticModelSpec {
            kind,
            seed: self.seed,
        })
    }
}
