//! Batch command-line front end: design generation, synthetic datasets,
//! the full progressive POD pipeline and sensitivity-only runs, all driven
//! by one TOML configuration file.
//!
//! Exit codes: 0 success, 1 when a method (or the sensitivity stage)
//! failed, 2 for configuration or data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use podkit::config::{Method, RunConfig};
use podkit::pipeline;

#[derive(Parser)]
#[command(name = "podkit", version, about = "Probability-of-detection curve estimation and sensitivity analysis from simulated inspection responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the quasi-Monte Carlo design (no responses).
    Doe(CommonArgs),
    /// Generate a synthetic dataset from the configured forward model.
    Synth(CommonArgs),
    /// Run the progressive POD pipeline.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated subset of methods (berens, binomial, chaos,
        /// kriging); defaults to the configuration.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Compute sensitivity indices only.
    Sensitivity(CommonArgs),
}

fn load_config(common: &CommonArgs) -> podkit::Result<RunConfig> {
    let mut config = RunConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    Ok(config)
}

fn config_failure(e: podkit::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Doe(common) => match load_config(&common).and_then(|c| pipeline::generate_design(&c)) {
            Ok(path) => {
                println!("design written to {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(e),
        },
        Command::Synth(common) => {
            match load_config(&common).and_then(|c| pipeline::generate_synthetic(&c)) {
                Ok(path) => {
                    println!("dataset written to {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => config_failure(e),
            }
        }
        Command::Run { common, methods } => {
            let mut config = match load_config(&common) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            if let Some(methods) = methods {
                let parsed: podkit::Result<Vec<Method>> =
                    methods.iter().map(|m| m.parse()).collect();
                match parsed {
                    Ok(ms) => config.methods = ms,
                    Err(e) => return config_failure(e),
                }
            }
            match pipeline::execute(&config) {
                Ok(artifacts) => {
                    for s in &artifacts.summaries {
                        println!(
                            "{}: a90 = {:.4} mm, a90/95 = {:.4} mm",
                            s.method, s.a90, s.a90_95
                        );
                    }
                    for (stage, message) in &artifacts.failures {
                        eprintln!("{stage} failed: {message}");
                    }
                    println!(
                        "{} files written to {}",
                        artifacts.files.len(),
                        artifacts.out_dir.display()
                    );
                    ExitCode::from(artifacts.exit_code() as u8)
                }
                Err(e) => config_failure(e),
            }
        }
        Command::Sensitivity(common) => {
            let config = match load_config(&common) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            match pipeline::execute_sensitivity(&config) {
                Ok(artifacts) => {
                    for (stage, message) in &artifacts.failures {
                        eprintln!("{stage} failed: {message}");
                    }
                    println!(
                        "{} files written to {}",
                        artifacts.files.len(),
                        artifacts.out_dir.display()
                    );
                    ExitCode::from(artifacts.exit_code() as u8)
                }
                Err(e) => config_failure(e),
            }
        }
    }
}
