use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ehfl::config::Config;
use ehfl::scheduler::PolicyKind;
use ehfl::sweep::{run_sweep, write_run, Grid};
use ehfl::{run_to_completion, EhflError};

/// Environment variable that overrides the output directory.
const OUTPUT_ENV: &str = "EHFL_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "ehfl",
    version,
    about = "Energy-harvesting federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation.
    Run(ConfigArgs),
    /// Run a Cartesian grid of simulations.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        policies: Option<Vec<PolicyKind>>,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        alphas: Option<Vec<f64>>,
        #[arg(long = "p-bcs", value_delimiter = ',', num_args = 0..)]
        p_bcs: Option<Vec<f64>>,
        /// Seed-axis coordinates.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        seeds: Option<Vec<u64>>,
    },
    /// Check a configuration and print the resolved values.
    Validate(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// One flag per configuration key.
#[derive(Args, Serialize, Default)]
struct Overrides {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<PresetArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_clients: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    slots_per_epoch: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p_bc: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    e_max: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    e_init: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples_per_client: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    classes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_layer: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<InitArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    class_spread: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test_per_class: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<PolicyKind>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    selection: Option<SelectionArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data_file: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    allow_long_training: Option<bool>,
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum InitArg {
    Zeros,
    Uniform,
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SelectionArg {
    TopK,
    Proportional,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config, EhflError> {
        let overrides = toml::Table::try_from(&self.overrides).map_err(|e| EhflError::Config {
            key: "<flags>".into(),
            reason: e.to_string(),
        })?;
        match &self.config {
            Some(path) => Config::load(path, overrides),
            None => Config::from_tables(toml::Table::new(), overrides),
        }
    }
}

fn output_dir(config: &Config) -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

const EXIT_RUN_FAILURE: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;

fn exit_for(err: &EhflError) -> ExitCode {
    match err {
        EhflError::Config { .. } | EhflError::DatasetFormat(_) | EhflError::Partition(_) => {
            ExitCode::from(EXIT_CONFIG_ERROR)
        }
        _ => ExitCode::from(EXIT_RUN_FAILURE),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(args) => match args.resolve() {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG_ERROR)
            }
        },
        Command::Run(args) => {
            let cfg = match args.resolve() {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG_ERROR);
                }
            };
            let dir = output_dir(&cfg);
            let result = run_to_completion(&cfg).and_then(|run| write_run(&dir, &run).map(|_| run));
            match result {
                Ok(run) => {
                    let last = run.final_metrics();
                    println!(
                        "{}: epochs={} macro_f1={:.4} mean_vaoi={:.3} cum_energy={} ({:.1}s) -> {}",
                        run.label.run_id,
                        run.metrics.len(),
                        last.macro_f1,
                        last.mean_vaoi,
                        last.cum_energy,
                        run.elapsed_secs,
                        dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
        Command::Sweep {
            config,
            policies,
            alphas,
            p_bcs,
            seeds,
        } => {
            let base = match config.resolve() {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG_ERROR);
                }
            };
            let single = Grid::single(&base);
            let grid = Grid {
                policies: policies.unwrap_or(single.policies),
                alphas: alphas.unwrap_or(single.alphas),
                p_bcs: p_bcs.unwrap_or(single.p_bcs),
                seeds: seeds.unwrap_or(single.seeds),
            };
            let dir = output_dir(&base);
            match run_sweep(&grid, &base, &dir) {
                Ok(report) => {
                    println!(
                        "{} runs, {} failed -> {}",
                        report.runs.len() + report.failures.len(),
                        report.failures.len(),
                        report.merged_csv.display()
                    );
                    for (cfg, e) in &report.failures {
                        eprintln!("failed: seed {} policy {}: {e}", cfg.seed, cfg.policy);
                    }
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
    }
}
