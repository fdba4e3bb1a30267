//! `fedkper` command line: run experiments, compare strategies, score
//! trajectory CSVs, and generate datasets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedkper::data::{generate_synthetic, save_dataset};
use fedkper::error::{Error, Result};
use fedkper::fl::Strategy;
use fedkper::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fedkper", version, about = "Deterministic federated-learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured strategy over all seeds and write artifacts.
    Run(RunArgs),
    /// Run several strategies on identical partitions and emit a report.
    Compare(CompareArgs),
    /// Score a trajectory CSV (consistency/AIPFR, BwT when history columns exist).
    Score {
        /// CSV with `round,accuracy` columns (`global_acc` accepted).
        trajectory: PathBuf,
    },
    /// Generate a synthetic dataset file.
    GenData(GenDataArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Apply the full-protocol preset (100 rounds, 10% sampling, 5 epochs,
    /// lr 0.01, alpha 0.1) before other overrides.
    #[arg(long)]
    paper: bool,
    /// Load data from this FDS1/CSV file instead of generating it.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_per_client: Option<usize>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_grad_norm: Option<f64>,
    #[arg(long)]
    lambda_cap: Option<f64>,
    /// Hidden layer widths, comma separated (e.g. 64,64).
    #[arg(long)]
    hidden: Option<String>,
    /// fedavg, fedprox, or fedkper.
    #[arg(long)]
    strategy: Option<String>,
    /// FedProx proximal coefficient.
    #[arg(long)]
    mu: Option<f64>,
    /// Seeds, comma separated (e.g. 0,1,2).
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Compute adaptive weights from on-device scores only.
    #[arg(long)]
    strict_transmission: bool,
    /// Disable parallel client training (results are identical either way).
    #[arg(long)]
    sequential: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if self.paper {
            config.apply_paper_preset();
        }
        if let Some(v) = &self.dataset {
            config.dataset = Some(v.clone());
        }
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    config.$field = v;
                }
            };
        }
        set!(classes);
        set!(dim);
        set!(per_class);
        set!(spread);
        set!(clients);
        set!(alpha);
        set!(min_per_client);
        set!(sample_fraction);
        set!(rounds);
        set!(epochs);
        set!(lr);
        set!(batch_size);
        set!(max_grad_norm);
        set!(lambda_cap);
        set!(mu);
        if let Some(v) = &self.hidden {
            config.set("hidden", v)?;
        }
        if let Some(v) = &self.strategy {
            config.strategy = v.clone();
        }
        if let Some(v) = &self.seeds {
            config.set("seeds", v)?;
        }
        if let Some(v) = &self.output_dir {
            config.output_dir = v.clone();
        }
        if self.strict_transmission {
            config.strict_transmission = true;
        }
        if self.sequential {
            config.parallel = false;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Strategies to compare, comma separated (default: fedavg,fedkper).
    #[arg(long, default_value = "fedavg,fedkper")]
    strategies: String,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (binary FDS1 layout).
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let config = args.config.build()?;
            let dir = config.resolved_output_dir();
            let aggregate = harness::run(&config, &dir)?;
            println!("{}", harness::render_report_text(&[aggregate]));
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Compare(args) => {
            let config = args.config.build()?;
            let strategies = args
                .strategies
                .split(',')
                .map(|s| {
                    let strategy: Strategy = s.trim().parse()?;
                    Ok(match strategy {
                        Strategy::FedProx { .. } => Strategy::FedProx { mu: config.mu },
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let dir = config.resolved_output_dir();
            let aggregates = harness::compare(&config, &strategies, &dir)?;
            println!("{}", harness::render_report_text(&aggregates));
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Score { trajectory } => {
            let out = harness::score(&trajectory)?;
            let text = serde_json::to_string_pretty(&out)
                .map_err(|e| Error::validation(format!("json encoding failed: {e}")))?;
            println!("{text}");
            Ok(())
        }
        Command::GenData(args) => {
            let data = generate_synthetic(
                args.classes,
                args.dim,
                args.per_class,
                args.spread,
                args.seed,
            )?;
            save_dataset(&data, &args.out)?;
            println!(
                "wrote {} samples ({} classes, dim {}) to {}",
                data.len(),
                data.class_count(),
                data.dim(),
                args.out.display()
            );
            Ok(())
        }
    }
}
