use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecglite::eval::LeadSubset;
use ecglite_cli::config::{Overrides, PipelineConfig, DATASET_ROOT_ENV};
use ecglite_cli::{commands, CliError};

/// ECG normal/abnormal classification pipeline.
#[derive(Parser, Debug)]
#[command(name = "ecglite", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML pipeline config; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// PTB-XL root (the directory holding ptbxl_database.csv).
    #[arg(long, global = true)]
    dataset_root: Option<PathBuf>,
    /// 100 or 500.
    #[arg(long, global = true)]
    resolution: Option<u32>,
    /// I, limb3, limb6, all, or a comma-separated lead list.
    #[arg(long, global = true)]
    leads: Option<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic dataset in the PTB-XL layout.
    Synth {
        #[arg(long, default_value_t = 200)]
        records: usize,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
    },
    /// Label records and build the fold split.
    Ingest,
    /// Condition every record into the cache.
    Preprocess {
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit the network and write the F32 model, checkpoint and history.
    Train,
    /// Rewrite the F32 model with F16 payloads.
    Quantize {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Metrics and confusion matrices on the test split.
    Evaluate {
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Score a single WFDB record.
    Infer {
        #[arg(long)]
        model: PathBuf,
        /// Record base path, with or without .hea.
        #[arg(long)]
        record: PathBuf,
    },
    /// Regenerate figures from earlier stages.
    Report {
        #[arg(long)]
        record_id: Option<u32>,
    },
}

fn resolve(common: &Common) -> Result<PipelineConfig, CliError> {
    let leads = common
        .leads
        .as_deref()
        .map(|s| s.parse::<LeadSubset>())
        .transpose()
        .map_err(|e| CliError::Config(format!("leads: {e}")))?;
    let overrides = Overrides {
        dataset_root: common.dataset_root.clone(),
        resolution: common.resolution,
        leads,
        output_dir: common.output_dir.clone(),
        cache_dir: common.cache_dir.clone(),
        seed: common.seed,
        epochs: common.epochs,
        batch_size: common.batch_size,
    };
    let env_root = std::env::var_os(DATASET_ROOT_ENV).map(PathBuf::from);
    PipelineConfig::load(common.config.as_deref())?.resolve(&overrides, env_root)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Synth { records, data_seed } => {
            let m = commands::synth(&cfg, records, data_seed)?;
            println!(
                "wrote {} records to {}",
                m.summary["records"],
                cfg.dataset_root()?.display()
            );
        }
        Command::Ingest => {
            commands::ingest(&cfg)?;
        }
        Command::Preprocess { jobs } => {
            commands::preprocess(&cfg, jobs)?;
        }
        Command::Train => {
            commands::train(&cfg)?;
        }
        Command::Quantize { model } => {
            let m = commands::quantize(&cfg, model.as_deref())?;
            println!(
                "f32 {} bytes, f16 {} bytes",
                m.summary["f32_bytes"], m.summary["f16_bytes"]
            );
        }
        Command::Evaluate { models } => {
            commands::evaluate(&cfg, &models)?;
            print!(
                "{}",
                std::fs::read_to_string(cfg.output_dir.join("metrics.csv")).unwrap_or_default()
            );
        }
        Command::Infer { model, record } => {
            let (r, _) = commands::infer(&cfg, &model, &record)?;
            println!("probability {:.6} class {}", r.probability, r.label.name());
        }
        Command::Report { record_id } => {
            commands::report(&cfg, record_id)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
