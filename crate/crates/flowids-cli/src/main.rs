//! `flowids` command-line interface.
//!
//! One binary, five subcommands covering the experiment lifecycle:
//! `preprocess` raw CSVs into model-ready splits, `train` a variant,
//! `evaluate` saved weights, `ablate` all four variants, and `benchmark`
//! single-instance inference latency.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 data/IO errors,
//! 4 shape mismatches, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use flowids::datapipe::{BalanceMethod, BalanceOrder};
use flowids::error::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "flowids",
    version,
    about = "Hybrid deep-learning intrusion detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every random stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<unix-seconds>-<command>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainingArgs {
    /// Architecture variant 1..=4.
    #[arg(long)]
    variant: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Expected feature count; errors if the dataset disagrees.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a raw CSV and emit balanced, scaled train/val splits.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
        /// Raw input CSV.
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
        /// Schema TOML for the CSV.
        #[arg(long, value_name = "FILE")]
        schema: Option<PathBuf>,
        /// Balancing method: none, smote, or random.
        #[arg(long)]
        balance: Option<String>,
        /// before_split (default) or train_only.
        #[arg(long)]
        balance_order: Option<String>,
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Disable min-max feature scaling.
        #[arg(long)]
        no_scale: bool,
        #[arg(long)]
        smote_k: Option<usize>,
    },
    /// Train one variant on a preprocessed directory.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory produced by `preprocess`.
        #[arg(long, value_name = "DIR")]
        prep: PathBuf,
        #[command(flatten)]
        training: TrainingArgs,
    },
    /// Evaluate saved weights on the validation split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "DIR")]
        prep: PathBuf,
        /// Weights file from `train`.
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Train and score all four variants with one seed and dataset.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "DIR")]
        prep: PathBuf,
        #[command(flatten)]
        training: TrainingArgs,
    },
    /// Measure single-instance inference latency of saved weights.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "DIR")]
        prep: PathBuf,
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn parse_balance(s: &str) -> Result<BalanceMethod> {
    match s {
        "none" => Ok(BalanceMethod::None),
        "smote" => Ok(BalanceMethod::Smote),
        "random" => Ok(BalanceMethod::Random),
        other => Err(Error::Config(format!(
            "unknown balance method `{other}` (expected none, smote, or random)"
        ))),
    }
}

fn parse_balance_order(s: &str) -> Result<BalanceOrder> {
    match s {
        "before_split" => Ok(BalanceOrder::BeforeSplit),
        "train_only" => Ok(BalanceOrder::TrainOnly),
        other => Err(Error::Config(format!(
            "unknown balance order `{other}` (expected before_split or train_only)"
        ))),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_training_args(cfg: &mut RunConfig, t: &TrainingArgs) -> Result<()> {
    if let Some(v) = t.variant {
        cfg.variant = v;
    }
    if let Some(e) = t.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = t.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = t.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(s) = t.steps {
        cfg.steps = s;
    }
    Ok(())
}

fn out_dir(common: &CommonArgs, command: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| {
        let seconds = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        PathBuf::from("runs").join(format!("{seconds}-{command}"))
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess {
            common,
            data,
            schema,
            balance,
            balance_order,
            train_fraction,
            no_scale,
            smote_k,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(data) = data {
                cfg.data = Some(data);
            }
            if let Some(schema) = schema {
                cfg.schema = Some(schema);
            }
            if let Some(b) = balance {
                cfg.balance = parse_balance(&b)?;
            }
            if let Some(o) = balance_order {
                cfg.balance_order = parse_balance_order(&o)?;
            }
            if let Some(f) = train_fraction {
                cfg.train_fraction = f;
            }
            if no_scale {
                cfg.scale = false;
            }
            if let Some(k) = smote_k {
                cfg.smote_k = k;
            }
            commands::cmd_preprocess(&cfg, &out_dir(&common, "preprocess"))
        }
        Command::Train {
            common,
            prep,
            training,
        } => {
            let mut cfg = load_config(&common)?;
            apply_training_args(&mut cfg, &training)?;
            commands::cmd_train(&cfg, &prep, &out_dir(&common, "train"))
        }
        Command::Evaluate {
            common,
            prep,
            weights,
            warmup,
            reps,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(w) = warmup {
                cfg.warmup = w;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            commands::cmd_evaluate(&cfg, &prep, &weights, &out_dir(&common, "evaluate"))
        }
        Command::Ablate {
            common,
            prep,
            training,
        } => {
            let mut cfg = load_config(&common)?;
            apply_training_args(&mut cfg, &training)?;
            commands::cmd_ablate(&cfg, &prep, &out_dir(&common, "ablate"))
        }
        Command::Benchmark {
            common,
            prep,
            weights,
            warmup,
            reps,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(w) = warmup {
                cfg.warmup = w;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            commands::cmd_benchmark(&cfg, &prep, &weights, &out_dir(&common, "benchmark"))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io(_) => 3,
        Error::Shape { .. } => 4,
        Error::Numeric(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
