use std::path::PathBuf;
use std::process::ExitCode;

use arma_cli::commands::{
    cmd_ablate, cmd_eval, cmd_probe, cmd_synth, cmd_train, EvalArgs, Overrides, ProbeArgs, SynthArgs, SynthKind,
};
use arma_cli::config::RunConfig;
use arma_cli::pipeline::{SplitName, StdClock};
use arma_cli::CliError;
use arma_core::model::Variant;
use arma_core::probe::ProbeKind;
use clap::{Parser, Subcommand, ValueEnum};

/// Train, evaluate and inspect convolutional AR/MA forecasting blocks.
///
/// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric divergence.
#[derive(Parser)]
#[command(name = "arma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes checkpoint.bin, metrics.json and epoch_log.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint; writes metrics.json and predictions.csv.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset CSV (defaults to the one recorded in the checkpoint).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Refuse checkpoints of any other variant.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Train the full block and the CNN-only ablation side by side.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Positional-information probe on a frozen checkpoint.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        /// Seed of the control permutation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic series as CSV.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: usize,
        /// Channels of the trend-shift series.
        #[arg(long, default_value_t = 3)]
        channels: usize,
        /// Shift position of the trend-shift series (default n/2).
        #[arg(long)]
        shift_at: Option<usize>,
        #[arg(long, default_value_t = 0.02)]
        magnitude: f64,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum VariantArg {
    Arma,
    CnnOnly,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Arma => Variant::Arma,
            VariantArg::CnnOnly => Variant::CnnOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    LinearIndex,
    Gradation,
    Sinusoid,
    All,
}

impl KindArg {
    fn kind(self) -> Option<ProbeKind> {
        match self {
            KindArg::LinearIndex => Some(ProbeKind::LinearIndex),
            KindArg::Gradation => Some(ProbeKind::Gradation),
            KindArg::Sinusoid => Some(ProbeKind::Sinusoid),
            KindArg::All => None,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut clock = StdClock::default();
    match cli.command {
        Command::Train { config, out, seed } => {
            let cfg = Overrides { out, seed }.apply(RunConfig::load(&config)?);
            let m = cmd_train(&cfg, &mut clock)?;
            println!(
                "{} on {}: test MSE {:.6} MAE {:.6} (repeat-last MSE {:.6}), best epoch {:?} of {}",
                m.variant, m.dataset, m.test.mse, m.test.mae, m.naive_repeat_last_test.mse, m.best_epoch, m.epochs_run
            );
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::Eval { checkpoint, data, split, out, variant } => {
            let m = cmd_eval(&EvalArgs {
                checkpoint,
                data,
                split,
                out: out.clone(),
                expect_variant: variant.map(Into::into),
            })?;
            println!("{} on {} split: MSE {:.6} MAE {:.6} over {} windows", m.variant, m.split.name(), m.mse, m.mae, m.windows);
            println!("artifacts in {}", out.display());
        }
        Command::Ablate { config, out, seed } => {
            let cfg = Overrides { out, seed }.apply(RunConfig::load(&config)?);
            let r = cmd_ablate(&cfg, &mut clock)?;
            println!("arma     test MSE {:.6} MAE {:.6}", r.arma.test.mse, r.arma.test.mae);
            println!("cnn_only test MSE {:.6} MAE {:.6}", r.cnn_only.test.mse, r.cnn_only.test.mae);
            println!("difference (arma - cnn_only): MSE {:+.6} MAE {:+.6}", r.difference.mse, r.difference.mae);
        }
        Command::Probe { checkpoint, data, kind, split, seed, out } => {
            let reports = cmd_probe(&ProbeArgs {
                checkpoint,
                data,
                kind: kind.kind(),
                split,
                seed,
                out,
            })?;
            for r in reports {
                println!("{}: MAE {:.6}, shuffled control MAE {:.6}", r.kind, r.mae, r.control_mae);
            }
        }
        Command::Synth { kind, seed, n, channels, shift_at, magnitude, out } => {
            let table = cmd_synth(&SynthArgs {
                kind,
                seed,
                n,
                channels,
                shift_at,
                magnitude,
                out: out.clone(),
            })?;
            println!("wrote {} rows x {} channels to {}", table.rows(), table.channels(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
