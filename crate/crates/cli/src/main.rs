use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semaction_cli::commands::{self, Metric};
use semaction_cli::config::ConfigArgs;

/// Zero-shot action recognition from object classifier scores.
///
/// Pipeline stages hand files to each other: fit-gmm produces the encoder
/// prior, translate produces the object-to-action affinity matrix, and
/// classify / retrieve / localize turn score files into predictions that
/// eval measures against ground truth.
#[derive(Parser)]
#[command(name = "semaction", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the PCA transform and Gaussian mixture on the object words.
    FitGmm {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Encode a label list into semantic vectors.
    Encode {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build the object-to-action affinity matrix.
    Translate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Classify videos from their object scores.
    Classify {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Rank videos per action.
    Retrieve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Rank for this action only (default: every action).
        #[arg(long)]
        action: Option<String>,
    },
    /// Localize actions over tube proposals.
    Localize {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compute a metric report from predictions and ground truth.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Which metric to compute.
        #[arg(long, value_enum)]
        metric: Metric,
    },
    /// Emit the curve points of a metric report for plotting.
    PlotData {
        /// Metric report (.json variant).
        #[arg(long)]
        report: PathBuf,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::FitGmm { config } => commands::fit_gmm(&config.resolve()?),
        Command::Encode { config } => commands::encode(&config.resolve()?),
        Command::Translate { config } => commands::translate(&config.resolve()?),
        Command::Classify { config } => commands::classify(&config.resolve()?),
        Command::Retrieve { config, action } => {
            commands::retrieve(&config.resolve()?, action.as_deref())
        }
        Command::Localize { config } => commands::localize(&config.resolve()?),
        Command::Eval { config, metric } => commands::eval(&config.resolve()?, metric),
        Command::PlotData { report, out } => commands::plot_data(&report, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            let code = error
                .downcast_ref::<semaction::Error>()
                .map(semaction::Error::exit_code)
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
