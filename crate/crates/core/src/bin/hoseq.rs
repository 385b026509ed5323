use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hoseq::commands::{self, CommandError, Options};
use hoseq::features::FeatureMode;
use hoseq::models::ModelKind;

#[derive(Parser)]
#[command(name = "hoseq", version, about = "Handover simulation, prediction and avoidance")]
struct Cli {
    /// `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (falls back to the config, then HOSEQ_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Clamp out-of-range radio values instead of dropping their rows.
    #[arg(long, global = true)]
    clamp: bool,
    /// Keep only detections whose true class carries weight >= 1.
    #[arg(long, global = true)]
    oracle_weights: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic trace for a preset (grid, corridor, canyon).
    Gen { preset: String, seed: u64, out: PathBuf },
    /// Parse, validate and repair an external trace.
    Ingest {
        input: PathBuf,
        out: PathBuf,
        /// `canonical = external` column mapping file.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Write the baseline A3 handover log with labels.
    Label { input: PathBuf, out: PathBuf },
    /// Train, replay and report every (model, feature mode) pair.
    Pipeline {
        input: PathBuf,
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<FeatureMode>>,
    },
    /// Grid-search sequence length, hidden size and learning rate.
    Gridsearch {
        input: PathBuf,
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelKind>>,
    },
    /// Re-render the text table and charts from a summary.csv.
    Report { summary: PathBuf, out_dir: PathBuf },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let mut opts = Options {
        config: cli.config,
        seed: cli.seed,
        jobs: cli.jobs,
        clamp: cli.clamp,
        oracle_weights: cli.oracle_weights,
        ..Options::default()
    };
    match cli.cmd {
        Cmd::Gen { preset, seed, out } => commands::cmd_gen(&preset, seed, &out),
        Cmd::Ingest { input, out, mapping } => {
            let report = commands::cmd_ingest(&opts, &input, mapping.as_deref(), &out)?;
            eprintln!("{} range violations", report.violations.len());
            Ok(())
        }
        Cmd::Label { input, out } => commands::cmd_label(&opts, &input, &out),
        Cmd::Pipeline { input, out_dir, models, modes } => {
            opts.models = models;
            opts.modes = modes;
            let summaries = commands::cmd_pipeline(&opts, &input, &out_dir)?;
            print!("{}", hoseq::metrics::summary_csv(&summaries, false));
            Ok(())
        }
        Cmd::Gridsearch { input, out_dir, models } => {
            opts.models = models;
            let best = commands::cmd_gridsearch(&opts, &input, &out_dir)?;
            println!("best: {} L={} H={} lr={}", best.kinds[0], best.seq_len, best.train.hidden_dim, best.train.learning_rate);
            Ok(())
        }
        Cmd::Report { summary, out_dir } => commands::cmd_report(&summary, &out_dir).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(commands::EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
