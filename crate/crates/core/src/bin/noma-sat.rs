use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use noma_sat::experiment::{self, ExperimentConfig};
use noma_sat::Error;

#[derive(Parser)]
#[command(
    name = "noma-sat",
    version,
    about = "NOMA satellite downlink experiments with GA-tuned SVM pairing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accuracy vs. testing-set size for a fixed (C, width) grid.
    Fig1a(Common),
    /// Accuracy of the default SVM vs. the GA-tuned SVM.
    Fig1b(Common),
    /// Sum rate vs. transmit power for the pairing strategies.
    Fig2(Common),
    /// Train a GA-tuned classifier and write the model and GA trace.
    Train {
        #[command(flatten)]
        common: Common,
        /// CSV with columns theta_deg,gain_est,label; a generated cohort is used when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Document<'a, R: Serialize, T: Serialize> {
    command: &'a str,
    config: &'a ExperimentConfig,
    rows: &'a [R],
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<&'a [T]>,
}

fn resolve(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        config.n_trials = trials;
    }
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }
    Ok(config)
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>, Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    writer.into_inner().map_err(|e| Error::Io {
        path: PathBuf::from("<csv buffer>"),
        source: e.into_error(),
    })
}

fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::Io { path, source: e })
        }
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

fn emit_table<R: Serialize, T: Serialize>(
    common: &Common,
    command: &str,
    config: &ExperimentConfig,
    rows: &[R],
    trials: Option<&[T]>,
) -> Result<(), Error> {
    let out = common.out.as_deref();
    match common.format {
        Format::Csv => emit(out, &format!("{command}.csv"), &csv_bytes(rows)?),
        Format::Json => {
            let doc = Document {
                command,
                config,
                rows,
                trials,
            };
            let mut bytes = serde_json::to_vec_pretty(&doc)?;
            bytes.push(b'\n');
            emit(out, &format!("{command}.json"), &bytes)
        }
    }
}

#[derive(Serialize)]
struct TraceRow {
    generation: usize,
    best_mse: f64,
}

#[derive(Serialize)]
struct ModelDocument<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    report: &'a experiment::TrainReport,
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fig1a(common) => {
            let config = resolve(&common)?;
            let report = experiment::run_fig1a(&config)?;
            emit_table::<_, ()>(&common, "fig1a", &config, &report.rows, None)
        }
        Command::Fig1b(common) => {
            let config = resolve(&common)?;
            let report = experiment::run_fig1b(&config)?;
            emit_table(
                &common,
                "fig1b",
                &config,
                &report.rows,
                Some(&report.trials),
            )
        }
        Command::Fig2(common) => {
            let config = resolve(&common)?;
            let report = experiment::run_fig2(&config)?;
            emit_table(&common, "fig2", &config, &report.rows, Some(&report.trials))
        }
        Command::Train { common, data } => {
            let config = resolve(&common)?;
            let report = experiment::cmd_train(&config, data.as_deref())?;
            let doc = ModelDocument {
                command: "train",
                config: &config,
                report: &report,
            };
            let mut model = serde_json::to_vec_pretty(&doc)?;
            model.push(b'\n');
            let out = common.out.as_deref();
            emit(out, "model.json", &model)?;
            if out.is_some() {
                let trace: Vec<TraceRow> = report
                    .ga
                    .history
                    .iter()
                    .enumerate()
                    .map(|(g, &best_mse)| TraceRow {
                        generation: g + 1,
                        best_mse,
                    })
                    .collect();
                emit(out, "ga_trace.csv", &csv_bytes(&trace)?)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ Error::Config(_)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
