//! The `modad` command line.
//!
//! Every subcommand reads the same run configuration (defaults, then
//! `--config`, then `--seed`/`--out`/`--jobs`, then `--set key=value`) and
//! writes a metrics JSON with the effective configuration under
//! `<out>/metrics/`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "modad", version, about = "Modular autoencoder anomaly detection for pressure time series")]
pub struct Cli {
    /// Configuration file with `section.key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for data, bundles, the database and metrics.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the effective configuration in file form.
    Config {
        /// List every key with a short description instead.
        #[arg(long)]
        keys: bool,
    },
    /// Simulate the dataset and write it as CSV files.
    GenData,
    /// Train the feature extractor on the pre-training events.
    TrainExtractor {
        /// Train every architecture and code size listed under `sweep.*`.
        #[arg(long)]
        sweep: bool,
    },
    /// Train and calibrate the detector on top of the frozen extractor.
    TrainDetector {
        #[arg(long, value_parser = ["mixed", "normal", "normal_x5"])]
        subset: Option<String>,
        /// Train on the vectors of an exchange file (e.g. from `transfer compose`).
        #[arg(long, value_name = "FILE", conflicts_with = "subset")]
        features: Option<PathBuf>,
    },
    /// Classify the test events and score the verdicts.
    Evaluate {
        /// Train and score the whole architecture × code size × subset grid.
        #[arg(long)]
        sweep: bool,
        /// CSV of labeled events to score instead of the generated test set.
        #[arg(long, value_name = "FILE", conflicts_with = "sweep")]
        test: Option<PathBuf>,
    },
    /// Train and score the conventional full-length autoencoders.
    Baseline {
        #[arg(long, value_parser = ["normal", "normal_x5"])]
        subset: Option<String>,
        /// Comma-separated encoder depths; defaults to `baseline.layers`.
        #[arg(long, value_delimiter = ',')]
        layers: Vec<usize>,
    },
    /// Finite-difference gradient check of every layer kind.
    Gradcheck {
        /// Random configurations per layer kind.
        #[arg(long, default_value_t = 10)]
        configs: usize,
        /// Scale analytic gradients by 1.001 so the check must fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Representation database operations.
    Transfer {
        #[command(subcommand)]
        op: TransferOp,
    },
}

#[derive(Debug, Subcommand)]
pub enum TransferOp {
    /// Encode labeled events and store them under their product id.
    Insert {
        #[arg(long, value_name = "CSV")]
        samples: PathBuf,
    },
    /// Thin tasks to their characteristic vectors.
    Retain {
        /// Task to thin; all tasks when omitted.
        #[arg(long)]
        task: Option<String>,
        /// Overrides `transfer.budget`.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Rank stored tasks by similarity to one task.
    Similar {
        #[arg(long)]
        task: String,
    },
    /// Mix a task's new normal events with borrowed normals into an exchange file.
    Compose {
        #[arg(long)]
        task: String,
        #[arg(long, value_name = "CSV")]
        new: PathBuf,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Write the database as an exchange file.
    Export {
        #[arg(long, value_name = "FILE")]
        to: PathBuf,
    },
    /// Merge an exchange file into the database.
    Import {
        #[arg(long, value_name = "FILE")]
        from: PathBuf,
    },
    /// Compare a detector for the generated new product trained alone and
    /// trained on a composed set.
    Evaluate,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString>,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let mut cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    cli.set = set_occurrences(&args);
    match commands::execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Every `--set` value in command-line order. clap replaces a global list
/// given before the subcommand with one given after it, so the values are
/// collected from the raw arguments instead.
fn set_occurrences(args: &[std::ffi::OsString]) -> Vec<String> {
    let mut out = vec![];
    let mut it = args.iter().skip(1).map(|a| a.to_string_lossy());
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--set" {
            if let Some(v) = it.next() {
                out.push(v.into_owned());
            }
        } else if let Some(v) = a.strip_prefix("--set=") {
            out.push(v.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_values_from_both_sides_of_the_subcommand() {
        let args: Vec<std::ffi::OsString> = ["modad", "--set", "a=1", "gen-data", "--set=b=2", "--set", "c=3"]
            .iter()
            .map(Into::into)
            .collect();
        assert_eq!(set_occurrences(&args), ["a=1", "b=2", "c=3"]);
        let cli = Cli::try_parse_from(&args).unwrap();
        assert!(matches!(cli.command, Command::GenData));
    }
}
