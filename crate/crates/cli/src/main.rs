use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use yoco_core::dataset::{DatasetSource, OutputFormat};
use yoco_core::eval::DEFAULT_BINS;
use yoco_core::pipeline::{parse_config, Pipeline};
use yoco_core::run::{run_augment, run_calibration, run_crop4, run_preview, RunConfig};

/// Cut-once piece-wise image augmentation.
///
/// AutoAug policy tables are read from the directory named by
/// YOCO_AUG_POLICY_DIR when it is set, otherwise the built-in tables are used.
#[derive(Debug, Parser)]
#[command(name = "yoco-aug", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputFormat {
    Cifar10,
    Cifar100,
    Folder,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Png,
    Cifar,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Augment a dataset and write images plus a manifest.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        input_format: InputFormat,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "png")]
        output_format: OutFormat,
        #[arg(long)]
        config: PathBuf,
        /// Generated and recorded in the run record when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Force piece-wise augmentation on, whatever the config says.
        #[arg(long)]
        yoco: bool,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write original, image-level, height-cut and width-cut versions of one image.
    Preview {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split each image into four 224x224 pieces of its 448x448 center crop.
    Crop4 {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// RMS calibration error of a `confidence<TAB>correct` prediction log.
    Calibration {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
}

fn load_pipeline(path: &Path) -> Result<(Pipeline, String)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let pipeline = parse_config(&text).with_context(|| format!("in config {}", path.display()))?;
    Ok((pipeline, text))
}

fn fresh_seed() -> u64 {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or(0);
    nanos ^ (u64::from(std::process::id()) << 32)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment {
            input,
            input_format,
            output,
            output_format,
            config,
            seed,
            yoco,
            limit,
            workers,
        } => {
            let (mut pipeline, config_text) = load_pipeline(&config)?;
            if yoco {
                pipeline.yoco.enabled = true;
            }
            let source = match input_format {
                InputFormat::Cifar10 => DatasetSource::cifar10(input),
                InputFormat::Cifar100 => DatasetSource::cifar100(input),
                InputFormat::Folder => DatasetSource::folder(input)?,
            };
            let seed = seed.unwrap_or_else(|| {
                let s = fresh_seed();
                log::info!("no --seed given, using {s}");
                s
            });
            if limit == Some(0) {
                bail!("--limit must be at least 1");
            }
            let run = RunConfig {
                source,
                output: output.clone(),
                output_format: match output_format {
                    OutFormat::Png => OutputFormat::Png,
                    OutFormat::Cifar => OutputFormat::CifarBin,
                },
                pipeline,
                config_text,
                seed,
                sample_limit: limit,
                workers,
            };
            let manifest = run_augment(&run)?;
            println!(
                "wrote {} samples to {} (seed {seed})",
                manifest.len(),
                output.display()
            );
        }
        Command::Preview {
            input,
            config,
            seed,
            out,
        } => {
            let (pipeline, _) = load_pipeline(&config)?;
            for path in run_preview(&input, &pipeline, seed, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Crop4 { input, output } => {
            let summary = run_crop4(&input, &output)?;
            for failure in &summary.failures {
                eprintln!("warning: {failure}");
            }
            println!(
                "wrote {} pieces to {}; {} warnings",
                summary.manifest.len(),
                output.display(),
                summary.failures.len()
            );
        }
        Command::Calibration { predictions, bins } => {
            println!("{}", run_calibration(&predictions, bins)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
