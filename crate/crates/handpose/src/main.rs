use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use handpose::config::Config;
use handpose::dataset::{read_records, write_records, Record};
use handpose::pipeline::{self, Mode};
use handpose::report;
use handpose::{Error, Result};

/// Hierarchical hand-pose estimation on depth frames.
#[derive(Debug, Parser)]
#[command(name = "handpose", version)]
struct Cli {
    /// TOML run configuration; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the sampling and swarm seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving the command's artifacts.
    #[arg(long, global = true, default_value = "out")]
    output: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic train and test split.
    Generate,
    /// Train the cascade on an annotated split.
    Train {
        /// Annotation file, or a split directory holding `annotations.txt`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Estimate joints for every frame of a split.
    Infer {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Annotation file, or a split directory holding `annotations.txt`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "hierarchical")]
        mode: Mode,
    },
    /// Score predictions against the annotations of the same split.
    Eval {
        /// Annotation file, or a split directory holding `annotations.txt`.
        #[arg(long)]
        data: PathBuf,
        /// Annotation-format file written by `infer`.
        #[arg(long)]
        predictions: PathBuf,
        /// Also write the curve as an SVG plot.
        #[arg(long)]
        plot: bool,
    },
    /// Per-stage errors and per-generation swarm energies.
    Inspect {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Annotation file, or a split directory holding `annotations.txt`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "hybrid")]
        mode: Mode,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let out = &cli.output;
    match cli.command {
        Command::Generate => pipeline::generate_splits(&config, out),
        Command::Train { data } => {
            let frames = pipeline::load_frames(&data)?;
            let models = pipeline::train_models(&config, &frames)?;
            pipeline::save_models(out, &models)?;
            log::info!("model written to {}", out.display());
            Ok(())
        }
        Command::Infer { model, data, mode } => {
            let models = pipeline::load_models(&model)?;
            let frames = pipeline::load_frames(&data)?;
            let preds = pipeline::infer(&config, &models, &frames, mode)?;
            let records: Vec<Record> = frames
                .into_iter()
                .zip(preds)
                .map(|(f, joints)| Record { id: f.id, joints })
                .collect();
            create_dir(out)?;
            write_records(&out.join("predictions.txt"), &records)
        }
        Command::Eval {
            data,
            predictions,
            plot,
        } => {
            let truth = read_records(&pipeline::resolve_annotations(&data))?.items;
            let preds = read_records(&predictions)?.items;
            if preds.len() != truth.len() || preds.iter().zip(&truth).any(|(p, t)| p.id != t.id) {
                return Err(Error::Config(format!(
                    "{} does not list the frames of {} in order",
                    predictions.display(),
                    data.display()
                )));
            }
            let p: Vec<_> = preds.into_iter().map(|r| r.joints).collect();
            let t: Vec<_> = truth.into_iter().map(|r| r.joints).collect();
            let curve = pipeline::evaluate(&config, &p, &t)?;
            create_dir(out)?;
            report::write_curve(&out.join("curve.csv"), &curve)?;
            report::write_per_joint(&out.join("per_joint.csv"), &curve)?;
            if plot {
                let label = predictions
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                report::write_svg(&out.join("curve.svg"), &[(&label, &curve)])?;
            }
            Ok(())
        }
        Command::Inspect { model, data, mode } => {
            let models = pipeline::load_models(&model)?;
            let frames = pipeline::load_frames(&data)?;
            let (stages, energies) = pipeline::inspect(&config, &models, &frames, mode)?;
            create_dir(out)?;
            report::write_stage_traces(&out.join("stages.csv"), &stages)?;
            if mode == Mode::Hybrid {
                report::write_energy_traces(&out.join("energy.csv"), &energies)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("handpose: {}: {e}", category.label());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
