use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pagan::data_io::{parse_config, parse_overrides, read_pnm};
use pagan::metrics::{self, ProbeConfig};
use pagan::oracle::proposition_suite;
use pagan::tensor::Tensor;
use pagan::trainer::{final_metrics, load_checkpoint, train, write_eval_outputs, DatasetId};
use pagan::{Error, Result};

#[derive(Parser)]
#[command(name = "pagan", version, about = "Pairwise augmented GAN training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes config, losses, checkpoints, grids and metrics.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
        /// `key=value` overrides applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Metrics for a checkpoint, or RMSE/RID/IS/FID between two PGM/PPM directories.
    Metrics {
        #[arg(long, conflicts_with_all = ["a", "b"])]
        ckpt: Option<PathBuf>,
        /// Directory of original images (matched to `--b` by sorted file name).
        #[arg(long, requires = "b")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        /// Labeled dataset used to train the probe classifier: ring, shapes or mnist.
        #[arg(long)]
        data: Option<String>,
        #[arg(long, default_value_t = 1500)]
        probe_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the discrete-support proposition checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write sample and reconstruction grids plus metrics for a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_dir_images(dir: &Path) -> Result<Tensor<f32>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|s| s.to_str()), Some("pgm" | "ppm")))
        .collect();
    paths.sort();
    let images = paths
        .iter()
        .map(|p| read_pnm(p)?.to_tensor())
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack_batch(&images)
}

fn dataset_config(id: &str) -> Result<pagan::trainer::TrainConfig> {
    DatasetId::from_name(id).ok_or_else(|| Error::Config {
        key: "data".into(),
        message: format!("unknown dataset `{id}`"),
    })?;
    parse_config(None, &[("dataset".into(), id.into())])
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, out, set } => {
            let cfg = parse_config(config.as_deref(), &parse_overrides(&set)?)?;
            let summary = train(&cfg, &out)?;
            println!(
                "{} steps in {:.1}s -> {}",
                summary.steps_completed,
                summary.seconds,
                summary.dir.display()
            );
            if let Some(reason) = &summary.diverged {
                println!("diverged: {reason}");
            }
            Ok(summary.diverged.is_none())
        }
        Command::Metrics {
            ckpt,
            a,
            b,
            data,
            probe_steps,
            out,
        } => {
            if let Some(path) = ckpt {
                let mut ck = load_checkpoint(&path, None)?;
                ck.config.probe_steps = probe_steps;
                if let Some(id) = &data {
                    let other = dataset_config(id)?;
                    if other.dataset != ck.config.dataset {
                        return Err(Error::invalid(format!(
                            "checkpoint was trained on `{}`, not `{id}`",
                            ck.config.dataset.name()
                        )));
                    }
                }
                let dataset = ck.config.load_dataset()?;
                emit(&final_metrics(&ck.state.bundle, &dataset, &ck.config)?, out.as_deref())?;
                return Ok(true);
            }
            let (Some(a), Some(b)) = (a, b) else {
                return Err(Error::invalid("give either --ckpt or both --a and --b"));
            };
            let (xa, xb) = (read_dir_images(&a)?, read_dir_images(&b)?);
            let mut text = format!("rmse\t{}\n", metrics::rmse(&xa, &xb)?);
            if let Some(id) = data {
                let dataset = dataset_config(&id)?.load_dataset()?;
                let cfg = ProbeConfig {
                    steps: probe_steps,
                    ..ProbeConfig::default()
                };
                let (probe, _) = metrics::train_probe_classifier(&dataset, &cfg)?;
                text = metrics::evaluate(&probe, &xa, &xb, &xb)?.to_text();
            }
            emit(&text, out.as_deref())?;
            Ok(true)
        }
        Command::Verify { seed } => {
            let mut all = true;
            for c in proposition_suite(seed)? {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.passed;
            }
            Ok(all)
        }
        Command::Eval { ckpt, out } => {
            let ck = load_checkpoint(&ckpt, None)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let dataset = ck.config.load_dataset()?;
            write_eval_outputs(&ck.state.bundle, &dataset, &ck.config, &out, ck.state.step)?;
            let text = final_metrics(&ck.state.bundle, &dataset, &ck.config)?;
            emit(&text, Some(&out.join("metrics.txt")))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
