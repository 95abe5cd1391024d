//! The alternating training loop, checkpoints and run directories.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{BlockOptimizer, OptimizerConfig, OptimizerKind};

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::AugmentConfig;
use crate::data_io::{
    gaussian_ring, interleave_columns, load_mnist_idx, synthetic_shapes, write_image_grid, write_scatter, Dataset,
    GaussianRingSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{self, ProbeConfig};
use crate::nets::{ArchConfig, Block, DataShape, ModelBundle};
use crate::objectives::{pagan_losses_with, Draws, GameKind};
use crate::tensor::Tensor;

/// Any loss above this ends the run with a divergence flag.
pub const DIVERGENCE_THRESHOLD: f64 = 1e4;

/// RNG streams derived from the seed: training draws, dataset synthesis and
/// evaluation grids never share a stream.
const TRAIN_STREAM: u64 = 0;
const DATA_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DatasetId {
    #[default]
    Ring,
    Shapes,
    Mnist,
}

impl DatasetId {
    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Ring => "ring",
            DatasetId::Shapes => "shapes",
            DatasetId::Mnist => "mnist",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ring" => Some(DatasetId::Ring),
            "shapes" => Some(DatasetId::Shapes),
            "mnist" => Some(DatasetId::Mnist),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: u64,
    pub optimizer: OptimizerConfig,
    /// Discriminator updates per generator/encoder update.
    pub critic_steps: usize,
    pub game: GameKind,
    pub augment: AugmentConfig,
    pub latent_dim: usize,
    pub dataset: DatasetId,
    pub seed: u64,
    /// `0` disables periodic checkpoints (the initial one is always written).
    pub checkpoint_every: u64,
    /// `0` disables periodic sample grids.
    pub eval_every: u64,
    pub hidden: usize,
    pub latent_hidden: Vec<usize>,
    pub base_channels: usize,
    pub spectral_norm: bool,
    /// Power iterations per loss evaluation.
    pub sn_iters: usize,
    pub ring: GaussianRingSpec,
    pub mnist_images: PathBuf,
    pub mnist_labels: PathBuf,
    /// Use only the first `subset` MNIST items; `0` keeps all.
    pub subset: usize,
    pub shapes_count: usize,
    pub shapes_side: usize,
    /// Probe-classifier budget for the final image metrics; `0` skips them.
    pub probe_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            steps: 5000,
            optimizer: OptimizerConfig {
                kind: OptimizerKind::Adam,
                lr: 2e-4,
                beta1: 0.5,
                beta2: 0.999,
            },
            critic_steps: 1,
            game: GameKind::NonSaturating,
            augment: AugmentConfig::default(),
            latent_dim: 2,
            dataset: DatasetId::Ring,
            seed: 0,
            checkpoint_every: 1000,
            eval_every: 1000,
            hidden: 128,
            latent_hidden: vec![512, 256],
            base_channels: 16,
            spectral_norm: true,
            sn_iters: 1,
            ring: GaussianRingSpec::default(),
            mnist_images: PathBuf::from("data/mnist/t10k-images-idx3-ubyte"),
            mnist_labels: PathBuf::from("data/mnist/t10k-labels-idx1-ubyte"),
            subset: 0,
            shapes_count: 3000,
            shapes_side: 16,
            probe_steps: 600,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::config("batch_size", format!("must be at least 2, got {}", self.batch_size)));
        }
        if self.critic_steps == 0 {
            return Err(Error::config("critic_steps", "must be at least 1"));
        }
        // lr = 0 is allowed: it freezes every block, which makes the loop a
        // no-op on parameters.
        if !(self.optimizer.lr >= 0.0) || !self.optimizer.lr.is_finite() {
            return Err(Error::config("lr", format!("must be finite and non-negative, got {}", self.optimizer.lr)));
        }
        for (key, b) in [("beta1", self.optimizer.beta1), ("beta2", self.optimizer.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(key, format!("must lie in [0, 1), got {b}")));
            }
        }
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim", "must be positive"));
        }
        if self.hidden == 0 || self.base_channels == 0 || self.latent_hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        self.game.validate().map_err(|e| Error::config("game", e.to_string()))?;
        self.augment.validate().map_err(|e| Error::config("pad_fraction", e.to_string()))?;
        self.ring.validate().map_err(|e| Error::config("ring_modes", e.to_string()))?;
        Ok(())
    }

    pub fn arch(&self, data: DataShape) -> ArchConfig {
        let mut arch = ArchConfig::new(data, self.latent_dim);
        arch.hidden = self.hidden;
        arch.latent_disc_hidden = self.latent_hidden.clone();
        arch.base_channels = self.base_channels;
        arch.head = self.game.head();
        arch.fusion = self.game.default_fusion();
        arch.spectral_norm = self.spectral_norm;
        arch
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        self.optimizer
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let mut rng = seeded_rng(self.seed, DATA_STREAM);
        let data = match self.dataset {
            DatasetId::Ring => gaussian_ring(&self.ring, &mut rng)?,
            DatasetId::Shapes => synthetic_shapes(self.shapes_count, self.shapes_side, &mut rng)?,
            DatasetId::Mnist => {
                let d = load_mnist_idx(&self.mnist_images, &self.mnist_labels)?;
                if self.subset > 0 {
                    d.head(self.subset)?
                } else {
                    d
                }
            }
        };
        if data.len() < self.batch_size {
            return Err(Error::config(
                "batch_size",
                format!("{} exceeds the {} items of `{}`", self.batch_size, data.len(), data.name),
            ));
        }
        Ok(data)
    }
}

/// Everything that evolves during training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub bundle: ModelBundle<f32>,
    /// Indexed by [`Block::index`].
    pub optim: Vec<BlockOptimizer>,
    pub rng: ChaCha8Rng,
    pub step: u64,
}

impl TrainState {
    /// Fresh networks drawn from the training stream of `config.seed`.
    pub fn new(config: &TrainConfig, data: DataShape) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed, TRAIN_STREAM);
        let bundle = ModelBundle::new(config.arch(data), &mut rng)?;
        let optim = Block::ALL
            .iter()
            .map(|&b| BlockOptimizer::new(config.optimizer.kind, &bundle.network(b).params))
            .collect();
        Ok(TrainState {
            bundle,
            optim,
            rng,
            step: 0,
        })
    }

    fn update(&mut self, cfg: &OptimizerConfig, block: Block, grads: &[Tensor<f32>]) -> Result<()> {
        let params = &mut self.bundle.network_mut(block).params;
        self.optim[block.index()].step(cfg, params, grads)
    }
}

/// Losses of the generator/encoder step (`L_d^x, L_d^z, L_d^xx, L_g, L_e`)
/// and the gradient norm of each block, in [`Block::ALL`] order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub losses: [f64; 5],
    pub grad_norms: [f64; 5],
}

impl StepRecord {
    pub const LOSS_NAMES: [&'static str; 5] = ["L_d^x", "L_d^z", "L_d^xx", "L_g", "L_e"];

    pub fn diverged(&self) -> bool {
        self.losses.iter().any(|l| !l.is_finite() || l.abs() > DIVERGENCE_THRESHOLD)
    }

    pub fn tsv_line(&self) -> String {
        let mut s = self.step.to_string();
        for l in self.losses {
            let _ = write!(s, "\t{l}");
        }
        s
    }
}

fn checked_block_grads(grads: Vec<Tensor<f32>>, block: Block) -> Result<(Vec<Tensor<f32>>, f64)> {
    let mut sq = 0.0f64;
    for g in &grads {
        if !g.all_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in block {}", block.name())));
        }
        sq += g.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
    }
    Ok((grads, sq.sqrt()))
}

/// One iteration: `critic_steps − 1` discriminator-only updates on fresh
/// batches, then a joint evaluation whose five losses are all computed
/// before any update, applied to ψ, then θ, then φ.
pub fn train_step(state: &mut TrainState, data: &Dataset, config: &TrainConfig) -> Result<StepRecord> {
    let opt = config.optimizer_config();
    let n = config.batch_size;
    for _ in 1..config.critic_steps {
        state.bundle.refresh_spectral(config.sn_iters);
        let x = data.sample_batch(n, &mut state.rng)?;
        let draws = Draws::sample(&state.bundle, &x, &config.game, &config.augment, &mut state.rng)?;
        let graph = pagan_losses_with(&state.bundle, &x, &draws, &config.game, false)?;
        let grads = graph.discriminator_gradients()?;
        let mut updates = Vec::with_capacity(3);
        for block in [Block::DataDisc, Block::LatentDisc, Block::PairDisc] {
            updates.push((block, checked_block_grads(graph.block_gradients(&grads, block), block)?.0));
        }
        for (block, g) in updates {
            state.update(&opt, block, &g)?;
        }
    }

    state.bundle.refresh_spectral(config.sn_iters);
    let x = data.sample_batch(n, &mut state.rng)?;
    let draws = Draws::sample(&state.bundle, &x, &config.game, &config.augment, &mut state.rng)?;
    let graph = pagan_losses_with(&state.bundle, &x, &draws, &config.game, true)?;
    let values = graph.values();
    let d_grads = graph.discriminator_gradients()?;
    let g_grads = graph.generator_gradients()?;
    let e_grads = graph.encoder_gradients()?;

    let mut grad_norms = [0.0; 5];
    let mut updates = Vec::with_capacity(5);
    for block in [Block::DataDisc, Block::LatentDisc, Block::PairDisc, Block::Generator, Block::Encoder] {
        let source = match block {
            Block::Generator => &g_grads,
            Block::Encoder => &e_grads,
            _ => &d_grads,
        };
        let (g, norm) = checked_block_grads(graph.block_gradients(source, block), block)?;
        grad_norms[block.index()] = norm;
        updates.push((block, g));
    }
    for (block, g) in updates {
        state.update(&opt, block, &g)?;
    }
    state.step += 1;
    Ok(StepRecord {
        step: state.step,
        losses: [
            values.d_x,
            values.d_z,
            values.d_xx,
            values.g.unwrap_or(f64::NAN),
            values.e.unwrap_or(f64::NAN),
        ],
        grad_norms,
    })
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub steps_completed: u64,
    /// Why training stopped early, if it did.
    pub diverged: Option<String>,
    pub seconds: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Sample and reconstruction grids (scatter files for point data).
pub fn write_eval_outputs(bundle: &ModelBundle<f32>, data: &Dataset, config: &TrainConfig, dir: &Path, step: u64) -> Result<()> {
    let mut rng = seeded_rng(config.seed, EVAL_STREAM);
    if data.is_image() {
        let z = Tensor::randn(&[64, config.latent_dim], 1.0, &mut rng);
        let samples = bundle.sample(&z)?;
        let ext = if data.items.shape()[1] == 3 { "ppm" } else { "pgm" };
        write_image_grid(&samples, 8, &dir.join(format!("samples_{step}.{ext}")))?;
        let originals = data.items.slice_batch(0, data.len().min(32))?;
        let recons = bundle.reconstruct(&originals)?;
        write_image_grid(&interleave_columns(&originals, &recons)?, 8, &dir.join(format!("recons_{step}.{ext}")))?;
    } else {
        let z = Tensor::randn(&[1000, config.latent_dim], 1.0, &mut rng);
        write_scatter(&bundle.sample(&z)?, &dir.join(format!("samples_{step}.txt")))?;
        let originals = data.items.slice_batch(0, data.len().min(1000))?;
        write_scatter(&bundle.reconstruct(&originals)?, &dir.join(format!("recons_{step}.txt")))?;
    }
    Ok(())
}

/// Final metrics as `name<TAB>value` lines.
pub fn final_metrics(bundle: &ModelBundle<f32>, data: &Dataset, config: &TrainConfig) -> Result<String> {
    let mut rng = seeded_rng(config.seed, EVAL_STREAM);
    let eval = data.head(1000)?;
    let recons = bundle.reconstruct(&eval.items)?;
    let rmse = metrics::rmse(&eval.items, &recons)?;
    if !data.is_image() {
        let z = Tensor::randn(&[10_000, config.latent_dim], 1.0, &mut rng);
        let samples = bundle.sample(&z)?;
        let report = metrics::ring_report(&samples, &config.ring, &bundle.encode_sample(&data.items, &mut rng)?, rmse)?;
        return Ok(report.to_text());
    }
    if config.probe_steps == 0 || data.labels.is_none() {
        return Ok(format!("rmse\t{rmse}\n"));
    }
    let probe_cfg = ProbeConfig {
        steps: config.probe_steps,
        seed: config.seed,
        ..ProbeConfig::default()
    };
    let (probe, _) = metrics::train_probe_classifier(data, &probe_cfg)?;
    let z = Tensor::randn(&[eval.len(), config.latent_dim], 1.0, &mut rng);
    let samples = bundle.sample(&z)?;
    let report = metrics::evaluate(&probe, &eval.items, &recons, &samples)?;
    Ok(report.to_text())
}

/// Runs `config.steps` iterations into `dir`.
pub fn train(config: &TrainConfig, dir: &Path) -> Result<RunSummary> {
    let start = std::time::Instant::now();
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("config.txt"), &config.to_text())?;
    let data = config.load_dataset()?;
    let mut state = TrainState::new(config, data.shape())?;
    save_checkpoint(&state, config, &dir.join("ckpt_0.bin"))?;

    let loss_path = dir.join("losses.tsv");
    let file = std::fs::File::create(&loss_path).map_err(|e| Error::io(&loss_path, e))?;
    let mut losses = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(&loss_path, e);
    writeln!(losses, "step\t{}", StepRecord::LOSS_NAMES.join("\t")).map_err(io_err)?;

    let mut diverged = None;
    let mut last_eval = None;
    while state.step < config.steps {
        let record = match train_step(&mut state, &data, config) {
            Ok(r) => r,
            Err(Error::Numeric(msg)) => {
                diverged = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        writeln!(losses, "{}", record.tsv_line()).map_err(io_err)?;
        if record.diverged() {
            diverged = Some(format!("loss above {DIVERGENCE_THRESHOLD} at step {}", record.step));
            break;
        }
        if config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 {
            save_checkpoint(&state, config, &dir.join(format!("ckpt_{}.bin", state.step)))?;
        }
        if config.eval_every > 0 && state.step % config.eval_every == 0 {
            write_eval_outputs(&state.bundle, &data, config, dir, state.step)?;
            last_eval = Some(state.step);
        }
    }
    losses.flush().map_err(io_err)?;
    drop(losses);

    if state.step > 0 && diverged.is_none() {
        if last_eval != Some(state.step) {
            write_eval_outputs(&state.bundle, &data, config, dir, state.step)?;
        }
        write_file(&dir.join("metrics.txt"), &final_metrics(&state.bundle, &data, config)?)?;
    }
    let mut manifest = format!(
        "status\t{}\nsteps_completed\t{}\n",
        if diverged.is_some() { "diverged" } else { "completed" },
        state.step
    );
    if let Some(reason) = &diverged {
        let _ = writeln!(manifest, "reason\t{reason}");
    }
    write_file(&dir.join("manifest.txt"), &manifest)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        steps_completed: state.step,
        diverged,
        seconds: start.elapsed().as_secs_f64(),
    })
}
