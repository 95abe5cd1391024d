//! A small convolutional classifier standing in for a pretrained feature
//! network. It is trained on augmented batches so that its posteriors are
//! insensitive to the same crops the model's augmentation produces.

use std::time::Instant;

use rand::seq::index;

use crate::augment::{augment, AugmentConfig};
use crate::data_io::Dataset;
use crate::error::{Error, Result};
use crate::nets::{Activation, Layer, Network, NetworkSpec};
use crate::tensor::{Tape, Tensor};
use crate::trainer::{seeded_rng, BlockOptimizer, OptimizerConfig, OptimizerKind};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub channels: usize,
    pub hidden: usize,
    pub augment: AugmentConfig,
    /// Items held out from the end of the dataset for accuracy reporting.
    pub holdout: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            steps: 1500,
            batch_size: 64,
            lr: 1e-3,
            channels: 8,
            hidden: 64,
            augment: AugmentConfig::default(),
            holdout: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeClassifier {
    pub net: Network<f32>,
    pub classes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeReport {
    pub heldout_accuracy: f64,
    /// Accuracy on augmented copies of the held-out items.
    pub augmented_accuracy: f64,
    pub seconds: f64,
}

const CHUNK: usize = 256;

impl ProbeClassifier {
    pub fn spec(input: &[usize], channels: usize, hidden: usize, classes: usize) -> Result<NetworkSpec> {
        let &[c, h, w] = input else {
            return Err(Error::invalid(format!("probe needs [c, h, w] images, got {input:?}")));
        };
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::invalid(format!("probe needs sides divisible by 4, got {h}×{w}")));
        }
        let lrelu = Layer::Act(Activation::LeakyRelu(0.2));
        let spec = NetworkSpec {
            input: input.to_vec(),
            layers: vec![
                Layer::Conv {
                    in_ch: c,
                    out_ch: channels,
                    kernel: 4,
                    stride: 2,
                    pad: 1,
                },
                lrelu.clone(),
                Layer::Conv {
                    in_ch: channels,
                    out_ch: 2 * channels,
                    kernel: 4,
                    stride: 2,
                    pad: 1,
                },
                lrelu.clone(),
                Layer::Reshape(vec![2 * channels * (h / 4) * (w / 4)]),
                Layer::Linear {
                    fan_in: 2 * channels * (h / 4) * (w / 4),
                    fan_out: hidden,
                },
                lrelu,
                Layer::Linear {
                    fan_in: hidden,
                    fan_out: classes,
                },
            ],
            spectral_norm: false,
        };
        spec.shapes()?;
        Ok(spec)
    }

    fn run<T>(&self, x: &Tensor<f32>, f: impl Fn(&mut Tape<f32>, &crate::nets::Trace) -> T) -> Result<Vec<T>> {
        let n = x.shape()[0];
        let mut out = Vec::new();
        for start in (0..n).step_by(CHUNK) {
            let mut tape = Tape::new();
            let bound = self.net.bind(&mut tape, false)?;
            let xv = tape.constant(x.slice_batch(start, CHUNK.min(n - start))?);
            let trace = self.net.forward_traced(&mut tape, &bound, xv)?;
            out.push(f(&mut tape, &trace));
        }
        Ok(out)
    }

    /// `p(y|x)`, one row per item.
    pub fn posteriors(&self, x: &Tensor<f32>) -> Result<Tensor<f64>> {
        let parts = self.run(x, |tape, trace| {
            let p = tape.softmax(trace.output);
            tape.value(p).cast::<f64>()
        })?;
        Tensor::stack_batch(&parts)
    }

    /// Penultimate activations, the feature space for FID.
    pub fn features(&self, x: &Tensor<f32>) -> Result<Tensor<f64>> {
        let parts = self.run(x, |tape, trace| tape.value(*trace.inputs.last().unwrap()).cast::<f64>())?;
        Tensor::stack_batch(&parts)
    }

    pub fn predict(&self, x: &Tensor<f32>) -> Result<Vec<usize>> {
        let p = self.posteriors(x)?;
        Ok(p.data()
            .chunks(self.classes)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect())
    }

    pub fn accuracy(&self, x: &Tensor<f32>, labels: &[usize]) -> Result<f64> {
        let pred = self.predict(x)?;
        if pred.len() != labels.len() {
            return Err(Error::invalid(format!("{} items but {} labels", pred.len(), labels.len())));
        }
        Ok(pred.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64)
    }
}

/// Cross-entropy training with Adam on augmented batches. The last
/// `holdout` items are excluded from training and used for the report.
pub fn train_probe_classifier(data: &Dataset, cfg: &ProbeConfig) -> Result<(ProbeClassifier, ProbeReport)> {
    let start = Instant::now();
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("probe training needs labels"))?;
    let classes = data.num_classes().unwrap_or(0);
    if classes < 2 {
        return Err(Error::invalid(format!("probe training needs at least 2 classes, got {classes}")));
    }
    if !data.is_image() {
        return Err(Error::invalid("probe training needs image data"));
    }
    let holdout = cfg.holdout.min(data.len() / 5).max(1);
    let (train, held) = data.split_tail(holdout)?;
    let train_labels = &labels[..train.len()];
    let n = cfg.batch_size.min(train.len());

    let mut rng = seeded_rng(cfg.seed, 3);
    let spec = ProbeClassifier::spec(&data.items.shape()[1..], cfg.channels, cfg.hidden, classes)?;
    let mut net = Network::<f32>::init(spec, &mut rng)?;
    let opt_cfg = OptimizerConfig {
        kind: OptimizerKind::Adam,
        lr: cfg.lr,
        beta1: 0.9,
        beta2: 0.999,
    };
    let mut opt = BlockOptimizer::new(OptimizerKind::Adam, &net.params);
    for _ in 0..cfg.steps {
        let idx = index::sample(&mut rng, train.len(), n).into_vec();
        let x = augment(&train.items.gather_batch(&idx)?, &cfg.augment, &mut rng)?;
        let mut onehot = Tensor::<f32>::zeros(&[n, classes]);
        for (row, &i) in idx.iter().enumerate() {
            onehot.data_mut()[row * classes + train_labels[i]] = 1.0;
        }
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape, true)?;
        let xv = tape.constant(x);
        let logits = net.forward(&mut tape, &bound, xv)?;
        let logp = tape.log_softmax(logits);
        let target = tape.constant(onehot);
        let picked = tape.mul(logp, target)?;
        let total = tape.sum(picked);
        let loss = tape.mul_scalar(total, -1.0 / n as f32);
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor<f32>> = bound
            .params
            .iter()
            .map(|&v| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(tape.shape(v))))
            .collect();
        opt.step(&opt_cfg, &mut net.params, &g)?;
    }

    let probe = ProbeClassifier { net, classes };
    let held_labels = held.labels.as_deref().unwrap_or_default();
    let heldout_accuracy = probe.accuracy(&held.items, held_labels)?;
    let augmented = augment(&held.items, &cfg.augment, &mut rng)?;
    let augmented_accuracy = probe.accuracy(&augmented, held_labels)?;
    Ok((
        probe,
        ProbeReport {
            heldout_accuracy,
            augmented_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}
