//! Default architectures for image and 2-D point data.

use super::{Activation, Layer, NetworkSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataShape {
    /// Flat feature vectors of the given length.
    Vector(usize),
    Image { channels: usize, height: usize, width: usize },
}

impl DataShape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            DataShape::Vector(d) => vec![d],
            DataShape::Image { channels, height, width } => vec![channels, height, width],
        }
    }

    pub fn numel(&self) -> usize {
        self.dims().iter().product()
    }
}

/// How the pair discriminator joins `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairFusion {
    /// Side by side: `C × H × 2W`.
    Width,
    /// Stacked: `2C × H × W`.
    Channel,
}

/// Final discriminator activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    /// Sigmoid, for games over probabilities.
    Probability,
    /// Identity, for critics and variational functions.
    Critic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub data: DataShape,
    pub latent_dim: usize,
    /// Channels after the first image convolution; doubled per downsampling.
    pub base_channels: usize,
    /// Hidden width of the point-data MLPs.
    pub hidden: usize,
    /// Hidden widths of the latent discriminator.
    pub latent_disc_hidden: Vec<usize>,
    pub head: Head,
    pub fusion: PairFusion,
    /// Spectral normalization on the three discriminators.
    pub spectral_norm: bool,
}

impl ArchConfig {
    pub fn new(data: DataShape, latent_dim: usize) -> Self {
        ArchConfig {
            data,
            latent_dim,
            base_channels: 16,
            hidden: 128,
            latent_disc_hidden: vec![512, 256],
            head: Head::Probability,
            fusion: PairFusion::Width,
            spectral_norm: true,
        }
    }

    pub fn specs(&self) -> Result<ArchSpecs> {
        if self.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be positive"));
        }
        let head = match self.head {
            Head::Probability => Activation::Sigmoid,
            Head::Critic => Activation::Identity,
        };
        let latent_disc = NetworkSpec {
            input: vec![self.latent_dim],
            layers: mlp(self.latent_dim, &self.latent_disc_hidden, 1, Activation::LeakyRelu(0.2), head),
            spectral_norm: self.spectral_norm,
        };
        let specs = match self.data {
            DataShape::Vector(d) => {
                if d == 0 || self.hidden == 0 {
                    return Err(Error::invalid("vector data needs positive dimension and width"));
                }
                let hidden = [self.hidden, self.hidden];
                let act = Activation::LeakyRelu(0.2);
                let disc = |input: usize, out: usize, head: Activation, sn: bool| NetworkSpec {
                    input: vec![input],
                    layers: mlp(input, &hidden, out, act, head),
                    spectral_norm: sn,
                };
                ArchSpecs {
                    generator: disc(self.latent_dim, d, Activation::Identity, false),
                    encoder: disc(d, 2 * self.latent_dim, Activation::Identity, false),
                    data_disc: disc(d, 1, head, self.spectral_norm),
                    pair_disc: disc(2 * d, 1, head, self.spectral_norm),
                    latent_disc,
                }
            }
            DataShape::Image { channels, height, width } => {
                let downs = if height.min(width) >= 32 { 3 } else { 2 };
                let factor = 1 << downs;
                if channels == 0 || height % factor != 0 || width % factor != 0 {
                    return Err(Error::invalid(format!(
                        "image side must be divisible by {factor}, got {height}×{width}"
                    )));
                }
                let pair_input = match self.fusion {
                    PairFusion::Width => vec![channels, height, 2 * width],
                    PairFusion::Channel => vec![2 * channels, height, width],
                };
                let base = self.base_channels;
                ArchSpecs {
                    generator: self.image_generator(channels, height, width, downs),
                    encoder: conv_stack(&[channels, height, width], base, downs, 2 * self.latent_dim, Activation::Identity, false),
                    data_disc: conv_stack(&[channels, height, width], base, downs, 1, head, self.spectral_norm),
                    pair_disc: conv_stack(&pair_input, base, downs, 1, head, self.spectral_norm),
                    latent_disc,
                }
            }
        };
        for spec in [&specs.generator, &specs.encoder, &specs.data_disc, &specs.latent_disc, &specs.pair_disc] {
            spec.shapes()?;
        }
        Ok(specs)
    }

    fn image_generator(&self, channels: usize, height: usize, width: usize, ups: usize) -> NetworkSpec {
        let top = self.base_channels << (ups - 1);
        let (h0, w0) = (height >> ups, width >> ups);
        let mut layers = vec![
            Layer::Linear {
                fan_in: self.latent_dim,
                fan_out: top * h0 * w0,
            },
            Layer::Act(Activation::Relu),
            Layer::Reshape(vec![top, h0, w0]),
        ];
        let mut ch = top;
        for i in 0..ups {
            let last = i + 1 == ups;
            let out = if last { channels } else { ch / 2 };
            layers.push(Layer::ConvTranspose {
                in_ch: ch,
                out_ch: out,
                kernel: 4,
                stride: 2,
                pad: 1,
            });
            layers.push(Layer::Act(if last { Activation::Tanh } else { Activation::Relu }));
            ch = out;
        }
        NetworkSpec {
            input: vec![self.latent_dim],
            layers,
            spectral_norm: false,
        }
    }
}

/// Specs for the five networks of a bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchSpecs {
    pub generator: NetworkSpec,
    pub encoder: NetworkSpec,
    pub data_disc: NetworkSpec,
    pub latent_disc: NetworkSpec,
    pub pair_disc: NetworkSpec,
}

fn mlp(input: usize, hidden: &[usize], out: usize, act: Activation, head: Activation) -> Vec<Layer> {
    let mut layers = Vec::new();
    let mut fan_in = input;
    for &h in hidden {
        layers.push(Layer::Linear { fan_in, fan_out: h });
        layers.push(Layer::Act(act));
        fan_in = h;
    }
    layers.push(Layer::Linear { fan_in, fan_out: out });
    if head != Activation::Identity {
        layers.push(Layer::Act(head));
    }
    layers
}

/// Stride-2 `4×4` convolutions with LeakyReLU, then a linear head.
fn conv_stack(input: &[usize], base: usize, downs: usize, out: usize, head: Activation, sn: bool) -> NetworkSpec {
    let mut layers = Vec::new();
    let (mut ch, mut h, mut w) = (input[0], input[1], input[2]);
    for i in 0..downs {
        let next = base << i;
        layers.push(Layer::Conv {
            in_ch: ch,
            out_ch: next,
            kernel: 4,
            stride: 2,
            pad: 1,
        });
        layers.push(Layer::Act(Activation::LeakyRelu(0.2)));
        ch = next;
        h /= 2;
        w /= 2;
    }
    layers.push(Layer::Reshape(vec![ch * h * w]));
    layers.push(Layer::Linear {
        fan_in: ch * h * w,
        fan_out: out,
    });
    if head != Activation::Identity {
        layers.push(Layer::Act(head));
    }
    NetworkSpec {
        input: input.to_vec(),
        layers,
        spectral_norm: sn,
    }
}
