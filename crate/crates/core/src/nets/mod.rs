//! Generator, encoder and the three discriminators.
//!
//! Every network is a [`NetworkSpec`] (a checked layer list) plus a flat list
//! of parameter tensors. To run one, bind its parameters to a tape with
//! [`Network::bind`]: trainable bindings register gradient-carrying leaves,
//! frozen bindings register constants, which is how the training step keeps
//! discriminator and generator/encoder gradients apart.

mod arch;
mod spectral;

pub use arch::{ArchConfig, ArchSpecs, DataShape, Head, PairFusion};
pub use spectral::{spectral_normalize, SpectralState};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{conv_output_size, Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// Weight `[fan_out, fan_in]`, bias `[fan_out]`.
    Linear { fan_in: usize, fan_out: usize },
    /// Weight `[out_ch, in_ch, k, k]`, bias `[out_ch]`.
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    /// Weight `[in_ch, out_ch, k, k]`, bias `[out_ch]`.
    ConvTranspose {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Act(Activation),
    /// Per-sample target shape.
    Reshape(Vec<usize>),
}

impl Layer {
    fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            Layer::Linear { fan_in, fan_out } => Some(vec![fan_out, fan_in]),
            Layer::Conv {
                in_ch, out_ch, kernel, ..
            } => Some(vec![out_ch, in_ch, kernel, kernel]),
            Layer::ConvTranspose {
                in_ch, out_ch, kernel, ..
            } => Some(vec![in_ch, out_ch, kernel, kernel]),
            _ => None,
        }
    }

    fn bias_len(&self) -> Option<usize> {
        match *self {
            Layer::Linear { fan_out, .. } => Some(fan_out),
            Layer::Conv { out_ch, .. } | Layer::ConvTranspose { out_ch, .. } => Some(out_ch),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Layer::Linear { .. } => "linear",
            Layer::Conv { .. } => "conv",
            Layer::ConvTranspose { .. } => "conv_transpose",
            Layer::Act(_) => "activation",
            Layer::Reshape(_) => "reshape",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    /// Per-sample input shape (`[d]` for vectors, `[C, H, W]` for images).
    pub input: Vec<usize>,
    pub layers: Vec<Layer>,
    pub spectral_norm: bool,
}

impl NetworkSpec {
    /// Per-sample shape after each layer; fails on incompatible neighbours.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| Error::invalid(format!("layer {i} ({}): {msg}", layer.name()));
            cur = match *layer {
                Layer::Linear { fan_in, fan_out } => {
                    if cur != [fan_in] {
                        return Err(bad(format!("expects [{fan_in}], got {cur:?}")));
                    }
                    vec![fan_out]
                }
                Layer::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    pad,
                } => {
                    if cur.len() != 3 || cur[0] != in_ch {
                        return Err(bad(format!("expects {in_ch} channels, got {cur:?}")));
                    }
                    let h = conv_output_size(cur[1], kernel, stride, pad);
                    let w = conv_output_size(cur[2], kernel, stride, pad);
                    match (h, w) {
                        (Some(h), Some(w)) => vec![out_ch, h, w],
                        _ => return Err(bad(format!("kernel does not fit {cur:?}"))),
                    }
                }
                Layer::ConvTranspose {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    pad,
                } => {
                    if cur.len() != 3 || cur[0] != in_ch {
                        return Err(bad(format!("expects {in_ch} channels, got {cur:?}")));
                    }
                    let grow = |n: usize| ((n - 1) * stride + kernel).checked_sub(2 * pad).filter(|&m| m > 0);
                    match (grow(cur[1]), grow(cur[2])) {
                        (Some(h), Some(w)) => vec![out_ch, h, w],
                        _ => return Err(bad("padding exceeds output".into())),
                    }
                }
                Layer::Act(_) => cur,
                Layer::Reshape(ref shape) => {
                    if shape.iter().product::<usize>() != cur.iter().product::<usize>() {
                        return Err(bad(format!("cannot reshape {cur:?} to {shape:?}")));
                    }
                    shape.clone()
                }
            };
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap_or_else(|| self.input.clone()))
    }

    /// Final activation, if the last layer is one.
    pub fn head(&self) -> Activation {
        match self.layers.last() {
            Some(Layer::Act(a)) => *a,
            _ => Activation::Identity,
        }
    }

    /// Weight then bias for every parametrized layer, in layer order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let (Some(w), Some(b)) = (layer.weight_shape(), layer.bias_len()) {
                out.push(w);
                out.push(vec![b]);
            }
        }
        out
    }

    /// Hidden widths of the linear layers (all but the last).
    pub fn hidden_widths(&self) -> Vec<usize> {
        let mut widths: Vec<usize> = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Linear { fan_out, .. } => Some(*fan_out),
                _ => None,
            })
            .collect();
        widths.pop();
        widths
    }
}

/// Pre-activations and layer inputs recorded during a forward pass.
pub struct Trace {
    /// `inputs[i]` is the input to layer `i`.
    pub inputs: Vec<Var>,
    pub output: Var,
}

/// Parameters of one network registered on a tape.
pub struct Bound {
    pub params: Vec<Var>,
    /// Weights as used by the forward pass (spectrally normalized when enabled).
    effective: Vec<Var>,
    /// Transposed linear weights, by parameter index.
    transposed: Vec<Option<Var>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<R: Real = f32> {
    pub spec: NetworkSpec,
    pub params: Vec<Tensor<R>>,
    /// One state per weight tensor when spectral normalization is enabled.
    pub spectral: Vec<SpectralState<R>>,
}

impl<R: Real> Network<R> {
    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn init<G: Rng + ?Sized>(spec: NetworkSpec, rng: &mut G) -> Result<Self> {
        spec.shapes()?;
        let mut params = Vec::new();
        for shape in spec.param_shapes() {
            if shape.len() == 1 {
                params.push(Tensor::zeros(&shape));
            } else {
                let fan_in: usize = shape[1..].iter().product();
                let bound = 1.0 / (fan_in as f64).sqrt();
                params.push(Tensor::uniform(&shape, -bound, bound, rng));
            }
        }
        let spectral = if spec.spectral_norm {
            params
                .iter()
                .step_by(2)
                .map(|w| SpectralState::init(w, rng))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Network { spec, params, spectral })
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn cast<S: Real>(&self) -> Network<S> {
        Network {
            spec: self.spec.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
            spectral: self
                .spectral
                .iter()
                .map(|s| SpectralState {
                    u: s.u.cast(),
                    v: s.v.cast(),
                })
                .collect(),
        }
    }

    /// Power-iteration update of every spectral state against current weights.
    pub fn refresh_spectral(&mut self, iters: usize) {
        for (state, w) in self.spectral.iter_mut().zip(self.params.iter().step_by(2)) {
            state.update(w, iters);
        }
    }

    pub fn bind(&self, tape: &mut Tape<R>, trainable: bool) -> Result<Bound> {
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.clone(), trainable))
            .collect();
        self.bind_vars(tape, params)
    }

    /// Binds already-registered parameter vars (one per tensor in `params`).
    pub fn bind_vars(&self, tape: &mut Tape<R>, params: Vec<Var>) -> Result<Bound> {
        let expected = self.spec.param_shapes();
        if params.len() != expected.len() || params.iter().zip(&expected).any(|(v, s)| tape.shape(*v) != &s[..]) {
            return Err(Error::invalid("parameter vars do not match the network spec"));
        }
        let mut effective = params.clone();
        if self.spec.spectral_norm {
            for (k, state) in self.spectral.iter().enumerate() {
                let w = params[2 * k];
                let shape = tape.shape(w).to_vec();
                let outer = tape.constant(state.outer(&shape));
                let prod = tape.mul(w, outer)?;
                let sigma = tape.sum(prod);
                let floor = R::lit(spectral::SIGMA_FLOOR);
                let sigma = tape.clamp(sigma, floor, R::infinity());
                let one = tape.constant(Tensor::scalar(R::one()));
                let inv = tape.div(one, sigma)?;
                effective[2 * k] = tape.scale_by(w, inv)?;
            }
        }
        let mut transposed = vec![None; params.len()];
        let mut k = 0;
        for layer in &self.spec.layers {
            if layer.weight_shape().is_some() {
                if matches!(layer, Layer::Linear { .. }) {
                    transposed[k] = Some(tape.transpose(effective[k])?);
                }
                k += 2;
            }
        }
        Ok(Bound {
            params,
            effective,
            transposed,
        })
    }

    pub fn forward(&self, tape: &mut Tape<R>, bound: &Bound, x: Var) -> Result<Var> {
        Ok(self.forward_traced(tape, bound, x)?.output)
    }

    /// Forward pass keeping every layer input, for [`Network::input_gradient`].
    pub fn forward_traced(&self, tape: &mut Tape<R>, bound: &Bound, x: Var) -> Result<Trace> {
        let xs = tape.shape(x);
        if xs.len() < 2 || xs[1..] != self.spec.input[..] {
            return Err(Error::invalid(format!(
                "network expects [N, {:?}], got {xs:?}",
                self.spec.input
            )));
        }
        let n = xs[0];
        let mut inputs = Vec::with_capacity(self.spec.layers.len());
        let mut cur = x;
        let mut k = 0;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            inputs.push(cur);
            cur = match layer {
                Layer::Linear { .. } => {
                    let wt = bound.transposed[k].expect("linear weight is transposed at bind time");
                    let y = tape.matmul(cur, wt)?;
                    let y = tape.add_bias(y, bound.effective[k + 1])?;
                    k += 2;
                    y
                }
                Layer::Conv { stride, pad, .. } => {
                    let y = tape.conv2d(cur, bound.effective[k], *stride, *pad)?;
                    let y = tape.add_bias(y, bound.effective[k + 1])?;
                    k += 2;
                    y
                }
                Layer::ConvTranspose { stride, pad, .. } => {
                    let y = tape.conv_transpose2d(cur, bound.effective[k], *stride, *pad, (0, 0))?;
                    let y = tape.add_bias(y, bound.effective[k + 1])?;
                    k += 2;
                    y
                }
                Layer::Act(a) => apply_activation(tape, cur, *a),
                Layer::Reshape(shape) => {
                    let mut full = vec![n];
                    full.extend_from_slice(shape);
                    tape.reshape(cur, &full)?
                }
            };
            if !tape.value(cur).all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite activation after layer {i} ({})",
                    layer.name()
                )));
            }
        }
        Ok(Trace { inputs, output: cur })
    }

    /// Gradient of `Σ_n f(x_n)` with respect to the network input, built from
    /// differentiable tape ops so that it can itself be differentiated with
    /// respect to the parameters. Requires a `[N, 1]` output and no layer
    /// that mixes samples.
    pub fn input_gradient(&self, tape: &mut Tape<R>, bound: &Bound, trace: &Trace) -> Result<Var> {
        let out_shape = tape.shape(trace.output).to_vec();
        if out_shape.len() != 2 || out_shape[1] != 1 {
            return Err(Error::invalid(format!(
                "input gradient needs a [N, 1] output, got {out_shape:?}"
            )));
        }
        let mut g = tape.constant(Tensor::ones(&out_shape));
        let mut k = bound.params.len();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let input = trace.inputs[i];
            let output = if i + 1 < trace.inputs.len() {
                trace.inputs[i + 1]
            } else {
                trace.output
            };
            g = match layer {
                Layer::Linear { .. } => {
                    k -= 2;
                    tape.matmul(g, bound.effective[k])?
                }
                Layer::Conv { stride, pad, kernel, .. } => {
                    k -= 2;
                    let ins = tape.shape(input).to_vec();
                    let gs = tape.shape(g).to_vec();
                    let base_h = (gs[2] - 1) * stride + kernel - 2 * pad;
                    let base_w = (gs[3] - 1) * stride + kernel - 2 * pad;
                    let out_pad = (ins[2] - base_h, ins[3] - base_w);
                    tape.conv_transpose2d(g, bound.effective[k], *stride, *pad, out_pad)?
                }
                Layer::ConvTranspose { stride, pad, .. } => {
                    k -= 2;
                    tape.conv2d(g, bound.effective[k], *stride, *pad)?
                }
                Layer::Act(a) => activation_backward(tape, g, input, output, *a)?,
                Layer::Reshape(_) => {
                    let ins = tape.shape(input).to_vec();
                    tape.reshape(g, &ins)?
                }
            };
        }
        Ok(g)
    }
}

pub(crate) fn apply_activation<R: Real>(tape: &mut Tape<R>, x: Var, a: Activation) -> Var {
    match a {
        Activation::Identity => x,
        Activation::Relu => tape.relu(x),
        Activation::LeakyRelu(s) => tape.leaky_relu(x, R::lit(s)),
        Activation::Tanh => tape.tanh(x),
        Activation::Sigmoid => tape.sigmoid(x),
    }
}

/// `g ⊙ act'(input)` as tape ops. Piecewise-linear activations use a constant
/// mask (their second derivative vanishes almost everywhere).
fn activation_backward<R: Real>(tape: &mut Tape<R>, g: Var, input: Var, output: Var, a: Activation) -> Result<Var> {
    match a {
        Activation::Identity => Ok(g),
        Activation::Relu | Activation::LeakyRelu(_) => {
            let slope = match a {
                Activation::LeakyRelu(s) => R::lit(s),
                _ => R::zero(),
            };
            let mask = tape.value(input).map(|x| if x > R::zero() { R::one() } else { slope });
            let mask = tape.constant(mask);
            tape.mul(g, mask)
        }
        Activation::Tanh => {
            let sq = tape.square(output);
            let d = tape.one_minus(sq);
            tape.mul(g, d)
        }
        Activation::Sigmoid => {
            let om = tape.one_minus(output);
            let d = tape.mul(output, om)?;
            tape.mul(g, d)
        }
    }
}

/// `q(z|x) = N(mu, diag(exp(log_sigma))²)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPosterior {
    pub mu: Var,
    pub log_sigma: Var,
}

/// Parameter blocks of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    Generator,
    Encoder,
    DataDisc,
    LatentDisc,
    PairDisc,
}

impl Block {
    pub const ALL: [Block; 5] = [
        Block::Generator,
        Block::Encoder,
        Block::DataDisc,
        Block::LatentDisc,
        Block::PairDisc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::Generator => "theta",
            Block::Encoder => "phi",
            Block::DataDisc => "psi_x",
            Block::LatentDisc => "psi_z",
            Block::PairDisc => "psi_xx",
        }
    }

    /// Position in [`Block::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_discriminator(self) -> bool {
        matches!(self, Block::DataDisc | Block::LatentDisc | Block::PairDisc)
    }
}

/// Generator, encoder and discriminators of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<R: Real = f32> {
    pub arch: ArchConfig,
    pub generator: Network<R>,
    pub encoder: Network<R>,
    pub data_disc: Network<R>,
    pub latent_disc: Network<R>,
    pub pair_disc: Network<R>,
}

impl<R: Real> ModelBundle<R> {
    pub fn new<G: Rng + ?Sized>(arch: ArchConfig, rng: &mut G) -> Result<Self> {
        let specs = arch.specs()?;
        Ok(ModelBundle {
            generator: Network::init(specs.generator, rng)?,
            encoder: Network::init(specs.encoder, rng)?,
            data_disc: Network::init(specs.data_disc, rng)?,
            latent_disc: Network::init(specs.latent_disc, rng)?,
            pair_disc: Network::init(specs.pair_disc, rng)?,
            arch,
        })
    }

    pub fn network(&self, block: Block) -> &Network<R> {
        match block {
            Block::Generator => &self.generator,
            Block::Encoder => &self.encoder,
            Block::DataDisc => &self.data_disc,
            Block::LatentDisc => &self.latent_disc,
            Block::PairDisc => &self.pair_disc,
        }
    }

    pub fn network_mut(&mut self, block: Block) -> &mut Network<R> {
        match block {
            Block::Generator => &mut self.generator,
            Block::Encoder => &mut self.encoder,
            Block::DataDisc => &mut self.data_disc,
            Block::LatentDisc => &mut self.latent_disc,
            Block::PairDisc => &mut self.pair_disc,
        }
    }

    pub fn cast<S: Real>(&self) -> ModelBundle<S> {
        ModelBundle {
            arch: self.arch.clone(),
            generator: self.generator.cast(),
            encoder: self.encoder.cast(),
            data_disc: self.data_disc.cast(),
            latent_disc: self.latent_disc.cast(),
            pair_disc: self.pair_disc.cast(),
        }
    }

    pub fn refresh_spectral(&mut self, iters: usize) {
        for block in Block::ALL {
            self.network_mut(block).refresh_spectral(iters);
        }
    }

    pub fn all_finite(&self) -> bool {
        Block::ALL
            .iter()
            .all(|b| self.network(*b).params.iter().all(|p| p.all_finite()))
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    /// `z: [N, latent] -> x: [N, ...data shape]`.
    pub fn generator_forward(&self, tape: &mut Tape<R>, bound: &Bound, z: Var) -> Result<Var> {
        let zs = tape.shape(z);
        if zs.len() != 2 || zs[1] != self.arch.latent_dim {
            return Err(Error::invalid(format!(
                "generator expects [N, {}] latents, got {zs:?}",
                self.arch.latent_dim
            )));
        }
        self.generator.forward(tape, bound, z)
    }

    pub fn encoder_forward(&self, tape: &mut Tape<R>, bound: &Bound, x: Var) -> Result<GaussianPosterior> {
        let out = self.encoder.forward(tape, bound, x)?;
        let l = self.arch.latent_dim;
        Ok(GaussianPosterior {
            mu: tape.slice(out, 1, 0, l)?,
            log_sigma: tape.slice(out, 1, l, l)?,
        })
    }

    pub fn data_discriminator_forward(&self, tape: &mut Tape<R>, bound: &Bound, x: Var) -> Result<Var> {
        self.data_disc.forward(tape, bound, x)
    }

    pub fn latent_discriminator_forward(&self, tape: &mut Tape<R>, bound: &Bound, z: Var) -> Result<Var> {
        self.latent_disc.forward(tape, bound, z)
    }

    /// Joins `x` and `y` into the pair discriminator's input.
    pub fn fuse_pair(&self, tape: &mut Tape<R>, x: Var, y: Var) -> Result<Var> {
        if tape.shape(x) != tape.shape(y) {
            return Err(Error::invalid(format!(
                "pair members differ in shape: {:?} vs {:?}",
                tape.shape(x),
                tape.shape(y)
            )));
        }
        let axis = match (&self.arch.data, self.arch.fusion) {
            (DataShape::Vector(_), _) => 1,
            (DataShape::Image { .. }, PairFusion::Width) => 3,
            (DataShape::Image { .. }, PairFusion::Channel) => 1,
        };
        tape.concat(&[x, y], axis)
    }

    pub fn pair_discriminator_forward(&self, tape: &mut Tape<R>, bound: &Bound, x: Var, y: Var) -> Result<Var> {
        let fused = self.fuse_pair(tape, x, y)?;
        self.pair_disc.forward(tape, bound, fused)
    }

    /// `G(z)` without recording gradients.
    pub fn sample(&self, z: &Tensor<R>) -> Result<Tensor<R>> {
        self.chunked(z, |tape, z| {
            let b = self.generator.bind(tape, false)?;
            self.generator_forward(tape, &b, z)
        })
    }

    /// Posterior means and log standard deviations, `[N, 2L]` split in half.
    pub fn encode(&self, x: &Tensor<R>) -> Result<(Tensor<R>, Tensor<R>)> {
        let out = self.chunked(x, |tape, x| {
            let b = self.encoder.bind(tape, false)?;
            self.encoder.forward(tape, &b, x)
        })?;
        let (n, l) = (out.shape()[0], self.arch.latent_dim);
        let mut mu = Vec::with_capacity(n * l);
        let mut ls = Vec::with_capacity(n * l);
        for row in out.data().chunks(2 * l) {
            mu.extend_from_slice(&row[..l]);
            ls.extend_from_slice(&row[l..]);
        }
        Ok((Tensor::new(&[n, l], mu)?, Tensor::new(&[n, l], ls)?))
    }

    /// `ẑ ~ q(z|x)` for every item.
    pub fn encode_sample<G: Rng + ?Sized>(&self, x: &Tensor<R>, rng: &mut G) -> Result<Tensor<R>> {
        let (mu, ls) = self.encode(x)?;
        let eps = Tensor::<R>::randn(mu.shape(), 1.0, rng);
        let scaled = ls.map(|v| v.exp()).zip(&eps, |s, e| s * e)?;
        mu.add(&scaled)
    }

    /// `G(μ(x))`, the deterministic reconstruction.
    pub fn reconstruct(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        let (mu, _) = self.encode(x)?;
        self.sample(&mu)
    }

    /// Runs `f` on batches of at most 256 items and stacks the results.
    fn chunked(&self, input: &Tensor<R>, f: impl Fn(&mut Tape<R>, Var) -> Result<Var>) -> Result<Tensor<R>> {
        const CHUNK: usize = 256;
        let n = input.shape()[0];
        let mut parts = Vec::with_capacity(n.div_ceil(CHUNK));
        for start in (0..n).step_by(CHUNK) {
            let mut tape = Tape::new();
            let x = tape.constant(input.slice_batch(start, CHUNK.min(n - start))?);
            let out = f(&mut tape, x)?;
            parts.push(tape.value(out).clone());
        }
        Tensor::stack_batch(&parts)
    }
}

/// Reparameterized draw `mu + exp(log_sigma) ⊙ noise`.
pub fn sample_latent_with_noise<R: Real>(tape: &mut Tape<R>, posterior: &GaussianPosterior, noise: Tensor<R>) -> Result<Var> {
    let eps = tape.constant(noise);
    let sigma = tape.exp(posterior.log_sigma);
    let scaled = tape.mul(sigma, eps)?;
    tape.add(posterior.mu, scaled)
}

pub fn sample_latent<R: Real, G: Rng + ?Sized>(tape: &mut Tape<R>, posterior: &GaussianPosterior, rng: &mut G) -> Result<Var> {
    let shape = tape.shape(posterior.mu).to_vec();
    sample_latent_with_noise(tape, posterior, Tensor::randn(&shape, 1.0, rng))
}
