//! The five losses of one training step, on a single tape.
//!
//! Generator and encoder outputs are detached before they reach the
//! discriminator losses, and the generator/encoder losses read the
//! discriminators through a second, frozen binding. Each loss therefore only
//! reaches the parameters it is meant to update.

use rand::Rng;

use super::{
    discriminator_loss, f_gan_value_raw, gradient_penalty, interpolate, minimax_generator_loss, nonsaturating_loss,
    sample_alphas, wasserstein_losses, AlphaMode, GameKind,
};
use crate::augment::{augment, AugmentConfig};
use crate::error::{Error, Result};
use crate::nets::{sample_latent_with_noise, Block, Bound, ModelBundle};
use crate::tensor::{Gradients, Real, Tape, Tensor, Var};

/// Interpolation coefficients for the three gradient penalties.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyAlphas<R> {
    pub data: Vec<R>,
    pub latent: Vec<R>,
    /// Coefficients for the first and second pair member.
    pub pair_x: Vec<R>,
    pub pair_y: Vec<R>,
}

/// Every random quantity one loss evaluation consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct Draws<R: Real> {
    /// `z ~ p(z)`.
    pub z_prior: Tensor<R>,
    /// Reparameterization noise for `ẑ ~ q(z|x)`.
    pub eps: Tensor<R>,
    /// `x_aug ~ r(y|x)`.
    pub x_aug: Tensor<R>,
    pub alphas: Option<PenaltyAlphas<R>>,
}

impl<R: Real> Draws<R> {
    /// Draws in a fixed order: prior, noise, augmentation, then penalty
    /// coefficients.
    pub fn sample<G: Rng + ?Sized>(
        bundle: &ModelBundle<R>,
        x: &Tensor<R>,
        game: &GameKind,
        augment_cfg: &AugmentConfig,
        rng: &mut G,
    ) -> Result<Self> {
        let n = x.shape()[0];
        let l = bundle.latent_dim();
        let z_prior = Tensor::randn(&[n, l], 1.0, rng);
        let eps = Tensor::randn(&[n, l], 1.0, rng);
        let x_aug = augment(x, augment_cfg, rng)?;
        let alphas = match game {
            GameKind::WassersteinGp { alpha, .. } => {
                let data = sample_alphas(n, rng);
                let latent = sample_alphas(n, rng);
                let pair_x = sample_alphas(n, rng);
                let pair_y = match alpha {
                    AlphaMode::Shared => pair_x.clone(),
                    AlphaMode::Independent => sample_alphas(n, rng),
                };
                Some(PenaltyAlphas {
                    data,
                    latent,
                    pair_x,
                    pair_y,
                })
            }
            _ => None,
        };
        Ok(Draws {
            z_prior,
            eps,
            x_aug,
            alphas,
        })
    }
}

/// Parameter vars of each block as registered on the tape.
#[derive(Clone, Debug, Default)]
pub struct BlockParams {
    vars: [Vec<Var>; 5],
}

impl BlockParams {
    pub fn get(&self, block: Block) -> &[Var] {
        &self.vars[block.index()]
    }
}

/// Loss nodes of one evaluation. `g` and `e` are absent for
/// discriminator-only evaluations.
#[derive(Clone, Debug)]
pub struct PaganVars {
    pub d_x: Var,
    pub d_z: Var,
    pub d_xx: Var,
    /// `d_x + d_z + d_xx`; the blocks are disjoint, so one backward pass
    /// serves all three discriminators.
    pub d_total: Var,
    pub g: Option<Var>,
    pub e: Option<Var>,
    /// Gradient penalties (data, latent, pair) in Wasserstein mode.
    pub penalties: Option<[Var; 3]>,
    pub params: BlockParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValues {
    pub d_x: f64,
    pub d_z: f64,
    pub d_xx: f64,
    pub g: Option<f64>,
    pub e: Option<f64>,
}

pub struct PaganGraph<R: Real> {
    pub tape: Tape<R>,
    pub vars: PaganVars,
}

impl<R: Real> PaganGraph<R> {
    pub fn values(&self) -> LossValues {
        let v = |x: Var| self.tape.value(x).item().to_f64().unwrap_or(f64::NAN);
        LossValues {
            d_x: v(self.vars.d_x),
            d_z: v(self.vars.d_z),
            d_xx: v(self.vars.d_xx),
            g: self.vars.g.map(v),
            e: self.vars.e.map(v),
        }
    }

    pub fn discriminator_gradients(&self) -> Result<Gradients<R>> {
        self.tape.backward(self.vars.d_total)
    }

    pub fn generator_gradients(&self) -> Result<Gradients<R>> {
        let g = self.vars.g.ok_or_else(|| Error::invalid("generator loss was not built"))?;
        self.tape.backward(g)
    }

    pub fn encoder_gradients(&self) -> Result<Gradients<R>> {
        let e = self.vars.e.ok_or_else(|| Error::invalid("encoder loss was not built"))?;
        self.tape.backward(e)
    }

    /// Gradients of `block`'s parameters in `grads`, zero where unreached.
    pub fn block_gradients(&self, grads: &Gradients<R>, block: Block) -> Vec<Tensor<R>> {
        self.vars
            .params
            .get(block)
            .iter()
            .map(|&v| {
                grads
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(self.tape.shape(v)))
            })
            .collect()
    }
}

/// Samples all draws from `rng` and builds the five losses.
pub fn pagan_losses<R: Real, G: Rng + ?Sized>(
    bundle: &ModelBundle<R>,
    x: &Tensor<R>,
    rng: &mut G,
    game: &GameKind,
    augment_cfg: &AugmentConfig,
) -> Result<PaganGraph<R>> {
    let draws = Draws::sample(bundle, x, game, augment_cfg, rng)?;
    pagan_losses_with(bundle, x, &draws, game, true)
}

/// Builds the losses from fixed draws. With `generator_losses = false` only
/// the discriminator losses are built.
pub fn pagan_losses_with<R: Real>(
    bundle: &ModelBundle<R>,
    x: &Tensor<R>,
    draws: &Draws<R>,
    game: &GameKind,
    generator_losses: bool,
) -> Result<PaganGraph<R>> {
    let mut tape = Tape::new();
    let vars = pagan_vars_on(&mut tape, bundle, x, draws, game, generator_losses, None)?;
    Ok(PaganGraph { tape, vars })
}

struct Outputs {
    real: Var,
    fake: Var,
    /// Frozen discriminator on the live fake, for the generator side.
    fake_frozen: Option<Var>,
}

/// Builds the losses on an existing tape. `override_block` replaces the
/// trainable parameters of one block by caller-owned vars, which lets
/// gradient checks differentiate with respect to a flat parameter vector.
pub fn pagan_vars_on<R: Real>(
    tape: &mut Tape<R>,
    bundle: &ModelBundle<R>,
    x: &Tensor<R>,
    draws: &Draws<R>,
    game: &GameKind,
    generator_losses: bool,
    override_block: Option<(Block, &[Var])>,
) -> Result<PaganVars> {
    game.validate()?;
    let dims = bundle.arch.data.dims();
    let n = x.shape()[0];
    if x.shape().len() != dims.len() + 1 || x.shape()[1..] != dims[..] {
        return Err(Error::invalid(format!("batch shape {:?} does not match data {dims:?}", x.shape())));
    }
    if n < 2 {
        return Err(Error::invalid(format!("batch size must be at least 2, got {n}")));
    }
    let l = bundle.latent_dim();
    if draws.z_prior.shape() != [n, l] || draws.eps.shape() != [n, l] || draws.x_aug.shape() != x.shape() {
        return Err(Error::invalid("draws do not match the batch"));
    }

    let mut params = BlockParams::default();
    let mut bound: Vec<Bound> = Vec::with_capacity(5);
    for block in Block::ALL {
        let net = bundle.network(block);
        let b = match override_block {
            Some((ob, vars)) if ob == block => net.bind_vars(tape, vars.to_vec())?,
            _ => net.bind(tape, true)?,
        };
        params.vars[block.index()] = b.params.clone();
        bound.push(b);
    }
    let live = |b: Block| &bound[b.index()];

    let xv = tape.constant(x.clone());
    let x_aug = tape.constant(draws.x_aug.clone());
    let z_prior = tape.constant(draws.z_prior.clone());

    let post = bundle.encoder_forward(tape, live(Block::Encoder), xv)?;
    let z_hat = sample_latent_with_noise(tape, &post, draws.eps.clone())?;
    let x_pr = bundle.generator_forward(tape, live(Block::Generator), z_prior)?;
    let x_rec = bundle.generator_forward(tape, live(Block::Generator), z_hat)?;
    let x_pr_d = tape.detach(x_pr);
    let z_hat_d = tape.detach(z_hat);
    let x_rec_d = tape.detach(x_rec);

    let frozen = if generator_losses {
        Some([
            bundle.data_disc.bind(tape, false)?,
            bundle.latent_disc.bind(tape, false)?,
            bundle.pair_disc.bind(tape, false)?,
        ])
    } else {
        None
    };

    let data = Outputs {
        real: bundle.data_discriminator_forward(tape, live(Block::DataDisc), xv)?,
        fake: bundle.data_discriminator_forward(tape, live(Block::DataDisc), x_pr_d)?,
        fake_frozen: match &frozen {
            Some(f) => Some(bundle.data_discriminator_forward(tape, &f[0], x_pr)?),
            None => None,
        },
    };
    let latent = Outputs {
        real: bundle.latent_discriminator_forward(tape, live(Block::LatentDisc), z_prior)?,
        fake: bundle.latent_discriminator_forward(tape, live(Block::LatentDisc), z_hat_d)?,
        fake_frozen: match &frozen {
            Some(f) => Some(bundle.latent_discriminator_forward(tape, &f[1], z_hat)?),
            None => None,
        },
    };
    let pair = Outputs {
        real: bundle.pair_discriminator_forward(tape, live(Block::PairDisc), xv, x_aug)?,
        fake: bundle.pair_discriminator_forward(tape, live(Block::PairDisc), xv, x_rec_d)?,
        fake_frozen: match &frozen {
            Some(f) => Some(bundle.pair_discriminator_forward(tape, &f[2], xv, x_rec)?),
            None => None,
        },
    };

    let mut penalties = None;
    let (d_x, d_z, d_xx, g, e) = match *game {
        GameKind::StandardMinimax | GameKind::NonSaturating => {
            let d_x = discriminator_loss(tape, data.real, data.fake)?;
            let d_z = discriminator_loss(tape, latent.real, latent.fake)?;
            let d_xx = discriminator_loss(tape, pair.real, pair.fake)?;
            let gen_term = |tape: &mut Tape<R>, d: Var| match game {
                GameKind::StandardMinimax => minimax_generator_loss(tape, d),
                _ => nonsaturating_loss(tape, d),
            };
            let (g, e) = match (data.fake_frozen, latent.fake_frozen, pair.fake_frozen) {
                (Some(dx), Some(dz), Some(dxx)) => {
                    let a = gen_term(tape, dx)?;
                    let b = gen_term(tape, dz)?;
                    let p = gen_term(tape, dxx)?;
                    (Some(tape.add(a, p)?), Some(tape.add(b, p)?))
                }
                _ => (None, None),
            };
            (d_x, d_z, d_xx, g, e)
        }
        GameKind::FDivergence(spec) => {
            let mut d = Vec::with_capacity(3);
            let mut v = [None; 3];
            for (i, o) in [&data, &latent, &pair].into_iter().enumerate() {
                let value = f_gan_value_raw(tape, o.real, o.fake, spec)?;
                d.push(tape.neg(value));
                if let Some(ff) = o.fake_frozen {
                    let real = tape.detach(o.real);
                    v[i] = Some(f_gan_value_raw(tape, real, ff, spec)?);
                }
            }
            let (g, e) = match v {
                [Some(vx), Some(vz), Some(vxx)] => (Some(tape.add(vx, vxx)?), Some(tape.add(vz, vxx)?)),
                _ => (None, None),
            };
            (d[0], d[1], d[2], g, e)
        }
        GameKind::WassersteinGp { lambda, .. } => {
            let alphas = draws
                .alphas
                .as_ref()
                .ok_or_else(|| Error::invalid("Wasserstein game needs penalty coefficients in the draws"))?;
            let fake_x = tape.value(x_pr).clone();
            let fake_z = tape.value(z_hat).clone();
            let fake_y = tape.value(x_rec).clone();
            let data_in = interpolate(x, &fake_x, &alphas.data)?;
            let latent_in = interpolate(&draws.z_prior, &fake_z, &alphas.latent)?;
            let px = interpolate(x, x, &alphas.pair_x)?;
            let py = interpolate(&draws.x_aug, &fake_y, &alphas.pair_y)?;
            let (pxv, pyv) = (tape.constant(px), tape.constant(py));
            let fused = bundle.fuse_pair(tape, pxv, pyv)?;
            let pair_in = tape.value(fused).clone();

            let p_x = gradient_penalty(tape, &bundle.data_disc, live(Block::DataDisc), data_in, lambda)?;
            let p_z = gradient_penalty(tape, &bundle.latent_disc, live(Block::LatentDisc), latent_in, lambda)?;
            let p_xx = gradient_penalty(tape, &bundle.pair_disc, live(Block::PairDisc), pair_in, lambda)?;
            penalties = Some([p_x, p_z, p_xx]);

            let (d_x, _) = wasserstein_losses(tape, data.real, data.fake, p_x)?;
            let (d_z, _) = wasserstein_losses(tape, latent.real, latent.fake, p_z)?;
            let (d_xx, _) = wasserstein_losses(tape, pair.real, pair.fake, p_xx)?;
            let (g, e) = match (data.fake_frozen, latent.fake_frozen, pair.fake_frozen) {
                (Some(fx), Some(fz), Some(fxx)) => {
                    let a = tape.mean(fx);
                    let b = tape.mean(fz);
                    let p = tape.mean(fxx);
                    let g = tape.add(a, p)?;
                    let e = tape.add(b, p)?;
                    (Some(tape.neg(g)), Some(tape.neg(e)))
                }
                _ => (None, None),
            };
            (d_x, d_z, d_xx, g, e)
        }
    };

    for (name, v) in [("L_d^x", Some(d_x)), ("L_d^z", Some(d_z)), ("L_d^xx", Some(d_xx)), ("L_g", g), ("L_e", e)] {
        if let Some(v) = v {
            if !tape.value(v).all_finite() {
                return Err(Error::Numeric(format!("loss {name} is not finite")));
            }
        }
    }
    let s = tape.add(d_x, d_z)?;
    let d_total = tape.add(s, d_xx)?;
    Ok(PaganVars {
        d_x,
        d_z,
        d_xx,
        d_total,
        g,
        e,
        penalties,
        params,
    })
}
