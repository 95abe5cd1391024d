//! Wasserstein critics with a gradient penalty at interpolated inputs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nets::{Bound, Network};
use crate::tensor::{Real, Tape, Tensor, Var};

/// How pairs `(x, y)` and `(x′, y′)` are mixed for the penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaMode {
    /// One `α` per pair for both members.
    Shared,
    /// Separate `α₁`, `α₂` for the two members.
    Independent,
}

impl AlphaMode {
    pub fn name(self) -> &'static str {
        match self {
            AlphaMode::Shared => "shared",
            AlphaMode::Independent => "independent",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "shared" => Ok(AlphaMode::Shared),
            "independent" => Ok(AlphaMode::Independent),
            _ => Err(Error::invalid(format!("unknown alpha mode `{name}`"))),
        }
    }
}

/// `n` draws from `U[0, 1]`.
pub fn sample_alphas<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> Vec<R> {
    (0..n).map(|_| R::lit(rng.random::<f64>())).collect()
}

/// `α_n · real_n + (1 − α_n) · fake_n` per sample.
pub fn interpolate<R: Real>(real: &Tensor<R>, fake: &Tensor<R>, alpha: &[R]) -> Result<Tensor<R>> {
    if real.shape() != fake.shape() {
        return Err(Error::invalid(format!(
            "interpolation endpoints differ in shape: {:?} vs {:?}",
            real.shape(),
            fake.shape()
        )));
    }
    let n = real.shape()[0];
    if alpha.len() != n {
        return Err(Error::invalid(format!("{} alphas for a batch of {n}", alpha.len())));
    }
    let inner = real.len() / n;
    let data = real
        .data()
        .chunks(inner)
        .zip(fake.data().chunks(inner))
        .zip(alpha)
        .flat_map(|((r, f), &a)| r.iter().zip(f).map(move |(&r, &f)| a * r + (R::one() - a) * f))
        .collect();
    Tensor::new(real.shape(), data)
}

/// Interpolates `(x, y)` towards `(x′, y′)`; draws one `α` per pair in shared
/// mode and two in independent mode (first for `x`, then for `y`).
pub fn interpolate_pairs<R: Real, G: Rng + ?Sized>(
    real: (&Tensor<R>, &Tensor<R>),
    fake: (&Tensor<R>, &Tensor<R>),
    mode: AlphaMode,
    rng: &mut G,
) -> Result<(Tensor<R>, Tensor<R>)> {
    let n = real.0.shape()[0];
    let a1 = sample_alphas(n, rng);
    let a2 = match mode {
        AlphaMode::Shared => a1.clone(),
        AlphaMode::Independent => sample_alphas(n, rng),
    };
    Ok((interpolate(real.0, fake.0, &a1)?, interpolate(real.1, fake.1, &a2)?))
}

/// `λ · mean_n (‖∇ f(input_n)‖₂ − 1)²`, differentiable in the critic's
/// parameters. The critic must output `[N, 1]`.
pub fn gradient_penalty<R: Real>(
    tape: &mut Tape<R>,
    critic: &Network<R>,
    bound: &Bound,
    input: Tensor<R>,
    lambda: f64,
) -> Result<Var> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("gradient penalty lambda must be positive, got {lambda}")));
    }
    let x = tape.constant(input);
    let trace = critic.forward_traced(tape, bound, x)?;
    let g = critic.input_gradient(tape, bound, &trace)?;
    let sq = tape.square(g);
    let ss = tape.sum_per_sample(sq);
    let norm = tape.sqrt(ss)?;
    let dev = tape.add_scalar(norm, -R::one());
    let dev = tape.square(dev);
    let m = tape.mean(dev);
    Ok(tape.mul_scalar(m, R::lit(lambda)))
}

/// Critic loss `mean f(fake) − mean f(real) + penalty` and generator-side
/// loss `−mean f(fake)`.
pub fn wasserstein_losses<R: Real>(tape: &mut Tape<R>, f_real: Var, f_fake: Var, penalty: Var) -> Result<(Var, Var)> {
    if tape.value(f_real).is_empty() || tape.value(f_fake).is_empty() {
        return Err(Error::invalid("wasserstein_losses: empty batch"));
    }
    let r = tape.mean(f_real);
    let f = tape.mean(f_fake);
    let gap = tape.sub(f, r)?;
    let critic = tape.add(gap, penalty)?;
    let gen = tape.neg(f);
    Ok((critic, gen))
}
