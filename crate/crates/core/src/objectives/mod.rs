//! Value functions and losses for the three matching games.
//!
//! Probability-valued games clamp discriminator outputs to
//! `[1e-7, 1 − 1e-7]` before taking logs.

mod fdiv;
mod pagan;
mod wasserstein;

pub use fdiv::{f_gan_value, f_gan_value_raw, FDivergenceSpec};
pub use pagan::{
    pagan_losses, pagan_losses_with, pagan_vars_on, BlockParams, Draws, LossValues, PaganGraph, PaganVars, PenaltyAlphas,
};
pub use wasserstein::{
    gradient_penalty, interpolate, interpolate_pairs, sample_alphas, wasserstein_losses, AlphaMode,
};

use crate::error::{Error, Result};
use crate::nets::{Head, PairFusion};
use crate::tensor::{Real, Tape, Var};

pub const PROB_CLAMP: f64 = 1e-7;

/// Default penalty strength for the Wasserstein critic.
pub const DEFAULT_GP_LAMBDA: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GameKind {
    /// `min max E log D(real) + E log(1 − D(fake))` for every player.
    StandardMinimax,
    /// Discriminators as above; generator and encoder minimize `−E log D(fake)`.
    NonSaturating,
    FDivergence(FDivergenceSpec),
    WassersteinGp { lambda: f64, alpha: AlphaMode },
}

impl Default for GameKind {
    fn default() -> Self {
        GameKind::NonSaturating
    }
}

impl GameKind {
    pub fn wasserstein() -> Self {
        GameKind::WassersteinGp {
            lambda: DEFAULT_GP_LAMBDA,
            alpha: AlphaMode::Shared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let GameKind::WassersteinGp { lambda, .. } = self {
            if !(*lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::invalid(format!("gradient penalty lambda must be positive, got {lambda}")));
            }
        }
        Ok(())
    }

    /// Discriminator head this game needs.
    pub fn head(&self) -> Head {
        match self {
            GameKind::StandardMinimax | GameKind::NonSaturating => Head::Probability,
            GameKind::FDivergence(_) | GameKind::WassersteinGp { .. } => Head::Critic,
        }
    }

    pub fn default_fusion(&self) -> PairFusion {
        match self {
            GameKind::WassersteinGp { .. } => PairFusion::Channel,
            _ => PairFusion::Width,
        }
    }

    pub fn default_critic_steps(&self) -> usize {
        match self {
            GameKind::WassersteinGp { .. } => 10,
            _ => 1,
        }
    }

    pub fn name(&self) -> String {
        match self {
            GameKind::StandardMinimax => "standard".into(),
            GameKind::NonSaturating => "nonsaturating".into(),
            GameKind::FDivergence(spec) => format!("fgan:{}", spec.name()),
            GameKind::WassersteinGp { .. } => "wasserstein".into(),
        }
    }
}

fn check_batch<R: Real>(tape: &Tape<R>, v: Var, what: &str) -> Result<()> {
    if tape.value(v).is_empty() || tape.shape(v)[0] == 0 {
        return Err(Error::invalid(format!("{what}: empty batch")));
    }
    Ok(())
}

fn clamped<R: Real>(tape: &mut Tape<R>, d: Var) -> Var {
    tape.clamp(d, R::lit(PROB_CLAMP), R::lit(1.0 - PROB_CLAMP))
}

/// `mean log D`.
fn mean_log<R: Real>(tape: &mut Tape<R>, d: Var) -> Result<Var> {
    let c = clamped(tape, d);
    let l = tape.log(c)?;
    Ok(tape.mean(l))
}

/// `mean log(1 − D)`.
fn mean_log_one_minus<R: Real>(tape: &mut Tape<R>, d: Var) -> Result<Var> {
    let c = clamped(tape, d);
    let om = tape.one_minus(c);
    let l = tape.log(om)?;
    Ok(tape.mean(l))
}

/// `−mean log D(real) − mean log(1 − D(fake))`.
pub fn discriminator_loss<R: Real>(tape: &mut Tape<R>, d_real: Var, d_fake: Var) -> Result<Var> {
    check_batch(tape, d_real, "discriminator_loss")?;
    check_batch(tape, d_fake, "discriminator_loss")?;
    let a = mean_log(tape, d_real)?;
    let b = mean_log_one_minus(tape, d_fake)?;
    let s = tape.add(a, b)?;
    Ok(tape.neg(s))
}

/// `−mean log D`.
pub fn nonsaturating_loss<R: Real>(tape: &mut Tape<R>, d: Var) -> Result<Var> {
    check_batch(tape, d, "nonsaturating_loss")?;
    let m = mean_log(tape, d)?;
    Ok(tape.neg(m))
}

/// `mean log(1 − D)`, the generator side of the original minimax game.
pub fn minimax_generator_loss<R: Real>(tape: &mut Tape<R>, d: Var) -> Result<Var> {
    check_batch(tape, d, "minimax_generator_loss")?;
    mean_log_one_minus(tape, d)
}
