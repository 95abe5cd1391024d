//! f-divergences with their conjugates and output activations.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Var};

/// A convex `f` with `f(1) = 0`, its derivative, its Fenchel conjugate `f*`
/// and the activation mapping a raw critic output into `dom f*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FDivergenceSpec {
    /// `f(u) = u ln u`.
    Kl,
    /// `f(u) = −ln u`.
    ReverseKl,
    /// `f(u) = u ln u − (u + 1) ln((u + 1)/2)`, twice the Jensen-Shannon divergence.
    JensenShannon,
    /// `f(u) = (√u − 1)²`.
    SquaredHellinger,
    /// `f(u) = u ln u − (u + 1) ln(u + 1)`: the original GAN game,
    /// `2·JSD − ln 4`.
    Gan,
}

impl FDivergenceSpec {
    pub const ALL: [FDivergenceSpec; 5] = [
        FDivergenceSpec::Kl,
        FDivergenceSpec::ReverseKl,
        FDivergenceSpec::JensenShannon,
        FDivergenceSpec::SquaredHellinger,
        FDivergenceSpec::Gan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FDivergenceSpec::Kl => "kl",
            FDivergenceSpec::ReverseKl => "reverse-kl",
            FDivergenceSpec::JensenShannon => "js",
            FDivergenceSpec::SquaredHellinger => "squared-hellinger",
            FDivergenceSpec::Gan => "gan",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown f-divergence `{name}`")))
    }

    pub fn f(self, u: f64) -> f64 {
        match self {
            FDivergenceSpec::Kl => xlogx(u),
            FDivergenceSpec::ReverseKl => -u.ln(),
            FDivergenceSpec::JensenShannon => xlogx(u) - (u + 1.0) * ((u + 1.0) / 2.0).ln(),
            FDivergenceSpec::SquaredHellinger => (u.sqrt() - 1.0).powi(2),
            FDivergenceSpec::Gan => xlogx(u) - (u + 1.0) * (u + 1.0).ln(),
        }
    }

    pub fn f_prime(self, u: f64) -> f64 {
        match self {
            FDivergenceSpec::Kl => u.ln() + 1.0,
            FDivergenceSpec::ReverseKl => -1.0 / u,
            FDivergenceSpec::JensenShannon => (2.0 * u / (u + 1.0)).ln(),
            FDivergenceSpec::SquaredHellinger => 1.0 - 1.0 / u.sqrt(),
            FDivergenceSpec::Gan => (u / (u + 1.0)).ln(),
        }
    }

    /// Supremum of `dom f*` (exclusive), `+∞` when unbounded.
    pub fn domain_sup(self) -> f64 {
        match self {
            FDivergenceSpec::Kl => f64::INFINITY,
            FDivergenceSpec::ReverseKl | FDivergenceSpec::Gan => 0.0,
            FDivergenceSpec::JensenShannon => LN_2,
            FDivergenceSpec::SquaredHellinger => 1.0,
        }
    }

    pub fn in_domain(self, t: f64) -> bool {
        t.is_finite() && t < self.domain_sup()
    }

    pub fn f_star(self, t: f64) -> f64 {
        match self {
            FDivergenceSpec::Kl => (t - 1.0).exp(),
            FDivergenceSpec::ReverseKl => -1.0 - (-t).ln(),
            FDivergenceSpec::JensenShannon => -(2.0 - t.exp()).ln(),
            FDivergenceSpec::SquaredHellinger => t / (1.0 - t),
            FDivergenceSpec::Gan => -(1.0 - t.exp()).ln(),
        }
    }

    pub fn activation(self, v: f64) -> f64 {
        match self {
            FDivergenceSpec::Kl => v,
            FDivergenceSpec::ReverseKl => -(-v).exp(),
            FDivergenceSpec::JensenShannon => LN_2 - softplus(-v),
            FDivergenceSpec::SquaredHellinger => 1.0 - (-v).exp(),
            FDivergenceSpec::Gan => -softplus(-v),
        }
    }

    pub fn activation_on<R: Real>(self, tape: &mut Tape<R>, v: Var) -> Var {
        match self {
            FDivergenceSpec::Kl => v,
            FDivergenceSpec::ReverseKl => {
                let n = tape.neg(v);
                let e = tape.exp(n);
                tape.neg(e)
            }
            FDivergenceSpec::JensenShannon => {
                let n = tape.neg(v);
                let s = tape.softplus(n);
                let s = tape.neg(s);
                tape.add_scalar(s, R::lit(LN_2))
            }
            FDivergenceSpec::SquaredHellinger => {
                let n = tape.neg(v);
                let e = tape.exp(n);
                tape.one_minus(e)
            }
            FDivergenceSpec::Gan => {
                let n = tape.neg(v);
                let s = tape.softplus(n);
                tape.neg(s)
            }
        }
    }

    /// `f*(t)` on the tape; `t` must lie in the conjugate's domain.
    pub fn f_star_on<R: Real>(self, tape: &mut Tape<R>, t: Var) -> Result<Var> {
        let sup = self.domain_sup();
        if let Some(pos) = tape.value(t).data().iter().position(|x| {
            let x = x.to_f64().unwrap_or(f64::NAN);
            !self.in_domain(x)
        }) {
            return Err(Error::Domain {
                op: "f_star",
                node: t.id(),
                detail: format!("{}: entry {pos} outside (-inf, {sup})", self.name()),
            });
        }
        Ok(match self {
            FDivergenceSpec::Kl => {
                let s = tape.add_scalar(t, R::lit(-1.0));
                tape.exp(s)
            }
            FDivergenceSpec::ReverseKl => {
                let n = tape.neg(t);
                let l = tape.log(n)?;
                let l = tape.neg(l);
                tape.add_scalar(l, R::lit(-1.0))
            }
            FDivergenceSpec::JensenShannon => {
                let e = tape.exp(t);
                let e = tape.neg(e);
                let d = tape.add_scalar(e, R::lit(2.0));
                let l = tape.log(d)?;
                tape.neg(l)
            }
            FDivergenceSpec::SquaredHellinger => {
                let d = tape.one_minus(t);
                tape.div(t, d)?
            }
            FDivergenceSpec::Gan => {
                let e = tape.exp(t);
                let d = tape.one_minus(e);
                let l = tape.log(d)?;
                tape.neg(l)
            }
        })
    }

    /// `f*(activation(v))` in a form that stays finite for large `|v|`.
    pub fn f_star_of_raw<R: Real>(self, tape: &mut Tape<R>, v: Var) -> Var {
        match self {
            FDivergenceSpec::Kl => {
                let s = tape.add_scalar(v, R::lit(-1.0));
                tape.exp(s)
            }
            FDivergenceSpec::ReverseKl => tape.add_scalar(v, R::lit(-1.0)),
            FDivergenceSpec::JensenShannon => {
                let s = tape.softplus(v);
                tape.add_scalar(s, R::lit(-LN_2))
            }
            FDivergenceSpec::SquaredHellinger => {
                let e = tape.exp(v);
                tape.add_scalar(e, R::lit(-1.0))
            }
            FDivergenceSpec::Gan => tape.softplus(v),
        }
    }
}

fn xlogx(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.ln()
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `mean T(real) − mean f*(T(fake))` for values already in `dom f*`.
pub fn f_gan_value<R: Real>(tape: &mut Tape<R>, t_real: Var, t_fake: Var, spec: FDivergenceSpec) -> Result<Var> {
    if tape.value(t_real).is_empty() || tape.value(t_fake).is_empty() {
        return Err(Error::invalid("f_gan_value: empty batch"));
    }
    let a = tape.mean(t_real);
    let fs = spec.f_star_on(tape, t_fake)?;
    let b = tape.mean(fs);
    tape.sub(a, b)
}

/// [`f_gan_value`] evaluated from raw critic outputs through the spec's
/// activation, in the numerically stable fused form.
pub fn f_gan_value_raw<R: Real>(tape: &mut Tape<R>, v_real: Var, v_fake: Var, spec: FDivergenceSpec) -> Result<Var> {
    if tape.value(v_real).is_empty() || tape.value(v_fake).is_empty() {
        return Err(Error::invalid("f_gan_value: empty batch"));
    }
    let t = spec.activation_on(tape, v_real);
    let a = tape.mean(t);
    let fs = spec.f_star_of_raw(tape, v_fake);
    let b = tape.mean(fs);
    tape.sub(a, b)
}
