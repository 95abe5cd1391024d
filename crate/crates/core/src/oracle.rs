//! Brute-force verifiers on finite supports.
//!
//! Everything here is computed by direct summation in `f64`, independently of
//! the tape and the networks, so it can serve as ground truth for them: the
//! pair game's value function, its optimal discriminator, the Jensen-Shannon
//! identity it reduces to, and a central-difference gradient checker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tape, Tensor, Var};

const NORMALIZATION_TOL: f64 = 1e-12;

/// A joint table `p(x, y)` over `n_x × n_y` cells, row-major in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    n_x: usize,
    n_y: usize,
    table: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(n_x: usize, n_y: usize, table: Vec<f64>) -> Result<Self> {
        if n_x == 0 || n_y == 0 || table.len() != n_x * n_y {
            return Err(Error::invalid(format!(
                "joint table of {} entries does not match {n_x}×{n_y}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("joint table entry {bad} is negative or not finite")));
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("joint table sums to {total}, expected 1")));
        }
        Ok(DiscreteJoint { n_x, n_y, table })
    }

    /// `p(x) · c(y | x)` from a marginal and one conditional row per `x`.
    pub fn from_conditionals(marginal: &[f64], conditionals: &[Vec<f64>]) -> Result<Self> {
        if marginal.len() != conditionals.len() || conditionals.is_empty() {
            return Err(Error::invalid("one conditional row per marginal entry is required"));
        }
        let n_y = conditionals[0].len();
        let mut table = Vec::with_capacity(marginal.len() * n_y);
        for (px, row) in marginal.iter().zip(conditionals) {
            if row.len() != n_y {
                return Err(Error::invalid("conditional rows differ in length"));
            }
            table.extend(row.iter().map(|c| px * c));
        }
        Self::new(marginal.len(), n_y, table)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.n_y + y]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.chunks(self.n_y).map(|r| r.iter().sum()).collect()
    }

    /// `p(· | x)`, or `None` when `p(x) = 0`.
    pub fn conditional(&self, x: usize) -> Option<Vec<f64>> {
        let row = &self.table[x * self.n_y..(x + 1) * self.n_y];
        let px: f64 = row.iter().sum();
        (px > 0.0).then(|| row.iter().map(|p| p / px).collect())
    }

    fn same_support(&self, other: &Self) -> Result<()> {
        if self.n_x != other.n_x || self.n_y != other.n_y {
            return Err(Error::invalid(format!(
                "supports differ: {}×{} vs {}×{}",
                self.n_x, self.n_y, other.n_x, other.n_y
            )));
        }
        Ok(())
    }
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// Jensen-Shannon divergence in nats.
pub fn jsd_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::invalid("distributions must share a non-empty support"));
    }
    for (name, d) in [("p", p), ("q", q)] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > 1e-9 || d.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid(format!("{name} is not a probability vector (sum {s})")));
        }
    }
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        acc += 0.5 * kl_term(a, m) + 0.5 * kl_term(b, m);
    }
    Ok(acc)
}

/// Per-cell discriminator values; `None` marks cells where neither joint has mass.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorTable {
    pub n_x: usize,
    pub n_y: usize,
    pub values: Vec<Option<f64>>,
}

impl DiscriminatorTable {
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[x * self.n_y + y]
    }

    /// Largest absolute difference over cells defined in both tables.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max)
    }
}

/// `D*(t) = p₁(t) / (p₁(t) + p₂(t))` with `p₁` the real and `p₂` the fake joint.
pub fn optimal_discriminator_table(real: &DiscreteJoint, fake: &DiscreteJoint) -> Result<DiscriminatorTable> {
    real.same_support(fake)?;
    let values = real
        .table
        .iter()
        .zip(&fake.table)
        .map(|(&p1, &p2)| (p1 + p2 > 0.0).then(|| p1 / (p1 + p2)))
        .collect();
    Ok(DiscriminatorTable {
        n_x: real.n_x,
        n_y: real.n_y,
        values,
    })
}

/// Exact `E_real log D + E_fake log(1 - D)`.
pub fn value_function_discrete(real: &DiscreteJoint, fake: &DiscreteJoint, d: &DiscriminatorTable) -> Result<f64> {
    real.same_support(fake)?;
    if d.n_x != real.n_x || d.n_y != real.n_y {
        return Err(Error::invalid("discriminator table does not match the support"));
    }
    let mut v = 0.0;
    for (i, ((&p1, &p2), dv)) in real.table.iter().zip(&fake.table).zip(&d.values).enumerate() {
        if p1 == 0.0 && p2 == 0.0 {
            continue;
        }
        let dv = dv.ok_or_else(|| Error::Domain {
            op: "value_function_discrete",
            node: i,
            detail: "discriminator undefined on a cell with mass".into(),
        })?;
        if p1 > 0.0 {
            if !(dv > 0.0) {
                return Err(Error::Domain {
                    op: "value_function_discrete",
                    node: i,
                    detail: format!("D = {dv} on a cell with real mass"),
                });
            }
            v += p1 * dv.ln();
        }
        if p2 > 0.0 {
            if !(dv < 1.0) {
                return Err(Error::Domain {
                    op: "value_function_discrete",
                    node: i,
                    detail: format!("D = {dv} on a cell with fake mass"),
                });
            }
            v += p2 * (1.0 - dv).ln();
        }
    }
    Ok(v)
}

/// `E_{p*(x)} [-ln 4 + 2·JSD(real(·|x) ‖ fake(·|x))]`, the value the pair game
/// attains at its optimal discriminator. Both joints must share the marginal.
pub fn expected_jsd_value(real: &DiscreteJoint, fake: &DiscreteJoint) -> Result<f64> {
    real.same_support(fake)?;
    let (mr, mf) = (real.marginal_x(), fake.marginal_x());
    if mr.iter().zip(&mf).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::invalid("real and fake joints must share the x-marginal"));
    }
    let mut acc = 0.0;
    for (x, px) in mr.iter().enumerate() {
        if *px == 0.0 {
            continue;
        }
        let r = real.conditional(x).unwrap();
        let p = fake.conditional(x).unwrap();
        acc += px * (-(4.0f64).ln() + 2.0 * jsd_discrete(&r, &p)?);
    }
    Ok(acc)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Full-batch gradient ascent on the pair game's value function with a free
/// logit per cell (`D = sigmoid(logit)`), starting from zero logits.
pub fn gradient_descent_discriminator(
    real: &DiscreteJoint,
    fake: &DiscreteJoint,
    steps: usize,
    lr: f64,
) -> Result<DiscriminatorTable> {
    let init = vec![0.0; real.table.len()];
    gradient_descent_discriminator_from(real, fake, &init, steps, lr).map(|(t, _)| t)
}

/// As [`gradient_descent_discriminator`] from explicit initial logits; also
/// returns the final logits.
pub fn gradient_descent_discriminator_from(
    real: &DiscreteJoint,
    fake: &DiscreteJoint,
    init_logits: &[f64],
    steps: usize,
    lr: f64,
) -> Result<(DiscriminatorTable, Vec<f64>)> {
    real.same_support(fake)?;
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    if init_logits.len() != real.table.len() {
        return Err(Error::invalid("one initial logit per cell is required"));
    }
    let mut logits = init_logits.to_vec();
    for step in 0..steps {
        for ((l, &p1), &p2) in logits.iter_mut().zip(&real.table).zip(&fake.table) {
            let d = sigmoid(*l);
            // d/dl [p1 log σ(l) + p2 log(1 - σ(l))]
            *l += lr * (p1 * (1.0 - d) - p2 * d);
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric(format!("discriminator logits diverged at step {step}")));
        }
    }
    let values = logits.iter().map(|&l| Some(sigmoid(l))).collect();
    Ok((
        DiscriminatorTable {
            n_x: real.n_x,
            n_y: real.n_y,
            values,
        },
        logits,
    ))
}

/// Central-difference gradient of `f` at `point`, evaluated on constant tapes.
pub fn numeric_gradient<R, F>(f: F, point: &Tensor<R>, eps: f64) -> Result<Tensor<R>>
where
    R: Real,
    F: Fn(&mut Tape<R>, Var) -> Result<Var>,
{
    let eval = |p: Tensor<R>| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.constant(p);
        let out = f(&mut tape, v)?;
        let val = tape.value(out).item().to_f64().unwrap_or(f64::NAN);
        if !val.is_finite() {
            return Err(Error::Numeric("non-finite function value in finite differences".into()));
        }
        Ok(val)
    };
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += R::lit(eps);
        let mut minus = point.clone();
        minus.data_mut()[i] -= R::lit(eps);
        grad.push(R::lit((eval(plus)? - eval(minus)?) / (2.0 * eps)));
    }
    Tensor::new(point.shape(), grad)
}

/// Tape gradient of `f` at `point`.
pub fn autodiff_gradient<R, F>(f: F, point: &Tensor<R>) -> Result<Tensor<R>>
where
    R: Real,
    F: Fn(&mut Tape<R>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.param(point.clone());
    let out = f(&mut tape, v)?;
    if tape.value(out).len() != 1 {
        return Err(Error::invalid("function under test must return a scalar"));
    }
    if !tape.requires_grad(out) {
        // Constant function: the gradient is identically zero.
        return Ok(Tensor::zeros(point.shape()));
    }
    let mut grads = tape.backward(out)?;
    Ok(grads.take(v).unwrap_or_else(|| Tensor::zeros(point.shape())))
}

/// Max over coordinates of `|g_ad - g_fd| / max(1e-8, |g_fd|)`.
pub fn finite_difference_check<R, F>(f: F, point: &Tensor<R>, eps: f64) -> Result<f64>
where
    R: Real,
    F: Fn(&mut Tape<R>, Var) -> Result<Var>,
{
    let ad = autodiff_gradient(&f, point)?;
    let fd = numeric_gradient(&f, point, eps)?;
    Ok(ad
        .to_f64_vec()
        .iter()
        .zip(fd.to_f64_vec())
        .map(|(a, n)| (a - n).abs() / n.abs().max(1e-8))
        .fold(0.0, f64::max))
}

/// Splits a flat parameter vector into reshaped views, for checking functions
/// of several tensors with [`finite_difference_check`].
pub fn split_point<R: Real>(tape: &mut Tape<R>, point: Var, shapes: &[&[usize]]) -> Result<Vec<Var>> {
    let mut out = Vec::with_capacity(shapes.len());
    let mut offset = 0;
    for shape in shapes {
        let n: usize = shape.iter().product();
        let part = tape.slice(point, 0, offset, n)?;
        out.push(tape.reshape(part, shape)?);
        offset += n;
    }
    if offset != tape.shape(point)[0] {
        return Err(Error::invalid("shapes do not cover the whole point"));
    }
    Ok(out)
}

/// A pair of joints `p*(x) r(y|x)` and `p*(x) p(y|x)` with a shared marginal
/// and conditionals drawn uniformly on `[0.05, 1)` before normalization.
pub fn random_joint_pair<G: Rng + ?Sized>(n_x: usize, n_y: usize, rng: &mut G) -> Result<(DiscreteJoint, DiscreteJoint)> {
    let mut row = |n: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|p| p / s).collect()
    };
    let marginal = row(n_x);
    let real: Vec<Vec<f64>> = (0..n_x).map(|_| row(n_y)).collect();
    let fake: Vec<Vec<f64>> = (0..n_x).map(|_| row(n_y)).collect();
    Ok((
        DiscreteJoint::from_conditionals(&marginal, &real)?,
        DiscreteJoint::from_conditionals(&marginal, &fake)?,
    ))
}

/// Outcome of one check in [`proposition_suite`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Gradient-trained per-cell discriminators on 8×8 joints approach the
/// analytic optimum and never beat its value.
pub fn check_optimal_discriminator<G: Rng + ?Sized>(instances: usize, rng: &mut G) -> Result<CheckOutcome> {
    let (mut worst_dist, mut worst_gap) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..instances {
        let (real, fake) = random_joint_pair(8, 8, rng)?;
        let analytic = optimal_discriminator_table(&real, &fake)?;
        let learned = gradient_descent_discriminator(&real, &fake, 20_000, 20.0)?;
        worst_dist = worst_dist.max(analytic.linf_distance(&learned));
        let gap = value_function_discrete(&real, &fake, &learned)? - value_function_discrete(&real, &fake, &analytic)?;
        worst_gap = worst_gap.max(gap);
    }
    Ok(CheckOutcome {
        name: "optimal discriminator",
        passed: worst_dist < 0.05 && worst_gap <= 1e-9,
        detail: format!("max L-inf {worst_dist:.3e}, max V(learned) - V(analytic) {worst_gap:.3e}"),
    })
}

/// The value at the analytic optimum equals the expected JSD form.
pub fn check_expected_jsd_identity<G: Rng + ?Sized>(instances: usize, rng: &mut G) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n_x = rng.random_range(1..7);
        let n_y = rng.random_range(2..7);
        let (real, fake) = random_joint_pair(n_x, n_y, rng)?;
        let d = optimal_discriminator_table(&real, &fake)?;
        let v = value_function_discrete(&real, &fake, &d)?;
        worst = worst.max((v - expected_jsd_value(&real, &fake)?).abs());
    }
    Ok(CheckOutcome {
        name: "expected JSD identity",
        passed: worst <= 1e-12,
        detail: format!("max |V(D*) - E[-ln 4 + 2 JSD]| = {worst:.3e} over {instances} instances"),
    })
}

/// With `r(y|x) = δ_x(y)` and a fake conditional that puts no mass on
/// `y = x`, the optimal discriminator is exactly the indicator `I{x = y}`.
pub fn check_identity_augmentation<G: Rng + ?Sized>(n: usize, rng: &mut G) -> Result<CheckOutcome> {
    let (_, base) = random_joint_pair(n, n, rng)?;
    let marginal = base.marginal_x();
    let real: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| if x == y { 1.0 } else { 0.0 }).collect()).collect();
    let fake: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut row = base.conditional(x).unwrap();
            row[x] = 0.0;
            let s: f64 = row.iter().sum();
            row.into_iter().map(|p| p / s).collect()
        })
        .collect();
    let real = DiscreteJoint::from_conditionals(&marginal, &real)?;
    let fake = DiscreteJoint::from_conditionals(&marginal, &fake)?;
    let d = optimal_discriminator_table(&real, &fake)?;
    let mut mismatches = 0;
    for x in 0..n {
        for y in 0..n {
            let mass = real.get(x, y) + fake.get(x, y) > 0.0;
            let want = if x == y { 1.0 } else { 0.0 };
            if mass && d.get(x, y) != Some(want) {
                mismatches += 1;
            }
        }
    }
    Ok(CheckOutcome {
        name: "identity augmentation gives an indicator",
        passed: mismatches == 0,
        detail: format!("{mismatches} of {} cells differ from I{{x = y}}", n * n),
    })
}

/// The discrete checks run by the `verify` command.
pub fn proposition_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        check_optimal_discriminator(5, &mut rng)?,
        check_expected_jsd_identity(100, &mut rng)?,
        check_identity_augmentation(8, &mut rng)?,
    ])
}
