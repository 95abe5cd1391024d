#![allow(dead_code)]

use pagan::augment::AugmentConfig;
use pagan::nets::{ArchConfig, Block, DataShape, ModelBundle};
use pagan::objectives::{pagan_vars_on, Draws, GameKind, PaganVars};
use pagan::oracle::{autodiff_gradient, finite_difference_check, numeric_gradient, split_point};
use pagan::tensor::{Tape, Tensor, Var};
use pagan::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Apply = fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<Vec<usize>>,
    /// Sample inputs from `[0.5, 2]` instead of a standard normal.
    pub positive: bool,
    /// Non-differentiable points to keep samples away from.
    pub kinks: &'static [f64],
    pub apply: Apply,
}

fn case(name: &'static str, shapes: &[&[usize]], apply: Apply) -> OpCase {
    OpCase {
        name,
        shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        positive: false,
        kinks: &[],
        apply,
    }
}

/// One case per differentiable tape operation.
pub fn op_cases() -> Vec<OpCase> {
    let mut cases = vec![
        case("matmul", &[&[3, 4], &[4, 2]], |t, v| t.matmul(v[0], v[1])),
        case("conv2d", &[&[2, 2, 5, 5], &[3, 2, 3, 3]], |t, v| t.conv2d(v[0], v[1], 2, 1)),
        case("conv_transpose2d", &[&[2, 3, 3, 3], &[3, 2, 4, 4]], |t, v| {
            t.conv_transpose2d(v[0], v[1], 2, 1, (0, 0))
        }),
        case("transpose", &[&[3, 4]], |t, v| t.transpose(v[0])),
        case("add", &[&[2, 3], &[2, 3]], |t, v| t.add(v[0], v[1])),
        case("sub", &[&[2, 3], &[2, 3]], |t, v| t.sub(v[0], v[1])),
        case("mul", &[&[2, 3], &[2, 3]], |t, v| t.mul(v[0], v[1])),
        case("add_bias", &[&[2, 3, 2, 2], &[3]], |t, v| t.add_bias(v[0], v[1])),
        case("add_scalar", &[&[5]], |t, v| Ok(t.add_scalar(v[0], 0.7))),
        case("mul_scalar", &[&[5]], |t, v| Ok(t.mul_scalar(v[0], -1.3))),
        case("scale_by", &[&[2, 3], &[1]], |t, v| t.scale_by(v[0], v[1])),
        case("sigmoid", &[&[6]], |t, v| Ok(t.sigmoid(v[0]))),
        case("tanh", &[&[6]], |t, v| Ok(t.tanh(v[0]))),
        case("exp", &[&[6]], |t, v| Ok(t.exp(v[0]))),
        case("softplus", &[&[6]], |t, v| Ok(t.softplus(v[0]))),
        case("square", &[&[6]], |t, v| Ok(t.square(v[0]))),
        case("softmax", &[&[3, 4]], |t, v| Ok(t.softmax(v[0]))),
        case("log_softmax", &[&[3, 4]], |t, v| Ok(t.log_softmax(v[0]))),
        case("sum", &[&[2, 3]], |t, v| Ok(t.sum(v[0]))),
        case("mean", &[&[2, 3]], |t, v| Ok(t.mean(v[0]))),
        case("sum_per_sample", &[&[3, 2, 2]], |t, v| Ok(t.sum_per_sample(v[0]))),
        case("reshape", &[&[2, 6]], |t, v| t.reshape(v[0], &[3, 4])),
        case("slice", &[&[2, 5, 2]], |t, v| t.slice(v[0], 1, 1, 3)),
        case("crop2d", &[&[2, 5, 6]], |t, v| t.crop2d(v[0], 1, 2, 3, 3)),
        case("concat", &[&[2, 1, 3, 2], &[2, 1, 3, 3]], |t, v| t.concat(&[v[0], v[1]], 3)),
        case("reflect_pad", &[&[1, 2, 4, 5]], |t, v| t.reflect_pad(v[0], 2)),
    ];
    let mut div = case("div", &[&[2, 3], &[2, 3]], |t, v| t.div(v[0], v[1]));
    div.positive = true;
    let mut log = case("log", &[&[6]], |t, v| t.log(v[0]));
    log.positive = true;
    let mut sqrt = case("sqrt", &[&[6]], |t, v| t.sqrt(v[0]));
    sqrt.positive = true;
    let mut leaky = case("leaky_relu", &[&[8]], |t, v| Ok(t.leaky_relu(v[0], 0.2)));
    leaky.kinks = &[0.0];
    let mut clamp = case("clamp", &[&[8]], |t, v| Ok(t.clamp(v[0], -0.5, 0.5)));
    clamp.kinks = &[-0.5, 0.5];
    cases.extend([div, log, sqrt, leaky, clamp]);
    cases
}

/// Contracts an arbitrary output with fixed weights so every output entry
/// contributes to the checked scalar.
pub fn weighted_sum(tape: &mut Tape<f64>, out: Var) -> Result<Var> {
    let shape = tape.shape(out).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let w = tape.constant(Tensor::uniform(&shape, 0.5, 1.5, &mut rng));
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

pub fn sample_point(case: &OpCase, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = case.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let data = (0..n)
        .map(|_| loop {
            let x = if case.positive {
                rng.random_range(0.5..2.0)
            } else {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                e
            };
            if case.kinks.iter().all(|k| (x - k).abs() > 0.01) {
                break x;
            }
        })
        .collect();
    Tensor::new(&[n], data).unwrap()
}

/// Worst relative error over `points` random inputs.
pub fn check_op(case: &OpCase, points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: Vec<&[usize]> = case.shapes.iter().map(|s| s.as_slice()).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let point = sample_point(case, &mut rng);
        let err = finite_difference_check(
            |t, p| {
                let parts = split_point(t, p, &shapes)?;
                let out = (case.apply)(t, &parts)?;
                weighted_sum(t, out)
            },
            &point,
            1e-3,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}


#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerm {
    DataDisc,
    LatentDisc,
    PairDisc,
    Generator,
    Encoder,
}

impl LossTerm {
    pub const ALL: [LossTerm; 5] = [
        LossTerm::DataDisc,
        LossTerm::LatentDisc,
        LossTerm::PairDisc,
        LossTerm::Generator,
        LossTerm::Encoder,
    ];

    /// The block this loss updates.
    pub fn block(self) -> Block {
        match self {
            LossTerm::DataDisc => Block::DataDisc,
            LossTerm::LatentDisc => Block::LatentDisc,
            LossTerm::PairDisc => Block::PairDisc,
            LossTerm::Generator => Block::Generator,
            LossTerm::Encoder => Block::Encoder,
        }
    }

    pub fn pick(self, vars: &PaganVars) -> Var {
        match self {
            LossTerm::DataDisc => vars.d_x,
            LossTerm::LatentDisc => vars.d_z,
            LossTerm::PairDisc => vars.d_xx,
            LossTerm::Generator => vars.g.unwrap(),
            LossTerm::Encoder => vars.e.unwrap(),
        }
    }
}

/// Small enough that a full finite-difference sweep over a block is cheap.
pub fn tiny_arch(data: DataShape, game: &GameKind) -> ArchConfig {
    let mut arch = ArchConfig::new(data, 2);
    arch.hidden = 6;
    arch.latent_disc_hidden = vec![6, 5];
    arch.base_channels = 2;
    arch.head = game.head();
    arch.fusion = game.default_fusion();
    arch
}

pub struct LossCase {
    pub bundle: ModelBundle<f64>,
    pub x: Tensor<f64>,
    pub draws: Draws<f64>,
    pub game: GameKind,
}

impl LossCase {
    pub fn new(data: DataShape, game: GameKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bundle = ModelBundle::new(tiny_arch(data, &game), &mut rng).unwrap();
        bundle.refresh_spectral(1);
        let mut shape = vec![4];
        shape.extend(data.dims());
        let x = Tensor::uniform(&shape, -1.0, 1.0, &mut rng);
        let draws = Draws::sample(&bundle, &x, &game, &AugmentConfig::default(), &mut rng).unwrap();
        LossCase { bundle, x, draws, game }
    }

    pub fn point(&self, block: Block) -> Tensor<f64> {
        let flat: Vec<f64> = self
            .bundle
            .network(block)
            .params
            .iter()
            .flat_map(|p| p.data().to_vec())
            .collect();
        let n = flat.len();
        Tensor::new(&[n], flat).unwrap()
    }

    /// Largest gradient discrepancy relative to the largest gradient entry.
    /// Per-entry relative error is meaningless here: dead units and
    /// saturated heads leave entries that are zero up to rounding.
    pub fn check(&self, term: LossTerm, eps: f64) -> Result<f64> {
        Ok(self.errors(term, eps)?.0)
    }

    /// `(max-normalized error, worst per-entry relative error)`; the latter
    /// floors each denominator at `1e-8`.
    pub fn errors(&self, term: LossTerm, eps: f64) -> Result<(f64, f64)> {
        let block = term.block();
        let shapes = self.bundle.network(block).spec.param_shapes();
        let refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
        let f = |t: &mut Tape<f64>, p: Var| {
            let parts = split_point(t, p, &refs)?;
            let vars = pagan_vars_on(t, &self.bundle, &self.x, &self.draws, &self.game, true, Some((block, &parts)))?;
            Ok(term.pick(&vars))
        };
        let point = self.point(block);
        let ad = autodiff_gradient(&f, &point)?;
        let fd = numeric_gradient(&f, &point, eps)?;
        let scale = fd.data().iter().fold(1e-8f64, |m, v| m.max(v.abs()));
        let diffs = ad.data().iter().zip(fd.data()).map(|(a, n)| ((a - n).abs(), n.abs()));
        let (worst, per_entry) = diffs.fold((0.0f64, 0.0f64), |(w, r), (d, n)| (w.max(d), r.max(d / n.max(1e-8))));
        Ok((worst / scale, per_entry))
    }
}
