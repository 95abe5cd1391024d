mod common;

use std::f64::consts::LN_2;

use common::{LossCase, LossTerm};
use pagan::augment::AugmentConfig;
use pagan::nets::{Activation, ArchConfig, Block, DataShape, Layer, ModelBundle, Network, NetworkSpec};
use pagan::objectives::{
    discriminator_loss, f_gan_value, f_gan_value_raw, gradient_penalty, interpolate_pairs, nonsaturating_loss,
    pagan_losses, pagan_losses_with, AlphaMode, Draws, FDivergenceSpec, GameKind,
};
use pagan::oracle::{finite_difference_check, jsd_discrete};
use pagan::tensor::{Tape, Tensor};
use pagan::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RING: DataShape = DataShape::Vector(2);
const TINY_IMAGE: DataShape = DataShape::Image {
    channels: 1,
    height: 4,
    width: 4,
};

fn games() -> Vec<GameKind> {
    vec![
        GameKind::NonSaturating,
        GameKind::StandardMinimax,
        GameKind::FDivergence(FDivergenceSpec::Kl),
        GameKind::wasserstein(),
    ]
}

fn probs(t: &mut Tape<f64>, v: &[f64]) -> pagan::tensor::Var {
    t.constant(Tensor::new(&[v.len(), 1], v.to_vec()).unwrap())
}

#[test]
fn discriminator_loss_examples() {
    let mut t = Tape::new();
    let half = probs(&mut t, &[0.5; 4]);
    let l = discriminator_loss(&mut t, half, half).unwrap();
    assert!((t.value(l).item() - 2.0 * LN_2).abs() < 1e-15);

    let r = probs(&mut t, &[1.0 - 1e-7; 3]);
    let f = probs(&mut t, &[1e-7; 3]);
    let l = discriminator_loss(&mut t, r, f).unwrap();
    assert!((t.value(l).item() - 2e-7).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let real: Vec<f64> = (0..16).map(|_| rng.random_range(0.01..0.99)).collect();
    let fake: Vec<f64> = (0..16).map(|_| rng.random_range(0.01..0.99)).collect();
    let (rv, fv) = (probs(&mut t, &real), probs(&mut t, &fake));
    let lv = discriminator_loss(&mut t, rv, fv).unwrap();
    let l = t.value(lv).item();
    let direct = -real.iter().map(|d| d.ln()).sum::<f64>() / 16.0 - fake.iter().map(|d| (1.0 - d).ln()).sum::<f64>() / 16.0;
    assert!(((l - direct) / direct).abs() < 1e-12);
}

#[test]
fn empty_batches_cannot_be_built() {
    assert!(matches!(Tensor::<f64>::new(&[0, 1], vec![]), Err(Error::InvalidArgument(_))));
}

#[test]
fn nonsaturating_examples_and_gradient() {
    let mut t = Tape::new();
    let one = probs(&mut t, &[1.0, 1.0]);
    let l = nonsaturating_loss(&mut t, one).unwrap();
    assert!(t.value(l).item().abs() < 1e-6);
    let half = probs(&mut t, &[0.5]);
    let l = nonsaturating_loss(&mut t, half).unwrap();
    assert!((t.value(l).item() - LN_2).abs() < 1e-15);

    // gradient with respect to the logits feeding d = sigmoid(v)
    let logits = Tensor::<f64>::from_f64(&[5], &[-1.2, 0.3, 2.0, -0.4, 0.9]).unwrap();
    let mut t = Tape::new();
    let v = t.param(logits.reshape(&[5, 1]).unwrap());
    let d = t.sigmoid(v);
    let l = nonsaturating_loss(&mut t, d).unwrap();
    let g = t.backward(l).unwrap();
    for (gi, &vi) in g.get(v).unwrap().data().iter().zip(logits.data()) {
        let di = 1.0 / (1.0 + (-vi).exp());
        assert!((gi + (1.0 - di) / 5.0).abs() < 1e-15);
    }
    let err = finite_difference_check(
        |t, p| {
            let v = t.reshape(p, &[5, 1])?;
            let d = t.sigmoid(v);
            nonsaturating_loss(t, d)
        },
        &logits,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn discriminator_loss_gradient_at_shared_input() {
    let d0 = Tensor::<f64>::from_f64(&[4], &[0.2, 0.45, 0.6, 0.85]).unwrap();
    let mut t = Tape::new();
    let d = t.param(d0.reshape(&[4, 1]).unwrap());
    let l = discriminator_loss(&mut t, d, d).unwrap();
    let g = t.backward(l).unwrap();
    for (gi, &di) in g.get(d).unwrap().data().iter().zip(d0.data()) {
        let expect = (1.0 / (1.0 - di) - 1.0 / di) / 4.0;
        assert!((gi - expect).abs() < 1e-14);
    }
    let err = finite_difference_check(
        |t, p| {
            let d = t.reshape(p, &[4, 1])?;
            discriminator_loss(t, d, d)
        },
        &d0,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

fn silence_discriminators(bundle: &mut ModelBundle<f64>) {
    for block in [Block::DataDisc, Block::LatentDisc, Block::PairDisc] {
        let net = bundle.network_mut(block);
        let k = net.params.len();
        for p in &mut net.params[k - 2..] {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[test]
fn frozen_half_discriminators_give_two_ln_two() {
    for data in [RING, TINY_IMAGE] {
        let case = LossCase::new(data, GameKind::NonSaturating, 2);
        let mut bundle = case.bundle;
        silence_discriminators(&mut bundle);
        let graph = pagan_losses(&bundle, &case.x, &mut ChaCha8Rng::seed_from_u64(3), &GameKind::NonSaturating, &AugmentConfig::default()).unwrap();
        let v = graph.values();
        for l in [v.d_x, v.d_z, v.d_xx, v.g.unwrap(), v.e.unwrap()] {
            assert!((l - 2.0 * LN_2).abs() < 1e-12, "{v:?}");
        }
    }
}

#[test]
fn prior_draws_are_standard_normal() {
    let case = LossCase::new(RING, GameKind::NonSaturating, 4);
    let x = Tensor::zeros(&[10_000, 2]);
    let draws = Draws::sample(&case.bundle, &x, &case.game, &AugmentConfig::default(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    for j in 0..2 {
        let mean = draws.z_prior.data().iter().skip(j).step_by(2).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.05, "{mean}");
    }
}

fn clamp(d: f64) -> f64 {
    d.clamp(1e-7, 1.0 - 1e-7)
}

#[test]
fn losses_match_hand_unrolled_computation() {
    let case = LossCase::new(TINY_IMAGE, GameKind::NonSaturating, 6);
    let b = &case.bundle;
    let graph = pagan_losses_with(b, &case.x, &case.draws, &case.game, true).unwrap();
    let v = graph.values();

    // every network evaluated on its own tape, losses summed by hand
    let eval = |net: &Network<f64>, input: &Tensor<f64>| -> Tensor<f64> {
        let mut t = Tape::new();
        let bound = net.bind(&mut t, false).unwrap();
        let xv = t.constant(input.clone());
        let out = net.forward(&mut t, &bound, xv).unwrap();
        t.value(out).clone()
    };
    let n = 4;
    let l = 2;
    let enc = eval(&b.encoder, &case.x);
    let mut z_hat = vec![0.0; n * l];
    for i in 0..n {
        for j in 0..l {
            let mu = enc.data()[i * 2 * l + j];
            let ls = enc.data()[i * 2 * l + l + j];
            z_hat[i * l + j] = mu + ls.exp() * case.draws.eps.data()[i * l + j];
        }
    }
    let z_hat = Tensor::new(&[n, l], z_hat).unwrap();
    let x_pr = eval(&b.generator, &case.draws.z_prior);
    let x_rec = eval(&b.generator, &z_hat);
    let width_pair = |a: &Tensor<f64>, c: &Tensor<f64>| -> Tensor<f64> {
        let mut out = Vec::new();
        for (ra, rc) in a.data().chunks(4).zip(c.data().chunks(4)) {
            out.extend_from_slice(ra);
            out.extend_from_slice(rc);
        }
        Tensor::new(&[n, 1, 4, 8], out).unwrap()
    };
    let mean_ln = |d: &Tensor<f64>, f: &dyn Fn(f64) -> f64| d.data().iter().map(|&p| f(clamp(p)).ln()).sum::<f64>() / n as f64;
    let id = |p: f64| p;
    let om = |p: f64| 1.0 - p;

    let dx_real = eval(&b.data_disc, &case.x);
    let dx_fake = eval(&b.data_disc, &x_pr);
    let dz_real = eval(&b.latent_disc, &case.draws.z_prior);
    let dz_fake = eval(&b.latent_disc, &z_hat);
    let dxx_real = eval(&b.pair_disc, &width_pair(&case.x, &case.draws.x_aug));
    let dxx_fake = eval(&b.pair_disc, &width_pair(&case.x, &x_rec));

    let d_x = -mean_ln(&dx_real, &id) - mean_ln(&dx_fake, &om);
    let d_z = -mean_ln(&dz_real, &id) - mean_ln(&dz_fake, &om);
    let d_xx = -mean_ln(&dxx_real, &id) - mean_ln(&dxx_fake, &om);
    let g = -mean_ln(&dx_fake, &id) - mean_ln(&dxx_fake, &id);
    let e = -mean_ln(&dz_fake, &id) - mean_ln(&dxx_fake, &id);
    for (got, want) in [(v.d_x, d_x), (v.d_z, d_z), (v.d_xx, d_xx), (v.g.unwrap(), g), (v.e.unwrap(), e)] {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn stop_gradient_boundaries() {
    for game in games() {
        for data in [RING, TINY_IMAGE] {
            let case = LossCase::new(data, game, 7);
            let graph = pagan_losses_with(&case.bundle, &case.x, &case.draws, &game, true).unwrap();
            let norm = |grads: &pagan::tensor::Gradients<f64>, block: Block| -> f64 {
                graph
                    .block_gradients(grads, block)
                    .iter()
                    .map(|g| g.norm().powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            for d in [graph.vars.d_x, graph.vars.d_z, graph.vars.d_xx] {
                let grads = graph.tape.backward(d).unwrap();
                assert_eq!(norm(&grads, Block::Generator), 0.0);
                assert_eq!(norm(&grads, Block::Encoder), 0.0);
            }
            let disc_grads = graph.discriminator_gradients().unwrap();
            for block in [Block::DataDisc, Block::LatentDisc, Block::PairDisc] {
                assert!(norm(&disc_grads, block) > 0.0, "{game:?} {block:?}");
            }
            for grads in [graph.generator_gradients().unwrap(), graph.encoder_gradients().unwrap()] {
                for block in [Block::DataDisc, Block::LatentDisc, Block::PairDisc] {
                    assert_eq!(norm(&grads, block), 0.0);
                }
            }
            assert!(norm(&graph.generator_gradients().unwrap(), Block::Generator) > 0.0);
            assert!(norm(&graph.encoder_gradients().unwrap(), Block::Encoder) > 0.0);
        }
    }
}

#[test]
fn composite_losses_match_finite_differences() {
    // small steps: larger ones cross LeakyReLU kinks, which sit close to
    // the operating point under the small-variance init
    for game in games() {
        for term in LossTerm::ALL {
            let mut worst: f64 = 0.0;
            for seed in 0..20 {
                let case = LossCase::new(RING, game, 100 + seed);
                worst = worst.max(case.check(term, 1e-6).unwrap());
            }
            assert!(worst < 1e-6, "{game:?} {term:?}: {worst:e}");
        }
    }
}

#[test]
fn image_losses_match_finite_differences() {
    for game in [GameKind::NonSaturating, GameKind::wasserstein()] {
        for term in LossTerm::ALL {
            for seed in 0..3 {
                let case = LossCase::new(TINY_IMAGE, game, 200 + seed);
                let err = case.check(term, 1e-6).unwrap();
                assert!(err < 1e-6, "{game:?} {term:?} seed {seed}: {err:e}");
            }
        }
    }
}

#[test]
fn f_divergence_registry_properties() {
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
    for spec in FDivergenceSpec::ALL {
        let at_one = if spec == FDivergenceSpec::Gan { -4f64.ln() } else { 0.0 };
        assert!((spec.f(1.0) - at_one).abs() < 1e-12, "{}", spec.name());
        for &a in &grid {
            for &b in &grid {
                let mid = spec.f(0.5 * a + 0.5 * b);
                assert!(mid <= 0.5 * spec.f(a) + 0.5 * spec.f(b) + 1e-12);
            }
        }
        // Young-Fenchel over u on the grid and t inside the conjugate domain
        let sup = spec.domain_sup().min(3.0);
        for &u in &grid {
            for k in 0..60 {
                let t = sup - 0.01 - k as f64 * 0.1;
                assert!(spec.f(u) + spec.f_star(t) >= u * t - 1e-9, "{} u={u} t={t}", spec.name());
            }
        }
        // equality at t = f'(u)
        for &u in &grid {
            let t = spec.f_prime(u);
            assert!((spec.f(u) + spec.f_star(t) - u * t).abs() < 1e-9);
        }
        assert_eq!(FDivergenceSpec::from_name(spec.name()).unwrap(), spec);
    }
    assert!(FDivergenceSpec::from_name("tv").is_err());
}

#[test]
fn fused_conjugate_matches_composition() {
    let raw: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.25).collect();
    for spec in FDivergenceSpec::ALL {
        let mut t = Tape::new();
        let v = t.constant(Tensor::new(&[raw.len()], raw.clone()).unwrap());
        let fused = spec.f_star_of_raw(&mut t, v);
        let act = spec.activation_on(&mut t, v);
        let composed = spec.f_star_on(&mut t, act).unwrap();
        for ((a, b), &r) in t.value(fused).data().iter().zip(t.value(composed).data()).zip(&raw) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{} v={r}: {a} vs {b}", spec.name());
            assert!((spec.activation(r) - t.value(act).data()[raw.iter().position(|x| *x == r).unwrap()]).abs() < 1e-12);
        }
    }
}

#[test]
fn f_gan_value_examples() {
    let mut t = Tape::new();
    let ones = t.constant(Tensor::ones(&[5]));
    let v = f_gan_value(&mut t, ones, ones, FDivergenceSpec::Kl).unwrap();
    assert_eq!(t.value(v).item(), 0.0);

    // monotone in T_real, and in T_fake towards the domain bottom
    let spec = FDivergenceSpec::ReverseKl;
    let mut last = f64::NEG_INFINITY;
    for k in 0..10 {
        let s = k as f64;
        let r = t.constant(Tensor::full(&[3], -1.0 / (1.0 + s)));
        let f = t.constant(Tensor::full(&[3], -(1.0 + s)));
        let vv = f_gan_value(&mut t, r, f, spec).unwrap();
        let v = t.value(vv).item();
        assert!(v > last);
        last = v;
    }

    let bad = t.constant(Tensor::full(&[2], 0.5));
    match f_gan_value(&mut t, bad, bad, FDivergenceSpec::Gan) {
        Err(Error::Domain { op, .. }) => assert_eq!(op, "f_star"),
        other => panic!("expected domain error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn js_specs_recover_the_standard_game() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let vr: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
    let vf: Vec<f64> = (0..32).map(|_| rng.random_range(-3.0..3.0)).collect();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let standard = vr.iter().map(|&v| sig(v).ln()).sum::<f64>() / 32.0 + vf.iter().map(|&v| (1.0 - sig(v)).ln()).sum::<f64>() / 32.0;
    let mut t = Tape::new();
    let r = t.constant(Tensor::new(&[32], vr).unwrap());
    let f = t.constant(Tensor::new(&[32], vf).unwrap());
    let gv = f_gan_value_raw(&mut t, r, f, FDivergenceSpec::Gan).unwrap();
    let jv = f_gan_value_raw(&mut t, r, f, FDivergenceSpec::JensenShannon).unwrap();
    let (gan, js) = (t.value(gv).item(), t.value(jv).item());
    assert!((gan - standard).abs() < 1e-12);
    assert!((js - (standard + 4f64.ln())).abs() < 1e-12);
}

#[test]
fn optimal_critic_recovers_divergence_on_discrete_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let k = rng.random_range(2..8);
        let mut p: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let mut q: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        p.iter_mut().for_each(|v| *v /= sp);
        q.iter_mut().for_each(|v| *v /= sq);
        let jsd = jsd_discrete(&p, &q).unwrap();
        for spec in FDivergenceSpec::ALL {
            // V = Σ p T − Σ q f*(T) at T = f'(p/q), as weighted samples
            let t_opt: Vec<f64> = p.iter().zip(&q).map(|(a, b)| spec.f_prime(a / b)).collect();
            let value: f64 = p.iter().zip(&t_opt).map(|(a, t)| a * t).sum::<f64>()
                - q.iter().zip(&t_opt).map(|(b, t)| b * spec.f_star(*t)).sum::<f64>();
            let divergence: f64 = p.iter().zip(&q).map(|(a, b)| b * spec.f(a / b)).sum();
            assert!((value - divergence).abs() < 1e-9, "{}", spec.name());
            match spec {
                FDivergenceSpec::Gan => assert!((value - (2.0 * jsd - 4f64.ln())).abs() < 1e-6),
                FDivergenceSpec::JensenShannon => assert!((value - 2.0 * jsd).abs() < 1e-6),
                _ => {}
            }
        }
    }
}

fn linear_critic(w: &[f64]) -> Network<f64> {
    let spec = NetworkSpec {
        input: vec![w.len()],
        layers: vec![Layer::Linear { fan_in: w.len(), fan_out: 1 }],
        spectral_norm: false,
    };
    let mut net = Network::init(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    net.params[0] = Tensor::new(&[1, w.len()], w.to_vec()).unwrap();
    net.params[1] = Tensor::from_f64(&[1], &[0.3]).unwrap();
    net
}

fn penalty_of(net: &Network<f64>, input: Tensor<f64>, lambda: f64) -> pagan::Result<f64> {
    let mut t = Tape::new();
    let bound = net.bind(&mut t, true)?;
    let p = gradient_penalty(&mut t, net, &bound, input, lambda)?;
    Ok(t.value(p).item())
}

#[test]
fn gradient_penalty_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let input = Tensor::randn(&[16, 3], 1.0, &mut rng);
    let unit = linear_critic(&[0.6, 0.0, -0.8]);
    assert!(penalty_of(&unit, input.clone(), 10.0).unwrap().abs() < 1e-9);
    let constant = linear_critic(&[0.0, 0.0, 0.0]);
    assert!((penalty_of(&constant, input.clone(), 10.0).unwrap() - 10.0).abs() < 1e-9);
    assert!(matches!(penalty_of(&constant, input.clone(), 0.0), Err(Error::InvalidArgument(_))));
    assert!(penalty_of(&constant, input, -1.0).is_err());
    assert!(GameKind::WassersteinGp {
        lambda: 0.0,
        alpha: AlphaMode::Shared
    }
    .validate()
    .is_err());

    // a constant image critic has a zero input gradient too
    let mut arch = ArchConfig::new(TINY_IMAGE, 2);
    arch.base_channels = 2;
    arch.head = pagan::nets::Head::Critic;
    let mut bundle = ModelBundle::<f64>::new(arch, &mut rng).unwrap();
    for p in bundle.data_disc.params.iter_mut() {
        p.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    bundle.data_disc.spec.spectral_norm = false;
    bundle.data_disc.spectral.clear();
    let imgs = Tensor::randn(&[3, 1, 4, 4], 1.0, &mut rng);
    assert!((penalty_of(&bundle.data_disc, imgs, 10.0).unwrap() - 10.0).abs() < 1e-9);
}

#[test]
fn interpolation_endpoints_and_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Tensor::<f64>::randn(&[6, 4], 1.0, &mut rng);
    let y = Tensor::<f64>::randn(&[6, 4], 1.0, &mut rng);
    let x2 = Tensor::<f64>::randn(&[6, 4], 1.0, &mut rng);
    let y2 = Tensor::<f64>::randn(&[6, 4], 1.0, &mut rng);
    assert_eq!(pagan::objectives::interpolate(&x, &x2, &[1.0; 6]).unwrap(), x);
    assert_eq!(pagan::objectives::interpolate(&y, &y2, &[1.0; 6]).unwrap(), y);

    // shared mode: the same α recovered from both members
    let (xi, yi) = interpolate_pairs((&x, &y), (&x2, &y2), AlphaMode::Shared, &mut rng).unwrap();
    let (xj, yj) = interpolate_pairs((&x, &y), (&x2, &y2), AlphaMode::Independent, &mut rng).unwrap();
    let alpha = |a: &Tensor<f64>, b: &Tensor<f64>, mix: &Tensor<f64>, i: usize| {
        (mix.data()[i * 4] - b.data()[i * 4]) / (a.data()[i * 4] - b.data()[i * 4])
    };
    let mut differs = false;
    for i in 0..6 {
        assert!((alpha(&x, &x2, &xi, i) - alpha(&y, &y2, &yi, i)).abs() < 1e-9);
        differs |= (alpha(&x, &x2, &xj, i) - alpha(&y, &y2, &yj, i)).abs() > 1e-6;
    }
    assert!(differs);
}

#[test]
fn penalty_is_symmetric_in_pair_roles() {
    // a nonlinear critic on fused pairs; average over many α draws
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = NetworkSpec {
        input: vec![4],
        layers: vec![
            Layer::Linear { fan_in: 4, fan_out: 8 },
            Layer::Act(Activation::Tanh),
            Layer::Linear { fan_in: 8, fan_out: 1 },
        ],
        spectral_norm: false,
    };
    let mut net = Network::<f64>::init(spec, &mut rng).unwrap();
    for p in &mut net.params {
        p.data_mut().iter_mut().for_each(|v| *v *= 3.0);
    }
    let real = (Tensor::<f64>::randn(&[1, 2], 1.0, &mut rng), Tensor::<f64>::randn(&[1, 2], 1.0, &mut rng));
    let fake = (Tensor::<f64>::randn(&[1, 2], 1.0, &mut rng), Tensor::<f64>::randn(&[1, 2], 1.0, &mut rng));
    let draws = 10_000;
    let mut mean_of = |a: &(Tensor<f64>, Tensor<f64>), b: &(Tensor<f64>, Tensor<f64>)| {
        let mut vals = Vec::with_capacity(draws);
        for _ in 0..draws {
            let (xi, yi) = interpolate_pairs((&a.0, &a.1), (&b.0, &b.1), AlphaMode::Shared, &mut rng).unwrap();
            let fused = Tensor::new(&[1, 4], [xi.data(), yi.data()].concat()).unwrap();
            vals.push(penalty_of(&net, fused, 10.0).unwrap());
        }
        let m = vals.iter().sum::<f64>() / draws as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (m, (var / draws as f64).sqrt())
    };
    let (m1, s1) = mean_of(&real, &fake);
    let (m2, s2) = mean_of(&fake, &real);
    assert!((m1 - m2).abs() < 4.0 * (s1 * s1 + s2 * s2).sqrt(), "{m1} vs {m2}");
}
