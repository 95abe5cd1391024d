use pagan::oracle::{
    check_expected_jsd_identity, check_identity_augmentation, check_optimal_discriminator, expected_jsd_value,
    finite_difference_check, gradient_descent_discriminator, jsd_discrete, optimal_discriminator_table,
    proposition_suite, random_joint_pair, value_function_discrete, DiscreteJoint,
};
use pagan::tensor::{Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LN4: f64 = 1.386_294_361_119_890_6;

#[test]
fn jsd_four_term_example() {
    let (p, q): ([f64; 2], [f64; 2]) = ([0.75, 0.25], [0.25, 0.75]);
    let m: [f64; 2] = [0.5, 0.5];
    let direct = 0.5 * (p[0] * (p[0] / m[0]).ln() + p[1] * (p[1] / m[1]).ln())
        + 0.5 * (q[0] * (q[0] / m[0]).ln() + q[1] * (q[1] / m[1]).ln());
    assert!((jsd_discrete(&p, &q).unwrap() - direct).abs() < 1e-15);
    assert_eq!(jsd_discrete(&p, &p).unwrap(), 0.0);
    assert!((jsd_discrete(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(jsd_discrete(&[0.5, 0.6], &[0.5, 0.5]).is_err());
}

#[test]
fn optimal_table_lies_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let (real, fake) = random_joint_pair(5, 6, &mut rng).unwrap();
        let d = optimal_discriminator_table(&real, &fake).unwrap();
        for x in 0..5 {
            for y in 0..6 {
                let v = d.get(x, y).unwrap();
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

#[test]
fn equal_joints_give_minus_ln4() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (real, _) = random_joint_pair(4, 4, &mut rng).unwrap();
    let d = optimal_discriminator_table(&real, &real).unwrap();
    assert!((value_function_discrete(&real, &real, &d).unwrap() + LN4).abs() < 1e-12);
    assert!((expected_jsd_value(&real, &real).unwrap() + LN4).abs() < 1e-12);
}

#[test]
fn learned_discriminator_never_beats_the_analytic_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (real, fake) = random_joint_pair(8, 8, &mut rng).unwrap();
    let analytic = optimal_discriminator_table(&real, &fake).unwrap();
    let best = value_function_discrete(&real, &fake, &analytic).unwrap();
    for steps in [10, 100, 2000] {
        let learned = gradient_descent_discriminator(&real, &fake, steps, 5.0).unwrap();
        assert!(value_function_discrete(&real, &fake, &learned).unwrap() <= best + 1e-9);
    }
}

#[test]
fn support_mismatch_is_rejected() {
    let a = DiscreteJoint::new(2, 2, vec![0.25; 4]).unwrap();
    let b = DiscreteJoint::new(2, 3, vec![1.0 / 6.0; 6]).unwrap();
    assert!(optimal_discriminator_table(&a, &b).is_err());
    assert!(DiscreteJoint::new(2, 2, vec![0.5; 4]).is_err());
}

#[test]
fn proposition_checks_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(check_optimal_discriminator(3, &mut rng).unwrap().passed);
    assert!(check_expected_jsd_identity(100, &mut rng).unwrap().passed);
    assert!(check_identity_augmentation(6, &mut rng).unwrap().passed);
    let suite = proposition_suite(11).unwrap();
    assert_eq!(suite.len(), 3);
    assert!(suite.iter().all(|c| c.passed), "{suite:?}");
}

#[test]
fn finite_differences_on_a_quadratic_form() {
    let a = [2.0, 0.5, 0.5, 1.0];
    let point = Tensor::new(&[2], vec![0.3, -1.2]).unwrap();
    let err = finite_difference_check(
        |t: &mut Tape<f64>, p| {
            let m = t.constant(Tensor::new(&[2, 2], a.to_vec())?);
            let col = t.reshape(p, &[2, 1])?;
            let mp = t.matmul(m, col)?;
            let prod = t.mul(mp, col)?;
            Ok(t.sum(prod))
        },
        &point,
        1e-3,
    )
    .unwrap();
    assert!(err < 1e-8, "{err}");
}
