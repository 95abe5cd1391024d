use std::path::PathBuf;

use pagan::data_io::{
    box_blur, gaussian_ring, interleave_columns, load_mnist_idx, parse_config, parse_config_str, parse_overrides,
    read_idx_images, read_idx_labels, read_pnm, synthetic_shapes, write_image_grid, write_scatter, Dataset,
    GaussianRingSpec,
};
use pagan::objectives::GameKind;
use pagan::tensor::Tensor;
use pagan::trainer::{DatasetId, TrainConfig};
use pagan::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn idx_images(magic: u32, count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    for v in [magic, count, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn idx_labels(count: u32, labels: &[u8]) -> Vec<u8> {
    let mut b = 0x801u32.to_be_bytes().to_vec();
    b.extend_from_slice(&count.to_be_bytes());
    b.extend_from_slice(labels);
    b
}

fn format_message(r: pagan::Result<impl std::fmt::Debug>) -> String {
    match r {
        Err(Error::Format(m)) => m,
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn idx_wrong_image_magic_is_named() {
    let bytes = idx_images(0x801, 1, 2, 2, &[0; 4]);
    assert!(format_message(read_idx_images(&bytes)).contains("magic"));
}

#[test]
fn idx_truncation_and_count_errors_name_the_field() {
    let bytes = idx_images(0x803, 2, 2, 2, &[0; 7]);
    assert!(format_message(read_idx_images(&bytes)).contains("pixels"));
    assert!(format_message(read_idx_images(&bytes[..10])).contains("rows"));
    assert!(format_message(read_idx_labels(&idx_labels(3, &[1, 2]))).contains("count"));
    let huge = idx_images(0x803, u32::MAX, u32::MAX, u32::MAX, &[]);
    assert!(read_idx_images(&huge).is_err());
}

#[test]
fn idx_count_mismatch_between_files() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    std::fs::write(&img, idx_images(0x803, 2, 2, 2, &[0; 8])).unwrap();
    std::fs::write(&lbl, idx_labels(3, &[0, 1, 2])).unwrap();
    assert!(format_message(load_mnist_idx(&img, &lbl)).contains("count"));
}

#[test]
fn idx_pixel_endpoints_map_to_unit_range() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lbl) = (dir.path().join("img"), dir.path().join("lbl"));
    std::fs::write(&img, idx_images(0x803, 1, 1, 3, &[0, 255, 128])).unwrap();
    std::fs::write(&lbl, idx_labels(1, &[7])).unwrap();
    let d = load_mnist_idx(&img, &lbl).unwrap();
    assert_eq!(d.items.shape(), &[1, 1, 1, 3]);
    assert_eq!(d.items.data()[0], -1.0);
    assert_eq!(d.items.data()[1], 1.0);
    assert_eq!(d.labels.as_deref(), Some(&[7][..]));
}

#[test]
fn bundled_mnist_test_file_has_header_dims() {
    let dir = mnist_dir();
    let images = dir.join("t10k-images-idx3-ubyte");
    if !images.exists() {
        eprintln!("skipping: {} not present", images.display());
        return;
    }
    let d = load_mnist_idx(&images, &dir.join("t10k-labels-idx1-ubyte")).unwrap();
    assert_eq!(d.items.shape(), &[10_000, 1, 28, 28]);
    assert_eq!(d.num_classes(), Some(10));
    assert!(d.items.data().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn ring_single_mode_at_origin_is_centered() {
    let spec = GaussianRingSpec {
        modes: 1,
        radius: 0.0,
        std: 0.5,
        samples: 20_000,
    };
    let d = gaussian_ring(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let n = d.len() as f64;
    for axis in 0..2 {
        let mean: f64 = d.items.data().iter().skip(axis).step_by(2).map(|&v| v as f64).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * spec.std / n.sqrt(), "axis {axis} mean {mean}");
    }
}

#[test]
fn ring_mode_counts_are_multinomial() {
    let spec = GaussianRingSpec {
        samples: 100_000,
        ..GaussianRingSpec::default()
    };
    let d = gaussian_ring(&spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let mut counts = [0usize; 8];
    d.labels.unwrap().iter().for_each(|&k| counts[k] += 1);
    let (n, p) = (spec.samples as f64, 1.0 / 8.0);
    let sd = (n * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n * p).abs() < 4.0 * sd, "{counts:?}");
    }
}

#[test]
fn ring_zero_std_hits_centers() {
    let spec = GaussianRingSpec {
        std: 0.0,
        samples: 500,
        ..GaussianRingSpec::default()
    };
    let d = gaussian_ring(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let centers = spec.centers();
    for (p, &k) in d.items.data().chunks(2).zip(d.labels.as_ref().unwrap()) {
        assert!((p[0] as f64 - centers[k][0]).abs() < 1e-6 && (p[1] as f64 - centers[k][1]).abs() < 1e-6);
    }
}

#[test]
fn datasets_are_reproducible_under_a_seed() {
    let a = synthetic_shapes(30, 12, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = synthetic_shapes(30, 12, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.num_classes(), Some(3));
    let x = a.sample_batch(8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let y = a.sample_batch(8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(x, y);
}

#[test]
fn dataset_rejects_label_count_mismatch() {
    let items = Tensor::<f32>::zeros(&[3, 2]);
    assert!(Dataset::new("x", items, Some(vec![0, 1])).is_err());
}

#[test]
fn pgm_of_minus_ones_is_zero_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    write_image_grid(&Tensor::full(&[1, 1, 2, 2], -1.0), 1, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, b"P5\n2 2\n255\n\0\0\0\0");
}

#[test]
fn zero_maps_to_byte_128() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.pgm");
    write_image_grid(&Tensor::full(&[1, 1, 1, 1], 0.0), 1, &path).unwrap();
    assert_eq!(read_pnm(&path).unwrap().pixels, vec![128]);
}

#[test]
fn ppm_for_three_channels_and_other_counts_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ppm");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    write_image_grid(&Tensor::uniform(&[2, 3, 3, 3], -1.0, 1.0, &mut rng), 2, &path).unwrap();
    let pnm = read_pnm(&path).unwrap();
    assert_eq!((pnm.channels, pnm.width, pnm.height), (3, 6, 3));
    let bad = write_image_grid(&Tensor::zeros(&[1, 2, 2, 2]), 1, &dir.path().join("x"));
    assert!(matches!(bad, Err(Error::InvalidArgument(_))));
}

#[test]
fn grid_reload_recovers_bytes_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("1.pgm"), dir.path().join("2.pgm"));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    write_image_grid(&Tensor::uniform(&[1, 1, 5, 7], -1.0, 1.0, &mut rng), 1, &p1).unwrap();
    let first = read_pnm(&p1).unwrap();
    write_image_grid(&first.to_tensor().unwrap(), 1, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    // every byte value survives the affine map both ways
    let all: Vec<f32> = (0..=255u8).map(|b| b as f32 / 127.5 - 1.0).collect();
    write_image_grid(&Tensor::new(&[1, 1, 16, 16], all).unwrap(), 1, &p1).unwrap();
    assert_eq!(read_pnm(&p1).unwrap().pixels, (0..=255u8).collect::<Vec<_>>());
}

#[test]
fn interleaved_grid_alternates_originals_and_reconstructions() {
    let origs = Tensor::new(&[4, 1, 1, 1], vec![-1.0, -1.0, -1.0, -1.0]).unwrap();
    let recs = Tensor::new(&[4, 1, 1, 1], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.pgm");
    write_image_grid(&interleave_columns(&origs, &recs).unwrap(), 8, &path).unwrap();
    assert_eq!(read_pnm(&path).unwrap().pixels, vec![0, 255, 0, 255, 0, 255, 0, 255]);
}

#[test]
fn scatter_writes_one_point_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    write_scatter(&Tensor::new(&[2, 2], vec![0.5, -1.0, 2.0, 3.0]).unwrap(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "0.5\t-1\n2\t3\n");
}

#[test]
fn blur_preserves_constants() {
    let x = Tensor::full(&[2, 1, 5, 5], 0.25);
    let y = box_blur(&x, 2).unwrap();
    assert!(y.data().iter().all(|v| (v - 0.25).abs() < 1e-6));
}

#[test]
fn empty_config_gives_valid_defaults() {
    let c = parse_config_str("").unwrap();
    assert_eq!(c, TrainConfig::default());
    c.validate().unwrap();
    assert_eq!(c.critic_steps, 1);
    assert_eq!(c.dataset, DatasetId::Ring);
}

#[test]
fn wasserstein_with_ten_critic_steps() {
    let c = parse_config_str("critic_steps=10\ngame=wasserstein\n").unwrap();
    assert_eq!(c.critic_steps, 10);
    assert!(matches!(c.game, GameKind::WassersteinGp { lambda, .. } if lambda == 10.0));
    // the regime is also the default for the Wasserstein game
    assert_eq!(parse_config_str("game=wasserstein").unwrap().critic_steps, 10);
}

#[test]
fn batch_size_one_is_a_config_error() {
    match parse_config_str("batch_size=1") {
        Err(Error::Config { key, .. }) => assert_eq!(key, "batch_size"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_and_unparsable_keys_name_the_key() {
    match parse_config_str("learning_rate=1") {
        Err(Error::Config { key, .. }) => assert_eq!(key, "learning_rate"),
        other => panic!("{other:?}"),
    }
    match parse_config_str("steps=many") {
        Err(Error::Config { key, .. }) => assert_eq!(key, "steps"),
        other => panic!("{other:?}"),
    }
    assert!(parse_config_str("fdiv=kl").is_err());
}

#[test]
fn config_round_trips_through_text() {
    let text = "game=fgan\nfdiv=kl\nlr=0.001\nlatent_hidden=32,16\nseed=7\npad_fraction=0\ndataset=shapes\n";
    let c = parse_config_str(text).unwrap();
    assert_eq!(parse_config_str(&c.to_text()).unwrap(), c);
    let w = parse_config_str("game=wasserstein\ngp_alpha=independent\ngp_lambda=5").unwrap();
    assert_eq!(parse_config_str(&w.to_text()).unwrap(), w);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    std::fs::write(&path, "# comment\nsteps=10\nbatch_size=8\n").unwrap();
    let flags = parse_overrides(&["steps=20".to_string()]).unwrap();
    let c = parse_config(Some(&path), &flags).unwrap();
    assert_eq!((c.steps, c.batch_size), (20, 8));
}
