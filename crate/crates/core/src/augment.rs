//! The stochastic augmenter `a(x)`: reflect-pad, then crop back to the
//! original size at a uniformly random offset.
//!
//! Point data (rank-2 batches) has no spatial layout to crop; there the
//! augmenter adds isotropic Gaussian jitter with standard deviation
//! `pad_fraction`, in data units.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::kernels::reflect_index;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Pad as a fraction of the shorter image side, in `[0, 0.5)`.
    pub pad_fraction: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            pad_fraction: 0.1,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn new(pad_fraction: f64, rng_seed: u64) -> Result<Self> {
        let cfg = AugmentConfig { pad_fraction, rng_seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.pad_fraction) {
            return Err(Error::invalid(format!(
                "pad_fraction must lie in [0, 0.5), got {}",
                self.pad_fraction
            )));
        }
        Ok(())
    }

    /// `max(1, round(fraction · min(H, W)))`, or 0 when the fraction is 0.
    pub fn pad_for(&self, height: usize, width: usize) -> usize {
        if self.pad_fraction == 0.0 {
            return 0;
        }
        ((self.pad_fraction * height.min(width) as f64).round() as usize).max(1)
    }
}

fn image_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [n, _, h, w] if h >= 2 && w >= 2 => Ok((n, h, w)),
        _ => Err(Error::invalid(format!(
            "augment expects an [N, C, H, W] batch with H, W >= 2, got {shape:?}"
        ))),
    }
}

/// Crops each image of the reflect-padded batch at its own `(top, left)`
/// offset, each in `0..=2·pad`.
pub fn augment_with_offsets<R: Real>(x: &Tensor<R>, pad: usize, offsets: &[(usize, usize)]) -> Result<Tensor<R>> {
    let (n, h, w) = image_dims(x.shape())?;
    if pad >= h.min(w) {
        return Err(Error::invalid(format!("pad {pad} must be smaller than min(H, W) = {}", h.min(w))));
    }
    if offsets.len() != n {
        return Err(Error::invalid(format!("{} offsets for a batch of {n}", offsets.len())));
    }
    if let Some(o) = offsets.iter().find(|o| o.0 > 2 * pad || o.1 > 2 * pad) {
        return Err(Error::invalid(format!("offset {o:?} outside 0..={}", 2 * pad)));
    }
    let per_image = x.len() / n;
    let planes = per_image / (h * w);
    let mut out = Vec::with_capacity(x.len());
    for (img, &(top, left)) in x.data().chunks(per_image).zip(offsets) {
        let cols: Vec<usize> = (0..w)
            .map(|j| reflect_index((j + left) as isize - pad as isize, w))
            .collect();
        for plane in img.chunks(h * w).take(planes) {
            for i in 0..h {
                let row = reflect_index((i + top) as isize - pad as isize, h) * w;
                out.extend(cols.iter().map(|&c| plane[row + c]));
            }
        }
    }
    Tensor::new(x.shape(), out)
}

/// Draws `y ~ r(y|x)` for every item of the batch.
pub fn augment<R: Real, G: Rng + ?Sized>(x: &Tensor<R>, config: &AugmentConfig, rng: &mut G) -> Result<Tensor<R>> {
    config.validate()?;
    if x.shape().len() == 2 {
        return jitter(x, config.pad_fraction, rng);
    }
    let (n, h, w) = image_dims(x.shape())?;
    let pad = config.pad_for(h, w);
    if pad == 0 {
        return Ok(x.clone());
    }
    let offsets: Vec<(usize, usize)> = (0..n)
        .map(|_| (rng.random_range(0..=2 * pad), rng.random_range(0..=2 * pad)))
        .collect();
    augment_with_offsets(x, pad, &offsets)
}

fn jitter<R: Real, G: Rng + ?Sized>(x: &Tensor<R>, std: f64, rng: &mut G) -> Result<Tensor<R>> {
    if std == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v += R::lit(normal.sample(rng)));
    Ok(y)
}

/// Support of the crop offset with its probabilities, row-major over
/// `(top, left)`.
pub fn offset_distribution(config: &AugmentConfig, height: usize, width: usize) -> Vec<((usize, usize), f64)> {
    let pad = config.pad_for(height, width);
    let side = 2 * pad + 1;
    let p = 1.0 / (side * side) as f64;
    (0..side).flat_map(|i| (0..side).map(move |j| ((i, j), p))).collect()
}
