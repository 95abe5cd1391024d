//! Datasets, image grids and configuration files.

mod config;
mod image;
mod mnist;

pub use config::{parse_config, parse_config_str, parse_overrides};
pub use image::{box_blur, interleave_columns, read_pnm, write_image_grid, write_scatter, Pnm};
pub use mnist::{load_mnist_idx, read_idx_images, read_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};

use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nets::DataShape;
use crate::tensor::Tensor;

/// Items scaled to `[−1, 1]` (images) or raw coordinates (points).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub items: Tensor<f32>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, items: Tensor<f32>, labels: Option<Vec<usize>>) -> Result<Self> {
        if items.shape().len() != 2 && items.shape().len() != 4 {
            return Err(Error::invalid(format!("dataset items must be [n, d] or [n, c, h, w], got {:?}", items.shape())));
        }
        if let Some(l) = &labels {
            if l.len() != items.shape()[0] {
                return Err(Error::invalid(format!("{} labels for {} items", l.len(), items.shape()[0])));
            }
        }
        Ok(Dataset {
            name: name.into(),
            items,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.items.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> DataShape {
        match self.items.shape() {
            [_, d] => DataShape::Vector(*d),
            [_, c, h, w] => DataShape::Image {
                channels: *c,
                height: *h,
                width: *w,
            },
            _ => unreachable!("checked in Dataset::new"),
        }
    }

    pub fn is_image(&self) -> bool {
        self.items.shape().len() == 4
    }

    /// Number of classes, `max label + 1`.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels.as_ref().and_then(|l| l.iter().max()).map(|m| m + 1)
    }

    /// `n` distinct items chosen uniformly at random.
    pub fn sample_batch<G: Rng + ?Sized>(&self, n: usize, rng: &mut G) -> Result<Tensor<f32>> {
        if n > self.len() {
            return Err(Error::invalid(format!("batch of {n} from a dataset of {}", self.len())));
        }
        let idx = index::sample(rng, self.len(), n).into_vec();
        self.items.gather_batch(&idx)
    }

    /// The first `n` items (all of them if fewer).
    pub fn head(&self, n: usize) -> Result<Dataset> {
        let n = n.min(self.len());
        Dataset::new(
            self.name.clone(),
            self.items.slice_batch(0, n)?,
            self.labels.as_ref().map(|l| l[..n].to_vec()),
        )
    }

    /// Splits off the last `n` items.
    pub fn split_tail(&self, n: usize) -> Result<(Dataset, Dataset)> {
        if n == 0 || n >= self.len() {
            return Err(Error::invalid(format!("cannot split {n} items from {}", self.len())));
        }
        let k = self.len() - n;
        let part = |start: usize, count: usize| -> Result<Dataset> {
            Dataset::new(
                self.name.clone(),
                self.items.slice_batch(start, count)?,
                self.labels.as_ref().map(|l| l[start..start + count].to_vec()),
            )
        };
        Ok((part(0, k)?, part(k, n)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianRingSpec {
    pub modes: usize,
    pub radius: f64,
    pub std: f64,
    pub samples: usize,
}

impl Default for GaussianRingSpec {
    fn default() -> Self {
        GaussianRingSpec {
            modes: 8,
            radius: 2.0,
            std: 0.05,
            samples: 20_000,
        }
    }
}

impl GaussianRingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::invalid("ring needs at least one mode"));
        }
        if !(self.std >= 0.0) || !self.radius.is_finite() || self.radius < 0.0 {
            return Err(Error::invalid(format!("bad ring geometry: radius {}, std {}", self.radius, self.std)));
        }
        if self.samples == 0 {
            return Err(Error::invalid("ring needs at least one sample"));
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.modes)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / self.modes as f64;
                [self.radius * a.cos(), self.radius * a.sin()]
            })
            .collect()
    }
}

/// Points around a circle; labels hold the mode index.
pub fn gaussian_ring<G: Rng + ?Sized>(spec: &GaussianRingSpec, rng: &mut G) -> Result<Dataset> {
    spec.validate()?;
    let centers = spec.centers();
    let mut data = Vec::with_capacity(spec.samples * 2);
    let mut labels = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let k = rng.random_range(0..spec.modes);
        let noise = Tensor::<f64>::randn(&[2], spec.std, rng);
        data.push((centers[k][0] + noise.data()[0]) as f32);
        data.push((centers[k][1] + noise.data()[1]) as f32);
        labels.push(k);
    }
    Dataset::new("ring", Tensor::new(&[spec.samples, 2], data)?, Some(labels))
}

/// Single-channel images of three shape classes (filled square, ring,
/// cross) at random positions and sizes, scaled to `[−1, 1]`.
pub fn synthetic_shapes<G: Rng + ?Sized>(n: usize, side: usize, rng: &mut G) -> Result<Dataset> {
    if side < 8 {
        return Err(Error::invalid(format!("shape images need side ≥ 8, got {side}")));
    }
    let mut data = vec![-1.0f32; n * side * side];
    let mut labels = Vec::with_capacity(n);
    for (i, img) in data.chunks_mut(side * side).enumerate() {
        let class = i % 3;
        let r = rng.random_range(side as f64 * 0.18..side as f64 * 0.3);
        let cy = rng.random_range(r..side as f64 - r);
        let cx = rng.random_range(r..side as f64 - r);
        for y in 0..side {
            for x in 0..side {
                let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                let on = match class {
                    0 => dy.abs() <= r && dx.abs() <= r,
                    1 => {
                        let d = (dy * dy + dx * dx).sqrt();
                        d <= r && d >= r * 0.55
                    }
                    _ => (dy.abs() <= r * 0.25 && dx.abs() <= r) || (dx.abs() <= r * 0.25 && dy.abs() <= r),
                };
                if on {
                    img[y * side + x] = 1.0;
                }
            }
        }
        labels.push(class);
    }
    Dataset::new("shapes", Tensor::new(&[n, 1, side, side], data)?, Some(labels))
}
