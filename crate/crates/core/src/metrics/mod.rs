//! Reconstruction and sample-quality metrics.
//!
//! RID, IS and FID read class posteriors and features from a locally trained
//! [`ProbeClassifier`]. Logs are natural; probabilities are floored at
//! `1e-7` inside logs. Splits are sequential, with the remainder in the
//! last split, and the spread across splits is the population standard
//! deviation.

mod probe;

pub use probe::{train_probe_classifier, ProbeClassifier, ProbeConfig, ProbeReport};

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data_io::GaussianRingSpec;
use crate::error::{Error, Result};
use crate::objectives::PROB_CLAMP;
use crate::tensor::Tensor;

pub const DEFAULT_SPLITS: usize = 10;
pub const FID_RIDGE: f64 = 1e-6;

fn rows(t: &Tensor<f64>) -> Result<(usize, usize)> {
    match t.shape() {
        &[n, k] => Ok((n, k)),
        s => Err(Error::invalid(format!("expected an [n, k] matrix, got {s:?}"))),
    }
}

fn ln_floor(p: f64) -> f64 {
    p.max(PROB_CLAMP).ln()
}

/// `KL(p ‖ q)` between two probability rows.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(&a, &b)| a * (ln_floor(a) - ln_floor(b)))
        .sum()
}

/// Sequential split boundaries; the last split takes the remainder.
fn split_ranges(n: usize, splits: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if splits == 0 || n < splits {
        return Err(Error::invalid(format!("cannot cut {n} items into {splits} non-empty splits")));
    }
    let size = n / splits;
    Ok((0..splits)
        .map(|i| i * size..if i + 1 == splits { n } else { (i + 1) * size })
        .collect())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per split, `exp(mean KL(p(y|x) ‖ p(y|x̂)))`; mean and spread over splits.
pub fn rid_from_posteriors(originals: &Tensor<f64>, recons: &Tensor<f64>, splits: usize) -> Result<(f64, f64)> {
    let (n, k) = rows(originals)?;
    if recons.shape() != originals.shape() {
        return Err(Error::invalid(format!(
            "{n} originals but reconstructions of shape {:?}",
            recons.shape()
        )));
    }
    let (p, q) = (originals.data(), recons.data());
    let per_split: Vec<f64> = split_ranges(n, splits)?
        .into_iter()
        .map(|r| {
            let len = r.len() as f64;
            let total: f64 = r.map(|i| kl(&p[i * k..(i + 1) * k], &q[i * k..(i + 1) * k])).sum();
            (total / len).exp()
        })
        .collect();
    Ok(mean_std(&per_split))
}

/// Per split, `exp(mean KL(p(y|x) ‖ p(y)))` with `p(y)` the split's mean
/// posterior.
pub fn inception_score_from_posteriors(posteriors: &Tensor<f64>, splits: usize) -> Result<(f64, f64)> {
    let (n, k) = rows(posteriors)?;
    let p = posteriors.data();
    let per_split: Vec<f64> = split_ranges(n, splits)?
        .into_iter()
        .map(|r| {
            let len = r.len() as f64;
            let mut marginal = vec![0.0; k];
            for i in r.clone() {
                for (m, v) in marginal.iter_mut().zip(&p[i * k..(i + 1) * k]) {
                    *m += v / len;
                }
            }
            let total: f64 = r.map(|i| kl(&p[i * k..(i + 1) * k], &marginal)).sum();
            (total / len).exp()
        })
        .collect();
    Ok(mean_std(&per_split))
}

pub fn rid(probe: &ProbeClassifier, originals: &Tensor<f32>, recons: &Tensor<f32>, splits: usize) -> Result<(f64, f64)> {
    if originals.shape() != recons.shape() {
        return Err(Error::invalid(format!(
            "originals {:?} and reconstructions {:?} are not aligned",
            originals.shape(),
            recons.shape()
        )));
    }
    rid_from_posteriors(&probe.posteriors(originals)?, &probe.posteriors(recons)?, splits)
}

pub fn inception_score(probe: &ProbeClassifier, samples: &Tensor<f32>, splits: usize) -> Result<(f64, f64)> {
    inception_score_from_posteriors(&probe.posteriors(samples)?, splits)
}

fn moments(x: &Tensor<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (n, d) = rows(x)?;
    if n < d + 1 || n < 2 {
        return Err(Error::invalid(format!("{n} samples of dimension {d}: need at least {}", (d + 1).max(2))));
    }
    let m = DMatrix::from_row_slice(n, d, x.data());
    let mean: Vec<f64> = (0..d).map(|j| m.column(j).mean()).collect();
    let mut centered = m;
    for j in 0..d {
        centered.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok((mean, cov))
}

/// Symmetric square root with negative eigenvalues clamped to zero.
fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits of two feature sets:
/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^½)`.
pub fn fid(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<f64> {
    let (_, da) = rows(a)?;
    let (_, db) = rows(b)?;
    if da != db {
        return Err(Error::invalid(format!("feature dimensions differ: {da} vs {db}")));
    }
    let (ma, mut ca) = moments(a)?;
    let (mb, mut cb) = moments(b)?;
    let ridge = DMatrix::<f64>::identity(da, da) * FID_RIDGE;
    ca += &ridge;
    cb += &ridge;
    let shift: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).powi(2)).sum();
    // Tr (Σa Σb)^½ = Tr (Σa^½ Σb Σa^½)^½, whose argument is symmetric.
    let sa = sqrtm_psd(&ca);
    let inner = &sa * &cb * &sa;
    let sym = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = SymmetricEigen::new(sym).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(shift + ca.trace() + cb.trace() - 2.0 * tr_sqrt)
}

/// Root mean squared per-element difference.
pub fn rmse(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!("rmse of shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    let sq: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok((sq / a.len() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub rid_mean: f64,
    pub rid_std: f64,
    pub is_mean: f64,
    pub is_std: f64,
    pub fid: f64,
    pub rmse: f64,
}

impl MetricReport {
    pub fn to_text(&self) -> String {
        format!(
            "rid_mean\t{}\nrid_std\t{}\nis_mean\t{}\nis_std\t{}\nfid\t{}\nrmse\t{}\n",
            self.rid_mean, self.rid_std, self.is_mean, self.is_std, self.fid, self.rmse
        )
    }

    /// Range checks: RID ≥ 1, IS in `[1, classes]`, FID ≥ 0, all finite.
    pub fn check(&self, classes: usize) -> Result<()> {
        let all = [self.rid_mean, self.rid_std, self.is_mean, self.is_std, self.fid, self.rmse];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite metric in {self:?}")));
        }
        let tol = 1e-9;
        if self.rid_mean < 1.0 - tol || self.is_mean < 1.0 - tol || self.is_mean > classes as f64 + tol || self.fid < -1e-6 {
            return Err(Error::Numeric(format!("metric out of range: {self:?}")));
        }
        Ok(())
    }
}

/// RID of reconstructions, IS of samples, FID between probe features of
/// originals and samples, RMSE of reconstructions.
pub fn evaluate(probe: &ProbeClassifier, originals: &Tensor<f32>, recons: &Tensor<f32>, samples: &Tensor<f32>) -> Result<MetricReport> {
    let (rid_mean, rid_std) = rid(probe, originals, recons, DEFAULT_SPLITS)?;
    let (is_mean, is_std) = inception_score(probe, samples, DEFAULT_SPLITS)?;
    let fid = fid(&probe.features(originals)?, &probe.features(samples)?)?;
    Ok(MetricReport {
        rid_mean,
        rid_std,
        is_mean,
        is_std,
        fid,
        rmse: rmse(originals, recons)?,
    })
}

/// Mode coverage of generated ring samples and moments of the encoder's
/// aggregate posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct RingReport {
    /// Fraction of samples within three standard deviations of each center.
    pub mode_fractions: Vec<f64>,
    pub latent_mean: Vec<f64>,
    pub latent_cov: Vec<Vec<f64>>,
    pub rmse: f64,
}

/// A mode counts as covered when at least this fraction of samples lands
/// near it.
pub const MODE_COVERAGE_FRACTION: f64 = 0.02;

impl RingReport {
    pub fn modes_covered(&self) -> usize {
        self.mode_fractions.iter().filter(|&&f| f >= MODE_COVERAGE_FRACTION).count()
    }

    /// Largest `|mean|` and largest deviation of the covariance from `I`.
    pub fn latent_deviation(&self) -> (f64, f64) {
        let mean = self.latent_mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut cov = 0.0f64;
        for (i, row) in self.latent_cov.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                cov = cov.max((v - target).abs());
            }
        }
        (mean, cov)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("modes_covered\t{}\n", self.modes_covered());
        for (k, f) in self.mode_fractions.iter().enumerate() {
            let _ = writeln!(s, "mode_{k}_fraction\t{f}");
        }
        for (i, m) in self.latent_mean.iter().enumerate() {
            let _ = writeln!(s, "latent_mean_{i}\t{m}");
        }
        for (i, row) in self.latent_cov.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(s, "latent_cov_{i}{j}\t{v}");
            }
        }
        let _ = writeln!(s, "rmse\t{}", self.rmse);
        s
    }
}

pub fn ring_report(samples: &Tensor<f32>, ring: &GaussianRingSpec, latents: &Tensor<f32>, rmse: f64) -> Result<RingReport> {
    let &[n, 2] = samples.shape() else {
        return Err(Error::invalid(format!("ring samples must be [n, 2], got {:?}", samples.shape())));
    };
    let radius = 3.0 * ring.std;
    let mode_fractions = ring
        .centers()
        .iter()
        .map(|c| {
            let hits = samples
                .data()
                .chunks(2)
                .filter(|p| ((p[0] as f64 - c[0]).powi(2) + (p[1] as f64 - c[1]).powi(2)).sqrt() <= radius)
                .count();
            hits as f64 / n as f64
        })
        .collect();
    let (mean, cov) = moments(&latents.cast())?;
    Ok(RingReport {
        mode_fractions,
        latent_mean: mean,
        latent_cov: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        rmse,
    })
}
