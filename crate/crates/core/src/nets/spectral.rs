//! Power-iteration spectral normalization.
//!
//! A weight of shape `[d0, ...]` is viewed as a `d0 × rest` matrix. The
//! persistent vectors `u` (length `d0`) and `v` (length `rest`) are updated
//! outside the tape; the forward pass divides the weight by `uᵀ W v` with
//! `u`, `v` held constant.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{matmul_into, Real, Tensor};

pub(crate) const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState<R: Real> {
    pub u: Tensor<R>,
    pub v: Tensor<R>,
}

fn matrix_dims<R: Real>(w: &Tensor<R>) -> (usize, usize) {
    let rows = w.shape()[0];
    (rows, w.len() / rows)
}

fn normalized<R: Real>(mut x: Vec<R>) -> Option<Vec<R>> {
    let n = x.iter().map(|&a| a * a).sum::<R>().sqrt();
    if !(n.to_f64().unwrap_or(0.0) > SIGMA_FLOOR) {
        return None;
    }
    x.iter_mut().for_each(|a| *a = *a / n);
    Some(x)
}

/// `Mᵀ u` for the matrix view of `w`.
fn mat_t_vec<R: Real>(w: &[R], rows: usize, cols: usize, u: &[R]) -> Vec<R> {
    let mut out = vec![R::zero(); cols];
    matmul_into(u, false, w, false, &mut out, 1, rows, cols, false);
    out
}

fn mat_vec<R: Real>(w: &[R], rows: usize, cols: usize, v: &[R]) -> Vec<R> {
    let mut out = vec![R::zero(); rows];
    matmul_into(w, false, v, false, &mut out, rows, cols, 1, false);
    out
}

impl<R: Real> SpectralState<R> {
    /// Random unit `u`, with `v` from one half-step of power iteration.
    pub fn init<G: Rng + ?Sized>(weight: &Tensor<R>, rng: &mut G) -> Self {
        let (rows, cols) = matrix_dims(weight);
        let u = Tensor::randn(&[rows], 1.0, rng);
        let u = normalized(u.into_data()).unwrap_or_else(|| {
            let mut e = vec![R::zero(); rows];
            e[0] = R::one();
            e
        });
        let v = normalized(mat_t_vec(weight.data(), rows, cols, &u)).unwrap_or_else(|| {
            let mut e = vec![R::zero(); cols];
            e[0] = R::one();
            e
        });
        SpectralState {
            u: Tensor::from_parts(vec![rows], u),
            v: Tensor::from_parts(vec![cols], v),
        }
    }

    /// Runs `iters` power-iteration steps against `weight` and returns the
    /// estimate `uᵀ W v`. A (numerically) zero matrix leaves the state alone.
    pub fn update(&mut self, weight: &Tensor<R>, iters: usize) -> R {
        let (rows, cols) = matrix_dims(weight);
        for _ in 0..iters {
            let Some(v) = normalized(mat_t_vec(weight.data(), rows, cols, self.u.data())) else {
                break;
            };
            let Some(u) = normalized(mat_vec(weight.data(), rows, cols, &v)) else {
                break;
            };
            self.v = Tensor::from_parts(vec![cols], v);
            self.u = Tensor::from_parts(vec![rows], u);
        }
        self.sigma(weight)
    }

    pub fn sigma(&self, weight: &Tensor<R>) -> R {
        let (rows, cols) = matrix_dims(weight);
        let wv = mat_vec(weight.data(), rows, cols, self.v.data());
        self.u.data().iter().zip(&wv).map(|(&a, &b)| a * b).sum()
    }

    /// `u vᵀ` reshaped like the weight, so that `σ = Σ W ⊙ (u vᵀ)`.
    pub(crate) fn outer(&self, weight_shape: &[usize]) -> Tensor<R> {
        let (u, v) = (self.u.data(), self.v.data());
        let mut out = Vec::with_capacity(u.len() * v.len());
        for &a in u {
            out.extend(v.iter().map(|&b| a * b));
        }
        Tensor::from_parts(weight_shape.to_vec(), out)
    }
}

/// Normalizes `w` by its estimated largest singular value after `iters`
/// power-iteration steps from `u`; returns the normalized weight and the
/// updated `u`. The estimate is floored at 1e-12.
pub fn spectral_normalize<R: Real>(w: &Tensor<R>, u: &Tensor<R>, iters: usize) -> Result<(Tensor<R>, Tensor<R>)> {
    if iters == 0 {
        return Err(Error::invalid("spectral_normalize needs at least one iteration"));
    }
    let (rows, cols) = matrix_dims(w);
    if u.len() != rows {
        return Err(Error::invalid(format!(
            "power vector has length {}, weight has {rows} rows",
            u.len()
        )));
    }
    let mut state = SpectralState {
        u: u.clone(),
        v: Tensor::zeros(&[cols]),
    };
    let sigma = state.update(w, iters);
    let sigma = sigma.max(R::lit(SIGMA_FLOOR));
    Ok((w.map(|x| x / sigma), state.u))
}
