//! Raw array kernels shared by the tape ops and by non-differentiable callers
//! (augmentation, metrics).

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Output extent of a convolution along one axis, `None` if the kernel does
/// not fit.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds one `C×H×W` image into a `(C·kh·kw) × (out_h·out_w)` matrix.
pub(crate) fn im2col<R: Real>(x: &[R], g: &ConvGeom, cols: &mut [R]) {
    let ncols = g.col_cols();
    for c in 0..g.channels {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for oi in 0..g.out_h {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oi * g.out_w..(oi + 1) * g.out_w];
                    if ii < 0 || ii >= g.h as isize {
                        line.iter_mut().for_each(|v| *v = R::zero());
                        continue;
                    }
                    let src = &x[(c * g.h + ii as usize) * g.w..(c * g.h + ii as usize + 1) * g.w];
                    for (oj, v) in line.iter_mut().enumerate() {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        *v = if jj < 0 || jj >= g.w as isize {
                            R::zero()
                        } else {
                            src[jj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into an image.
pub(crate) fn col2im<R: Real>(cols: &[R], g: &ConvGeom, x: &mut [R]) {
    let ncols = g.col_cols();
    for c in 0..g.channels {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for oi in 0..g.out_h {
                    let ii = (oi * g.stride + ki) as isize - g.pad as isize;
                    if ii < 0 || ii >= g.h as isize {
                        continue;
                    }
                    let base = (c * g.h + ii as usize) * g.w;
                    for oj in 0..g.out_w {
                        let jj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if jj >= 0 && (jj as usize) < g.w {
                            x[base + jj as usize] += src[oi * g.out_w + oj];
                        }
                    }
                }
            }
        }
    }
}

/// Mirror index for reflection padding that does not repeat the edge sample.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

pub(crate) fn check_reflect_pad(shape: &[usize], pad: usize) -> Result<()> {
    if shape.len() < 2 {
        return Err(Error::invalid(format!(
            "reflect_pad needs at least 2 spatial dims, got shape {shape:?}"
        )));
    }
    let h = shape[shape.len() - 2];
    let w = shape[shape.len() - 1];
    if pad >= h.min(w) {
        return Err(Error::invalid(format!(
            "reflect pad {pad} must be smaller than min(H, W) = {}",
            h.min(w)
        )));
    }
    Ok(())
}

/// Reflect-pads the last two axes of `x` by `pad` on every side.
pub fn reflect_pad_tensor<R: Real>(x: &Tensor<R>, pad: usize) -> Result<Tensor<R>> {
    check_reflect_pad(x.shape(), pad)?;
    let shape = x.shape();
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let planes = x.len() / (h * w);
    let mut out = vec![R::zero(); planes * ph * pw];
    for p in 0..planes {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * ph * pw..(p + 1) * ph * pw];
        for i in 0..ph {
            let si = reflect_index(i as isize - pad as isize, h);
            for j in 0..pw {
                let sj = reflect_index(j as isize - pad as isize, w);
                dst[i * pw + j] = src[si * w + sj];
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let nd = out_shape.len();
    out_shape[nd - 2] = ph;
    out_shape[nd - 1] = pw;
    Ok(Tensor::from_parts(out_shape, out))
}

pub(crate) fn reflect_pad_backward<R: Real>(grad: &[R], in_shape: &[usize], pad: usize) -> Vec<R> {
    let (h, w) = (in_shape[in_shape.len() - 2], in_shape[in_shape.len() - 1]);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let planes = grad.len() / (ph * pw);
    let mut out = vec![R::zero(); planes * h * w];
    for p in 0..planes {
        let src = &grad[p * ph * pw..(p + 1) * ph * pw];
        let dst = &mut out[p * h * w..(p + 1) * h * w];
        for i in 0..ph {
            let si = reflect_index(i as isize - pad as isize, h);
            for j in 0..pw {
                let sj = reflect_index(j as isize - pad as isize, w);
                dst[si * w + sj] += src[i * pw + j];
            }
        }
    }
    out
}

/// `(outer, axis_len, inner)` decomposition of `shape` around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
