use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `[−1, 1] → [0, 255]`, rounding half up.
fn to_byte(v: f32) -> u8 {
    ((v as f64 + 1.0) * 127.5 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Tiles `n×c×h×w` images into a grid, `cols` per row, and writes binary
/// PGM (`c = 1`) or PPM (`c = 3`). Empty cells are black.
pub fn write_image_grid(images: &Tensor<f32>, cols: usize, path: &Path) -> Result<()> {
    let &[n, c, h, w] = images.shape() else {
        return Err(Error::invalid(format!("image grid needs [n, c, h, w], got {:?}", images.shape())));
    };
    if cols == 0 {
        return Err(Error::invalid("image grid needs at least one column"));
    }
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => return Err(Error::invalid(format!("cannot write {c}-channel images"))),
    };
    let cols = cols.min(n);
    let rows = n.div_ceil(cols);
    let (gw, gh) = (cols * w, rows * h);
    let mut out = format!("{magic}\n{gw} {gh}\n255\n").into_bytes();
    let body_start = out.len();
    out.resize(body_start + gw * gh * c, 0);
    let body = &mut out[body_start..];
    let data = images.data();
    for i in 0..n {
        let (gr, gc) = (i / cols, i % cols);
        for y in 0..h {
            for x in 0..w {
                let py = gr * h + y;
                let px = gc * w + x;
                for ch in 0..c {
                    body[(py * gw + px) * c + ch] = to_byte(data[((i * c + ch) * h + y) * w + x]);
                }
            }
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `o₁ r₁ o₂ r₂ …`: originals in odd columns, reconstructions in even ones.
pub fn interleave_columns(originals: &Tensor<f32>, recons: &Tensor<f32>) -> Result<Tensor<f32>> {
    if originals.shape() != recons.shape() {
        return Err(Error::invalid(format!(
            "originals {:?} and reconstructions {:?} differ in shape",
            originals.shape(),
            recons.shape()
        )));
    }
    let n = originals.shape()[0];
    let mut parts = Vec::with_capacity(2 * n);
    for i in 0..n {
        parts.push(originals.slice_batch(i, 1)?);
        parts.push(recons.slice_batch(i, 1)?);
    }
    Tensor::stack_batch(&parts)
}

/// Plain-text `x<TAB>y` lines, the point-data stand-in for image grids.
pub fn write_scatter(points: &Tensor<f32>, path: &Path) -> Result<()> {
    let &[_, 2] = points.shape() else {
        return Err(Error::invalid(format!("scatter needs [n, 2], got {:?}", points.shape())));
    };
    let mut s = String::new();
    for p in points.data().chunks(2) {
        let _ = writeln!(s, "{}\t{}", p[0], p[1]);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// A decoded binary PGM/PPM.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl Pnm {
    /// Pixels mapped back to `[−1, 1]` as a `1×c×h×w` tensor.
    pub fn to_tensor(&self) -> Result<Tensor<f32>> {
        let (h, w, c) = (self.height, self.width, self.channels);
        let mut data = vec![0.0; c * h * w];
        for (i, &b) in self.pixels.iter().enumerate() {
            let (pix, ch) = (i / c, i % c);
            data[ch * h * w + pix] = b as f32 / 127.5 - 1.0;
        }
        Tensor::new(&[1, c, h, w], data)
    }
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if bytes.get(pos) == Some(&b'#') {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format(format!("{}: truncated header", path.display())));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("{}: unsupported magic `{other}`", path.display()))),
    };
    let num = |i: usize, name: &str| -> Result<usize> {
        fields[i]
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad `{name}` `{}`", path.display(), fields[i])))
    };
    let (width, height, maxval) = (num(1, "width")?, num(2, "height")?, num(3, "maxval")?);
    if maxval != 255 {
        return Err(Error::Format(format!("{}: `maxval` {maxval} is not 255", path.display())));
    }
    let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != width * height * channels {
        return Err(Error::Format(format!(
            "{}: expected {} pixel bytes, found {}",
            path.display(),
            width * height * channels,
            pixels.len()
        )));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        pixels,
    })
}

/// Mean over a `(2r+1)²` window, clamped at the borders.
pub fn box_blur(images: &Tensor<f32>, radius: usize) -> Result<Tensor<f32>> {
    let &[n, c, h, w] = images.shape() else {
        return Err(Error::invalid(format!("blur needs [n, c, h, w], got {:?}", images.shape())));
    };
    let r = radius as isize;
    let src = images.data();
    let mut out = vec![0.0f32; src.len()];
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0f32;
                let mut count = 0.0f32;
                for yy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                    for xx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                        acc += src[base + yy as usize * w + xx as usize];
                        count += 1.0;
                    }
                }
                out[base + y as usize * w + x as usize] = acc / count;
            }
        }
    }
    Tensor::new(images.shape(), out)
}
