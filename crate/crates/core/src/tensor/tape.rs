use super::kernels::{self, ConvGeom};
use super::{matmul_into, numel, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<R> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddBias(Var, Var),
    AddScalar(Var),
    MulScalar(Var, R),
    ScaleBy(Var, Var),
    LeakyRelu(Var, R),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Sqrt(Var),
    Square(Var),
    Clamp(Var, R, R),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    SumPerSample(Var),
    Reshape(Var),
    Slice { x: Var, axis: usize, start: usize },
    Crop2d { x: Var, top: usize, left: usize },
    Concat { inputs: Vec<Var>, axis: usize },
    ReflectPad { x: Var, pad: usize },
    Conv2d { x: Var, w: Var, geom: ConvGeom },
    ConvTranspose2d { x: Var, w: Var, geom: ConvGeom },
}

impl<R> Op<R> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddBias(..) => "add_bias",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::ScaleBy(..) => "scale_by",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Softplus(..) => "softplus",
            Op::Sqrt(..) => "sqrt",
            Op::Square(..) => "square",
            Op::Clamp(..) => "clamp",
            Op::Softmax(..) => "softmax",
            Op::LogSoftmax(..) => "log_softmax",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumPerSample(..) => "sum_per_sample",
            Op::Reshape(..) => "reshape",
            Op::Slice { .. } => "slice",
            Op::Crop2d { .. } => "crop2d",
            Op::Concat { .. } => "concat",
            Op::ReflectPad { .. } => "reflect_pad",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvTranspose2d { .. } => "conv_transpose2d",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::AddBias(a, b)
            | Op::ScaleBy(a, b) => vec![*a, *b],
            Op::AddScalar(a)
            | Op::MulScalar(a, _)
            | Op::LeakyRelu(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Softplus(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Clamp(a, _, _)
            | Op::Softmax(a)
            | Op::LogSoftmax(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumPerSample(a)
            | Op::Reshape(a)
            | Op::Transpose(a) => vec![*a],
            Op::Slice { x, .. } | Op::Crop2d { x, .. } | Op::ReflectPad { x, .. } => vec![*x],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Conv2d { x, w, .. } | Op::ConvTranspose2d { x, w, .. } => vec![*x, *w],
        }
    }
}

struct Node<R> {
    value: Tensor<R>,
    requires_grad: bool,
    op: Op<R>,
}

/// Define-by-run recording of differentiable operations.
///
/// Nodes are appended in evaluation order, so every record's inputs precede
/// it and a single reverse sweep visits each record once.
pub struct Tape<R = f32> {
    nodes: Vec<Node<R>>,
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients<R> {
    grads: Vec<Option<Tensor<R>>>,
}

impl<R: Real> Gradients<R> {
    pub fn get(&self, v: Var) -> Option<&Tensor<R>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<R>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn same_shape(op: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{op}: shape mismatch {a:?} vs {b:?}")));
    }
    Ok(())
}

fn transpose_data<R: Real>(d: &[R], rows: usize, cols: usize) -> Vec<R> {
    let mut out = vec![R::zero(); d.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = d[i * cols + j];
        }
    }
    out
}

fn softplus<R: Real>(x: R) -> R {
    // log(1 + e^x) without overflow
    if x > R::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Recorded operations as `(op name, input ids, output id)`, in tape order.
    pub fn records(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !matches!(n.op, Op::Leaf))
            .map(|(i, n)| (n.op.name(), n.op.inputs().iter().map(|v| v.0).collect(), i))
            .collect()
    }

    pub fn leaf(&mut self, value: Tensor<R>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, value: Tensor<R>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<R>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<R> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant copy of `v`; gradients stop here.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>) -> Var {
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn next_id(&self) -> usize {
        self.nodes.len()
    }

    fn unary(&mut self, a: Var, f: impl Fn(R) -> R, op: Op<R>) -> Var {
        let out = self.value(a).map(f);
        self.push(out, op)
    }

    // ---- elementwise -------------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.shape(a), self.shape(b))?;
        let out = self.value(a).zip(self.value(b), |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.shape(a), self.shape(b))?;
        let out = self.value(a).zip(self.value(b), |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.shape(a), self.shape(b))?;
        let out = self.value(a).zip(self.value(b), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("div", self.shape(a), self.shape(b))?;
        if let Some(pos) = self.value(b).data().iter().position(|&y| y == R::zero()) {
            return Err(Error::Domain {
                op: "div",
                node: self.next_id(),
                detail: format!("zero divisor at flat index {pos}"),
            });
        }
        let out = self.value(a).zip(self.value(b), |x, y| x / y)?;
        Ok(self.push(out, Op::Div(a, b)))
    }

    /// Adds `bias` (shape `[C]`) along axis 1 of `a` (shape `[N, C, ...]`).
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let bshape = self.shape(bias);
        if shape.len() < 2 || bshape.len() != 1 || bshape[0] != shape[1] {
            return Err(Error::invalid(format!(
                "add_bias: bias {bshape:?} does not match axis 1 of {shape:?}"
            )));
        }
        let (outer, c, inner) = kernels::split_axis(&shape, 1);
        let b = self.value(bias).data().to_vec();
        let mut out = self.value(a).data().to_vec();
        for o in 0..outer {
            for (ci, &bv) in b.iter().enumerate().take(c) {
                let base = (o * c + ci) * inner;
                out[base..base + inner].iter_mut().for_each(|v| *v += bv);
            }
        }
        Ok(self.push(Tensor::from_parts(shape, out), Op::AddBias(a, bias)))
    }

    pub fn add_scalar(&mut self, a: Var, c: R) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn mul_scalar(&mut self, a: Var, c: R) -> Var {
        self.unary(a, |x| x * c, Op::MulScalar(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.mul_scalar(a, -R::one())
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let n = self.neg(a);
        self.add_scalar(n, R::one())
    }

    /// Multiplies every element of `a` by the one-element tensor `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::invalid(format!(
                "scale_by: scale must have one element, got shape {:?}",
                self.shape(s)
            )));
        }
        let k = self.value(s).item();
        Ok(self.unary(a, |x| x * k, Op::ScaleBy(a, s)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: R) -> Var {
        self.unary(a, |x| if x > R::zero() { x } else { x * slope }, Op::LeakyRelu(a, slope))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, R::zero())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.exp(), Op::Exp(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(pos) = self.value(a).data().iter().position(|&x| !(x > R::zero())) {
            return Err(Error::Domain {
                op: "log",
                node: self.next_id(),
                detail: format!("non-positive input {} at flat index {pos}", self.value(a).data()[pos]),
            });
        }
        Ok(self.unary(a, |x| x.ln(), Op::Log(a)))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        if let Some(pos) = self.value(a).data().iter().position(|&x| x < R::zero() || x.is_nan()) {
            return Err(Error::Domain {
                op: "sqrt",
                node: self.next_id(),
                detail: format!("negative input at flat index {pos}"),
            });
        }
        Ok(self.unary(a, |x| x.sqrt(), Op::Sqrt(a)))
    }

    /// Clamps into `[lo, hi]`; the gradient passes only inside the interval.
    pub fn clamp(&mut self, a: Var, lo: R, hi: R) -> Var {
        self.unary(a, |x| x.max(lo).min(hi), Op::Clamp(a, lo, hi))
    }

    // ---- reductions --------------------------------------------------------

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum_all();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.sum_all() / R::lit(t.len() as f64);
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Sums every axis but the first: `[N, ...] -> [N, 1]`.
    pub fn sum_per_sample(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.shape()[0];
        let inner = t.len() / n;
        let out: Vec<R> = t.data().chunks(inner).map(|c| c.iter().copied().sum()).collect();
        self.push(Tensor::from_parts(vec![n, 1], out), Op::SumPerSample(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let last = *t.shape().last().unwrap();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(last) {
            let m = row.iter().fold(R::neg_infinity(), |m, &x| m.max(x));
            let mut z = R::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                z += *v;
            }
            row.iter_mut().for_each(|v| *v = *v / z);
        }
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Softmax(a))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let last = *t.shape().last().unwrap();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(last) {
            let m = row.iter().fold(R::neg_infinity(), |m, &x| m.max(x));
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<R>().ln();
            row.iter_mut().for_each(|v| *v = *v - lse);
        }
        let shape = t.shape().to_vec();
        self.push(Tensor::from_parts(shape, out), Op::LogSoftmax(a))
    }

    // ---- shape ops ---------------------------------------------------------

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// Flattens `[N, ...]` to `[N, rest]`.
    pub fn flatten(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a);
        let n = shape[0];
        let rest = numel(&shape[1..]);
        self.reshape(a, &[n, rest])
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::invalid(format!(
                "slice {start}..{} on axis {axis} out of range for {shape:?}",
                start + len
            )));
        }
        let (outer, n, inner) = kernels::split_axis(&shape, axis);
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut oshape = shape;
        oshape[axis] = len;
        Ok(self.push(Tensor::from_parts(oshape, out), Op::Slice { x: a, axis, start }))
    }

    /// Crops the last two axes to `h×w` starting at `(top, left)`.
    pub fn crop2d(&mut self, a: Var, top: usize, left: usize, h: usize, w: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let nd = shape.len();
        if nd < 2 || h == 0 || w == 0 || top + h > shape[nd - 2] || left + w > shape[nd - 1] {
            return Err(Error::invalid(format!(
                "crop {h}×{w} at ({top}, {left}) does not fit in {shape:?}"
            )));
        }
        let (ih, iw) = (shape[nd - 2], shape[nd - 1]);
        let planes = numel(&shape[..nd - 2]);
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(planes * h * w);
        for p in 0..planes {
            for i in 0..h {
                let base = p * ih * iw + (top + i) * iw + left;
                out.extend_from_slice(&src[base..base + w]);
            }
        }
        let mut oshape = shape;
        oshape[nd - 2] = h;
        oshape[nd - 1] = w;
        Ok(self.push(Tensor::from_parts(oshape, out), Op::Crop2d { x: a, top, left }))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let base_shape = self.shape(*first).to_vec();
        if axis >= base_shape.len() {
            return Err(Error::invalid(format!("concat axis {axis} out of range for {base_shape:?}")));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base_shape.len()
                && s.iter()
                    .zip(&base_shape)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::invalid(format!(
                    "concat along axis {axis}: {s:?} incompatible with {base_shape:?}"
                )));
            }
            total += s[axis];
        }
        let (outer, _, inner) = kernels::split_axis(&base_shape, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let len = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * len..(o + 1) * len]);
            }
        }
        let mut oshape = base_shape;
        oshape[axis] = total;
        Ok(self.push(
            Tensor::from_parts(oshape, out),
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        ))
    }

    /// Reflection padding of the last two axes, edge sample not repeated.
    pub fn reflect_pad(&mut self, a: Var, pad: usize) -> Result<Var> {
        let out = kernels::reflect_pad_tensor(self.value(a), pad)?;
        Ok(self.push(out, Op::ReflectPad { x: a, pad }))
    }

    // ---- linear algebra ----------------------------------------------------

    /// `[m, k] · [k, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::invalid(format!("matmul: {sa:?} · {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![R::zero(); m * n];
        matmul_into(self.value(a).data(), false, self.value(b).data(), false, &mut out, m, k, n, false);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b)))
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(Error::invalid(format!("transpose needs a matrix, got {s:?}")));
        }
        let (r, c) = (s[0], s[1]);
        let out = transpose_data(self.value(a).data(), r, c);
        Ok(self.push(Tensor::from_parts(vec![c, r], out), Op::Transpose(a)))
    }

    /// Cross-correlation of `x: [N, C, H, W]` with `w: [Co, C, kh, kw]`.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(Error::invalid(format!("conv2d: input {xs:?} vs kernel {ws:?}")));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d: stride must be >= 1"));
        }
        let (n, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (co, kh, kw) = (ws[0], ws[2], ws[3]);
        let (oh, ow) = match (
            kernels::conv_output_size(h, kh, stride, pad),
            kernels::conv_output_size(wd, kw, stride, pad),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::invalid(format!(
                    "conv2d: kernel {kh}×{kw} does not fit {h}×{wd} with pad {pad}"
                )))
            }
        };
        let geom = ConvGeom {
            channels: c,
            h,
            w: wd,
            kh,
            kw,
            stride,
            pad,
            out_h: oh,
            out_w: ow,
        };
        let (rows, cols_n) = (geom.col_rows(), geom.col_cols());
        let mut cols = vec![R::zero(); rows * cols_n];
        let mut out = vec![R::zero(); n * co * cols_n];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        for i in 0..n {
            kernels::im2col(&xv[i * c * h * wd..(i + 1) * c * h * wd], &geom, &mut cols);
            matmul_into(wv, false, &cols, false, &mut out[i * co * cols_n..(i + 1) * co * cols_n], co, rows, cols_n, false);
        }
        Ok(self.push(
            Tensor::from_parts(vec![n, co, oh, ow], out),
            Op::Conv2d { x, w, geom },
        ))
    }

    /// Transposed convolution of `x: [N, Ci, H, W]` with `w: [Ci, Co, kh, kw]`.
    ///
    /// Output extent is `(H - 1)·stride - 2·pad + kh + out_pad`; this is the
    /// exact adjoint of [`Tape::conv2d`] with the same kernel and geometry.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
        out_pad: (usize, usize),
    ) -> Result<Var> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[0] {
            return Err(Error::invalid(format!("conv_transpose2d: input {xs:?} vs kernel {ws:?}")));
        }
        if stride == 0 || out_pad.0 >= stride || out_pad.1 >= stride {
            return Err(Error::invalid(format!(
                "conv_transpose2d: stride {stride} with output padding {out_pad:?}"
            )));
        }
        let (n, ci, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (co, kh, kw) = (ws[1], ws[2], ws[3]);
        let oh = ((h - 1) * stride + kh + out_pad.0).checked_sub(2 * pad);
        let ow = ((wd - 1) * stride + kw + out_pad.1).checked_sub(2 * pad);
        let (oh, ow) = match (oh, ow) {
            (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
            _ => return Err(Error::invalid("conv_transpose2d: padding exceeds output")),
        };
        // Geometry of the equivalent forward convolution (output image -> input grid).
        let geom = ConvGeom {
            channels: co,
            h: oh,
            w: ow,
            kh,
            kw,
            stride,
            pad,
            out_h: h,
            out_w: wd,
        };
        let (rows, cols_n) = (geom.col_rows(), geom.col_cols());
        let mut cols = vec![R::zero(); rows * cols_n];
        let mut out = vec![R::zero(); n * co * oh * ow];
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        for i in 0..n {
            matmul_into(wv, true, &xv[i * ci * cols_n..(i + 1) * ci * cols_n], false, &mut cols, rows, ci, cols_n, false);
            kernels::col2im(&cols, &geom, &mut out[i * co * oh * ow..(i + 1) * co * oh * ow]);
        }
        Ok(self.push(
            Tensor::from_parts(vec![n, co, oh, ow], out),
            Op::ConvTranspose2d { x, w, geom },
        ))
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse sweep from a one-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<R>> {
        let node = self
            .nodes
            .get(root.0)
            .ok_or_else(|| Error::invalid(format!("unknown node {}", root.0)))?;
        if node.value.len() != 1 {
            return Err(Error::invalid(format!(
                "backward root must be scalar, got shape {:?}",
                node.value.shape()
            )));
        }
        if !node.requires_grad {
            return Err(Error::NoGradient(format!(
                "node {} does not depend on any tensor that requires grad",
                root.0
            )));
        }
        let mut grads: Vec<Option<Tensor<R>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(node.value.shape(), R::one()));
        for i in (0..=root.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<R>>], v: Var, g: Vec<R>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.data_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b),
            slot @ None => {
                *slot = Some(Tensor::from_parts(self.nodes[v.0].value.shape().to_vec(), g));
            }
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn backprop_node(&self, i: usize, g: &Tensor<R>, grads: &mut [Option<Tensor<R>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        let gd = g.data();
        let map_in = |a: Var, f: &dyn Fn(R, R, R) -> R| -> Vec<R> {
            let x = self.value(a).data();
            x.iter()
                .zip(out)
                .zip(gd)
                .map(|((&x, &y), &g)| f(x, y, g))
                .collect()
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gd.to_vec());
                self.accumulate(grads, *b, gd.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, gd.to_vec());
                self.accumulate(grads, *b, gd.iter().map(|&x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if self.wants(*a) {
                    self.accumulate(grads, *a, gd.iter().zip(bv).map(|(&g, &y)| g * y).collect());
                }
                if self.wants(*b) {
                    self.accumulate(grads, *b, gd.iter().zip(av).map(|(&g, &x)| g * x).collect());
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if self.wants(*a) {
                    self.accumulate(grads, *a, gd.iter().zip(bv).map(|(&g, &y)| g / y).collect());
                }
                if self.wants(*b) {
                    let db = gd
                        .iter()
                        .zip(av)
                        .zip(bv)
                        .map(|((&g, &x), &y)| -g * x / (y * y))
                        .collect();
                    self.accumulate(grads, *b, db);
                }
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, gd.to_vec());
                if self.wants(*bias) {
                    let (outer, c, inner) = kernels::split_axis(g.shape(), 1);
                    let mut db = vec![R::zero(); c];
                    for o in 0..outer {
                        for (ci, d) in db.iter_mut().enumerate() {
                            let base = (o * c + ci) * inner;
                            *d += gd[base..base + inner].iter().copied().sum::<R>();
                        }
                    }
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => self.accumulate(grads, *a, gd.to_vec()),
            Op::MulScalar(a, c) => self.accumulate(grads, *a, gd.iter().map(|&x| x * *c).collect()),
            Op::ScaleBy(a, s) => {
                let k = self.value(*s).item();
                if self.wants(*a) {
                    self.accumulate(grads, *a, gd.iter().map(|&x| x * k).collect());
                }
                if self.wants(*s) {
                    let ds = gd.iter().zip(self.value(*a).data()).map(|(&g, &x)| g * x).sum();
                    self.accumulate(grads, *s, vec![ds]);
                }
            }
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                let d = map_in(*a, &|x, _, g| if x > R::zero() { g } else { g * s });
                self.accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let d = map_in(*a, &|_, y, g| g * y * (R::one() - y));
                self.accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let d = map_in(*a, &|_, y, g| g * (R::one() - y * y));
                self.accumulate(grads, *a, d);
            }
            Op::Exp(a) => {
                let d = map_in(*a, &|_, y, g| g * y);
                self.accumulate(grads, *a, d);
            }
            Op::Log(a) => {
                let d = map_in(*a, &|x, _, g| g / x);
                self.accumulate(grads, *a, d);
            }
            Op::Softplus(a) => {
                let d = map_in(*a, &|x, _, g| g * sigmoid(x));
                self.accumulate(grads, *a, d);
            }
            Op::Sqrt(a) => {
                // sqrt'(0) is taken as 0 so zero-norm inputs stay finite.
                let d = map_in(*a, &|_, y, g| {
                    if y > R::zero() {
                        g / (R::lit(2.0) * y)
                    } else {
                        R::zero()
                    }
                });
                self.accumulate(grads, *a, d);
            }
            Op::Square(a) => {
                let d = map_in(*a, &|x, _, g| R::lit(2.0) * x * g);
                self.accumulate(grads, *a, d);
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let d = map_in(*a, &|x, _, g| if x >= lo && x <= hi { g } else { R::zero() });
                self.accumulate(grads, *a, d);
            }
            Op::Softmax(a) => {
                let last = *g.shape().last().unwrap();
                let mut d = vec![R::zero(); gd.len()];
                for ((dr, yr), gr) in d.chunks_mut(last).zip(out.chunks(last)).zip(gd.chunks(last)) {
                    let dot: R = yr.iter().zip(gr).map(|(&y, &g)| y * g).sum();
                    for ((dv, &y), &gv) in dr.iter_mut().zip(yr).zip(gr) {
                        *dv = y * (gv - dot);
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::LogSoftmax(a) => {
                let last = *g.shape().last().unwrap();
                let mut d = vec![R::zero(); gd.len()];
                for ((dr, yr), gr) in d.chunks_mut(last).zip(out.chunks(last)).zip(gd.chunks(last)) {
                    let gsum: R = gr.iter().copied().sum();
                    for ((dv, &y), &gv) in dr.iter_mut().zip(yr).zip(gr) {
                        *dv = gv - y.exp() * gsum;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, vec![gd[0]; n]);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, vec![gd[0] / R::lit(n as f64); n]);
            }
            Op::SumPerSample(a) => {
                let t = self.value(*a);
                let inner = t.len() / t.shape()[0];
                let d = gd.iter().flat_map(|&x| std::iter::repeat_n(x, inner)).collect();
                self.accumulate(grads, *a, d);
            }
            Op::Slice { x, axis, start } => {
                let in_shape = self.shape(*x).to_vec();
                let (outer, n, inner) = kernels::split_axis(&in_shape, *axis);
                let len = g.shape()[*axis];
                let mut d = vec![R::zero(); numel(&in_shape)];
                for o in 0..outer {
                    let dst = (o * n + start) * inner;
                    let src = o * len * inner;
                    d[dst..dst + len * inner].copy_from_slice(&gd[src..src + len * inner]);
                }
                self.accumulate(grads, *x, d);
            }
            Op::Crop2d { x, top, left } => {
                let in_shape = self.shape(*x).to_vec();
                let nd = in_shape.len();
                let (ih, iw) = (in_shape[nd - 2], in_shape[nd - 1]);
                let (h, w) = (g.shape()[nd - 2], g.shape()[nd - 1]);
                let mut d = vec![R::zero(); numel(&in_shape)];
                for p in 0..numel(&in_shape[..nd - 2]) {
                    for r in 0..h {
                        let dst = p * ih * iw + (top + r) * iw + left;
                        let src = (p * h + r) * w;
                        d[dst..dst + w].copy_from_slice(&gd[src..src + w]);
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = kernels::split_axis(g.shape(), *axis);
                let mut offset = 0;
                for v in inputs {
                    let len = self.shape(*v)[*axis];
                    if self.wants(*v) {
                        let mut d = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            d.extend_from_slice(&gd[base..base + len * inner]);
                        }
                        self.accumulate(grads, *v, d);
                    }
                    offset += len;
                }
            }
            Op::ReflectPad { x, pad } => {
                let d = kernels::reflect_pad_backward(gd, self.shape(*x), *pad);
                self.accumulate(grads, *x, d);
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.wants(*a) {
                    let mut d = vec![R::zero(); m * k];
                    matmul_into(gd, false, self.value(*b).data(), true, &mut d, m, n, k, false);
                    self.accumulate(grads, *a, d);
                }
                if self.wants(*b) {
                    let mut d = vec![R::zero(); k * n];
                    matmul_into(self.value(*a).data(), true, gd, false, &mut d, k, m, n, false);
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Transpose(a) => {
                let s = g.shape();
                self.accumulate(grads, *a, transpose_data(gd, s[0], s[1]));
            }
            Op::Conv2d { x, w, geom } => {
                let n = self.shape(*x)[0];
                let co = self.shape(*w)[0];
                let (rows, cols_n) = (geom.col_rows(), geom.col_cols());
                let img = geom.channels * geom.h * geom.w;
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                let mut cols = vec![R::zero(); rows * cols_n];
                let mut dw = self.wants(*w).then(|| vec![R::zero(); co * rows]);
                let mut dx = self.wants(*x).then(|| vec![R::zero(); n * img]);
                for i in 0..n {
                    let gi = &gd[i * co * cols_n..(i + 1) * co * cols_n];
                    if let Some(dw) = dw.as_mut() {
                        kernels::im2col(&xv[i * img..(i + 1) * img], geom, &mut cols);
                        matmul_into(gi, false, &cols, true, dw, co, cols_n, rows, true);
                    }
                    if let Some(dx) = dx.as_mut() {
                        matmul_into(wv, true, gi, false, &mut cols, rows, co, cols_n, false);
                        kernels::col2im(&cols, geom, &mut dx[i * img..(i + 1) * img]);
                    }
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::ConvTranspose2d { x, w, geom } => {
                let xs = self.shape(*x);
                let (n, ci) = (xs[0], xs[1]);
                let (rows, cols_n) = (geom.col_rows(), geom.col_cols());
                let out_img = geom.channels * geom.h * geom.w;
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                let mut cols = vec![R::zero(); rows * cols_n];
                let mut dw = self.wants(*w).then(|| vec![R::zero(); ci * rows]);
                let mut dx = self.wants(*x).then(|| vec![R::zero(); n * ci * cols_n]);
                for i in 0..n {
                    kernels::im2col(&gd[i * out_img..(i + 1) * out_img], geom, &mut cols);
                    if let Some(dx) = dx.as_mut() {
                        matmul_into(wv, false, &cols, false, &mut dx[i * ci * cols_n..(i + 1) * ci * cols_n], ci, rows, cols_n, false);
                    }
                    if let Some(dw) = dw.as_mut() {
                        matmul_into(&xv[i * ci * cols_n..(i + 1) * ci * cols_n], false, &cols, true, dw, ci, cols_n, rows, true);
                    }
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
            }
        }
    }
}
