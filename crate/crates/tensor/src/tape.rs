//! Arena-backed computation graph with reverse-mode accumulation.
//!
//! Every op appends a node whose inputs were created earlier, so node order
//! is already a topological order and `backward` is a single reverse sweep.
//! Parameters enter the graph as leaves via [`Tape::param`]; their gradients
//! are read back from the [`Gradients`] returned by [`Tape::backward`].

use crate::error::{shape_err, Result, TensorError};
use crate::kernels::{col2im_add, gemm, im2col, ConvGeom, Mat};
use crate::tensor::Tensor;

/// Variance floor used by [`Tape::layer_norm`].
pub const LAYER_NORM_EPS: f32 = 1e-5;
/// Additive guard inside the tanh-squash log-Jacobian.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    LayerNorm {
        input: Var,
        gain: Var,
        shift: Var,
        xhat: Vec<f32>,
        inv_std: Vec<f32>,
    },
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Minimum(Var, Var),
    Affine {
        input: Var,
        scale: Vec<f32>,
    },
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Concat(Vec<Var>),
    SliceCols {
        input: Var,
        start: usize,
    },
    Reshape(Var),
    GaussianLogProb {
        raw: Var,
        mean: Var,
        log_std: Var,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d {
                input, kernel, bias, ..
            }
            | Op::ConvTranspose2d {
                input, kernel, bias, ..
            } => vec![*input, *kernel, *bias],
            Op::Dense { input, weight, bias } => vec![*input, *weight, *bias],
            Op::LayerNorm { input, gain, shift, .. } => vec![*input, *gain, *shift],
            Op::Relu(a) | Op::Tanh(a) | Op::Exp(a) | Op::Sum(a) | Op::Mean(a) | Op::RowSum(a) | Op::Reshape(a) => {
                vec![*a]
            }
            Op::Affine { input, .. } | Op::SliceCols { input, .. } => vec![*input],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Minimum(a, b) => vec![*a, *b],
            Op::Concat(vs) => vs.clone(),
            Op::GaussianLogProb { raw, mean, log_std } => vec![*raw, *mean, *log_std],
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single-use computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f32>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of `var`, or `None` when no path from the loss reached it.
    pub fn get(&self, var: Var) -> Option<&[f32]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `var` as a tensor; zeros when it did not influence the loss.
    pub fn wrt(&self, var: Var) -> Tensor {
        let shape = &self.shapes[var.0];
        match self.get(var) {
            Some(g) => Tensor::new(shape, g.to_vec()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return shape_err(op, format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    Ok(())
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match *t.shape() {
        [n, d] => Ok((n, d)),
        _ => shape_err(op, format!("expected a 2-d tensor, got {:?}", t.shape())),
    }
}

fn dims4(op: &'static str, t: &Tensor) -> Result<[usize; 4]> {
    match *t.shape() {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => shape_err(op, format!("expected a 4-d tensor, got {:?}", t.shape())),
    }
}

fn grad_slot(grads: &mut [Option<Vec<f32>>], var: Var, len: usize) -> &mut Vec<f32> {
    grads[var.0].get_or_insert_with(|| vec![0.0; len])
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf holding a copy of `value`.
    pub fn param(&mut self, value: &Tensor) -> Var {
        self.leaf(value.clone(), true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Gradient stop: a constant copy of `var` that backward never crosses.
    pub fn detach(&mut self, var: Var) -> Var {
        let value = self.nodes[var.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        value.check_finite(name)?;
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Valid (unpadded) cross-correlation.
    ///
    /// `input` is `N×C×H×W`, `kernel` is `F×C×k×k`, `bias` is `F`; output
    /// spatial size is `(H − k) / stride + 1`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize) -> Result<Var> {
        const OP: &str = "conv2d";
        let x = self.value(input);
        let w = self.value(kernel);
        let b = self.value(bias);
        let [n, c, h, wd] = dims4(OP, x)?;
        let [f, kc, kh, kw] = dims4(OP, w)?;
        if kc != c || kh != kw || b.shape() != [f] || stride == 0 || h < kh || wd < kw {
            return shape_err(
                OP,
                format!(
                    "input {:?}, kernel {:?}, bias {:?}, stride {}",
                    x.shape(),
                    w.shape(),
                    b.shape(),
                    stride
                ),
            );
        }
        let g = ConvGeom::new(c, h, wd, kh, stride);
        let (rows, ncols) = (g.col_rows(), g.col_cols());
        let mut cols = vec![0.0; rows * ncols];
        let mut out = vec![0.0; n * f * ncols];
        let in_sz = c * h * wd;
        for i in 0..n {
            im2col(&x.data()[i * in_sz..(i + 1) * in_sz], &g, &mut cols);
            let o = &mut out[i * f * ncols..(i + 1) * f * ncols];
            gemm(Mat::new(w.data(), f, rows), Mat::new(&cols, rows, ncols), o, 0.0);
            for (fi, row) in o.chunks_mut(ncols).enumerate() {
                let bv = b.data()[fi];
                row.iter_mut().for_each(|v| *v += bv);
            }
        }
        let value = Tensor::new(&[n, f, g.out_h, g.out_w], out)?;
        self.push(
            value,
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
            },
            OP,
        )
    }

    /// Transposed convolution, the adjoint of [`Tape::conv2d`].
    ///
    /// `input` is `N×C×H×W`, `kernel` is `C×F×k×k`, `bias` is `F`. Output size
    /// is `(H − 1)·stride + k + output_padding`; `output_padding < stride`
    /// selects which of the conv inputs that map to `H` is reconstructed.
    pub fn conv2d_transpose(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Var,
        stride: usize,
        output_padding: usize,
    ) -> Result<Var> {
        const OP: &str = "conv2d_transpose";
        let x = self.value(input);
        let w = self.value(kernel);
        let b = self.value(bias);
        let [n, c, h, wd] = dims4(OP, x)?;
        let [kc, f, kh, kw] = dims4(OP, w)?;
        if kc != c || kh != kw || b.shape() != [f] || stride == 0 || output_padding >= stride {
            return shape_err(
                OP,
                format!(
                    "input {:?}, kernel {:?}, bias {:?}, stride {}, output_padding {}",
                    x.shape(),
                    w.shape(),
                    b.shape(),
                    stride,
                    output_padding
                ),
            );
        }
        let out_h = (h - 1) * stride + kh + output_padding;
        let out_w = (wd - 1) * stride + kw + output_padding;
        let g = ConvGeom::new(f, out_h, out_w, kh, stride);
        debug_assert_eq!((g.out_h, g.out_w), (h, wd));
        let (rows, ncols) = (g.col_rows(), g.col_cols());
        let mut cols = vec![0.0; rows * ncols];
        let plane = out_h * out_w;
        let mut out = vec![0.0; n * f * plane];
        let in_sz = c * h * wd;
        for i in 0..n {
            gemm(
                Mat::new(w.data(), c, rows).t(),
                Mat::new(&x.data()[i * in_sz..(i + 1) * in_sz], c, ncols),
                &mut cols,
                0.0,
            );
            let o = &mut out[i * f * plane..(i + 1) * f * plane];
            col2im_add(&cols, &g, o);
            for (fi, p) in o.chunks_mut(plane).enumerate() {
                let bv = b.data()[fi];
                p.iter_mut().for_each(|v| *v += bv);
            }
        }
        let value = Tensor::new(&[n, f, out_h, out_w], out)?;
        self.push(
            value,
            Op::ConvTranspose2d {
                input,
                kernel,
                bias,
                stride,
            },
            OP,
        )
    }

    /// `input·weight + bias` for `N×D_in` input and `D_in×D_out` weight.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        const OP: &str = "dense";
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let (n, din) = dims2(OP, x)?;
        let (win, dout) = dims2(OP, w)?;
        if win != din || b.shape() != [dout] {
            return shape_err(
                OP,
                format!("input {:?}, weight {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            );
        }
        let mut out = vec![0.0; n * dout];
        for row in out.chunks_mut(dout) {
            row.copy_from_slice(b.data());
        }
        gemm(Mat::new(x.data(), n, din), Mat::new(w.data(), din, dout), &mut out, 1.0);
        let value = Tensor::new(&[n, dout], out)?;
        self.push(value, Op::Dense { input, weight, bias }, OP)
    }

    /// Per-row standardization followed by `gain ⊙ x̂ + shift`.
    pub fn layer_norm(&mut self, input: Var, gain: Var, shift: Var) -> Result<Var> {
        const OP: &str = "layer_norm";
        let x = self.value(input);
        let (n, d) = dims2(OP, x)?;
        let gv = self.value(gain);
        let sv = self.value(shift);
        if d < 2 || gv.shape() != [d] || sv.shape() != [d] {
            return shape_err(
                OP,
                format!("input {:?}, gain {:?}, shift {:?}", x.shape(), gv.shape(), sv.shape()),
            );
        }
        let mut xhat = vec![0.0; n * d];
        let mut inv_std = vec![0.0; n];
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let row = &x.data()[i * d..(i + 1) * d];
            let mean = row.iter().map(|&v| v as f64).sum::<f64>() / d as f64;
            let var = row
                .iter()
                .map(|&v| {
                    let c = v as f64 - mean;
                    c * c
                })
                .sum::<f64>()
                / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS as f64).sqrt();
            inv_std[i] = is as f32;
            for j in 0..d {
                let xh = ((row[j] as f64 - mean) * is) as f32;
                xhat[i * d + j] = xh;
                out[i * d + j] = xh * gv.data()[j] + sv.data()[j];
            }
        }
        let value = Tensor::new(&[n, d], out)?;
        self.push(
            value,
            Op::LayerNorm {
                input,
                gain,
                shift,
                xhat,
                inv_std,
            },
            OP,
        )
    }

    fn map(&mut self, a: Var, f: impl Fn(f32) -> f32, op: Op, name: &'static str) -> Result<Var> {
        let x = self.value(a);
        let data = x.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(x.shape(), data)?;
        self.push(value, op, name)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map(a, |v| v.max(0.0), Op::Relu(a), "relu")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map(a, f32::tanh, Op::Tanh(a), "tanh")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.map(a, f32::exp, Op::Exp(a), "exp")
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f32, f32) -> f32, op: Op, name: &'static str) -> Result<Var> {
        let x = self.value(a);
        let y = self.value(b);
        same_shape(name, x, y)?;
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let value = Tensor::new(x.shape(), data)?;
        self.push(value, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |p, q| p + q, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |p, q| p - q, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |p, q| p * q, Op::Mul(a, b), "mul")
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, |p, q| if q < p { q } else { p }, Op::Minimum(a, b), "minimum")
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.mul(a, a)
    }

    /// `x ⊙ scale + shift` with `scale` and `shift` indexed by the last axis.
    pub fn affine(&mut self, input: Var, scale: &[f32], shift: &[f32]) -> Result<Var> {
        const OP: &str = "affine";
        let x = self.value(input);
        let d = *x.shape().last().unwrap_or(&0);
        if scale.len() != d || shift.len() != d || d == 0 {
            return shape_err(
                OP,
                format!("input {:?}, {} scales, {} shifts", x.shape(), scale.len(), shift.len()),
            );
        }
        let data = x
            .data()
            .chunks(d)
            .flat_map(|row| row.iter().zip(scale.iter().zip(shift)).map(|(&v, (&s, &t))| v * s + t))
            .collect();
        let value = Tensor::new(x.shape(), data)?;
        self.push(
            value,
            Op::Affine {
                input,
                scale: scale.to_vec(),
            },
            OP,
        )
    }

    pub fn scale(&mut self, input: Var, factor: f32) -> Result<Var> {
        let d = *self.value(input).shape().last().unwrap_or(&0);
        self.affine(input, &vec![factor; d], &vec![0.0; d])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().map(|&v| v as f64).sum::<f64>();
        self.push(Tensor::scalar(s as f32), Op::Sum(a), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.numel() == 0 {
            return shape_err("mean", "empty tensor");
        }
        let s = x.data().iter().map(|&v| v as f64).sum::<f64>() / x.numel() as f64;
        self.push(Tensor::scalar(s as f32), Op::Mean(a), "mean")
    }

    /// Sum along the last axis of an `N×D` tensor, giving `N`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (n, d) = dims2("row_sum", x)?;
        let data = x
            .data()
            .chunks(d)
            .map(|r| r.iter().map(|&v| v as f64).sum::<f64>() as f32)
            .collect();
        self.push(Tensor::new(&[n], data)?, Op::RowSum(a), "row_sum")
    }

    /// Column-wise concatenation of `N×D_i` tensors.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        const OP: &str = "concat_cols";
        if parts.is_empty() {
            return shape_err(OP, "no inputs");
        }
        let mut widths = Vec::with_capacity(parts.len());
        let (n, _) = dims2(OP, self.value(parts[0]))?;
        for &p in parts {
            let (pn, pd) = dims2(OP, self.value(p))?;
            if pn != n {
                return shape_err(OP, format!("row counts {} vs {}", n, pn));
            }
            widths.push(pd);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let value = Tensor::new(&[n, total], out)?;
        self.push(value, Op::Concat(parts.to_vec()), OP)
    }

    /// Columns `start..end` of an `N×D` tensor.
    pub fn slice_cols(&mut self, input: Var, start: usize, end: usize) -> Result<Var> {
        const OP: &str = "slice_cols";
        let x = self.value(input);
        let (n, d) = dims2(OP, x)?;
        if start >= end || end > d {
            return shape_err(OP, format!("range {}..{} of width {}", start, end, d));
        }
        let out = x.data().chunks(d).flat_map(|r| r[start..end].iter().copied()).collect();
        let value = Tensor::new(&[n, end - start], out)?;
        self.push(value, Op::SliceCols { input, start }, OP)
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        self.push(value, Op::Reshape(input), "reshape")
    }

    /// Log-density of tanh-squashed diagonal Gaussian samples.
    ///
    /// All inputs are `N×A`; the result is `N`. `raw` is the pre-squash
    /// sample; the returned value is the Gaussian log density of `raw` minus
    /// `Σ log(1 − tanh(raw)² + 1e-6)`.
    pub fn gaussian_logprob(&mut self, raw: Var, mean: Var, log_std: Var) -> Result<Var> {
        const OP: &str = "gaussian_logprob";
        let u = self.value(raw);
        let m = self.value(mean);
        let ls = self.value(log_std);
        same_shape(OP, u, m)?;
        same_shape(OP, u, ls)?;
        let (n, a) = dims2(OP, u)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut lp = 0.0f64;
            for j in i * a..(i + 1) * a {
                let uj = u.data()[j] as f64;
                let lsj = ls.data()[j] as f64;
                let z = (uj - m.data()[j] as f64) * (-lsj).exp();
                let t = uj.tanh();
                lp += -0.5 * z * z - lsj - HALF_LN_2PI - (1.0 - t * t + SQUASH_EPS).ln();
            }
            out.push(lp as f32);
        }
        let value = Tensor::new(&[n], out)?;
        self.push(value, Op::GaussianLogProb { raw, mean, log_std }, OP)
    }

    /// `mean((a − b)²)`.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.square(d)?;
        self.mean(sq)
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(TensorError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let inputs = node.op.inputs();
            if inputs.iter().any(|v| v.0 >= idx) {
                return Err(TensorError::Cycle(idx));
            }
            self.backward_node(node, &g, &mut grads);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }

    fn backward_node(&self, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                stride,
            } => {
                let x = val(*input);
                let w = val(*kernel);
                let [n, c, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
                let [f, _, k, _] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
                let geom = ConvGeom::new(c, h, wd, k, *stride);
                let (rows, ncols) = (geom.col_rows(), geom.col_cols());
                let in_sz = c * h * wd;
                let mut cols = vec![0.0; rows * ncols];
                if rg(*bias) {
                    let gb = grad_slot(grads, *bias, f);
                    for i in 0..n {
                        for (fi, row) in g[i * f * ncols..(i + 1) * f * ncols].chunks(ncols).enumerate() {
                            gb[fi] += row.iter().sum::<f32>();
                        }
                    }
                }
                if rg(*kernel) {
                    let gw = grad_slot(grads, *kernel, w.numel());
                    for i in 0..n {
                        im2col(&x.data()[i * in_sz..(i + 1) * in_sz], &geom, &mut cols);
                        gemm(
                            Mat::new(&g[i * f * ncols..(i + 1) * f * ncols], f, ncols),
                            Mat::new(&cols, rows, ncols).t(),
                            gw,
                            1.0,
                        );
                    }
                }
                if rg(*input) {
                    let gx = grad_slot(grads, *input, x.numel());
                    for i in 0..n {
                        gemm(
                            Mat::new(w.data(), f, rows).t(),
                            Mat::new(&g[i * f * ncols..(i + 1) * f * ncols], f, ncols),
                            &mut cols,
                            0.0,
                        );
                        col2im_add(&cols, &geom, &mut gx[i * in_sz..(i + 1) * in_sz]);
                    }
                }
            }
            Op::ConvTranspose2d {
                input,
                kernel,
                bias,
                stride,
            } => {
                let x = val(*input);
                let w = val(*kernel);
                let out = &node.value;
                let [n, c, h, wd] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
                let (f, k) = (w.shape()[1], w.shape()[2]);
                let (oh, ow) = (out.shape()[2], out.shape()[3]);
                let geom = ConvGeom::new(f, oh, ow, k, *stride);
                let (rows, ncols) = (geom.col_rows(), geom.col_cols());
                debug_assert_eq!(ncols, h * wd);
                let plane = oh * ow;
                let in_sz = c * h * wd;
                if rg(*bias) {
                    let gb = grad_slot(grads, *bias, f);
                    for i in 0..n {
                        for (fi, p) in g[i * f * plane..(i + 1) * f * plane].chunks(plane).enumerate() {
                            gb[fi] += p.iter().sum::<f32>();
                        }
                    }
                }
                if rg(*kernel) || rg(*input) {
                    let mut dcols = vec![0.0; rows * ncols];
                    for i in 0..n {
                        im2col(&g[i * f * plane..(i + 1) * f * plane], &geom, &mut dcols);
                        if rg(*kernel) {
                            let gw = grad_slot(grads, *kernel, w.numel());
                            gemm(
                                Mat::new(&x.data()[i * in_sz..(i + 1) * in_sz], c, ncols),
                                Mat::new(&dcols, rows, ncols).t(),
                                gw,
                                1.0,
                            );
                        }
                        if rg(*input) {
                            let gx = grad_slot(grads, *input, x.numel());
                            gemm(
                                Mat::new(w.data(), c, rows),
                                Mat::new(&dcols, rows, ncols),
                                &mut gx[i * in_sz..(i + 1) * in_sz],
                                1.0,
                            );
                        }
                    }
                }
            }
            Op::Dense { input, weight, bias } => {
                let x = val(*input);
                let w = val(*weight);
                let (n, din) = (x.shape()[0], x.shape()[1]);
                let dout = w.shape()[1];
                if rg(*bias) {
                    let gb = grad_slot(grads, *bias, dout);
                    for row in g.chunks(dout) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                }
                if rg(*weight) {
                    let gw = grad_slot(grads, *weight, din * dout);
                    gemm(Mat::new(x.data(), n, din).t(), Mat::new(g, n, dout), gw, 1.0);
                }
                if rg(*input) {
                    let gx = grad_slot(grads, *input, n * din);
                    gemm(Mat::new(g, n, dout), Mat::new(w.data(), din, dout).t(), gx, 1.0);
                }
            }
            Op::LayerNorm {
                input,
                gain,
                shift,
                xhat,
                inv_std,
            } => {
                let gain_v = val(*gain).data();
                let d = gain_v.len();
                let n = inv_std.len();
                if rg(*shift) {
                    let gs = grad_slot(grads, *shift, d);
                    for row in g.chunks(d) {
                        gs.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                }
                if rg(*gain) {
                    let gg = grad_slot(grads, *gain, d);
                    for (row, xr) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            gg[j] += row[j] * xr[j];
                        }
                    }
                }
                if rg(*input) {
                    let gx = grad_slot(grads, *input, n * d);
                    for i in 0..n {
                        let gr = &g[i * d..(i + 1) * d];
                        let xr = &xhat[i * d..(i + 1) * d];
                        let dxh: Vec<f64> = (0..d).map(|j| gr[j] as f64 * gain_v[j] as f64).collect();
                        let s1: f64 = dxh.iter().sum();
                        let s2: f64 = dxh.iter().zip(xr).map(|(a, &b)| a * b as f64).sum();
                        let is = inv_std[i] as f64;
                        for j in 0..d {
                            let v = is / d as f64 * (d as f64 * dxh[j] - s1 - xr[j] as f64 * s2);
                            gx[i * d + j] += v as f32;
                        }
                    }
                }
            }
            Op::Relu(a) => {
                if rg(*a) {
                    let x = val(*a).data();
                    let gx = grad_slot(grads, *a, x.len());
                    for ((o, &xv), &gv) in gx.iter_mut().zip(x).zip(g) {
                        if xv > 0.0 {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Tanh(a) | Op::Exp(a) => {
                if rg(*a) {
                    let y = node.value.data();
                    let is_tanh = matches!(node.op, Op::Tanh(_));
                    let gx = grad_slot(grads, *a, y.len());
                    for ((o, &yv), &gv) in gx.iter_mut().zip(y).zip(g) {
                        *o += if is_tanh { gv * (1.0 - yv * yv) } else { gv * yv };
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if rg(*a) {
                    let ga = grad_slot(grads, *a, g.len());
                    ga.iter_mut().zip(g).for_each(|(o, v)| *o += v);
                }
                if rg(*b) {
                    let gb = grad_slot(grads, *b, g.len());
                    gb.iter_mut().zip(g).for_each(|(o, v)| *o += sign * v);
                }
            }
            Op::Mul(a, b) => {
                if rg(*a) {
                    let bv = val(*b).data();
                    let ga = grad_slot(grads, *a, g.len());
                    for ((o, &gv), &y) in ga.iter_mut().zip(g).zip(bv) {
                        *o += gv * y;
                    }
                }
                if rg(*b) {
                    let av = val(*a).data();
                    let gb = grad_slot(grads, *b, g.len());
                    for ((o, &gv), &x) in gb.iter_mut().zip(g).zip(av) {
                        *o += gv * x;
                    }
                }
            }
            Op::Minimum(a, b) => {
                let av = val(*a).data();
                let bv = val(*b).data();
                if rg(*a) {
                    let ga = grad_slot(grads, *a, g.len());
                    for i in 0..g.len() {
                        if bv[i] >= av[i] {
                            ga[i] += g[i];
                        }
                    }
                }
                if rg(*b) {
                    let gb = grad_slot(grads, *b, g.len());
                    for i in 0..g.len() {
                        if bv[i] < av[i] {
                            gb[i] += g[i];
                        }
                    }
                }
            }
            Op::Affine { input, scale } => {
                if rg(*input) {
                    let d = scale.len();
                    let gx = grad_slot(grads, *input, g.len());
                    for (orow, grow) in gx.chunks_mut(d).zip(g.chunks(d)) {
                        for j in 0..d {
                            orow[j] += grow[j] * scale[j];
                        }
                    }
                }
            }
            Op::Sum(a) | Op::Mean(a) => {
                if rg(*a) {
                    let len = val(*a).numel();
                    let v = if matches!(node.op, Op::Mean(_)) {
                        g[0] / len as f32
                    } else {
                        g[0]
                    };
                    grad_slot(grads, *a, len).iter_mut().for_each(|o| *o += v);
                }
            }
            Op::RowSum(a) => {
                if rg(*a) {
                    let x = val(*a);
                    let d = x.shape()[1];
                    let gx = grad_slot(grads, *a, x.numel());
                    for (row, &gv) in gx.chunks_mut(d).zip(g) {
                        row.iter_mut().for_each(|o| *o += gv);
                    }
                }
            }
            Op::Concat(parts) => {
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let pv = val(p);
                    let w = pv.shape()[1];
                    if rg(p) {
                        let gp = grad_slot(grads, p, pv.numel());
                        for (orow, grow) in gp.chunks_mut(w).zip(g.chunks(total)) {
                            orow.iter_mut()
                                .zip(&grow[offset..offset + w])
                                .for_each(|(o, v)| *o += v);
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols { input, start } => {
                if rg(*input) {
                    let x = val(*input);
                    let d = x.shape()[1];
                    let w = node.value.shape()[1];
                    let gx = grad_slot(grads, *input, x.numel());
                    for (orow, grow) in gx.chunks_mut(d).zip(g.chunks(w)) {
                        orow[*start..*start + w].iter_mut().zip(grow).for_each(|(o, v)| *o += v);
                    }
                }
            }
            Op::Reshape(a) => {
                if rg(*a) {
                    let gx = grad_slot(grads, *a, g.len());
                    gx.iter_mut().zip(g).for_each(|(o, v)| *o += v);
                }
            }
            Op::GaussianLogProb { raw, mean, log_std } => {
                let u = val(*raw).data();
                let m = val(*mean).data();
                let ls = val(*log_std).data();
                let a = val(*raw).shape()[1];
                let len = u.len();
                let mut du = vec![0.0f32; len];
                let mut dm = vec![0.0f32; len];
                let mut dls = vec![0.0f32; len];
                for j in 0..len {
                    let gv = g[j / a] as f64;
                    let inv_std = (-(ls[j] as f64)).exp();
                    let z = (u[j] as f64 - m[j] as f64) * inv_std;
                    let t = (u[j] as f64).tanh();
                    let q = 1.0 - t * t + SQUASH_EPS;
                    du[j] = (gv * (-z * inv_std + 2.0 * t * (1.0 - t * t) / q)) as f32;
                    dm[j] = (gv * z * inv_std) as f32;
                    dls[j] = (gv * (z * z - 1.0)) as f32;
                }
                for (v, d) in [(*raw, du), (*mean, dm), (*log_std, dls)] {
                    if rg(v) {
                        let gx = grad_slot(grads, v, len);
                        gx.iter_mut().zip(&d).for_each(|(o, x)| *o += x);
                    }
                }
            }
        }
    }
}
