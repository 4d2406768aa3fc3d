//! Reverse-mode automatic differentiation on a flat tape.
//!
//! The rendering network is small enough that a straightforward arena of
//! nodes beats a general graph framework: ops append nodes, `backward`
//! walks the arena in reverse, and the caller reads gradients off the
//! leaves. Ops are generic over [`Scalar`] so the same graph code runs in
//! `f32` for training and in `f64` for finite-difference checks.
//!
//! Reduction order is fixed: every kernel accumulates sequentially in
//! row-major element order, never in thread- or hash-dependent order, so
//! forward values and gradients are bit-stable across runs.

mod kernels;

use crate::error::{Error, Result};

/// Floating-point element type for tape tensors.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + std::fmt::Debug
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn from_f32(v: f32) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn from_f32(v: f32) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Logical layout of a tape tensor: either a channel-major image stack
/// `(c, h, w)` or a flat vector.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Shape {
    Chw { c: usize, h: usize, w: usize },
    Flat { n: usize },
}

impl Shape {
    pub fn chw(c: usize, h: usize, w: usize) -> Self {
        Shape::Chw { c, h, w }
    }

    pub fn flat(n: usize) -> Self {
        Shape::Flat { n }
    }

    pub fn numel(&self) -> usize {
        match *self {
            Shape::Chw { c, h, w } => c * h * w,
            Shape::Flat { n } => n,
        }
    }

    /// The `(c, h, w)` dimensions, if this is an image shape.
    pub fn as_chw(&self) -> Option<(usize, usize, usize)> {
        match *self {
            Shape::Chw { c, h, w } => Some((c, h, w)),
            Shape::Flat { .. } => None,
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Chw { c, h, w } => write!(f, "({c}, {h}, {w})"),
            Shape::Flat { n } => write!(f, "({n})"),
        }
    }
}

/// A plain owned tensor, used for parameter storage outside any tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "tensor construction",
                format!("{} elements for shape {shape}", shape.numel()),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.numel()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Element-wise numeric cast through `f64`.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

/// Handle to a node on a [`Tape`]. Only valid for the tape that
/// created it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum OpRecord<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        c_in: usize,
        c_out: usize,
        k: usize,
    },
    Elu(Var),
    Sigmoid(Var),
    Abs(Var),
    Ln(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddConst(Var),
    ConcatChannels(Vec<Var>),
    AvgPool2(Var),
    BilinearResize(Var),
    MeanAll(Var),
}

struct Node<T> {
    shape: Shape,
    data: Vec<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: OpRecord<T>,
}

/// Recorded computation: an append-only arena of nodes in topological
/// order (every op refers only to earlier nodes).
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 >= self.nodes.len() {
            return Err(Error::IndexOutOfRange {
                what: "tape".into(),
                index: v.0,
                len: self.nodes.len(),
            });
        }
        Ok(())
    }

    fn push(&mut self, shape: Shape, data: Vec<T>, requires_grad: bool, op: OpRecord<T>) -> Result<Var> {
        // In debug builds every op output is scanned so a stray NaN or
        // infinity surfaces as an error at the op that produced it
        // instead of three modules later.
        if cfg!(debug_assertions) && !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value in {} output",
                op_name(&op)
            )));
        }
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Adds an input node holding `data`.
    pub fn leaf(&mut self, shape: Shape, data: Vec<T>, requires_grad: bool) -> Result<Var> {
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "tape leaf",
                format!("{} elements for shape {shape}", shape.numel()),
                format!("{} elements", data.len()),
            ));
        }
        self.push(shape, data, requires_grad, OpRecord::Leaf)
    }

    /// Adds a trainable leaf from an owned tensor.
    pub fn param(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.leaf(t.shape(), t.data().to_vec(), true)
    }

    /// Adds a non-trainable leaf from an owned tensor.
    pub fn constant(&mut self, t: &Tensor<T>) -> Result<Var> {
        self.leaf(t.shape(), t.data().to_vec(), false)
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].data
    }

    /// The value of a single-element node.
    pub fn scalar_value(&self, v: Var) -> Result<T> {
        let node = &self.nodes[v.0];
        if node.shape.numel() != 1 {
            return Err(Error::shape(
                "scalar read",
                "1 element".to_string(),
                node.shape.to_string(),
            ));
        }
        Ok(node.data[0])
    }

    /// Accumulated gradient of a node, present once `backward` has run
    /// through it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Clears all accumulated gradients.
    pub fn reset_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn chw(&self, v: Var, op: &str) -> Result<(usize, usize, usize)> {
        self.nodes[v.0].shape.as_chw().ok_or_else(|| {
            Error::shape(
                op.to_string(),
                "(c, h, w) image".to_string(),
                self.nodes[v.0].shape.to_string(),
            )
        })
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<Shape> {
        let (sa, sb) = (self.nodes[a.0].shape, self.nodes[b.0].shape);
        if sa != sb {
            return Err(Error::shape(op.to_string(), sa.to_string(), sb.to_string()));
        }
        Ok(sa)
    }

    /// Same-size convolution of `x: (c_in, h, w)` with `w_var` holding
    /// `(c_out, c_in, k, k)` weights flat and `b` holding `c_out`
    /// biases. Supported kernels are 1x1 and 3x3.
    pub fn conv2d(&mut self, x: Var, w_var: Var, b: Var, c_out: usize, k: usize) -> Result<Var> {
        self.check(x)?;
        self.check(w_var)?;
        self.check(b)?;
        if k != 1 && k != 3 {
            return Err(Error::validation(format!(
                "conv2d supports 1x1 and 3x3 kernels, got {k}x{k}"
            )));
        }
        if c_out == 0 {
            return Err(Error::validation("conv2d needs c_out >= 1"));
        }
        let (c_in, h, w) = self.chw(x, "conv2d input")?;
        let expect_w = c_out * c_in * k * k;
        if self.nodes[w_var.0].shape.numel() != expect_w {
            return Err(Error::shape(
                "conv2d weight",
                format!("{expect_w} elements ({c_out}, {c_in}, {k}, {k})"),
                self.nodes[w_var.0].shape.to_string(),
            ));
        }
        if self.nodes[b.0].shape.numel() != c_out {
            return Err(Error::shape(
                "conv2d bias",
                format!("{c_out} elements"),
                self.nodes[b.0].shape.to_string(),
            ));
        }
        let data = kernels::conv2d_forward(
            &self.nodes[x.0].data,
            &self.nodes[w_var.0].data,
            &self.nodes[b.0].data,
            c_in,
            c_out,
            h,
            w,
            k,
        );
        let rg = self.nodes[x.0].requires_grad
            || self.nodes[w_var.0].requires_grad
            || self.nodes[b.0].requires_grad;
        self.push(
            Shape::chw(c_out, h, w),
            data,
            rg,
            OpRecord::Conv2d {
                x,
                w: w_var,
                b,
                c_in,
                c_out,
                k,
            },
        )
    }

    fn unary<F: Fn(T) -> T>(&mut self, x: Var, f: F, op: OpRecord<T>) -> Result<Var> {
        self.check(x)?;
        let data: Vec<T> = self.nodes[x.0].data.iter().map(|&v| f(v)).collect();
        let rg = self.nodes[x.0].requires_grad;
        self.push(self.nodes[x.0].shape, data, rg, op)
    }

    /// Exponential linear unit: `x` for `x > 0`, `exp(x) - 1` otherwise.
    pub fn elu(&mut self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |v| if v > T::zero() { v } else { v.exp() - T::one() },
            OpRecord::Elu(x),
        )
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(
            x,
            |v| T::one() / (T::one() + (-v).exp()),
            OpRecord::Sigmoid(x),
        )
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.abs(), OpRecord::Abs(x))
    }

    /// Natural logarithm. The input must be strictly positive.
    pub fn ln(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        if let Some(bad) = self.nodes[x.0].data.iter().find(|v| **v <= T::zero()) {
            return Err(Error::Numerical(format!(
                "ln requires positive inputs, got {bad:?}"
            )));
        }
        self.unary(x, |v| v.ln(), OpRecord::Ln(x))
    }

    fn binary<F: Fn(T, T) -> T>(&mut self, a: Var, b: Var, f: F, name: &str, op: OpRecord<T>) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let shape = self.same_shape(a, b, name)?;
        let data: Vec<T> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        self.push(shape, data, rg, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, "add", OpRecord::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, "sub", OpRecord::Sub(a, b))
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, "mul", OpRecord::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        self.unary(x, |v| v * s, OpRecord::Scale(x, s))
    }

    pub fn add_const(&mut self, x: Var, s: T) -> Result<Var> {
        self.unary(x, |v| v + s, OpRecord::AddConst(x))
    }

    /// Stacks image tensors along the channel axis. All inputs must
    /// share the same `(h, w)`.
    pub fn concat_channels(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::validation("concat_channels needs at least one input"));
        }
        for &x in xs {
            self.check(x)?;
        }
        let (_, h, w) = self.chw(xs[0], "concat_channels")?;
        let mut c_total = 0;
        for &x in xs {
            let (c, hx, wx) = self.chw(x, "concat_channels")?;
            if (hx, wx) != (h, w) {
                return Err(Error::shape(
                    "concat_channels",
                    format!("spatial size ({h}, {w})"),
                    format!("({hx}, {wx})"),
                ));
            }
            c_total += c;
        }
        let mut data = Vec::with_capacity(c_total * h * w);
        for &x in xs {
            data.extend_from_slice(&self.nodes[x.0].data);
        }
        let rg = xs.iter().any(|x| self.nodes[x.0].requires_grad);
        self.push(
            Shape::chw(c_total, h, w),
            data,
            rg,
            OpRecord::ConcatChannels(xs.to_vec()),
        )
    }

    /// 2x2 mean pooling with stride 2; odd trailing rows/columns are
    /// dropped. Requires `h >= 2` and `w >= 2`.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let (c, h, w) = self.chw(x, "avg_pool2")?;
        if h < 2 || w < 2 {
            return Err(Error::validation(format!(
                "avg_pool2 needs h, w >= 2, got ({h}, {w})"
            )));
        }
        let data = kernels::avg_pool2_forward(&self.nodes[x.0].data, c, h, w);
        let rg = self.nodes[x.0].requires_grad;
        self.push(Shape::chw(c, h / 2, w / 2), data, rg, OpRecord::AvgPool2(x))
    }

    /// Bilinear resize (no corner alignment) to an arbitrary target size.
    pub fn bilinear_resize(&mut self, x: Var, h_out: usize, w_out: usize) -> Result<Var> {
        self.check(x)?;
        if h_out == 0 || w_out == 0 {
            return Err(Error::validation("bilinear_resize target must be non-empty"));
        }
        let (c, h, w) = self.chw(x, "bilinear_resize")?;
        let data =
            kernels::resize_bilinear_forward(&self.nodes[x.0].data, c, h, w, h_out, w_out);
        let rg = self.nodes[x.0].requires_grad;
        self.push(
            Shape::chw(c, h_out, w_out),
            data,
            rg,
            OpRecord::BilinearResize(x),
        )
    }

    /// Doubles both spatial dimensions bilinearly.
    pub fn bilinear_up2(&mut self, x: Var) -> Result<Var> {
        let (_, h, w) = self.chw(x, "bilinear_up2")?;
        self.bilinear_resize(x, 2 * h, 2 * w)
    }

    /// Mean over all elements, producing a single-element node.
    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let node = &self.nodes[x.0];
        let n = node.shape.numel();
        if n == 0 {
            return Err(Error::validation("mean_all over an empty tensor"));
        }
        let sum: T = node.data.iter().copied().sum();
        let rg = node.requires_grad;
        self.push(
            Shape::flat(1),
            vec![sum / T::from_f64(n as f64)],
            rg,
            OpRecord::MeanAll(x),
        )
    }

    /// Propagates gradients from a scalar `loss` back to every leaf with
    /// `requires_grad`. Leaf gradients accumulate across calls;
    /// [`Tape::reset_grads`] clears them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.check(loss)?;
        if self.nodes[loss.0].shape.numel() != 1 {
            return Err(Error::shape(
                "backward",
                "scalar loss (1 element)".to_string(),
                self.nodes[loss.0].shape.to_string(),
            ));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::validation(
                "backward from a node that does not depend on any trainable leaf",
            ));
        }

        // Adjoints for this pass live outside the nodes so repeated
        // backward calls accumulate only at the leaves.
        let mut adj: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            match op {
                OpRecord::Leaf => {
                    let node = &mut self.nodes[i];
                    let grad = node
                        .grad
                        .get_or_insert_with(|| vec![T::zero(); node.shape.numel()]);
                    for (dst, src) in grad.iter_mut().zip(&g) {
                        *dst += *src;
                    }
                }
                OpRecord::Conv2d {
                    x,
                    w,
                    b,
                    c_in,
                    c_out,
                    k,
                } => {
                    let (_, h, wd) = self.nodes[x.0].shape.as_chw().expect("conv input");
                    // Split the adjoint buffers out so node data can be
                    // borrowed immutably alongside them.
                    let mut gx = self.nodes[x.0]
                        .requires_grad
                        .then(|| vec![T::zero(); self.nodes[x.0].shape.numel()]);
                    let mut gw = self.nodes[w.0]
                        .requires_grad
                        .then(|| vec![T::zero(); self.nodes[w.0].shape.numel()]);
                    let mut gb = self.nodes[b.0]
                        .requires_grad
                        .then(|| vec![T::zero(); self.nodes[b.0].shape.numel()]);
                    kernels::conv2d_backward(
                        &g,
                        &self.nodes[x.0].data,
                        &self.nodes[w.0].data,
                        c_in,
                        c_out,
                        h,
                        wd,
                        k,
                        gx.as_deref_mut(),
                        gw.as_deref_mut(),
                        gb.as_deref_mut(),
                    );
                    if let Some(gx) = gx {
                        accumulate(&mut adj, x, gx);
                    }
                    if let Some(gw) = gw {
                        accumulate(&mut adj, w, gw);
                    }
                    if let Some(gb) = gb {
                        accumulate(&mut adj, b, gb);
                    }
                }
                OpRecord::Elu(x) => {
                    // For x <= 0 the output is exp(x) - 1, so the local
                    // derivative exp(x) is output + 1.
                    let contrib: Vec<T> = self.nodes[x.0]
                        .data
                        .iter()
                        .zip(&self.nodes[i].data)
                        .zip(&g)
                        .map(|((&xv, &yv), &gv)| {
                            if xv > T::zero() {
                                gv
                            } else {
                                gv * (yv + T::one())
                            }
                        })
                        .collect();
                    accumulate(&mut adj, x, contrib);
                }
                OpRecord::Sigmoid(x) => {
                    let contrib: Vec<T> = self.nodes[i]
                        .data
                        .iter()
                        .zip(&g)
                        .map(|(&yv, &gv)| gv * yv * (T::one() - yv))
                        .collect();
                    accumulate(&mut adj, x, contrib);
                }
                OpRecord::Abs(x) => {
                    let contrib: Vec<T> = self.nodes[x.0]
                        .data
                        .iter()
                        .zip(&g)
                        .map(|(&xv, &gv)| {
                            if xv < T::zero() {
                                -gv
                            } else if xv > T::zero() {
                                gv
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    accumulate(&mut adj, x, contrib);
                }
                OpRecord::Ln(x) => {
                    let contrib: Vec<T> = self.nodes[x.0]
                        .data
                        .iter()
                        .zip(&g)
                        .map(|(&xv, &gv)| gv / xv)
                        .collect();
                    accumulate(&mut adj, x, contrib);
                }
                OpRecord::Add(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut adj, a, g.clone());
                    }
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut adj, b, g);
                    }
                }
                OpRecord::Sub(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut adj, a, g.clone());
                    }
                    if self.nodes[b.0].requires_grad {
                        let neg: Vec<T> = g.iter().map(|&v| -v).collect();
                        accumulate(&mut adj, b, neg);
                    }
                }
                OpRecord::Mul(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        let contrib: Vec<T> = g
                            .iter()
                            .zip(&self.nodes[b.0].data)
                            .map(|(&gv, &bv)| gv * bv)
                            .collect();
                        accumulate(&mut adj, a, contrib);
                    }
                    if self.nodes[b.0].requires_grad {
                        let contrib: Vec<T> = g
                            .iter()
                            .zip(&self.nodes[a.0].data)
                            .map(|(&gv, &av)| gv * av)
                            .collect();
                        accumulate(&mut adj, b, contrib);
                    }
                }
                OpRecord::Scale(x, s) => {
                    let contrib: Vec<T> = g.iter().map(|&v| v * s).collect();
                    accumulate(&mut adj, x, contrib);
                }
                OpRecord::AddConst(x) => {
                    accumulate(&mut adj, x, g);
                }
                OpRecord::ConcatChannels(xs) => {
                    let mut offset = 0;
                    for x in xs {
                        let n = self.nodes[x.0].shape.numel();
                        if self.nodes[x.0].requires_grad {
                            accumulate(&mut adj, x, g[offset..offset + n].to_vec());
                        }
                        offset += n;
                    }
                }
                OpRecord::AvgPool2(x) => {
                    let (c, h, w) = self.nodes[x.0].shape.as_chw().expect("pool input");
                    let mut gx = vec![T::zero(); self.nodes[x.0].shape.numel()];
                    kernels::avg_pool2_backward(&g, &mut gx, c, h, w);
                    accumulate(&mut adj, x, gx);
                }
                OpRecord::BilinearResize(x) => {
                    let (c, h, w) = self.nodes[x.0].shape.as_chw().expect("resize input");
                    let (_, ho, wo) = self.nodes[i].shape.as_chw().expect("resize output");
                    let mut gx = vec![T::zero(); self.nodes[x.0].shape.numel()];
                    kernels::resize_bilinear_backward(&g, &mut gx, c, h, w, ho, wo);
                    accumulate(&mut adj, x, gx);
                }
                OpRecord::MeanAll(x) => {
                    let n = self.nodes[x.0].shape.numel();
                    let gv = g[0] / T::from_f64(n as f64);
                    accumulate(&mut adj, x, vec![gv; n]);
                }
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<Vec<T>>], v: Var, contrib: Vec<T>) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (dst, src) in existing.iter_mut().zip(&contrib) {
                *dst += *src;
            }
        }
        slot => *slot = Some(contrib),
    }
}

fn op_name<T>(op: &OpRecord<T>) -> &'static str {
    match op {
        OpRecord::Leaf => "leaf",
        OpRecord::Conv2d { .. } => "conv2d",
        OpRecord::Elu(_) => "elu",
        OpRecord::Sigmoid(_) => "sigmoid",
        OpRecord::Abs(_) => "abs",
        OpRecord::Ln(_) => "ln",
        OpRecord::Add(..) => "add",
        OpRecord::Sub(..) => "sub",
        OpRecord::Mul(..) => "mul",
        OpRecord::Scale(..) => "scale",
        OpRecord::AddConst(_) => "add_const",
        OpRecord::ConcatChannels(_) => "concat_channels",
        OpRecord::AvgPool2(_) => "avg_pool2",
        OpRecord::BilinearResize(_) => "bilinear_resize",
        OpRecord::MeanAll(_) => "mean_all",
    }
}
