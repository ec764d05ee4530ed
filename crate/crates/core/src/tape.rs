//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and enough
//! context to run its backward rule. Nodes are appended in evaluation order,
//! so walking the tape backwards from the loss is a valid reverse
//! topological order and visits each node once.

use std::rc::Rc;

use crate::error::{ensure, Result};
use crate::ops::conv::{conv2d_backward, conv2d_forward, ConvSpec};
use crate::ops::elementwise::{self, gelu, gelu_grad, reduce_to, relu, sigmoid};
use crate::ops::layout::{self, invert_perm, Windows};
use crate::ops::matmul::{matmul_backward, matmul_ex};
use crate::ops::pool::{max_pool2d, max_pool2d_backward};
use crate::ops::resize::ResizePlan;
use crate::ops::softmax::{softmax_last, softmax_last_backward};
use crate::param::{ParamId, ParamStore};
use crate::tensor::{Shape, Tensor};
use crate::wavelet::{dwt2_packed, idwt2_packed};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
    },
    MatMul {
        a: Var,
        ta: bool,
        b: Var,
        tb: bool,
    },
    Softmax(Var),
    Reshape(Var),
    Permute(Var, [usize; 4]),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    Gelu(Var),
    Relu(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Resize {
        x: Var,
        plan: Rc<ResizePlan>,
    },
    PadReplicate(Var),
    Crop(Var),
    PixelShuffle(Var, usize),
    WindowPartition(Var, Windows),
    WindowMerge(Var, Windows),
    Dwt(Var),
    Sum(Var),
    L1 {
        pred: Var,
        target: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A recording of one forward evaluation.
///
/// A tape borrows the [`ParamStore`] it reads weights from; each parameter
/// enters the graph once no matter how often it is used.
pub struct Tape<'s> {
    store: Option<&'s ParamStore>,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'s> Tape<'s> {
    pub fn new() -> Self {
        Tape {
            store: None,
            nodes: Vec::new(),
            param_vars: Vec::new(),
        }
    }

    pub fn with_params(store: &'s ParamStore) -> Self {
        Tape {
            store: Some(store),
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A value that gradients are not tracked for.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf whose gradient is wanted.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(id.0).copied().flatten() {
            return v;
        }
        let store = self.store.expect("tape was created without a parameter store");
        let v = self.push(store.value(id).clone(), Op::Param, true);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let bias = b.map(|b| self.value(b));
        let y = conv2d_forward(self.value(x), self.value(w), bias, spec)?;
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(y, Op::Conv { x, w, b, spec }, rg))
    }

    /// `op(a) · op(b)` over the trailing two axes.
    pub fn matmul_ex(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var> {
        let y = matmul_ex(self.value(a), ta, self.value(b), tb)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(y, Op::MatMul { a, ta, b, tb }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_ex(a, false, b, false)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let y = softmax_last(self.value(x));
        let rg = self.rg(&[x]);
        self.push(y, Op::Softmax(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Shape>) -> Result<Var> {
        let y = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Reshape(x), rg))
    }

    pub fn permute(&mut self, x: Var, perm: [usize; 4]) -> Result<Var> {
        let y = layout::permute(self.value(x), perm)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Permute(x, perm), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = elementwise::add(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(y, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = elementwise::mul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(y, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, k: f32) -> Var {
        let y = self.value(x).map(|v| v * k);
        let rg = self.rg(&[x]);
        self.push(y, Op::Scale(x, k), rg)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(gelu);
        let rg = self.rg(&[x]);
        self.push(y, Op::Gelu(x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(relu);
        let rg = self.rg(&[x]);
        self.push(y, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).map(sigmoid);
        let rg = self.rg(&[x]);
        self.push(y, Op::Sigmoid(x), rg)
    }

    pub fn concat_channels(&mut self, xs: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor> = xs.iter().map(|&v| self.value(v)).collect();
        let y = layout::concat_channels(&vals)?;
        let rg = self.rg(xs);
        Ok(self.push(y, Op::Concat(xs.to_vec()), rg))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let y = layout::slice_channels(self.value(x), start, len)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Slice { x, start }, rg))
    }

    /// Split along channels into `parts` equal pieces.
    pub fn chunk_channels(&mut self, x: Var, parts: usize) -> Result<Vec<Var>> {
        let c = self.shape(x).c();
        ensure!(parts >= 1 && c % parts == 0, "cannot split {c} channels into {parts}");
        let len = c / parts;
        (0..parts).map(|i| self.slice_channels(x, i * len, len)).collect()
    }

    pub fn max_pool2d(&mut self, x: Var, kernel: usize, stride: usize) -> Result<Var> {
        let (y, argmax) = max_pool2d(self.value(x), kernel, stride)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::MaxPool { x, argmax }, rg))
    }

    pub fn resize(&mut self, x: Var, plan: Rc<ResizePlan>) -> Result<Var> {
        let y = plan.apply(self.value(x))?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Resize { x, plan }, rg))
    }

    pub fn pad_replicate(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let y = layout::pad_replicate(self.value(x), out_h, out_w)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::PadReplicate(x), rg))
    }

    pub fn crop(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let y = layout::crop(self.value(x), h, w)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Crop(x), rg))
    }

    pub fn pixel_shuffle(&mut self, x: Var, s: usize) -> Result<Var> {
        let y = layout::pixel_shuffle(self.value(x), s)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::PixelShuffle(x, s), rg))
    }

    pub fn window_partition(&mut self, x: Var, windows: Windows) -> Result<Var> {
        let y = windows.partition(self.value(x))?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::WindowPartition(x, windows), rg))
    }

    pub fn window_merge(&mut self, x: Var, windows: Windows, image: Shape) -> Result<Var> {
        let y = windows.merge(self.value(x), image)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::WindowMerge(x, windows), rg))
    }

    /// One Haar level, returned as `[LL, LH, HL, HH]`.
    pub fn dwt2(&mut self, x: Var) -> Result<[Var; 4]> {
        let packed = dwt2_packed(self.value(x))?;
        let rg = self.rg(&[x]);
        let p = self.push(packed, Op::Dwt(x), rg);
        let bands = self.chunk_channels(p, 4)?;
        Ok([bands[0], bands[1], bands[2], bands[3]])
    }

    /// Sum of all elements as a `(1, 1, 1, 1)` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s as f32), Op::Sum(x), rg)
    }

    /// Mean absolute error against a fixed target.
    pub fn l1_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let p = self.value(pred);
        ensure!(
            p.shape() == target.shape(),
            "l1 loss shape mismatch: {} vs {}",
            p.shape(),
            target.shape()
        );
        let loss = crate::train::loss::l1(p, target)?;
        let rg = self.rg(&[pred]);
        Ok(self.push(
            Tensor::scalar(loss as f32),
            Op::L1 {
                pred,
                target: target.clone(),
            },
            rg,
        ))
    }

    /// Back-propagate from `root`, seeding it with ones (for a scalar root,
    /// the usual `d root / d root = 1`).
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let seed = Tensor::ones(self.shape(root));
        self.backward_with(root, seed)
    }

    pub fn backward_with(&self, root: Var, seed: Tensor) -> Result<Gradients> {
        ensure!(
            seed.shape() == self.shape(root),
            "seed gradient {} does not match root {}",
            seed.shape(),
            self.shape(root)
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed);
        let mut visited = 0;
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            let is_leaf = matches!(node.op, Op::Leaf | Op::Param);
            let Some(g) = (if is_leaf { grads[i].clone() } else { grads[i].take() }) else {
                continue;
            };
            visited += 1;
            self.backprop_node(node, &g, &mut grads)?;
        }
        let params = self
            .param_vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (ParamId(i), v.0)))
            .collect();
        Ok(Gradients {
            grads,
            params,
            visited,
        })
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |v: Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            debug_assert_eq!(t.shape(), self.shape(v), "gradient shape for node {}", v.0);
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::Conv { x, w, b, spec } => {
                let need_dx = self.nodes[x.0].requires_grad;
                let cg = conv2d_backward(self.value(*x), self.value(*w), b.is_some(), *spec, g, need_dx)?;
                if let Some(dx) = cg.dx {
                    acc(*x, dx);
                }
                acc(*w, cg.dweight);
                if let (Some(b), Some(db)) = (b, cg.dbias) {
                    acc(*b, db.reshape(self.shape(*b))?);
                }
            }
            Op::MatMul { a, ta, b, tb } => {
                let (da, db) = matmul_backward(
                    self.value(*a),
                    *ta,
                    self.value(*b),
                    *tb,
                    g,
                    self.nodes[a.0].requires_grad,
                    self.nodes[b.0].requires_grad,
                )?;
                if let Some(da) = da {
                    acc(*a, da);
                }
                if let Some(db) = db {
                    acc(*b, db);
                }
            }
            Op::Softmax(x) => acc(*x, softmax_last_backward(&node.value, g)),
            Op::Reshape(x) => acc(*x, g.clone().reshape(self.shape(*x))?),
            Op::Permute(x, perm) => acc(*x, layout::permute(g, invert_perm(*perm))?),
            Op::Add(a, b) => {
                acc(*a, reduce_to(g, self.shape(*a)));
                acc(*b, reduce_to(g, self.shape(*b)));
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    acc(*a, elementwise::mul_backward(g, self.value(*b), self.shape(*a))?);
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, elementwise::mul_backward(g, self.value(*a), self.shape(*b))?);
                }
            }
            Op::Scale(x, k) => acc(*x, g.map(|v| v * k)),
            Op::Gelu(x) => acc(*x, self.value(*x).zip_map(g, |v, d| gelu_grad(v) * d)?),
            Op::Relu(x) => acc(*x, self.value(*x).zip_map(g, |v, d| if v > 0.0 { d } else { 0.0 })?),
            Op::Sigmoid(x) => acc(*x, node.value.zip_map(g, |y, d| d * y * (1.0 - y))?),
            Op::Concat(xs) => {
                let mut start = 0;
                for &x in xs {
                    let len = self.shape(x).c();
                    if self.nodes[x.0].requires_grad {
                        acc(x, layout::slice_channels(g, start, len)?);
                    }
                    start += len;
                }
            }
            Op::Slice { x, start } => acc(*x, layout::unslice_channels(g, self.shape(*x), *start)),
            Op::MaxPool { x, argmax } => acc(*x, max_pool2d_backward(g, argmax, self.shape(*x))),
            Op::Resize { x, plan } => acc(*x, plan.apply_transpose(g)),
            Op::PadReplicate(x) => acc(*x, layout::pad_replicate_backward(g, self.shape(*x))),
            Op::Crop(x) => acc(*x, layout::crop_backward(g, self.shape(*x))),
            Op::PixelShuffle(x, s) => acc(*x, layout::pixel_unshuffle(g, *s)?),
            Op::WindowPartition(x, w) => acc(*x, w.merge(g, self.shape(*x))?),
            Op::WindowMerge(x, w) => acc(*x, w.partition(g)?),
            Op::Dwt(x) => acc(*x, idwt2_packed(g)?),
            Op::Sum(x) => acc(*x, Tensor::full(self.shape(*x), g.data()[0])),
            Op::L1 { pred, target } => {
                let p = self.value(*pred);
                let scale = g.data()[0] / p.numel() as f32;
                acc(*pred, p.zip_map(target, |a, b| sign(a - b) * scale)?);
            }
        }
        Ok(())
    }
}

/// `sign(0) = 0`.
fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Result of one backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, usize)>,
    visited: usize,
}

impl Gradients {
    /// Gradient with respect to a node, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradients of every parameter used on the tape.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, Option<&Tensor>)> + '_ {
        self.params.iter().map(|&(id, i)| (id, self.grads[i].as_ref()))
    }

    /// Number of nodes whose backward rule ran.
    pub fn visited(&self) -> usize {
        self.visited
    }

    /// Add the parameter gradients into the store's `grad` slots.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (id, g) in self.params() {
            if let Some(g) = g {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}
