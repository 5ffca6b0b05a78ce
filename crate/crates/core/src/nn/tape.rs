//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every op appends a node holding its output value and enough saved state
//! to run its vector-Jacobian product. `backward` replays the tape in reverse
//! and accumulates gradients into leaf nodes; gradients of intermediate nodes
//! are scratch and discarded after the pass.

use super::error::{EngineError, Result};
use super::ops::conv::ConvGeom;
use super::ops::{conv, norm};
use super::tensor::{Element, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub(crate) enum Op<E: Element> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, E),
    /// `x [N, in] * w[out, in]^T + b[out]`
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv {
        x: Var,
        k: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, E),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        saved: norm::Saved<E>,
    },
    Reshape(Var),
    /// `axes[i]` is the source axis of output axis `i`
    Permute {
        x: Var,
        axes: Vec<usize>,
    },
    /// `[N, T, F] -> [N, F]` at step `t`
    SelectStep {
        x: Var,
        t: usize,
    },
    GlobalAvgPool(Var),
    Sum(Var),
    Mean(Var),
    Mse {
        pred: Var,
        target: Var,
    },
    /// column 0 through tanh, column 1 through sigmoid
    PolicyHead(Var),
    /// `(1 - z) * h + z * cand`
    GruBlend {
        z: Var,
        h: Var,
        cand: Var,
    },
}

impl<E: Element> Op<E> {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Linear { .. } => "linear",
            Op::Conv { geom, .. } if geom.rank == 2 => "conv2d",
            Op::Conv { .. } => "conv3d",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::BatchNorm { .. } => "batch_norm",
            Op::Reshape(_) => "reshape",
            Op::Permute { .. } => "permute",
            Op::SelectStep { .. } => "select_step",
            Op::GlobalAvgPool(_) => "global_avg_pool",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::Mse { .. } => "mse_loss",
            Op::PolicyHead(_) => "policy_head",
            Op::GruBlend { .. } => "gru_blend",
        }
    }
}

pub(crate) struct Node<E: Element> {
    pub(crate) value: Tensor<E>,
    pub(crate) op: Op<E>,
    pub(crate) requires_grad: bool,
    pub(crate) param_slot: Option<usize>,
    pub(crate) label: Option<String>,
    grad: Option<Vec<E>>,
}

#[derive(Default)]
pub struct Tape<E: Element = f32> {
    pub(crate) nodes: Vec<Node<E>>,
}

impl<E: Element> Tape<E> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf; its gradient is tracked iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor<E>) -> Var {
        let rg = t.requires_grad();
        self.push_node(t.with_requires_grad(false), Op::Leaf, rg, None)
    }

    /// Records a constant input.
    pub fn input(&mut self, t: Tensor<E>) -> Var {
        self.push_node(t.with_requires_grad(false), Op::Leaf, false, None)
    }

    /// Records a trainable parameter. `slot` identifies it when gradients are
    /// collected with [`Tape::param_grads`].
    pub fn param(&mut self, t: &Tensor<E>, slot: usize) -> Var {
        let value = Tensor::new(t.shape(), t.data().to_vec()).expect("valid tensor");
        self.push_node(value, Op::Leaf, true, Some(slot))
    }

    pub(crate) fn push(&mut self, value: Tensor<E>, op: Op<E>, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_node(value, op, rg, None)
    }

    fn push_node(&mut self, value: Tensor<E>, op: Op<E>, rg: bool, slot: Option<usize>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad: rg,
            param_slot: slot,
            label: None,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Attaches a human-readable name used in diagnostics.
    pub fn set_label(&mut self, v: Var, label: impl Into<String>) {
        self.nodes[v.0].label = Some(label.into());
    }

    pub fn value(&self, v: Var) -> &Tensor<E> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.nodes.len()).map(Var)
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    /// Nodes the op at `v` read from.
    pub fn op_inputs(&self, v: Var) -> Vec<Var> {
        match &self.nodes[v.0].op {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::LeakyRelu(a, _)
            | Op::Reshape(a)
            | Op::GlobalAvgPool(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::PolicyHead(a)
            | Op::SelectStep { x: a, .. }
            | Op::Permute { x: a, .. } => vec![*a],
            Op::Linear { x, w: k, b } | Op::Conv { x, k, b, .. } => {
                let mut v = vec![*x, *k];
                v.extend(*b);
                v
            }
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::Mse { pred, target } => vec![*pred, *target],
            Op::GruBlend { z, h, cand } => vec![*z, *h, *cand],
        }
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[E]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// `(slot, gradient)` for every parameter leaf reached by backward.
    pub fn param_grads(&self) -> impl Iterator<Item = (usize, &[E])> {
        self.nodes
            .iter()
            .filter_map(|n| Some((n.param_slot?, n.grad.as_deref()?)))
    }

    /// Earliest non-leaf node whose output holds NaN or infinity, as
    /// `(node index, description)`.
    pub fn first_non_finite(&self) -> Option<(usize, String)> {
        self.nodes.iter().enumerate().find_map(|(i, n)| {
            if matches!(n.op, Op::Leaf) || n.value.is_finite() {
                return None;
            }
            let desc = match &n.label {
                Some(l) => format!("{} ({})", l, n.op.name()),
                None => n.op.name().to_string(),
            };
            Some((i, desc))
        })
    }

    /// Like [`Tape::first_non_finite`] but only considers labeled nodes, so
    /// the answer names a layer rather than an anonymous intermediate.
    pub fn first_non_finite_labeled(&self) -> Option<(usize, String)> {
        self.nodes.iter().enumerate().find_map(|(i, n)| {
            let label = n.label.as_ref()?;
            (!n.value.is_finite()).then(|| (i, format!("{} ({})", label, n.op.name())))
        })
    }

    /// Populates gradients of all reachable leaves that require them.
    /// Repeated calls accumulate.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(EngineError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<E>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![E::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.node_backward(i, &g, &mut grads);
        }

        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &mut self.nodes[i];
            if !matches!(node.op, Op::Leaf) || !node.requires_grad {
                continue;
            }
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn node_backward(&self, i: usize, g: &[E], grads: &mut [Option<Vec<E>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        let mut acc = GradSink {
            nodes: &self.nodes,
            grads,
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc.add(*a, g);
                acc.add(*b, g);
            }
            Op::Sub(a, b) => {
                acc.add(*a, g);
                acc.with(*b, |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d - g));
            }
            Op::Mul(a, b) => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                acc.with(*a, |d| {
                    for ((d, &g), &b) in d.iter_mut().zip(g).zip(bv) {
                        *d = *d + g * b;
                    }
                });
                acc.with(*b, |d| {
                    for ((d, &g), &a) in d.iter_mut().zip(g).zip(av) {
                        *d = *d + g * a;
                    }
                });
            }
            Op::Scale(a, s) => {
                let s = *s;
                acc.with(*a, |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g * s));
            }
            Op::Linear { x, w, b } => {
                let xv = &self.nodes[x.0].value;
                let wv = &self.nodes[w.0].value;
                let (n, fin) = (xv.shape()[0], xv.shape()[1]);
                let fout = wv.shape()[0];
                // dx[N,in] += g[N,out] * w[out,in]
                acc.with(*x, |d| {
                    E::gemm(n, fout, fin, E::one(), g, fout as isize, 1, wv.data(), fin as isize, 1, E::one(), d, fin as isize, 1)
                });
                // dw[out,in] += g^T[out,N] * x[N,in]
                acc.with(*w, |d| {
                    E::gemm(fout, n, fin, E::one(), g, 1, fout as isize, xv.data(), fin as isize, 1, E::one(), d, fin as isize, 1)
                });
                if let Some(b) = b {
                    acc.with(*b, |d| {
                        for row in g.chunks(fout) {
                            d.iter_mut().zip(row).for_each(|(d, &g)| *d = *d + g);
                        }
                    });
                }
            }
            Op::Conv { x, k, b, geom } => {
                let xv = self.nodes[x.0].value.data();
                let kv = self.nodes[k.0].value.data();
                let want_x = self.nodes[x.0].requires_grad;
                let want_k = self.nodes[k.0].requires_grad;
                let mut dx = want_x.then(|| vec![E::zero(); xv.len()]);
                let mut dk = want_k.then(|| vec![E::zero(); kv.len()]);
                conv::backward(geom, xv, kv, g, dx.as_deref_mut(), dk.as_deref_mut());
                if let Some(dx) = dx {
                    acc.add(*x, &dx);
                }
                if let Some(dk) = dk {
                    acc.add(*k, &dk);
                }
                if let Some(b) = b {
                    let p = geom.out_positions();
                    acc.with(*b, |d| {
                        for chunk in g.chunks(geom.filters * p) {
                            for (f, plane) in chunk.chunks(p).enumerate() {
                                d[f] = d[f] + plane.iter().copied().sum::<E>();
                            }
                        }
                    });
                }
            }
            Op::Sigmoid(a) => acc.with(*a, |d| {
                for ((d, &g), &y) in d.iter_mut().zip(g).zip(out) {
                    *d = *d + g * y * (E::one() - y);
                }
            }),
            Op::Tanh(a) => acc.with(*a, |d| {
                for ((d, &g), &y) in d.iter_mut().zip(g).zip(out) {
                    *d = *d + g * (E::one() - y * y);
                }
            }),
            Op::LeakyRelu(a, alpha) => {
                let xv = self.nodes[a.0].value.data();
                let alpha = *alpha;
                acc.with(*a, |d| {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(xv) {
                        *d = *d + if x >= E::zero() { g } else { g * alpha };
                    }
                })
            }
            Op::BatchNorm { x, gamma, beta, saved } => {
                let shape = self.nodes[x.0].value.shape();
                let gv = self.nodes[gamma.0].value.data();
                let (dx, dgamma, dbeta) = norm::backward(shape, gv, saved, g);
                acc.add(*x, &dx);
                acc.add(*gamma, &dgamma);
                acc.add(*beta, &dbeta);
            }
            Op::Reshape(a) => acc.add(*a, g),
            Op::Permute { x, axes } => {
                let mut inverse = vec![0; axes.len()];
                for (i, &a) in axes.iter().enumerate() {
                    inverse[a] = i;
                }
                let gt = Tensor::new(node.value.shape(), g.to_vec()).expect("grad matches value");
                let back = gt.permute(&inverse).expect("valid inverse permutation");
                acc.add(*x, back.data());
            }
            Op::SelectStep { x, t } => {
                let s = self.nodes[x.0].value.shape();
                let (steps, f) = (s[1], s[2]);
                let t = *t;
                acc.with(*x, |d| {
                    for (row, grow) in d.chunks_mut(steps * f).zip(g.chunks(f)) {
                        let dst = &mut row[t * f..(t + 1) * f];
                        dst.iter_mut().zip(grow).for_each(|(d, &g)| *d = *d + g);
                    }
                });
            }
            Op::GlobalAvgPool(a) => {
                let s = self.nodes[a.0].value.shape();
                let inner: usize = s[2..].iter().product();
                let scale = E::one() / E::from_f64(inner as f64);
                acc.with(*a, |d| {
                    for (plane, &g) in d.chunks_mut(inner).zip(g) {
                        let v = g * scale;
                        plane.iter_mut().for_each(|d| *d = *d + v);
                    }
                });
            }
            Op::Sum(a) => {
                let g0 = g[0];
                acc.with(*a, |d| d.iter_mut().for_each(|d| *d = *d + g0));
            }
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.numel();
                let v = g[0] / E::from_f64(n as f64);
                acc.with(*a, |d| d.iter_mut().for_each(|d| *d = *d + v));
            }
            Op::Mse { pred, target } => {
                let p = self.nodes[pred.0].value.data();
                let t = self.nodes[target.0].value.data();
                let scale = g[0] * E::from_f64(2.0 / p.len() as f64);
                acc.with(*pred, |d| {
                    for ((d, &p), &t) in d.iter_mut().zip(p).zip(t) {
                        *d = *d + scale * (p - t);
                    }
                });
                acc.with(*target, |d| {
                    for ((d, &p), &t) in d.iter_mut().zip(p).zip(t) {
                        *d = *d - scale * (p - t);
                    }
                });
            }
            Op::PolicyHead(a) => acc.with(*a, |d| {
                for ((d, g), y) in d.chunks_mut(2).zip(g.chunks(2)).zip(out.chunks(2)) {
                    d[0] = d[0] + g[0] * (E::one() - y[0] * y[0]);
                    d[1] = d[1] + g[1] * y[1] * (E::one() - y[1]);
                }
            }),
            Op::GruBlend { z, h, cand } => {
                let zv = self.nodes[z.0].value.data();
                let hv = self.nodes[h.0].value.data();
                let cv = self.nodes[cand.0].value.data();
                acc.with(*z, |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * (cv[i] - hv[i]);
                    }
                });
                acc.with(*h, |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * (E::one() - zv[i]);
                    }
                });
                acc.with(*cand, |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * zv[i];
                    }
                });
            }
        }
    }
}

/// Gradient accumulator that skips inputs not requiring gradients.
struct GradSink<'a, E: Element> {
    nodes: &'a [Node<E>],
    grads: &'a mut [Option<Vec<E>>],
}

impl<E: Element> GradSink<'_, E> {
    fn with(&mut self, v: Var, f: impl FnOnce(&mut [E])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let n = self.nodes[v.0].value.numel();
        let buf = self.grads[v.0].get_or_insert_with(|| vec![E::zero(); n]);
        f(buf);
    }

    fn add(&mut self, v: Var, g: &[E]) {
        self.with(v, |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g));
    }
}
