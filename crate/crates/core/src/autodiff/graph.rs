//! Tape of recorded operations with a reverse sweep.
//!
//! Nodes are appended in evaluation order, so the tape is topologically
//! sorted by construction and the backward pass is a single reverse scan.
//! Parameter nodes are views into one flat parameter vector; `backward`
//! returns the gradient with respect to that whole vector.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param { offset: usize },
    Dense { x: NodeId, w: NodeId, b: Option<NodeId> },
    Activate { x: NodeId, kind: Activation },
    TemporalConv { x: NodeId, kernel: NodeId, bias: Option<NodeId>, kernel_size: usize },
    Concat { parts: Vec<NodeId> },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, factor: f64 },
    Exp { x: NodeId },
    Sum { x: NodeId },
    WeightedSum { x: NodeId, weights: Vec<f64> },
    LogSoftmaxPick { x: NodeId, groups: usize, picks: Vec<usize> },
    GaussianLogDensity { mean: NodeId, log_std: NodeId, sample: Vec<f64> },
    MeanSquaredError { x: NodeId, targets: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single-use computation tape over a flat parameter vector of fixed length.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    param_len: usize,
}

impl Graph {
    pub fn new(param_len: usize) -> Self {
        Self { nodes: Vec::with_capacity(32), param_len }
    }

    pub fn param_len(&self) -> usize {
        self.param_len
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn grad_flag(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// Parameter view `theta[offset..offset + prod(shape)]`.
    pub fn param(&mut self, theta: &[f64], offset: usize, shape: Vec<usize>) -> Result<NodeId> {
        let len: usize = shape.iter().product();
        if offset + len > self.param_len || offset + len > theta.len() {
            return Err(Error::config(format!(
                "parameter view {offset}..{} exceeds parameter vector of length {}",
                offset + len,
                self.param_len.min(theta.len())
            )));
        }
        let value = Tensor::from_parts(shape, theta[offset..offset + len].to_vec());
        Ok(self.push(value, Op::Param { offset }, true))
    }

    /// Affine map `x·W + b` followed by an elementwise activation.
    pub fn forward_dense(&mut self, x: NodeId, w: NodeId, b: NodeId, activation: Activation) -> Result<NodeId> {
        let lin = self.affine(x, w, Some(b))?;
        Ok(self.activate(lin, activation))
    }

    /// Affine map with optional bias. `x` is `[in]` or `[batch, ...]` with the
    /// trailing extents flattening to `in`; `w` is `[in, out]`.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let xv = self.value(x);
        let wv = self.value(w);
        if wv.shape().len() != 2 {
            return Err(Error::config(format!("dense weights must be rank 2, got {:?}", wv.shape())));
        }
        let (n_in, n_out) = (wv.shape()[0], wv.shape()[1]);
        let (batch, feat) = xv.batch_split();
        if feat != n_in {
            return Err(Error::config(format!("dense layer expects {n_in} inputs per sample, got shape {:?}", xv.shape())));
        }
        if let Some(b) = b {
            if self.value(b).len() != n_out {
                return Err(Error::config(format!("bias of length {} does not match {n_out} outputs", self.value(b).len())));
            }
        }
        let xd = xv.data();
        let wd = wv.data();
        let mut out = vec![0.0; batch * n_out];
        for r in 0..batch {
            let row = &mut out[r * n_out..(r + 1) * n_out];
            if let Some(b) = b {
                row.copy_from_slice(self.nodes[b.0].value.data());
            }
            for (i, &xi) in xd[r * n_in..(r + 1) * n_in].iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let wrow = &wd[i * n_out..(i + 1) * n_out];
                for (o, wv) in row.iter_mut().zip(wrow) {
                    *o += xi * wv;
                }
            }
        }
        let shape = if xv.shape().len() <= 1 { vec![n_out] } else { vec![batch, n_out] };
        let rg = self.grad_flag(&[x, w]) || b.is_some_and(|b| self.nodes[b.0].requires_grad);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Dense { x, w, b }, rg))
    }

    pub fn activate(&mut self, x: NodeId, kind: Activation) -> NodeId {
        if kind == Activation::Identity {
            return x;
        }
        let xv = self.value(x);
        let data = match kind {
            Activation::Tanh => xv.data().iter().map(|v| v.tanh()).collect(),
            Activation::Relu => xv.data().iter().map(|v| v.max(0.0)).collect(),
            Activation::Identity => unreachable!(),
        };
        let value = Tensor::from_parts(xv.shape().to_vec(), data);
        let rg = self.grad_flag(&[x]);
        self.push(value, Op::Activate { x, kind }, rg)
    }

    /// Causal 1-D convolution over time with valid padding.
    ///
    /// `x` is `[time, in_ch]` or `[batch, time, in_ch]`, `kernel` is
    /// `[kernel_size, in_ch, out_ch]`. Output step `t` sees inputs `t..t+k`.
    pub fn forward_temporal_conv(&mut self, x: NodeId, kernel: NodeId, kernel_size: usize) -> Result<NodeId> {
        self.temporal_conv(x, kernel, None, kernel_size)
    }

    pub fn temporal_conv(&mut self, x: NodeId, kernel: NodeId, bias: Option<NodeId>, kernel_size: usize) -> Result<NodeId> {
        let xv = self.value(x);
        let kv = self.value(kernel);
        let (batch, time, cin, batched) = match *xv.shape() {
            [t, c] => (1, t, c, false),
            [b, t, c] => (b, t, c, true),
            _ => return Err(Error::config(format!("temporal conv input must be [time, ch] or [batch, time, ch], got {:?}", xv.shape()))),
        };
        if kernel_size == 0 || time < kernel_size {
            return Err(Error::config(format!("time extent {time} is shorter than kernel size {kernel_size}")));
        }
        let cout = match *kv.shape() {
            [k, c, o] if k == kernel_size && c == cin => o,
            _ => return Err(Error::config(format!("kernel shape {:?} does not match [{kernel_size}, {cin}, out]", kv.shape()))),
        };
        if let Some(b) = bias {
            if self.value(b).len() != cout {
                return Err(Error::config("conv bias length does not match output channels"));
            }
        }
        let tout = time - kernel_size + 1;
        let xd = xv.data();
        let kd = kv.data();
        let mut out = vec![0.0; batch * tout * cout];
        for b in 0..batch {
            for t in 0..tout {
                let row = &mut out[(b * tout + t) * cout..(b * tout + t + 1) * cout];
                if let Some(bias) = bias {
                    row.copy_from_slice(self.nodes[bias.0].value.data());
                }
                for j in 0..kernel_size {
                    let xrow = &xd[(b * time + t + j) * cin..(b * time + t + j + 1) * cin];
                    for (c, &xi) in xrow.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        let krow = &kd[(j * cin + c) * cout..(j * cin + c + 1) * cout];
                        for (o, kv) in row.iter_mut().zip(krow) {
                            *o += xi * kv;
                        }
                    }
                }
            }
        }
        let shape = if batched { vec![batch, tout, cout] } else { vec![tout, cout] };
        let rg = self.grad_flag(&[x, kernel]) || bias.is_some_and(|b| self.nodes[b.0].requires_grad);
        Ok(self.push(Tensor::from_parts(shape, out), Op::TemporalConv { x, kernel, bias, kernel_size }, rg))
    }

    /// Concatenates per-sample features of equally batched nodes.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or_else(|| Error::usage("concat of zero nodes"))?;
        let rank1 = self.value(*first).shape().len() <= 1;
        let batch = self.value(*first).batch_split().0;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let v = self.value(*p);
            if (v.shape().len() <= 1) != rank1 || v.batch_split().0 != batch {
                return Err(Error::config("concat parts must share the batch extent"));
            }
            widths.push(v.batch_split().1);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(batch * total);
        for r in 0..batch {
            for (p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        let shape = if rank1 { vec![total] } else { vec![batch, total] };
        let rg = self.grad_flag(parts);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Concat { parts: parts.to_vec() }, rg))
    }

    fn same_shape(&self, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::config(format!("elementwise shape mismatch {:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let value = Tensor::from_parts(self.value(a).shape().to_vec(), data);
        let rg = self.grad_flag(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let value = Tensor::from_parts(self.value(a).shape().to_vec(), data);
        let rg = self.grad_flag(&[a, b]);
        Ok(self.push(value, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v * factor).collect();
        let value = Tensor::from_parts(self.value(x).shape().to_vec(), data);
        let rg = self.grad_flag(&[x]);
        self.push(value, Op::Scale { x, factor }, rg)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let data = self.value(x).data().iter().map(|v| v.exp()).collect();
        let value = Tensor::from_parts(self.value(x).shape().to_vec(), data);
        let rg = self.grad_flag(&[x]);
        self.push(value, Op::Exp { x }, rg)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        let rg = self.grad_flag(&[x]);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// `Σ weights[i]·x[i]`, a scalar.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Vec<f64>) -> Result<NodeId> {
        if weights.len() != self.value(x).len() {
            return Err(Error::config("weighted_sum weight count does not match node size"));
        }
        let s = self.value(x).data().iter().zip(&weights).map(|(a, b)| a * b).sum();
        let rg = self.grad_flag(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum { x, weights }, rg))
    }

    /// Per-sample log-probability of picked classes under grouped softmaxes.
    ///
    /// `x` holds `groups` blocks of logits per sample; `picks` holds
    /// `batch * groups` class indices. The output is `[batch]` with the
    /// log-probabilities summed over groups.
    pub fn log_softmax_pick(&mut self, x: NodeId, groups: usize, picks: Vec<usize>) -> Result<NodeId> {
        let xv = self.value(x);
        let (batch, feat) = xv.batch_split();
        if groups == 0 || feat % groups != 0 {
            return Err(Error::config(format!("{feat} logits cannot split into {groups} groups")));
        }
        let n = feat / groups;
        if picks.len() != batch * groups {
            return Err(Error::config("one pick per sample and group is required"));
        }
        if let Some(p) = picks.iter().find(|&&p| p >= n) {
            return Err(Error::usage(format!("action {p} is outside the {n} available classes")));
        }
        let xd = xv.data();
        let mut out = vec![0.0; batch];
        for r in 0..batch {
            for g in 0..groups {
                let logits = &xd[r * feat + g * n..r * feat + (g + 1) * n];
                out[r] += logits[picks[r * groups + g]] - log_sum_exp(logits);
            }
        }
        let rg = self.grad_flag(&[x]);
        Ok(self.push(Tensor::vector(out), Op::LogSoftmaxPick { x, groups, picks }, rg))
    }

    /// Per-sample diagonal Gaussian log-density of `sample` given `mean`
    /// (`[batch, n]` or `[n]`) and a shared `log_std` (`[n]`).
    pub fn gaussian_log_density(&mut self, mean: NodeId, log_std: NodeId, sample: Vec<f64>) -> Result<NodeId> {
        let mv = self.value(mean);
        let (batch, n) = mv.batch_split();
        if self.value(log_std).len() != n || sample.len() != batch * n {
            return Err(Error::config("gaussian log-density operands do not conform"));
        }
        let ls = self.value(log_std).data();
        let md = mv.data();
        let mut out = vec![0.0; batch];
        for r in 0..batch {
            for i in 0..n {
                let sd = ls[i].exp();
                let u = (sample[r * n + i] - md[r * n + i]) / sd;
                out[r] += -0.5 * u * u - ls[i] - HALF_LN_2PI;
            }
        }
        let rg = self.grad_flag(&[mean, log_std]);
        Ok(self.push(Tensor::vector(out), Op::GaussianLogDensity { mean, log_std, sample }, rg))
    }

    /// Mean of `(x - target)²` over all elements.
    pub fn mean_squared_error(&mut self, x: NodeId, targets: Vec<f64>) -> Result<NodeId> {
        let xv = self.value(x);
        if targets.len() != xv.len() {
            return Err(Error::config("target count does not match prediction count"));
        }
        let n = targets.len() as f64;
        let loss = xv.data().iter().zip(&targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
        let rg = self.grad_flag(&[x]);
        Ok(self.push(Tensor::scalar(loss), Op::MeanSquaredError { x, targets }, rg))
    }

    /// Reverse sweep from a scalar node. Returns the gradient of `loss` with
    /// respect to the full flat parameter vector, freshly zeroed for each call;
    /// parameters that do not feed `loss` get exactly zero.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<f64>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::usage(format!("backward needs a scalar loss, got shape {:?}", self.value(loss).shape())));
        }
        let mut param_grad = vec![0.0; self.param_len];
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param { offset } => {
                    for (acc, v) in param_grad[*offset..*offset + g.len()].iter_mut().zip(&g) {
                        *acc += v;
                    }
                }
                Op::Dense { x, w, b } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let (n_in, n_out) = (wv.shape()[0], wv.shape()[1]);
                    let (batch, _) = xv.batch_split();
                    if self.nodes[w.0].requires_grad {
                        let mut dw = vec![0.0; n_in * n_out];
                        for r in 0..batch {
                            let gr = &g[r * n_out..(r + 1) * n_out];
                            for (i, &xi) in xv.data()[r * n_in..(r + 1) * n_in].iter().enumerate() {
                                if xi == 0.0 {
                                    continue;
                                }
                                for (d, gv) in dw[i * n_out..(i + 1) * n_out].iter_mut().zip(gr) {
                                    *d += xi * gv;
                                }
                            }
                        }
                        accumulate(&mut grads, *w, dw);
                    }
                    if let Some(b) = b {
                        if self.nodes[b.0].requires_grad {
                            let mut db = vec![0.0; n_out];
                            for r in 0..batch {
                                for (d, gv) in db.iter_mut().zip(&g[r * n_out..(r + 1) * n_out]) {
                                    *d += gv;
                                }
                            }
                            accumulate(&mut grads, *b, db);
                        }
                    }
                    if self.nodes[x.0].requires_grad {
                        let wd = wv.data();
                        let mut dx = vec![0.0; batch * n_in];
                        for r in 0..batch {
                            let gr = &g[r * n_out..(r + 1) * n_out];
                            for i in 0..n_in {
                                dx[r * n_in + i] = wd[i * n_out..(i + 1) * n_out].iter().zip(gr).map(|(a, b)| a * b).sum();
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                }
                Op::Activate { x, kind } => {
                    let y = node.value.data();
                    let dx = match kind {
                        Activation::Tanh => g.iter().zip(y).map(|(gv, yv)| gv * (1.0 - yv * yv)).collect(),
                        Activation::Relu => g.iter().zip(y).map(|(gv, yv)| if *yv > 0.0 { *gv } else { 0.0 }).collect(),
                        Activation::Identity => g,
                    };
                    accumulate(&mut grads, *x, dx);
                }
                Op::TemporalConv { x, kernel, bias, kernel_size } => {
                    let xv = self.value(*x);
                    let kd = self.value(*kernel).data();
                    let (batch, time, cin) = match *xv.shape() {
                        [t, c] => (1, t, c),
                        [b, t, c] => (b, t, c),
                        _ => unreachable!(),
                    };
                    let k = *kernel_size;
                    let cout = self.value(*kernel).shape()[2];
                    let tout = time - k + 1;
                    let xd = xv.data();
                    let need_x = self.nodes[x.0].requires_grad;
                    let need_k = self.nodes[kernel.0].requires_grad;
                    let mut dx = if need_x { vec![0.0; xd.len()] } else { Vec::new() };
                    let mut dk = if need_k { vec![0.0; kd.len()] } else { Vec::new() };
                    for b in 0..batch {
                        for t in 0..tout {
                            let gr = &g[(b * tout + t) * cout..(b * tout + t + 1) * cout];
                            for j in 0..k {
                                let base = (b * time + t + j) * cin;
                                for c in 0..cin {
                                    let kr = (j * cin + c) * cout;
                                    if need_x {
                                        dx[base + c] += kd[kr..kr + cout].iter().zip(gr).map(|(a, b)| a * b).sum::<f64>();
                                    }
                                    if need_k {
                                        let xi = xd[base + c];
                                        if xi != 0.0 {
                                            for (d, gv) in dk[kr..kr + cout].iter_mut().zip(gr) {
                                                *d += xi * gv;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if need_k {
                        accumulate(&mut grads, *kernel, dk);
                    }
                    if need_x {
                        accumulate(&mut grads, *x, dx);
                    }
                    if let Some(bias) = bias {
                        if self.nodes[bias.0].requires_grad {
                            let mut db = vec![0.0; cout];
                            for row in g.chunks(cout) {
                                for (d, gv) in db.iter_mut().zip(row) {
                                    *d += gv;
                                }
                            }
                            accumulate(&mut grads, *bias, db);
                        }
                    }
                }
                Op::Concat { parts } => {
                    let batch = node.value.batch_split().0;
                    let widths: Vec<usize> = parts.iter().map(|p| self.value(*p).batch_split().1).collect();
                    let total: usize = widths.iter().sum();
                    let mut start = 0;
                    for (p, &w) in parts.iter().zip(&widths) {
                        if self.nodes[p.0].requires_grad {
                            let mut dp = Vec::with_capacity(batch * w);
                            for r in 0..batch {
                                dp.extend_from_slice(&g[r * total + start..r * total + start + w]);
                            }
                            accumulate(&mut grads, *p, dp);
                        }
                        start += w;
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Mul { a, b } => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    accumulate(&mut grads, *a, g.iter().zip(bv).map(|(x, y)| x * y).collect());
                    accumulate(&mut grads, *b, g.iter().zip(av).map(|(x, y)| x * y).collect());
                }
                Op::Scale { x, factor } => {
                    accumulate(&mut grads, *x, g.iter().map(|v| v * factor).collect());
                }
                Op::Exp { x } => {
                    let y = node.value.data();
                    accumulate(&mut grads, *x, g.iter().zip(y).map(|(a, b)| a * b).collect());
                }
                Op::Sum { x } => {
                    let n = self.value(*x).len();
                    accumulate(&mut grads, *x, vec![g[0]; n]);
                }
                Op::WeightedSum { x, weights } => {
                    accumulate(&mut grads, *x, weights.iter().map(|w| w * g[0]).collect());
                }
                Op::LogSoftmaxPick { x, groups, picks } => {
                    let xv = self.value(*x);
                    let (batch, feat) = xv.batch_split();
                    let n = feat / groups;
                    let mut dx = vec![0.0; batch * feat];
                    for r in 0..batch {
                        for gi in 0..*groups {
                            let lo = r * feat + gi * n;
                            let logits = &xv.data()[lo..lo + n];
                            let lse = log_sum_exp(logits);
                            for a in 0..n {
                                let p = (logits[a] - lse).exp();
                                let ind = if a == picks[r * groups + gi] { 1.0 } else { 0.0 };
                                dx[lo + a] = g[r] * (ind - p);
                            }
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::GaussianLogDensity { mean, log_std, sample } => {
                    let md = self.value(*mean).data();
                    let ls = self.value(*log_std).data();
                    let n = ls.len();
                    let batch = g.len();
                    let mut dm = vec![0.0; batch * n];
                    let mut dl = vec![0.0; n];
                    for r in 0..batch {
                        for i in 0..n {
                            let var = (2.0 * ls[i]).exp();
                            let diff = sample[r * n + i] - md[r * n + i];
                            dm[r * n + i] = g[r] * diff / var;
                            dl[i] += g[r] * (diff * diff / var - 1.0);
                        }
                    }
                    if self.nodes[mean.0].requires_grad {
                        accumulate(&mut grads, *mean, dm);
                    }
                    if self.nodes[log_std.0].requires_grad {
                        accumulate(&mut grads, *log_std, dl);
                    }
                }
                Op::MeanSquaredError { x, targets } => {
                    let xv = self.value(*x).data();
                    let n = targets.len() as f64;
                    let dx = xv.iter().zip(targets).map(|(p, t)| g[0] * 2.0 * (p - t) / n).collect();
                    accumulate(&mut grads, *x, dx);
                }
            }
        }
        Ok(param_grad)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, delta: Vec<f64>) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(delta) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
