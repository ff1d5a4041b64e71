//! Reverse-mode differentiation over the upsampling operators.
//!
//! A [`Tape`] records every operation with its output value. `backward`
//! walks the records in exact reverse order, accumulating gradients for
//! every node and parameter. The input gradient of a strided convolution is
//! computed by calling [`transposed_conv1d`] with the adjoint kernel, and
//! the input gradient of a transposed convolution by calling [`conv1d`].

use crate::error::{Error, Result};
use crate::ops::{
    self, conv1d, interp_kernel, periodic_shuffle, periodic_unshuffle, transposed_conv1d,
    InterpMode,
};
use crate::signal::{Kernel, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Param {
    Weights(Kernel),
    Bias(Vec<f64>),
}

impl Param {
    fn len(&self) -> usize {
        match self {
            Param::Weights(k) => k.weights().len(),
            Param::Bias(b) => b.len(),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv {
        x: NodeId,
        w: ParamId,
        stride: usize,
    },
    Transposed {
        x: NodeId,
        w: ParamId,
        stride: usize,
    },
    Bias {
        x: NodeId,
        b: ParamId,
    },
    Stretch {
        x: NodeId,
        r: usize,
    },
    Nearest {
        x: NodeId,
        r: usize,
    },
    Linear {
        x: NodeId,
        r: usize,
    },
    Shuffle {
        x: NodeId,
        r: usize,
    },
    Relu {
        x: NodeId,
    },
    L1 {
        x: NodeId,
        target: Signal,
    },
    Mean {
        x: NodeId,
    },
    WeightedSum {
        x: NodeId,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Signal,
}

/// Recording of a forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Param>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> &[f64] {
        &self.params[id.0]
    }

    /// Gradient with respect to a node's value, if the loss depends on it.
    pub fn node(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes.get(id.0).and_then(|g| g.as_deref())
    }
}

fn scalar(v: f64) -> Signal {
    Signal::from_parts(vec![v], 1, 1)
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

    fn push(&mut self, op: Op, value: Signal) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.0).ok_or(Error::NotRecorded(id.0))
    }

    pub fn value(&self, id: NodeId) -> &Signal {
        &self.nodes[id.0].value
    }

    /// Overrides the sample rate stored with a node (bookkeeping only).
    pub fn set_rate(&mut self, id: NodeId, rate: u32) {
        let v = &mut self.nodes[id.0].value;
        *v = v.clone().with_rate(rate);
    }

    pub fn input(&mut self, x: Signal) -> NodeId {
        self.push(Op::Leaf, x)
    }

    /// Registers convolution weights; any bias on `k` is dropped (use [`Tape::bias_param`]).
    pub fn kernel_param(&mut self, k: Kernel) -> ParamId {
        self.params.push(Param::Weights(k.without_bias()));
        ParamId(self.params.len() - 1)
    }

    pub fn bias_param(&mut self, b: Vec<f64>) -> ParamId {
        self.params.push(Param::Bias(b));
        ParamId(self.params.len() - 1)
    }

    fn kernel(&self, w: ParamId) -> Result<&Kernel> {
        match self.params.get(w.0) {
            Some(Param::Weights(k)) => Ok(k),
            _ => Err(Error::InvalidParameter(format!(
                "param {} is not a kernel",
                w.0
            ))),
        }
    }

    fn bias_values(&self, b: ParamId) -> Result<&[f64]> {
        match self.params.get(b.0) {
            Some(Param::Bias(v)) => Ok(v),
            _ => Err(Error::InvalidParameter(format!(
                "param {} is not a bias",
                b.0
            ))),
        }
    }

    pub fn conv1d(&mut self, x: NodeId, w: ParamId, stride: usize) -> Result<NodeId> {
        let y = conv1d(&self.node(x)?.value, self.kernel(w)?, stride)?;
        Ok(self.push(Op::Conv { x, w, stride }, y))
    }

    pub fn transposed_conv1d(&mut self, x: NodeId, w: ParamId, stride: usize) -> Result<NodeId> {
        let y = transposed_conv1d(&self.node(x)?.value, self.kernel(w)?, stride)?;
        Ok(self.push(Op::Transposed { x, w, stride }, y))
    }

    pub fn add_bias(&mut self, x: NodeId, b: ParamId) -> Result<NodeId> {
        let bias = self.bias_values(b)?.to_vec();
        let v = &self.node(x)?.value;
        if bias.len() != v.channels() {
            return Err(Error::Shape(format!(
                "{} biases for {} channels",
                bias.len(),
                v.channels()
            )));
        }
        let mut y = v.clone();
        for (c, &bc) in bias.iter().enumerate() {
            y.channel_mut(c).iter_mut().for_each(|s| *s += bc);
        }
        Ok(self.push(Op::Bias { x, b }, y))
    }

    pub fn stretch(&mut self, x: NodeId, r: usize) -> Result<NodeId> {
        let y = ops::stretch(&self.node(x)?.value, r)?;
        Ok(self.push(Op::Stretch { x, r }, y))
    }

    pub fn nearest_upsample(&mut self, x: NodeId, r: usize) -> Result<NodeId> {
        let y = ops::nearest_upsample(&self.node(x)?.value, r)?;
        Ok(self.push(Op::Nearest { x, r }, y))
    }

    pub fn linear_upsample(&mut self, x: NodeId, r: usize) -> Result<NodeId> {
        let y = ops::linear_upsample(&self.node(x)?.value, r)?;
        Ok(self.push(Op::Linear { x, r }, y))
    }

    pub fn periodic_shuffle(&mut self, x: NodeId, r: usize) -> Result<NodeId> {
        let y = periodic_shuffle(&self.node(x)?.value, r)?;
        Ok(self.push(Op::Shuffle { x, r }, y))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let y = ops::relu(&self.node(x)?.value);
        Ok(self.push(Op::Relu { x }, y))
    }

    /// Mean absolute error against a fixed target.
    pub fn l1_loss(&mut self, x: NodeId, target: &Signal) -> Result<NodeId> {
        let v = &self.node(x)?.value;
        if v.channels() != target.channels() || v.time() != target.time() {
            return Err(Error::Shape(format!(
                "L1 target is {}x{}, output is {}x{}",
                target.channels(),
                target.time(),
                v.channels(),
                v.time()
            )));
        }
        let n = v.samples().len().max(1) as f64;
        let loss = v
            .samples()
            .iter()
            .zip(target.samples())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n;
        Ok(self.push(
            Op::L1 {
                x,
                target: target.clone(),
            },
            scalar(loss),
        ))
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let v = &self.node(x)?.value;
        let m = v.samples().iter().sum::<f64>() / v.samples().len().max(1) as f64;
        Ok(self.push(Op::Mean { x }, scalar(m)))
    }

    /// `sum_i weights[i] * x[i]` over the flattened samples.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Vec<f64>) -> Result<NodeId> {
        let v = &self.node(x)?.value;
        if weights.len() != v.samples().len() {
            return Err(Error::Shape(format!(
                "{} weights for {} samples",
                weights.len(),
                v.samples().len()
            )));
        }
        let s = v.samples().iter().zip(&weights).map(|(a, w)| a * w).sum();
        Ok(self.push(Op::WeightedSum { x, weights }, scalar(s)))
    }

    /// Propagates `d loss / d loss = 1` back through every recorded op.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let node = self.node(loss)?;
        if node.value.samples().len() != 1 {
            return Err(Error::NotScalar(loss.0));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut pgrads: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let out = &node.value;
            let g_sig = Signal::from_parts(g.clone(), out.channels(), out.sample_rate());
            match &node.op {
                Op::Leaf => {}
                Op::Conv { x, w, stride } => {
                    let xv = &self.nodes[x.0].value;
                    let k = self.kernel(*w)?;
                    let dx = conv_input_grad(&g_sig, k, *stride, xv.time())?;
                    accumulate(&mut grads[x.0], dx.samples());
                    let dw = &mut pgrads[w.0];
                    for o in 0..k.out_channels() {
                        let go = g_sig.channel(o);
                        for i in 0..k.in_channels() {
                            let xi = xv.channel(i);
                            for l in 0..k.length() {
                                let mut acc = 0.0;
                                for (t, gv) in go.iter().enumerate() {
                                    acc += gv * xi[t * stride + l];
                                }
                                dw[(o * k.in_channels() + i) * k.length() + l] += acc;
                            }
                        }
                    }
                }
                Op::Transposed { x, w, stride } => {
                    let xv = &self.nodes[x.0].value;
                    let k = self.kernel(*w)?;
                    let dx = transposed_input_grad(&g_sig, k, *stride)?;
                    accumulate(&mut grads[x.0], dx.samples());
                    let dw = &mut pgrads[w.0];
                    for o in 0..k.out_channels() {
                        let go = g_sig.channel(o);
                        for i in 0..k.in_channels() {
                            let xi = xv.channel(i);
                            for l in 0..k.length() {
                                let mut acc = 0.0;
                                for (t, xv) in xi.iter().enumerate() {
                                    acc += xv * go[t * stride + l];
                                }
                                dw[(o * k.in_channels() + i) * k.length() + l] += acc;
                            }
                        }
                    }
                }
                Op::Bias { x, b } => {
                    let db = &mut pgrads[b.0];
                    for (c, row) in g_sig.rows().enumerate() {
                        db[c] += row.iter().sum::<f64>();
                    }
                    accumulate(&mut grads[x.0], &g);
                }
                Op::Stretch { x, r } => {
                    let dx: Vec<f64> = g_sig
                        .rows()
                        .flat_map(|row| row.iter().step_by(*r).copied().collect::<Vec<_>>())
                        .collect();
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::Nearest { x, r } => {
                    let dx: Vec<f64> = g.chunks(*r).map(|c| c.iter().sum()).collect();
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::Linear { x, r } => {
                    let xv = &self.nodes[x.0].value;
                    let dx = linear_input_grad(&g_sig, *r, xv.time())?;
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::Shuffle { x, r } => {
                    let dx = periodic_unshuffle(&g_sig, *r)?;
                    accumulate(&mut grads[x.0], dx.samples());
                }
                Op::Relu { x } => {
                    let xv = self.nodes[x.0].value.samples();
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(xv)
                        .map(|(gv, &v)| if v > 0.0 { *gv } else { 0.0 })
                        .collect();
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::L1 { x, target } => {
                    let xv = self.nodes[x.0].value.samples();
                    let n = xv.len().max(1) as f64;
                    let dx: Vec<f64> = xv
                        .iter()
                        .zip(target.samples())
                        .map(|(a, b)| {
                            let d = a - b;
                            let s = if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            g[0] * s / n
                        })
                        .collect();
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::Mean { x } => {
                    let n = self.nodes[x.0].value.samples().len();
                    let dx = vec![g[0] / n.max(1) as f64; n];
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::WeightedSum { x, weights } => {
                    let dx: Vec<f64> = weights.iter().map(|w| g[0] * w).collect();
                    accumulate(&mut grads[x.0], &dx);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            nodes: grads,
            params: pgrads,
        })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
        None => *slot = Some(delta.to_vec()),
    }
}

/// Input gradient of `conv1d(x, k, stride)`: a transposed convolution of the
/// upstream gradient with the adjoint kernel, zero-extended to `input_len`
/// (samples past the last full window receive no gradient).
pub fn conv_input_grad(
    upstream: &Signal,
    k: &Kernel,
    stride: usize,
    input_len: usize,
) -> Result<Signal> {
    let full = transposed_conv1d(upstream, &k.adjoint(), stride)?;
    let have = full.time();
    if have == input_len {
        return Ok(full);
    }
    let mut rows = Vec::with_capacity(full.channels());
    for row in full.rows() {
        let mut r = row.to_vec();
        r.resize(input_len, 0.0);
        rows.push(r);
    }
    Signal::from_channels(rows, full.sample_rate())
}

/// Input gradient of `transposed_conv1d(x, k, stride)`: a strided
/// convolution of the upstream gradient with the adjoint kernel.
pub fn transposed_input_grad(upstream: &Signal, k: &Kernel, stride: usize) -> Result<Signal> {
    conv1d(upstream, &k.adjoint(), stride)
}

fn linear_input_grad(g: &Signal, r: usize, input_len: usize) -> Result<Vec<f64>> {
    let tri = interp_kernel(InterpMode::Linear, r)?;
    let w = tri.weights();
    let mut dx = vec![0.0; g.channels() * input_len];
    for (c, row) in g.rows().enumerate() {
        let d = &mut dx[c * input_len..(c + 1) * input_len];
        for t in 0..input_len {
            d[t] += row[r * t] * w[r - 1];
            for j in 1..r {
                let gv = row[r * t + j];
                d[t] += gv * w[r - 1 - j];
                if t + 1 < input_len {
                    d[t + 1] += gv * w[2 * r - 1 - j];
                }
            }
        }
    }
    Ok(dx)
}
