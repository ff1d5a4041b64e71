//! Central finite-difference validation of tape gradients.

use super::graph::record_stack;
use super::tape::Tape;
use crate::error::Result;
use crate::layer::{apply_stack, Stack};
use crate::rng::Prng;
use crate::signal::Signal;

/// Comparison between analytic and numerical derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub failures: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` among
    /// entries that exceed the absolute floor.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub eps: f64,
    pub rel: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            rel: 1e-5,
            abs_floor: 1e-7,
        }
    }
}

fn weighted_loss(out: &Signal, w: &[f64]) -> f64 {
    out.samples().iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Checks every weight, bias and input derivative of
/// `sum(w * stack(x))`, with `w` drawn from `seed`.
///
/// Numerical derivatives run through the fused forward operators, so this
/// also cross-checks the tape against [`apply_stack`].
pub fn check_stack(stack: &Stack, x: &Signal, seed: u64, tol: Tolerance) -> Result<GradCheck> {
    let out_len = apply_stack(x, stack)?
        .last()
        .expect("non-empty")
        .samples()
        .len();
    let mut rng = Prng::new(seed);
    let w: Vec<f64> = (0..out_len).map(|_| rng.uniform(-1.0, 1.0)).collect();

    let mut tape = Tape::new();
    let rec = record_stack(&mut tape, stack, x)?;
    let loss = tape.weighted_sum(rec.output(), w.clone())?;
    let grads = tape.backward(loss)?;

    let eval = |s: &Stack, xx: &Signal| -> Result<f64> {
        Ok(weighted_loss(
            apply_stack(xx, s)?.last().expect("non-empty"),
            &w,
        ))
    };
    let mut report = GradCheck {
        checked: 0,
        failures: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    let mut compare = |analytic: f64, numeric: f64| {
        let abs = (analytic - numeric).abs();
        report.checked += 1;
        report.max_abs_error = report.max_abs_error.max(abs);
        if abs > tol.abs_floor {
            let rel = abs / analytic.abs().max(numeric.abs());
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel > tol.rel {
                report.failures += 1;
            }
        }
    };

    let input_grad = grads
        .node(rec.input)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; x.samples().len()]);
    for (i, &analytic) in input_grad.iter().enumerate() {
        let mut plus = x.samples().to_vec();
        let mut minus = plus.clone();
        plus[i] += tol.eps;
        minus[i] -= tol.eps;
        let lp = eval(stack, &Signal::new(plus, x.channels(), x.sample_rate())?)?;
        let lm = eval(stack, &Signal::new(minus, x.channels(), x.sample_rate())?)?;
        compare(analytic, (lp - lm) / (2.0 * tol.eps));
    }

    for (li, lp) in rec.params.iter().enumerate() {
        if let Some(id) = lp.weights {
            for (j, &analytic) in grads.param(id).iter().enumerate() {
                let numeric = nudge(stack, li, |k, d| k.weights_mut()[j] += d, x, tol.eps, &eval)?;
                compare(analytic, numeric);
            }
        }
        if let Some(id) = lp.bias {
            for (j, &analytic) in grads.param(id).iter().enumerate() {
                let numeric = nudge(
                    stack,
                    li,
                    |k, d| k.bias_mut().expect("bias")[j] += d,
                    x,
                    tol.eps,
                    &eval,
                )?;
                compare(analytic, numeric);
            }
        }
    }
    Ok(report)
}

fn nudge(
    stack: &Stack,
    layer: usize,
    edit: impl Fn(&mut crate::signal::Kernel, f64),
    x: &Signal,
    eps: f64,
    eval: &impl Fn(&Stack, &Signal) -> Result<f64>,
) -> Result<f64> {
    let mut plus = stack.clone();
    edit(
        plus.layers_mut()[layer].kernel.as_mut().expect("kernel"),
        eps,
    );
    let mut minus = stack.clone();
    edit(
        minus.layers_mut()[layer].kernel.as_mut().expect("kernel"),
        -eps,
    );
    Ok((eval(&plus, x)? - eval(&minus, x)?) / (2.0 * eps))
}

/// Layer flavours cycled through by [`random_case`].
pub const CASE_KINDS: usize = 7;

/// A small random stack and input. The first layer's kind is
/// `index % CASE_KINDS`; a second random layer follows on odd indices.
pub fn random_case(index: usize, seed: u64) -> Result<(Stack, Signal)> {
    use crate::layer::{Activation, LayerSpec, StackSpec};
    use crate::ops::InterpMode;

    let mut rng = Prng::new(crate::rng::derive_seed(seed, index as u64));
    let mut pick = |lo: usize, hi: usize| lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize;

    let layer = |kind: usize, pick: &mut dyn FnMut(usize, usize) -> usize| {
        let spec = match kind {
            0 => LayerSpec::transposed(pick(1, 5), pick(1, 4)),
            1 => LayerSpec::plain_conv(pick(1, 4), pick(1, 3)),
            2 => LayerSpec::nearest(pick(2, 3)),
            3 => LayerSpec::linear(pick(2, 4)),
            4 => LayerSpec::interp_plus_conv(InterpMode::Nearest, pick(2, 3), pick(1, 4)),
            5 => LayerSpec::interp_plus_conv(InterpMode::Linear, pick(2, 3), pick(1, 4)),
            _ => LayerSpec::subpixel(pick(2, 3), pick(1, 3)),
        };
        let spec = if spec.has_kernel() {
            let spec = spec.with_channels(pick(1, 3));
            if pick(0, 1) == 1 {
                spec.with_bias(None)
            } else {
                spec
            }
        } else {
            spec
        };
        if pick(0, 2) == 0 {
            spec.with_activation(Activation::Relu)
        } else {
            spec
        }
    };

    let mut layers = vec![layer(index % CASE_KINDS, &mut pick)];
    if index % 2 == 1 {
        let k = pick(0, CASE_KINDS - 1);
        layers.push(layer(k, &mut pick));
    }
    let in_ch = pick(1, 3);
    let len = pick(6, 12);
    // A rate divisible by every stride keeps rate bookkeeping exact.
    let rate = 3600;
    let spec = StackSpec {
        input_channels: in_ch,
        ..StackSpec::new(rate, seed ^ index as u64, layers)
    };
    let stack = Stack::build(spec)?;
    let mut rows = Vec::with_capacity(in_ch);
    for _ in 0..in_ch {
        rows.push(
            (0..len)
                .map(|_| pick(0, 2000) as f64 / 1000.0 - 1.0)
                .collect(),
        );
    }
    Ok((stack, Signal::from_channels(rows, rate)?))
}
