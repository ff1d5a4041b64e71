//! Recording whole stacks on a tape, and the spectrum of a critic's input
//! gradient.

use super::tape::{NodeId, ParamId, Tape};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::layer::{Activation, LayerKind, Stack};
use crate::ops::InterpMode;
use crate::signal::Signal;
use crate::spectral::{signal_spectrogram_with, Spectrogram, StftConfig};

/// Parameters registered for one layer; interpolation-only layers have none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerParams {
    pub weights: Option<ParamId>,
    pub bias: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub struct RecordedStack {
    pub input: NodeId,
    /// Node holding each layer's output, in layer order.
    pub outputs: Vec<NodeId>,
    pub params: Vec<LayerParams>,
}

impl RecordedStack {
    pub fn output(&self) -> NodeId {
        self.outputs.last().copied().unwrap_or(self.input)
    }
}

/// Replays `stack` on `tape` starting from a fresh input leaf.
///
/// Values are bit-identical to [`crate::apply_stack`]: biases are added after
/// the convolution sums exactly as the fused operators do.
pub fn record_stack(tape: &mut Tape, stack: &Stack, x: &Signal) -> Result<RecordedStack> {
    if x.sample_rate() != stack.input_rate() {
        return Err(Error::RateMismatch {
            signal: x.sample_rate(),
            expected: stack.input_rate(),
        });
    }
    let input = tape.input(x.clone());
    let mut cur = input;
    let mut outputs = Vec::with_capacity(stack.layers().len());
    let mut params = Vec::with_capacity(stack.layers().len());
    for layer in stack.layers() {
        let s = &layer.spec;
        let mut lp = LayerParams::default();
        let w = match (&layer.kernel, s.has_kernel()) {
            (Some(k), true) => Some(tape.kernel_param(k.clone())),
            (None, true) => {
                return Err(Error::InvalidParameter("layer kernel not realized".into()))
            }
            _ => None,
        };
        lp.weights = w;
        let kernel = || w.ok_or_else(|| Error::InvalidParameter("missing kernel".into()));
        let mut y = match s.kind {
            LayerKind::TransposedConv => tape.transposed_conv1d(cur, kernel()?, s.stride)?,
            LayerKind::PlainConv => tape.conv1d(cur, kernel()?, s.stride)?,
            LayerKind::NearestUpsample => tape.nearest_upsample(cur, s.factor)?,
            LayerKind::LinearUpsample => tape.linear_upsample(cur, s.factor)?,
            LayerKind::InterpPlusConv => {
                let up = match s.interp.unwrap_or(InterpMode::Nearest) {
                    InterpMode::Nearest => tape.nearest_upsample(cur, s.factor)?,
                    InterpMode::Linear => tape.linear_upsample(cur, s.factor)?,
                };
                tape.conv1d(up, kernel()?, 1)?
            }
            LayerKind::SubpixelConv => tape.conv1d(cur, kernel()?, 1)?,
        };
        if let Some(b) = layer.kernel.as_ref().and_then(|k| k.bias()) {
            let id = tape.bias_param(b.to_vec());
            lp.bias = Some(id);
            y = tape.add_bias(y, id)?;
        }
        if s.kind == LayerKind::SubpixelConv {
            y = tape.periodic_shuffle(y, s.factor)?;
        }
        if s.activation == Activation::Relu {
            y = tape.relu(y)?;
        }
        tape.set_rate(y, layer.output_rate);
        outputs.push(y);
        params.push(lp);
        cur = y;
    }
    Ok(RecordedStack {
        input,
        outputs,
        params,
    })
}

/// Gradient of `mean(critic(x))` with respect to `x`.
pub fn critic_input_gradient(critic: &Stack, x: &Signal) -> Result<Signal> {
    let mut tape = Tape::new();
    let rec = record_stack(&mut tape, critic, x)?;
    let loss = tape.mean(rec.output())?;
    let grads = tape.backward(loss)?;
    let g = grads
        .node(rec.input)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; x.samples().len()]);
    Signal::new(g, x.channels(), x.sample_rate())
}

/// Spectrogram of the critic's input gradient, the signal a generator
/// upstream of the critic would be trained with.
pub fn gradient_spectrum(critic: &Stack, x: &Signal, stft: &StftConfig) -> Result<Spectrogram> {
    let g = critic_input_gradient(critic, x)?;
    signal_spectrogram_with(&g, stft, Execution::Sequential)
}

/// Frequencies at which a critic's downsampling imprints periodic structure
/// on its input gradient: multiples of `rate / D` up to Nyquist, for each
/// cumulative downsampling factor `D > 1` along the stack.
pub fn stride_frequencies(critic: &Stack) -> Vec<f64> {
    let rate = critic.input_rate() as f64;
    let nyquist = rate / 2.0;
    let mut cumulative = 1usize;
    let mut out: Vec<f64> = Vec::new();
    for layer in critic.layers() {
        cumulative =
            cumulative * layer.spec.downsample_factor() / layer.spec.upsample_factor().max(1);
        if cumulative <= 1 {
            continue;
        }
        let base = rate / cumulative as f64;
        let mut f = base;
        while f <= nyquist + 1e-9 {
            if !out.iter().any(|&g| (g - f).abs() < 1e-9) {
                out.push(f);
            }
            f += base;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
