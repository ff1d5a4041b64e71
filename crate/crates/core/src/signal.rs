//! Multi-channel waveforms and convolution kernels.

use crate::error::{Error, Result};

/// A multi-channel discrete waveform, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    channels: usize,
    sample_rate: u32,
}

impl Signal {
    /// Builds a signal from channel-major samples.
    pub fn new(samples: Vec<f64>, channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("a signal needs at least one channel".into()));
        }
        if !samples.len().is_multiple_of(channels) {
            return Err(Error::Shape(format!(
                "{} samples do not split into {} channels",
                samples.len(),
                channels
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParameter(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample {bad}")));
        }
        Ok(Self {
            samples,
            channels,
            sample_rate,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(samples, 1, sample_rate)
    }

    pub fn from_channels(rows: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        let channels = rows.len();
        if channels == 0 {
            return Err(Error::Shape("a signal needs at least one channel".into()));
        }
        let time = rows[0].len();
        if rows.iter().any(|r| r.len() != time) {
            return Err(Error::Shape("channels have different lengths".into()));
        }
        Self::new(rows.concat(), channels, sample_rate)
    }

    pub fn zeros(channels: usize, time: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; channels * time], channels, sample_rate)
    }

    /// Internal constructor for operator outputs whose shape is correct by construction.
    pub(crate) fn from_parts(samples: Vec<f64>, channels: usize, sample_rate: u32) -> Self {
        debug_assert!(channels > 0 && samples.len().is_multiple_of(channels));
        Self {
            samples,
            channels,
            sample_rate,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn time(&self) -> usize {
        self.samples.len() / self.channels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let t = self.time();
        &self.samples[c * t..(c + 1) * t]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let t = self.time();
        &mut self.samples[c * t..(c + 1) * t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let t = self.time().max(1);
        self.samples.chunks(t).take(self.channels)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn with_rate(mut self, sample_rate: u32) -> Self {
        self.sample_rate = sample_rate;
        self
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self::from_parts(
            self.samples.iter().map(|v| v * gain).collect(),
            self.channels,
            self.sample_rate,
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(
            self.samples.iter().map(|&v| f(v)).collect(),
            self.channels,
            self.sample_rate,
        )
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }
}

/// Convolution weights laid out as `[out_channels][in_channels][length]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    weights: Vec<f64>,
    out_channels: usize,
    in_channels: usize,
    length: usize,
    bias: Option<Vec<f64>>,
}

impl Kernel {
    pub fn new(
        weights: Vec<f64>,
        out_channels: usize,
        in_channels: usize,
        length: usize,
    ) -> Result<Self> {
        if length == 0 || out_channels == 0 || in_channels == 0 {
            return Err(Error::Shape(format!(
                "kernel dimensions must be positive, got {out_channels}x{in_channels}x{length}"
            )));
        }
        if weights.len() != out_channels * in_channels * length {
            return Err(Error::Shape(format!(
                "{} weights for a {out_channels}x{in_channels}x{length} kernel",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite kernel weight".into()));
        }
        Ok(Self {
            weights,
            out_channels,
            in_channels,
            length,
            bias: None,
        })
    }

    /// Single-channel kernel from a row of taps.
    pub fn mono(taps: &[f64]) -> Result<Self> {
        Self::new(taps.to_vec(), 1, 1, taps.len())
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != self.out_channels {
            return Err(Error::Shape(format!(
                "{} biases for {} output channels",
                bias.len(),
                self.out_channels
            )));
        }
        self.bias = Some(bias);
        Ok(self)
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = None;
        self
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [f64]> {
        self.bias.as_deref_mut()
    }

    /// Taps connecting input channel `i` to output channel `o`.
    pub fn taps(&self, o: usize, i: usize) -> &[f64] {
        let start = (o * self.in_channels + i) * self.length;
        &self.weights[start..start + self.length]
    }

    #[inline]
    pub fn at(&self, o: usize, i: usize, l: usize) -> f64 {
        self.weights[(o * self.in_channels + i) * self.length + l]
    }

    /// The kernel with input and output channel axes swapped and no bias.
    ///
    /// This is the kernel of the adjoint operator: the input gradient of a
    /// strided convolution is a transposed convolution with this kernel, and
    /// vice versa. Taps keep their order.
    pub fn adjoint(&self) -> Kernel {
        let mut weights = Vec::with_capacity(self.weights.len());
        for i in 0..self.in_channels {
            for o in 0..self.out_channels {
                weights.extend_from_slice(self.taps(o, i));
            }
        }
        Kernel {
            weights,
            out_channels: self.in_channels,
            in_channels: self.out_channels,
            length: self.length,
            bias: None,
        }
    }

    /// Taps of output channel group `o` collected into a new kernel.
    pub fn select_outputs(&self, outputs: impl IntoIterator<Item = usize>) -> Kernel {
        let outs: Vec<usize> = outputs.into_iter().collect();
        let mut weights = Vec::new();
        for &o in &outs {
            for i in 0..self.in_channels {
                weights.extend_from_slice(self.taps(o, i));
            }
        }
        Kernel {
            weights,
            out_channels: outs.len(),
            in_channels: self.in_channels,
            length: self.length,
            bias: self
                .bias
                .as_ref()
                .map(|b| outs.iter().map(|&o| b[o]).collect()),
        }
    }
}
