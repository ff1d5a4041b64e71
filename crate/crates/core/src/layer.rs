//! Declarative layer specs, kernel initialization, and layer stacks.
//!
//! A [`StackSpec`] is the JSON-serializable description; [`Stack::build`]
//! realizes every kernel from its seed. Example document:
//!
//! ```json
//! {
//!   "input_rate": 4000,
//!   "seed": 7,
//!   "layers": [
//!     { "kind": "transposed_conv", "length": 8, "stride": 4,
//!       "init": { "type": "random_uniform" }, "use_bias": true, "activation": "relu" },
//!     { "kind": "interp_plus_conv", "interp": "linear", "factor": 2, "length": 9 },
//!     { "kind": "subpixel_conv", "factor": 2, "length": 3, "init": { "type": "icnr" } }
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{self, InterpMode};
use crate::rng::{derive_seed, Prng};
use crate::signal::{Kernel, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    TransposedConv,
    NearestUpsample,
    LinearUpsample,
    InterpPlusConv,
    SubpixelConv,
    PlainConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Init {
    #[default]
    RandomUniform,
    Constant {
        value: f64,
    },
    Icnr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    None,
    Relu,
}

/// How the copies of a transposed-convolution kernel overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapClass {
    /// `length == stride`
    NoOverlap,
    /// `length` is not a multiple of `stride` (and exceeds it)
    PartialOverlap,
    /// `length` is a multiple of `stride` greater than one
    FullOverlap,
    /// `length < stride`: some output samples receive no contribution
    Gapped,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Kernel length in samples (ignored by pure interpolation layers).
    #[serde(default = "one")]
    pub length: usize,
    /// Hop of transposed and plain convolutions.
    #[serde(default = "one")]
    pub stride: usize,
    /// Upsampling factor of interpolation and subpixel layers.
    #[serde(default = "one")]
    pub factor: usize,
    /// Output channels. Subpixel kernels emit `factor * channels`.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub channels: usize,
    /// Interpolator preceding the convolution of an `interp_plus_conv` layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interp: Option<InterpMode>,
    #[serde(default)]
    pub init: Init,
    /// Per-layer seed; derived from the stack seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub use_bias: bool,
    /// Fixed bias value overriding the drawn one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(default)]
    pub activation: Activation,
}

impl LayerSpec {
    fn base(kind: LayerKind) -> Self {
        Self {
            kind,
            length: 1,
            stride: 1,
            factor: 1,
            channels: 1,
            interp: None,
            init: Init::RandomUniform,
            seed: None,
            use_bias: false,
            bias: None,
            activation: Activation::None,
        }
    }

    pub fn transposed(length: usize, stride: usize) -> Self {
        Self {
            length,
            stride,
            ..Self::base(LayerKind::TransposedConv)
        }
    }

    pub fn plain_conv(length: usize, stride: usize) -> Self {
        Self {
            length,
            stride,
            ..Self::base(LayerKind::PlainConv)
        }
    }

    pub fn nearest(factor: usize) -> Self {
        Self {
            factor,
            ..Self::base(LayerKind::NearestUpsample)
        }
    }

    pub fn linear(factor: usize) -> Self {
        Self {
            factor,
            ..Self::base(LayerKind::LinearUpsample)
        }
    }

    pub fn interp_plus_conv(mode: InterpMode, factor: usize, length: usize) -> Self {
        Self {
            factor,
            length,
            interp: Some(mode),
            ..Self::base(LayerKind::InterpPlusConv)
        }
    }

    pub fn subpixel(factor: usize, length: usize) -> Self {
        Self {
            factor,
            length,
            ..Self::base(LayerKind::SubpixelConv)
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_bias(mut self, bias: Option<f64>) -> Self {
        self.use_bias = true;
        self.bias = bias;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_channels(mut self, channels: usize) -> Self {
        self.channels = channels;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn has_kernel(&self) -> bool {
        !matches!(
            self.kind,
            LayerKind::NearestUpsample | LayerKind::LinearUpsample
        )
    }

    /// Upsampling factor of the layer (1 for plain convolutions).
    pub fn upsample_factor(&self) -> usize {
        match self.kind {
            LayerKind::TransposedConv => self.stride,
            LayerKind::PlainConv => 1,
            _ => self.factor,
        }
    }

    /// Downsampling factor (the stride of plain convolutions, 1 otherwise).
    pub fn downsample_factor(&self) -> usize {
        match self.kind {
            LayerKind::PlainConv => self.stride,
            _ => 1,
        }
    }

    pub fn overlap_class(&self) -> Option<OverlapClass> {
        if self.kind != LayerKind::TransposedConv {
            return None;
        }
        let (l, s) = (self.length, self.stride);
        Some(if l == s {
            OverlapClass::NoOverlap
        } else if l < s {
            OverlapClass::Gapped
        } else if l % s == 0 {
            OverlapClass::FullOverlap
        } else {
            OverlapClass::PartialOverlap
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.channels == 0 {
            return bad("channels must be >= 1".into());
        }
        match self.kind {
            LayerKind::TransposedConv | LayerKind::PlainConv => {
                if self.stride == 0 || self.length == 0 {
                    return bad(format!("{:?}: stride and length must be >= 1", self.kind));
                }
            }
            _ => {
                if self.factor == 0 {
                    return bad(format!("{:?}: factor must be >= 1", self.kind));
                }
                if self.has_kernel() && self.length == 0 {
                    return bad(format!("{:?}: length must be >= 1", self.kind));
                }
            }
        }
        if self.init == Init::Icnr && self.kind != LayerKind::SubpixelConv {
            return bad(format!(
                "ICNR initialization only applies to subpixel layers, not {:?}",
                self.kind
            ));
        }
        if let Init::Constant { value } = self.init {
            if !value.is_finite() {
                return bad("constant init must be finite".into());
            }
        }
        Ok(())
    }

    /// Shape `(out_channels, length)` of the realized kernel.
    fn kernel_out_channels(&self) -> usize {
        match self.kind {
            LayerKind::SubpixelConv => self.factor * self.channels,
            _ => self.channels,
        }
    }

    fn out_channels(&self, in_channels: usize) -> usize {
        if self.has_kernel() {
            self.channels
        } else {
            in_channels
        }
    }
}

/// Draws the kernel of a layer.
///
/// Random weights are i.i.d. uniform on `[-s, s)` with
/// `s = 1 / sqrt(in_channels * length)`, drawn before any bias so that
/// toggling `use_bias` never changes the weights. ICNR draws one sub-kernel
/// per output channel and copies it to every shuffle group.
pub fn init_kernel(spec: &LayerSpec, in_channels: usize, seed: u64) -> Result<Kernel> {
    spec.validate()?;
    if !spec.has_kernel() {
        return Err(Error::InvalidParameter(format!(
            "{:?} layers carry no kernel",
            spec.kind
        )));
    }
    if in_channels == 0 {
        return Err(Error::InvalidParameter("in_channels must be >= 1".into()));
    }
    let out = spec.kernel_out_channels();
    let len = spec.length;
    let n = out * in_channels * len;
    let scale = 1.0 / ((in_channels * len) as f64).sqrt();
    let mut rng = Prng::new(seed);
    let (weights, bias) = match spec.init {
        Init::RandomUniform => {
            let w: Vec<f64> = (0..n).map(|_| rng.uniform(-scale, scale)).collect();
            let b: Vec<f64> = (0..out).map(|_| rng.uniform(-scale, scale)).collect();
            (w, b)
        }
        Init::Constant { value } => (vec![value; n], vec![0.0; out]),
        Init::Icnr => {
            let groups = spec.factor;
            let per_group = spec.channels * in_channels * len;
            let sub: Vec<f64> = (0..per_group).map(|_| rng.uniform(-scale, scale)).collect();
            let sub_bias: Vec<f64> = (0..spec.channels)
                .map(|_| rng.uniform(-scale, scale))
                .collect();
            (sub.repeat(groups), sub_bias.repeat(groups))
        }
    };
    let kernel = Kernel::new(weights, out, in_channels, len)?;
    if !spec.use_bias {
        return Ok(kernel);
    }
    let bias = match spec.bias {
        Some(v) => vec![v; out],
        None => bias,
    };
    kernel.with_bias(bias)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub input_rate: u32,
    #[serde(default = "one")]
    pub input_channels: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
}

impl StackSpec {
    pub fn new(input_rate: u32, seed: u64, layers: Vec<LayerSpec>) -> Self {
        Self {
            input_rate,
            input_channels: 1,
            seed,
            layers,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn layer_seed(&self, index: usize) -> u64 {
        self.layers[index]
            .seed
            .unwrap_or_else(|| derive_seed(self.seed, index as u64))
    }
}

/// A realized layer: its spec plus the derived shapes, rates, and kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub kernel: Option<Kernel>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub input_rate: u32,
    pub output_rate: u32,
}

impl Layer {
    /// Runs the layer on a signal whose rate and channels were already checked.
    pub fn forward(&self, x: &Signal) -> Result<Signal> {
        let s = &self.spec;
        let kernel = || {
            self.kernel
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("layer kernel not realized".into()))
        };
        let y = match s.kind {
            LayerKind::TransposedConv => ops::transposed_conv1d(x, kernel()?, s.stride)?,
            LayerKind::PlainConv => ops::conv1d(x, kernel()?, s.stride)?,
            LayerKind::NearestUpsample => ops::nearest_upsample(x, s.factor)?,
            LayerKind::LinearUpsample => ops::linear_upsample(x, s.factor)?,
            LayerKind::InterpPlusConv => {
                let up = match s.interp.unwrap_or(InterpMode::Nearest) {
                    InterpMode::Nearest => ops::nearest_upsample(x, s.factor)?,
                    InterpMode::Linear => ops::linear_upsample(x, s.factor)?,
                };
                ops::conv1d(&up, kernel()?, 1)?
            }
            LayerKind::SubpixelConv => ops::subpixel_upsample(x, kernel()?, s.factor)?,
        };
        let y = match s.activation {
            Activation::None => y,
            Activation::Relu => ops::relu(&y),
        };
        Ok(y.with_rate(self.output_rate))
    }
}

/// An ordered pipeline of realized layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    spec: StackSpec,
    layers: Vec<Layer>,
}

impl Stack {
    /// Realizes every kernel of `spec` from its seed.
    pub fn build(spec: StackSpec) -> Result<Self> {
        Self::assemble(spec, |i, layer, in_ch, seed| {
            if layer.has_kernel() {
                init_kernel(layer, in_ch, seed).map(Some)
            } else {
                let _ = i;
                Ok(None)
            }
        })
    }

    /// Rebuilds a stack from its spec and kernels stored with [`Stack::weight_blob`].
    pub fn from_weight_blob(spec: StackSpec, blob: &[u8]) -> Result<Self> {
        if !blob.len().is_multiple_of(8) {
            return Err(Error::Parse(
                "weight blob length is not a multiple of 8".into(),
            ));
        }
        let values: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut cursor = 0usize;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v = values
                .get(cursor..cursor + n)
                .ok_or_else(|| Error::Parse("weight blob is too short".into()))?
                .to_vec();
            cursor += n;
            Ok(v)
        };
        let stack = Self::assemble(spec, |_, layer, in_ch, _| {
            if !layer.has_kernel() {
                return Ok(None);
            }
            let out = layer.kernel_out_channels();
            let k = Kernel::new(take(out * in_ch * layer.length)?, out, in_ch, layer.length)?;
            Ok(Some(if layer.use_bias {
                k.with_bias(take(out)?)?
            } else {
                k
            }))
        })?;
        if cursor != values.len() {
            return Err(Error::Parse(format!(
                "weight blob has {} trailing values",
                values.len() - cursor
            )));
        }
        Ok(stack)
    }

    fn assemble(
        spec: StackSpec,
        mut make: impl FnMut(usize, &LayerSpec, usize, u64) -> Result<Option<Kernel>>,
    ) -> Result<Self> {
        if spec.input_rate == 0 {
            return Err(Error::InvalidParameter(
                "input rate must be positive".into(),
            ));
        }
        if spec.input_channels == 0 {
            return Err(Error::InvalidParameter(
                "input channels must be >= 1".into(),
            ));
        }
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut channels = spec.input_channels;
        let mut rate = spec.input_rate;
        for (i, ls) in spec.layers.iter().enumerate() {
            ls.validate()?;
            let up = ls.upsample_factor() as u32;
            let down = ls.downsample_factor() as u32;
            let scaled = rate
                .checked_mul(up)
                .ok_or_else(|| Error::InvalidParameter("sample rate overflow".into()))?;
            if scaled % down != 0 {
                return Err(Error::InvalidParameter(format!(
                    "layer {i}: rate {scaled} Hz not divisible by stride {down}"
                )));
            }
            let kernel = make(i, ls, channels, spec.layer_seed(i))?;
            let out_channels = ls.out_channels(channels);
            layers.push(Layer {
                spec: ls.clone(),
                kernel,
                in_channels: channels,
                out_channels,
                input_rate: rate,
                output_rate: scaled / down,
            });
            channels = out_channels;
            rate = scaled / down;
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &StackSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_rate(&self) -> u32 {
        self.spec.input_rate
    }

    pub fn output_rate(&self) -> u32 {
        self.layers
            .last()
            .map_or(self.spec.input_rate, |l| l.output_rate)
    }

    pub fn output_channels(&self) -> usize {
        self.layers
            .last()
            .map_or(self.spec.input_channels, |l| l.out_channels)
    }

    /// All weights and biases, layer by layer, as little-endian `f64`.
    pub fn weight_blob(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for k in self.layers.iter().filter_map(|l| l.kernel.as_ref()) {
            for v in k.weights().iter().chain(k.bias().unwrap_or(&[])) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.kernel.as_ref())
            .map(|k| k.weights().len() + k.bias().map_or(0, <[f64]>::len))
            .sum()
    }
}

/// Runs `x` through every layer. The returned list starts with `x` itself
/// followed by each layer's output, so an empty stack yields `[x]`.
pub fn apply_stack(x: &Signal, stack: &Stack) -> Result<Vec<Signal>> {
    if x.sample_rate() != stack.input_rate() {
        return Err(Error::RateMismatch {
            signal: x.sample_rate(),
            expected: stack.input_rate(),
        });
    }
    if x.channels() != stack.spec.input_channels {
        return Err(Error::Shape(format!(
            "signal has {} channels, stack expects {}",
            x.channels(),
            stack.spec.input_channels
        )));
    }
    let mut outputs = Vec::with_capacity(stack.layers.len() + 1);
    outputs.push(x.clone());
    for layer in &stack.layers {
        let y = layer.forward(outputs.last().expect("non-empty"))?;
        outputs.push(y);
    }
    Ok(outputs)
}
