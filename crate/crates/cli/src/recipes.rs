//! Stack and input recipes shared by figures, experiments and the
//! acceptance run.

use upsample_lab::ops::InterpMode;
use upsample_lab::rng::derive_seed;
use upsample_lab::{synth, Activation, Init, LayerSpec, Result, Signal, Stack, StackSpec};

/// Input rate of every figure: 4 kHz signals throughout.
pub const FIGURE_RATE: u32 = 4000;

/// `count` layers built by `make`, with a bias on each and a ReLU after
/// every layer but the last, the decoder pattern of Demucs-like models.
pub fn decoder_pattern(count: usize, make: impl Fn() -> LayerSpec) -> Vec<LayerSpec> {
    (0..count)
        .map(|i| {
            let l = make().with_bias(None);
            if i + 1 < count {
                l.with_activation(Activation::Relu)
            } else {
                l
            }
        })
        .collect()
}

/// Random-init transposed stack: three layers of length 8, stride 4.
pub fn transposed_stack(seed: u64) -> Result<Stack> {
    Stack::build(StackSpec::new(
        FIGURE_RATE,
        seed,
        decoder_pattern(3, || LayerSpec::transposed(8, 4)),
    ))
}

/// Random-init subpixel stack: three ×2 layers with length-3 convolutions.
pub fn subpixel_stack(seed: u64) -> Result<Stack> {
    Stack::build(StackSpec::new(
        FIGURE_RATE,
        seed,
        decoder_pattern(3, || LayerSpec::subpixel(2, 3)),
    ))
}

/// Three parameter-free ×2 interpolation layers.
pub fn interpolation_stack(mode: InterpMode) -> Result<Stack> {
    let layer = match mode {
        InterpMode::Nearest => LayerSpec::nearest(2),
        InterpMode::Linear => LayerSpec::linear(2),
    };
    Stack::build(StackSpec::new(FIGURE_RATE, 0, vec![layer; 3]))
}

/// Stack pair for the offset experiment. The first carries random biases
/// and a ReLU after its first layer; the second is the same stack with both
/// removed, so its weights are identical.
pub fn offset_pair(
    seed: u64,
    layers: usize,
    length: usize,
    stride: usize,
) -> Result<(Stack, Stack)> {
    let with: Vec<LayerSpec> = (0..layers)
        .map(|i| {
            let l = LayerSpec::transposed(length, stride).with_bias(None);
            if i == 0 {
                l.with_activation(Activation::Relu)
            } else {
                l
            }
        })
        .collect();
    let without = vec![LayerSpec::transposed(length, stride); layers];
    Ok((
        Stack::build(StackSpec::new(FIGURE_RATE, seed, with))?,
        Stack::build(StackSpec::new(FIGURE_RATE, seed, without))?,
    ))
}

/// Strided-convolution critic whose input gradient is analyzed.
pub fn critic(
    rate: u32,
    stride: usize,
    length: usize,
    channels: usize,
    seed: u64,
) -> Result<Stack> {
    Stack::build(StackSpec::new(
        rate,
        seed,
        vec![
            LayerSpec::plain_conv(length, stride)
                .with_channels(channels)
                .with_activation(Activation::Relu),
            LayerSpec::plain_conv(length, stride),
        ],
    ))
}

/// Two transposed layers with a hidden width and biases, trained in the toy
/// experiment.
pub fn training_stack(seed: u64, hidden: usize, length: usize, stride: usize) -> Result<Stack> {
    Stack::build(StackSpec::new(
        FIGURE_RATE,
        seed,
        vec![
            LayerSpec::transposed(length, stride)
                .with_channels(hidden)
                .with_bias(None),
            LayerSpec::transposed(length, stride).with_bias(None),
        ],
    ))
}

/// Transposed layer with every tap set to `value`.
pub fn constant_transposed(length: usize, stride: usize, value: f64) -> LayerSpec {
    LayerSpec::transposed(length, stride).with_init(Init::Constant { value })
}

pub fn noise(len: usize, seed: u64, salt: u64) -> Result<Signal> {
    synth::white_noise(len, FIGURE_RATE, derive_seed(seed, salt))
}

pub fn music(len: usize, seed: u64) -> Result<Signal> {
    synth::harmonic_music(len, FIGURE_RATE, derive_seed(seed, 2))
}
