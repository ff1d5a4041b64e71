//! Upsampling layers for 1-D signals, their spectral artifacts, and a small
//! reverse-mode differentiator for toy training.

pub mod artifacts;
pub mod autodiff;
pub mod error;
pub mod exec;
pub mod io;
pub mod layer;
pub mod ops;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
pub use layer::{
    apply_stack, init_kernel, Activation, Init, LayerKind, LayerSpec, Stack, StackSpec,
};
pub use signal::{Kernel, Signal};
