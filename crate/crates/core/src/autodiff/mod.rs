//! Reverse-mode differentiation, gradient spectra, and toy training.

pub mod gradcheck;
mod graph;
mod tape;
mod train;

pub use graph::{
    critic_input_gradient, gradient_spectrum, record_stack, stride_frequencies, LayerParams,
    RecordedStack,
};
pub use tape::{conv_input_grad, transposed_input_grad, Gradients, NodeId, ParamId, Tape};
pub use train::{
    nominal_delay, toy_dataset, train_toy, Example, LossKind, LossPoint, Optimizer, ToyDataConfig,
    TrainConfig, TrainOutcome,
};
