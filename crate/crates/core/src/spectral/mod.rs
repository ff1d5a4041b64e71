//! FFT, STFT, and filter frequency responses.

pub mod export;
pub mod fft;
pub mod response;
pub mod stft;

pub use fft::{fft, rfft};
pub use response::freq_response;
pub use stft::{
    signal_spectrogram, signal_spectrogram_with, stft, stft_with, PadMode, Spectrogram, StftConfig,
    Window,
};
