//! Deterministic test signals.

use crate::error::Result;
use crate::rng::Prng;
use crate::signal::Signal;
use std::f64::consts::TAU;

/// Zero-mean, unit-variance Gaussian white noise.
pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> Result<Signal> {
    let mut rng = Prng::new(seed);
    Signal::mono((0..len).map(|_| rng.normal()).collect(), sample_rate)
}

pub fn ones(len: usize, sample_rate: u32) -> Result<Signal> {
    Signal::mono(vec![1.0; len], sample_rate)
}

/// Sum of sinusoids `(frequency Hz, amplitude, phase rad)` sampled at
/// times `(n - delay) / sample_rate`.
pub fn sines(
    components: &[(f64, f64, f64)],
    len: usize,
    sample_rate: u32,
    delay: f64,
) -> Result<Signal> {
    let fs = sample_rate as f64;
    let samples = (0..len)
        .map(|n| {
            let t = (n as f64 - delay) / fs;
            components
                .iter()
                .map(|&(f, a, p)| a * (TAU * f * t + p).sin())
                .sum()
        })
        .collect();
    Signal::mono(samples, sample_rate)
}

/// Synthetic harmonic stand-in for a music excerpt: a few decaying notes
/// with partials below the Nyquist frequency, plus faint noise.
pub fn harmonic_music(len: usize, sample_rate: u32, seed: u64) -> Result<Signal> {
    let mut rng = Prng::new(seed);
    let fs = sample_rate as f64;
    let notes = [110.0, 146.83, 164.81, 220.0, 130.81, 196.0];
    let note_len = (len / notes.len()).max(1);
    let samples = (0..len)
        .map(|n| {
            let idx = (n / note_len).min(notes.len() - 1);
            let local = (n - idx * note_len) as f64 / fs;
            let f0 = notes[idx];
            let env = (-3.0 * local).exp();
            let tone: f64 = (1..=8)
                .map(|h| h as f64 * f0)
                .filter(|&f| f < fs / 2.0)
                .enumerate()
                .map(|(i, f)| (TAU * f * local).sin() / (i + 1) as f64)
                .sum();
            0.5 * env * tone + 0.01 * rng.normal()
        })
        .collect();
    Signal::mono(samples, sample_rate)
}
