//! Short-time Fourier analysis with log-magnitude output.

use serde::{Deserialize, Serialize};

use super::fft::rfft;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::signal::Signal;

/// Added to magnitudes before taking the logarithm.
pub const MAGNITUDE_EPS: f64 = 1e-10;
pub const DEFAULT_FLOOR_DB: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n` (the DFT-even variant).
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Padding applied to both ends when frames are centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadMode {
    #[default]
    Reflect,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
    /// Center frame `t` on sample `t * hop` by padding `n_fft / 2` per side.
    pub center: bool,
    #[serde(default)]
    pub pad_mode: PadMode,
    pub floor_db: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            window: Window::Hann,
            center: false,
            pad_mode: PadMode::Reflect,
            floor_db: DEFAULT_FLOOR_DB,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || !self.n_fft.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "n_fft {} is not a power of two >= 2",
                self.n_fft
            )));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::InvalidParameter(format!(
                "hop {} must lie in 1..={}",
                self.hop, self.n_fft
            )));
        }
        if !self.floor_db.is_finite() {
            return Err(Error::InvalidParameter("floor_db must be finite".into()));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `time` samples.
    pub fn frame_count(&self, time: usize) -> usize {
        if self.center {
            time / self.hop + 1
        } else if time < self.n_fft {
            0
        } else {
            (time - self.n_fft) / self.hop + 1
        }
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

/// Log-magnitude spectrogram stored bin-major: `db[bin * frames + frame]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrogram {
    magnitudes_db: Vec<f64>,
    bins: usize,
    frames: usize,
    pub bin_hz: f64,
    pub hop_s: f64,
    pub sample_rate: u32,
    pub floor_db: f64,
}

impl Spectrogram {
    /// Builds a spectrogram from a bin-major dB matrix, clamping to `floor_db`.
    pub fn from_db(
        mut magnitudes_db: Vec<f64>,
        bins: usize,
        frames: usize,
        sample_rate: u32,
        hop: usize,
        floor_db: f64,
    ) -> Result<Self> {
        if bins < 2 || magnitudes_db.len() != bins * frames {
            return Err(Error::Shape(format!(
                "{} values for {bins} bins x {frames} frames",
                magnitudes_db.len()
            )));
        }
        if magnitudes_db.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("NaN in spectrogram".into()));
        }
        magnitudes_db
            .iter_mut()
            .for_each(|v| *v = v.max(floor_db).min(f64::MAX));
        let n_fft = 2 * (bins - 1);
        Ok(Self {
            magnitudes_db,
            bins,
            frames,
            bin_hz: sample_rate as f64 / n_fft as f64,
            hop_s: hop as f64 / sample_rate as f64,
            sample_rate,
            floor_db,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_fft(&self) -> usize {
        2 * (self.bins - 1)
    }

    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.magnitudes_db[bin * self.frames + frame]
    }

    /// dB values of one frequency bin across frames.
    pub fn bin_row(&self, bin: usize) -> &[f64] {
        &self.magnitudes_db[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn frame(&self, frame: usize) -> Vec<f64> {
        (0..self.bins).map(|b| self.at(b, frame)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.magnitudes_db
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn bin_of(&self, hz: f64) -> usize {
        ((hz / self.bin_hz).round() as usize).min(self.bins - 1)
    }

    /// Per-bin dB averaged over frames.
    pub fn mean_db(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|b| {
                let row = self.bin_row(b);
                row.iter().sum::<f64>() / row.len().max(1) as f64
            })
            .collect()
    }

    pub fn max_db(&self) -> f64 {
        self.magnitudes_db
            .iter()
            .copied()
            .fold(self.floor_db, f64::max)
    }
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn padded(x: &[f64], cfg: &StftConfig) -> Vec<f64> {
    if !cfg.center {
        return x.to_vec();
    }
    let pad = (cfg.n_fft / 2) as isize;
    let len = x.len() as isize;
    (-pad..len + pad)
        .map(|i| {
            if (0..len).contains(&i) {
                x[i as usize]
            } else {
                match cfg.pad_mode {
                    PadMode::Zero => 0.0,
                    PadMode::Reflect => x[reflect_index(i, x.len())],
                }
            }
        })
        .collect()
}

/// Spectrogram of one channel.
pub fn stft(x: &[f64], sample_rate: u32, cfg: &StftConfig) -> Result<Spectrogram> {
    stft_with(x, sample_rate, cfg, Execution::default())
}

pub fn stft_with(
    x: &[f64],
    sample_rate: u32,
    cfg: &StftConfig,
    exec: Execution,
) -> Result<Spectrogram> {
    cfg.validate()?;
    if sample_rate == 0 {
        return Err(Error::InvalidParameter(
            "sample rate must be positive".into(),
        ));
    }
    if cfg.center && x.is_empty() {
        return Err(Error::Shape("cannot analyze an empty signal".into()));
    }
    if !cfg.center && x.len() < cfg.n_fft {
        return Err(Error::Shape(format!(
            "signal of {} samples is shorter than one frame of {}",
            x.len(),
            cfg.n_fft
        )));
    }
    let frames = cfg.frame_count(x.len());
    let bins = cfg.bins();
    let signal = padded(x, cfg);
    let window = cfg.window.coefficients(cfg.n_fft);
    let columns = exec.try_map(frames, |f| -> Result<Vec<f64>> {
        let start = f * cfg.hop;
        let seg: Vec<f64> = signal[start..start + cfg.n_fft]
            .iter()
            .zip(&window)
            .map(|(v, w)| v * w)
            .collect();
        Ok(rfft(&seg)?
            .iter()
            .map(|c| (20.0 * (c.norm() + MAGNITUDE_EPS).log10()).max(cfg.floor_db))
            .collect())
    })?;
    let mut db = vec![0.0; bins * frames];
    for (f, col) in columns.iter().enumerate() {
        for (b, v) in col.iter().enumerate() {
            db[b * frames + f] = *v;
        }
    }
    Spectrogram::from_db(db, bins, frames, sample_rate, cfg.hop, cfg.floor_db)
}

/// Spectrogram of a multi-channel signal: per-channel dB averaged across channels.
pub fn signal_spectrogram(x: &Signal, cfg: &StftConfig) -> Result<Spectrogram> {
    signal_spectrogram_with(x, cfg, Execution::default())
}

pub fn signal_spectrogram_with(
    x: &Signal,
    cfg: &StftConfig,
    exec: Execution,
) -> Result<Spectrogram> {
    let mut specs = x
        .rows()
        .map(|row| stft_with(row, x.sample_rate(), cfg, exec))
        .collect::<Result<Vec<_>>>()?;
    if specs.len() == 1 {
        return Ok(specs.pop().expect("one channel"));
    }
    let n = specs.len() as f64;
    let first = &specs[0];
    let avg: Vec<f64> = (0..first.values().len())
        .map(|i| specs.iter().map(|s| s.values()[i]).sum::<f64>() / n)
        .collect();
    Spectrogram::from_db(
        avg,
        first.bins(),
        first.frames(),
        x.sample_rate(),
        cfg.hop,
        cfg.floor_db,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut r = Prng::new(seed);
        (0..n).map(|_| r.normal()).collect()
    }

    #[test]
    fn frame_counts_follow_center_flag() {
        let x = vec![0.1; 2048];
        let cfg = StftConfig::default();
        assert_eq!(stft(&x, 4000, &cfg).unwrap().frames(), 1);
        let cfg = StftConfig {
            center: true,
            ..cfg
        };
        assert_eq!(stft(&x, 4000, &cfg).unwrap().frames(), 5);
    }

    #[test]
    fn short_signal_needs_center() {
        let cfg = StftConfig::default();
        assert!(stft(&[0.0; 100], 4000, &cfg).is_err());
        let cfg = StftConfig {
            center: true,
            ..cfg
        };
        assert_eq!(stft(&[0.0; 100], 4000, &cfg).unwrap().frames(), 1);
    }

    #[test]
    fn config_validation() {
        let bad = StftConfig {
            n_fft: 1000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = StftConfig {
            hop: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = StftConfig {
            hop: 4096,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn bin_centered_sine_peaks_in_every_frame() {
        let (rate, n_fft, bin) = (8000u32, 256usize, 19usize);
        let f = bin as f64 * rate as f64 / n_fft as f64;
        let x: Vec<f64> = (0..4000)
            .map(|t| (std::f64::consts::TAU * f * t as f64 / rate as f64).sin())
            .collect();
        let cfg = StftConfig {
            n_fft,
            hop: 64,
            ..Default::default()
        };
        let s = stft(&x, rate, &cfg).unwrap();
        for frame in 0..s.frames() {
            let col = s.frame(frame);
            let argmax = (0..col.len())
                .max_by(|&a, &b| col[a].total_cmp(&col[b]))
                .unwrap();
            assert_eq!(argmax, bin);
        }
    }

    #[test]
    fn uncentered_frames_are_interior_centered_frames() {
        let x = noise(10_000, 4);
        for (n_fft, hop) in [(2048, 512), (256, 64), (256, 128)] {
            let plain = StftConfig {
                n_fft,
                hop,
                ..Default::default()
            };
            let centered = StftConfig {
                center: true,
                ..plain
            };
            let a = stft(&x, 16000, &plain).unwrap();
            let b = stft(&x, 16000, &centered).unwrap();
            let shift = n_fft / 2 / hop;
            for f in 0..a.frames() {
                for bin in 0..a.bins() {
                    assert!((a.at(bin, f) - b.at(bin, f + shift)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn reflect_padding_mirrors_without_edge_repeat() {
        let cfg = StftConfig {
            n_fft: 4,
            hop: 1,
            center: true,
            ..Default::default()
        };
        assert_eq!(
            padded(&[1., 2., 3.], &cfg),
            vec![3., 2., 1., 2., 3., 2., 1.]
        );
        let cfg = StftConfig {
            pad_mode: PadMode::Zero,
            ..cfg
        };
        assert_eq!(
            padded(&[1., 2., 3.], &cfg),
            vec![0., 0., 1., 2., 3., 0., 0.]
        );
    }

    #[test]
    fn values_are_floored() {
        let s = stft(&[0.0; 2048], 8000, &StftConfig::default()).unwrap();
        assert!(s.values().iter().all(|&v| v == DEFAULT_FLOOR_DB));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let x = noise(40_000, 9);
        let cfg = StftConfig::default();
        assert_eq!(
            stft_with(&x, 8000, &cfg, Execution::Sequential).unwrap(),
            stft_with(&x, 8000, &cfg, Execution::Parallel).unwrap()
        );
    }
}
