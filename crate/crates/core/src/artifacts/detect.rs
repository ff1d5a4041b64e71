//! Tonal peak detection and filtering measurement on spectrograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectrogram;

/// Bins on each side of a candidate used for its local noise floor.
pub const NEIGHBORHOOD: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonalPeak {
    pub frequency: f64,
    pub bin: usize,
    pub prominence_db: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Height of each bin above the median of its `±NEIGHBORHOOD` neighbors
/// (the bin itself excluded), for every local maximum of the frame-averaged
/// spectrum. The DC bin is never a candidate.
pub fn local_prominences(spec: &Spectrogram) -> Vec<TonalPeak> {
    let avg = spec.mean_db();
    let n = avg.len();
    let mut peaks = Vec::new();
    for b in 1..n {
        let v = avg[b];
        let left_ok = v > avg[b - 1];
        let right_ok = b + 1 == n || v >= avg[b + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = b.saturating_sub(NEIGHBORHOOD);
        let hi = (b + NEIGHBORHOOD).min(n - 1);
        let mut around: Vec<f64> = (lo..=hi).filter(|&j| j != b).map(|j| avg[j]).collect();
        peaks.push(TonalPeak {
            frequency: spec.frequency(b),
            bin: b,
            prominence_db: v - median(&mut around),
        });
    }
    peaks
}

/// Persistent narrowband peaks at least `min_prominence_db` above their
/// neighborhood, most prominent first.
pub fn detect_tonal_peaks(spec: &Spectrogram, min_prominence_db: f64) -> Vec<TonalPeak> {
    let mut peaks: Vec<TonalPeak> = local_prominences(spec)
        .into_iter()
        .filter(|p| p.prominence_db >= min_prominence_db)
        .collect();
    peaks.sort_by(|a, b| {
        b.prominence_db
            .total_cmp(&a.prominence_db)
            .then(a.bin.cmp(&b.bin))
    });
    peaks
}

/// Largest local prominence anywhere in the spectrum (0 if there is no local maximum).
pub fn max_prominence(spec: &Spectrogram) -> f64 {
    local_prominences(spec)
        .iter()
        .map(|p| p.prominence_db)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLevel {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Band mean dB minus the full-spectrum mean dB.
    pub relative_db: f64,
}

/// Splits the bins into `n_bands` contiguous, near-equal bands and reports
/// each band's mean level relative to the whole spectrum.
pub fn measure_filtering(spec: &Spectrogram, n_bands: usize) -> Result<Vec<BandLevel>> {
    let bins = spec.bins();
    if n_bands < 2 || n_bands > bins {
        return Err(Error::InvalidParameter(format!(
            "band count {n_bands} must lie in 2..={bins}"
        )));
    }
    let avg = spec.mean_db();
    let overall = avg.iter().sum::<f64>() / bins as f64;
    Ok((0..n_bands)
        .map(|k| {
            let lo = k * bins / n_bands;
            let hi = (k + 1) * bins / n_bands;
            let mean = avg[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            BandLevel {
                low_hz: spec.frequency(lo),
                high_hz: spec.frequency(hi - 1),
                relative_db: mean - overall,
            }
        })
        .collect())
}
