use serde::{Deserialize, Serialize};

use super::detect::{detect_tonal_peaks, max_prominence, measure_filtering, BandLevel, TonalPeak};
use super::predict::{predict_tones, ToneKind};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::layer::{apply_stack, Stack};
use crate::signal::Signal;
use crate::spectral::{signal_spectrogram_with, Spectrogram, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub stft: StftConfig,
    pub min_prominence_db: f64,
    pub n_bands: usize,
    /// Filtering verdict fires when the top band sits this far below the mean.
    pub filtering_threshold_db: f64,
    /// A prediction matches a peak this many bins away or closer.
    pub match_tolerance_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            min_prominence_db: 10.0,
            n_bands: 8,
            filtering_threshold_db: 6.0,
            match_tolerance_bins: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatch {
    pub frequency: f64,
    pub origin_layer: usize,
    pub kind: ToneKind,
    pub bin: usize,
    pub matched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub tonal: bool,
    pub filtering: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactReport {
    pub sample_rate: u32,
    pub peaks: Vec<TonalPeak>,
    pub max_prominence_db: f64,
    pub bands: Vec<BandLevel>,
    pub predictions: Vec<PredictionMatch>,
    pub verdicts: Verdicts,
}

impl ArtifactReport {
    /// Analyzes a spectrogram, matching `predictions` (if any) against its peaks.
    pub fn from_spectrogram(
        spec: &Spectrogram,
        stack: Option<&Stack>,
        cfg: &AnalysisConfig,
    ) -> Result<Self> {
        let peaks = detect_tonal_peaks(spec, cfg.min_prominence_db);
        let bands = measure_filtering(spec, cfg.n_bands)?;
        let predictions = stack
            .map(predict_tones)
            .unwrap_or_default()
            .into_iter()
            .filter(|t| t.frequency <= spec.sample_rate as f64 / 2.0 + 1e-6)
            .map(|t| {
                let bin = spec.bin_of(t.frequency);
                PredictionMatch {
                    frequency: t.frequency,
                    origin_layer: t.origin_layer,
                    kind: t.kind,
                    bin,
                    matched: peaks
                        .iter()
                        .any(|p| p.bin.abs_diff(bin) <= cfg.match_tolerance_bins),
                }
            })
            .collect();
        let top = bands.last().map_or(0.0, |b| b.relative_db);
        Ok(Self {
            sample_rate: spec.sample_rate,
            max_prominence_db: max_prominence(spec),
            verdicts: Verdicts {
                tonal: !peaks.is_empty(),
                filtering: top <= -cfg.filtering_threshold_db,
            },
            peaks,
            bands,
            predictions,
        })
    }

    pub fn all_predictions_matched(&self) -> bool {
        self.predictions.iter().all(|p| p.matched)
    }

    pub fn top_band_db(&self) -> f64 {
        self.bands.last().map_or(0.0, |b| b.relative_db)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Output of running a stack and analyzing its final layer.
#[derive(Debug, Clone)]
pub struct StackAnalysis {
    pub outputs: Vec<Signal>,
    pub spectrograms: Vec<Spectrogram>,
    pub report: ArtifactReport,
}

/// Runs `x` through `stack` and analyzes the final output.
///
/// Per-layer spectrograms are computed for every layer output long enough
/// for one frame (always, when frames are centered).
pub fn analyze_stack(
    x: &Signal,
    stack: &Stack,
    cfg: &AnalysisConfig,
    exec: Execution,
) -> Result<StackAnalysis> {
    let outputs = apply_stack(x, stack)?;
    let spectrograms = outputs
        .iter()
        .filter(|y| cfg.stft.center || y.time() >= cfg.stft.n_fft)
        .map(|y| signal_spectrogram_with(y, &cfg.stft, exec))
        .collect::<Result<Vec<_>>>()?;
    let final_spec = signal_spectrogram_with(outputs.last().expect("non-empty"), &cfg.stft, exec)?;
    let report = ArtifactReport::from_spectrogram(&final_spec, Some(stack), cfg)?;
    Ok(StackAnalysis {
        outputs,
        spectrograms,
        report,
    })
}

/// Convenience wrapper returning only the report of the final layer.
pub fn analyze(x: &Signal, stack: &Stack, cfg: &AnalysisConfig) -> Result<ArtifactReport> {
    let outputs = apply_stack(x, stack)?;
    let spec = signal_spectrogram_with(
        outputs.last().expect("non-empty"),
        &cfg.stft,
        Execution::Sequential,
    )?;
    ArtifactReport::from_spectrogram(&spec, Some(stack), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDelta {
    pub frequency: f64,
    pub kind: ToneKind,
    pub with_db: f64,
    pub without_db: f64,
    pub delta_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetComparison {
    pub with_offset: ArtifactReport,
    pub without_offset: ArtifactReport,
    pub deltas: Vec<EnergyDelta>,
}

impl OffsetComparison {
    /// Mean energy difference over the offset-replica frequencies.
    pub fn mean_offset_delta_db(&self) -> Option<f64> {
        let d: Vec<f64> = self
            .deltas
            .iter()
            .filter(|d| d.kind == ToneKind::OffsetReplica)
            .map(|d| d.delta_db)
            .collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    }
}

fn check_offset_pair(with: &Stack, without: &Stack) -> Result<()> {
    let (a, b) = (with.spec(), without.spec());
    if a.input_rate != b.input_rate || a.input_channels != b.input_channels {
        return Err(Error::StackMismatch("input rate or channels differ".into()));
    }
    if a.layers.len() != b.layers.len() {
        return Err(Error::StackMismatch("layer counts differ".into()));
    }
    for (i, (la, lb)) in with.layers().iter().zip(without.layers()).enumerate() {
        let mut sa = la.spec.clone();
        let mut sb = lb.spec.clone();
        sa.use_bias = false;
        sa.bias = None;
        sb.use_bias = false;
        sb.bias = None;
        if i == 0 {
            sa.activation = sb.activation;
        }
        if sa.seed.is_none() || sb.seed.is_none() {
            sa.seed = None;
            sb.seed = None;
        }
        let weights = |l: &crate::layer::Layer| l.kernel.as_ref().map(|k| k.weights().to_vec());
        if sa != sb || weights(la) != weights(lb) {
            return Err(Error::StackMismatch(format!("layer {i} differs")));
        }
    }
    Ok(())
}

/// Runs two stacks that differ only in biases and first-layer activation and
/// compares the energy at every tone predicted for the offset-carrying stack.
pub fn compare_offset(
    with: &Stack,
    without: &Stack,
    x: &Signal,
    cfg: &AnalysisConfig,
) -> Result<OffsetComparison> {
    check_offset_pair(with, without)?;
    let spec_of = |s: &Stack| -> Result<Spectrogram> {
        let out = apply_stack(x, s)?;
        signal_spectrogram_with(
            out.last().expect("non-empty"),
            &cfg.stft,
            Execution::Sequential,
        )
    };
    let spec_with = spec_of(with)?;
    let spec_without = spec_of(without)?;
    let with_report = ArtifactReport::from_spectrogram(&spec_with, Some(with), cfg)?;
    let without_report = ArtifactReport::from_spectrogram(&spec_without, Some(without), cfg)?;
    let (avg_with, avg_without) = (spec_with.mean_db(), spec_without.mean_db());
    let deltas = predict_tones(with)
        .into_iter()
        .filter(|t| t.frequency <= spec_with.sample_rate as f64 / 2.0 + 1e-6)
        .map(|t| {
            let bin = spec_with.bin_of(t.frequency);
            EnergyDelta {
                frequency: t.frequency,
                kind: t.kind,
                with_db: avg_with[bin],
                without_db: avg_without[bin],
                delta_db: avg_with[bin] - avg_without[bin],
            }
        })
        .collect();
    Ok(OffsetComparison {
        with_offset: with_report,
        without_offset: without_report,
        deltas,
    })
}

/// Signal-to-distortion ratio in dB; `+inf` when the estimate is exact.
pub fn sdr(reference: &Signal, estimate: &Signal) -> Result<f64> {
    if reference.channels() != estimate.channels() || reference.time() != estimate.time() {
        return Err(Error::Shape(format!(
            "reference {}x{} vs estimate {}x{}",
            reference.channels(),
            reference.time(),
            estimate.channels(),
            estimate.time()
        )));
    }
    let signal = reference.energy();
    if signal == 0.0 {
        return Err(Error::InvalidParameter(
            "reference signal is all zeros".into(),
        ));
    }
    let noise: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{Activation, LayerSpec, StackSpec};
    use crate::synth;

    #[test]
    fn sdr_values() {
        let r = synth::sines(&[(440.0, 1.0, 0.0)], 1000, 8000, 0.0).unwrap();
        assert_eq!(sdr(&r, &r).unwrap(), f64::INFINITY);
        let zero = Signal::zeros(1, 1000, 8000).unwrap();
        assert!(sdr(&r, &zero).unwrap().abs() < 1e-12);
        let est = r.scaled(1.1);
        assert!((sdr(&r, &est).unwrap() - 20.0).abs() < 1e-9);
        assert!(sdr(&zero, &r).is_err());
        assert!(sdr(&r, &Signal::zeros(1, 10, 8000).unwrap()).is_err());
    }

    #[test]
    fn empty_stack_report_is_plain_analysis() {
        let x = synth::white_noise(8192, 8000, 3).unwrap();
        let stack = Stack::build(StackSpec::new(8000, 0, vec![])).unwrap();
        let cfg = AnalysisConfig::default();
        let r = analyze(&x, &stack, &cfg).unwrap();
        let spec = crate::spectral::signal_spectrogram(&x, &cfg.stft).unwrap();
        assert_eq!(
            r,
            ArtifactReport::from_spectrogram(&spec, None, &cfg).unwrap()
        );
        assert!(r.predictions.is_empty());
    }

    #[test]
    fn dc_through_stretch_lands_on_old_rate_multiples() {
        let x = synth::ones(4096, 4000).unwrap();
        let y = crate::ops::stretch(&x, 2).unwrap();
        let cfg = StftConfig::default();
        let s = crate::spectral::stft(y.samples(), 8000, &cfg).unwrap();
        let peaks = detect_tonal_peaks(&s, 10.0);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].frequency, 4000.0);
    }

    #[test]
    fn offset_pair_validation() {
        let base = vec![LayerSpec::transposed(8, 4); 2];
        let mut biased = base.clone();
        biased[0] = biased[0]
            .clone()
            .with_bias(Some(0.1))
            .with_activation(Activation::Relu);
        let without = Stack::build(StackSpec::new(1000, 3, base.clone())).unwrap();
        let with = Stack::build(StackSpec::new(1000, 3, biased.clone())).unwrap();
        assert!(check_offset_pair(&with, &without).is_ok());
        let other_seed = Stack::build(StackSpec::new(1000, 4, base.clone())).unwrap();
        assert!(check_offset_pair(&with, &other_seed).is_err());
        let mut later_relu = base.clone();
        later_relu[1].activation = Activation::Relu;
        let later = Stack::build(StackSpec::new(1000, 3, later_relu)).unwrap();
        assert!(check_offset_pair(&later, &without).is_err());
    }

    #[test]
    fn zero_bias_pair_has_no_deltas() {
        let base = vec![LayerSpec::transposed(8, 4); 2];
        let zero_bias: Vec<LayerSpec> = base
            .iter()
            .map(|l| l.clone().with_bias(Some(0.0)))
            .collect();
        let a = Stack::build(StackSpec::new(1000, 3, zero_bias)).unwrap();
        let b = Stack::build(StackSpec::new(1000, 3, base)).unwrap();
        let x = synth::white_noise(2048, 1000, 1).unwrap();
        let cmp = compare_offset(&a, &b, &x, &AnalysisConfig::default()).unwrap();
        assert!(cmp.deltas.iter().all(|d| d.delta_db.abs() < 1e-9));
    }
}
