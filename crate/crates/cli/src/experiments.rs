//! The offset, gradient and training experiments.

use crate::output::OutputDir;
use crate::recipes;
use anyhow::{ensure, Result};
use serde::{Deserialize, Serialize};
use upsample_lab::artifacts::{
    compare_offset, detect_tonal_peaks, max_prominence, AnalysisConfig, TonalPeak,
};
use upsample_lab::autodiff::{
    gradient_spectrum, stride_frequencies, toy_dataset, train_toy, Optimizer, ToyDataConfig,
    TrainConfig,
};
use upsample_lab::rng::derive_seed;
use upsample_lab::{synth, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Offset,
    Gradient,
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffsetConfig {
    pub trials: usize,
    pub input_len: usize,
    pub layers: usize,
    pub length: usize,
    pub stride: usize,
}

impl Default for OffsetConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            input_len: 2048,
            layers: 3,
            length: 8,
            stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetTrial {
    pub seed: u64,
    /// Mean energy gain at the offset-replica frequencies, in dB.
    pub offset_delta_db: f64,
    pub tonal_with_offset: bool,
    pub tonal_without_offset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSummary {
    pub trials: Vec<OffsetTrial>,
    pub median_offset_delta_db: f64,
    /// Trials whose tonal verdict is true with offsets and false without.
    pub verdict_flips: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

pub fn run_offset(
    cfg: &OffsetConfig,
    seed: u64,
    analysis: &AnalysisConfig,
    exec: Execution,
) -> Result<OffsetSummary> {
    ensure!(cfg.trials > 0, "offset experiment needs at least one trial");
    let trials = exec.try_map(cfg.trials, |i| -> Result<OffsetTrial> {
        let trial_seed = derive_seed(seed, i as u64);
        let (with, without) = recipes::offset_pair(trial_seed, cfg.layers, cfg.length, cfg.stride)?;
        let x = recipes::noise(cfg.input_len, trial_seed, 1)?;
        let cmp = compare_offset(&with, &without, &x, analysis)?;
        Ok(OffsetTrial {
            seed: trial_seed,
            offset_delta_db: cmp.mean_offset_delta_db().unwrap_or(f64::NAN),
            tonal_with_offset: cmp.with_offset.verdicts.tonal,
            tonal_without_offset: cmp.without_offset.verdicts.tonal,
        })
    })?;
    let deltas: Vec<f64> = trials.iter().map(|t| t.offset_delta_db).collect();
    Ok(OffsetSummary {
        median_offset_delta_db: median(&deltas),
        verdict_flips: trials
            .iter()
            .filter(|t| t.tonal_with_offset && !t.tonal_without_offset)
            .count(),
        trials,
    })
}

pub fn write_offset(out: &mut OutputDir, summary: &OffsetSummary) -> Result<()> {
    let mut csv = String::from("seed,offset_delta_db,tonal_with_offset,tonal_without_offset\n");
    for t in &summary.trials {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            t.seed, t.offset_delta_db, t.tonal_with_offset, t.tonal_without_offset
        ));
    }
    out.write_text("offset_trials.csv", &csv)?;
    out.write_json("offset_summary.json", summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientConfig {
    pub rate: u32,
    pub input_len: usize,
    pub stride: usize,
    pub length: usize,
    pub channels: usize,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            rate: 16000,
            input_len: 16384,
            stride: 4,
            length: 8,
            channels: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideMatch {
    pub frequency: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientResult {
    pub stride: usize,
    pub stride_frequencies: Vec<StrideMatch>,
    pub peaks: Vec<TonalPeak>,
    pub max_prominence_db: f64,
    pub all_stride_frequencies_matched: bool,
    /// Detected peaks farther than the match tolerance from every stride frequency.
    pub peaks_off_grid: usize,
}

pub fn run_gradient(
    cfg: &GradientConfig,
    seed: u64,
    analysis: &AnalysisConfig,
) -> Result<(GradientResult, upsample_lab::spectral::Spectrogram)> {
    let critic = recipes::critic(cfg.rate, cfg.stride, cfg.length, cfg.channels, seed)?;
    let x = synth::white_noise(cfg.input_len, cfg.rate, derive_seed(seed, 1))?;
    let spec = gradient_spectrum(&critic, &x, &analysis.stft)?;
    let peaks = detect_tonal_peaks(&spec, analysis.min_prominence_db);
    let stride_frequencies: Vec<StrideMatch> = stride_frequencies(&critic)
        .into_iter()
        .map(|f| {
            let bin = spec.bin_of(f);
            StrideMatch {
                frequency: f,
                matched: peaks
                    .iter()
                    .any(|p| p.bin.abs_diff(bin) <= analysis.match_tolerance_bins),
            }
        })
        .collect();
    let grid: Vec<usize> = stride_frequencies
        .iter()
        .map(|m| spec.bin_of(m.frequency))
        .collect();
    let peaks_off_grid = peaks
        .iter()
        .filter(|p| {
            !grid
                .iter()
                .any(|&b| p.bin.abs_diff(b) <= analysis.match_tolerance_bins)
        })
        .count();
    Ok((
        GradientResult {
            peaks_off_grid,
            stride: cfg.stride,
            all_stride_frequencies_matched: stride_frequencies.iter().all(|m| m.matched),
            stride_frequencies,
            max_prominence_db: max_prominence(&spec),
            peaks,
        },
        spec,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub hidden_channels: usize,
    pub length: usize,
    pub stride: usize,
    pub eval_len: usize,
    pub data: ToyDataConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            learning_rate: 2e-4,
            optimizer: Optimizer::default(),
            hidden_channels: 4,
            length: 8,
            stride: 4,
            eval_len: 8192,
            data: ToyDataConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_ratio: f64,
    pub pre_max_prominence_db: f64,
    pub post_max_prominence_db: f64,
}

pub struct TrainingRun {
    pub summary: TrainingSummary,
    pub outcome: upsample_lab::autodiff::TrainOutcome,
}

pub fn run_training(
    cfg: &TrainingConfig,
    seed: u64,
    analysis: &AnalysisConfig,
    exec: Execution,
) -> Result<TrainingRun> {
    let stack = recipes::training_stack(seed, cfg.hidden_channels, cfg.length, cfg.stride)?;
    let data_cfg = ToyDataConfig {
        seed: derive_seed(seed, 7),
        ..cfg.data.clone()
    };
    let data = toy_dataset(&stack, &data_cfg)?;
    let train_cfg = TrainConfig {
        steps: cfg.steps,
        learning_rate: cfg.learning_rate,
        seed: derive_seed(seed, 9),
        optimizer: cfg.optimizer,
        eval_len: cfg.eval_len,
        ..TrainConfig::default()
    };
    let outcome = train_toy(&stack, &data, &train_cfg, analysis, exec)?;
    let summary = TrainingSummary {
        steps: cfg.steps,
        initial_loss: outcome.initial_loss(),
        final_loss: outcome.final_loss(),
        loss_ratio: outcome.final_loss() / outcome.initial_loss(),
        pre_max_prominence_db: outcome.pre.max_prominence_db,
        post_max_prominence_db: outcome.post.max_prominence_db,
    };
    Ok(TrainingRun { summary, outcome })
}

pub fn write_training(out: &mut OutputDir, run: &TrainingRun) -> Result<()> {
    out.write_text("loss.csv", &run.outcome.loss_csv())?;
    out.write_text(
        "trained_stack.json",
        &(run.outcome.stack.spec().to_json()? + "\n"),
    )?;
    out.write_bytes("trained_weights.bin", &run.outcome.stack.weight_blob())?;
    out.write_json("pre_report.json", &run.outcome.pre)?;
    out.write_json("post_report.json", &run.outcome.post)?;
    out.write_json("training_summary.json", &run.summary)
}

/// Writes the gradient experiment's spectrogram and result.
pub fn write_gradient(
    out: &mut OutputDir,
    result: &GradientResult,
    spec: &upsample_lab::spectral::Spectrogram,
) -> Result<()> {
    out.write_spectrogram("gradient_spectrogram", spec)?;
    out.write_json("gradient.json", result)
}
