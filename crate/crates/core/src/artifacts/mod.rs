//! Artifact prediction from stack structure and artifact measurement in spectrograms.

pub mod detect;
pub mod predict;
pub mod report;

pub use detect::{
    detect_tonal_peaks, local_prominences, max_prominence, measure_filtering, BandLevel, TonalPeak,
};
pub use predict::{predict_tones, unique_frequencies, ToneKind, TonePrediction};
pub use report::{
    analyze, analyze_stack, compare_offset, sdr, AnalysisConfig, ArtifactReport, EnergyDelta,
    OffsetComparison, StackAnalysis, Verdicts,
};
