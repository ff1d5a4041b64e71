//! One job per figure: a set of panels, each a stack applied to an
//! input, written as per-layer spectrograms plus an artifact report.

use crate::output::OutputDir;
use crate::recipes::{self, FIGURE_RATE};
use anyhow::Result;
use serde::Serialize;
use std::collections::BTreeMap;
use upsample_lab::artifacts::{AnalysisConfig, ArtifactReport};
use upsample_lab::ops::InterpMode;
use upsample_lab::spectral::{signal_spectrogram_with, Spectrogram};
use upsample_lab::{apply_stack, synth, Execution, LayerSpec, Signal, Stack, StackSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
}

impl FigureId {
    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::Fig9 => "fig9",
            FigureId::Fig10 => "fig10",
        }
    }
}

/// Samples of every long figure input (one second at 4 kHz).
pub const INPUT_LEN: usize = 4096;

/// A stack applied to one input.
pub struct Panel {
    pub name: String,
    pub input_label: &'static str,
    pub stack: Stack,
    pub input: Signal,
    /// Overrides the frame-centering flag of the analysis.
    pub center: Option<bool>,
    /// Short input whose exact output is written as a vector.
    pub vector_input: Option<Signal>,
}

impl Panel {
    fn new(
        name: impl Into<String>,
        input_label: &'static str,
        stack: Stack,
        input: Signal,
    ) -> Self {
        Self {
            name: name.into(),
            input_label,
            stack,
            input,
            center: None,
            vector_input: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelReport {
    pub input: &'static str,
    pub stack: StackSpec,
    /// Exact output for the short vector input, when the figure has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    /// Layer indices (0 is the input) that were long enough to analyze.
    pub spectrogram_layers: Vec<usize>,
    pub report: ArtifactReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureReport {
    pub figure: FigureId,
    pub description: &'static str,
    pub panels: BTreeMap<String, PanelReport>,
}

fn ones_long() -> Result<Signal> {
    Ok(synth::ones(INPUT_LEN, FIGURE_RATE)?)
}

fn ones_short(n: usize) -> Result<Signal> {
    Ok(synth::ones(n, FIGURE_RATE)?)
}

fn spec(seed: u64, layers: Vec<LayerSpec>) -> StackSpec {
    StackSpec::new(FIGURE_RATE, seed, layers)
}

/// Single transposed layer with explicit taps, for the golden-vector figures.
fn explicit_transposed(taps: &[f64], stride: usize) -> Result<Stack> {
    let blob: Vec<u8> = taps.iter().flat_map(|v| v.to_le_bytes()).collect();
    Ok(Stack::from_weight_blob(
        spec(0, vec![LayerSpec::transposed(taps.len(), stride)]),
        &blob,
    )?)
}

fn vector_panel(name: &str, stack: Stack, short_len: usize) -> Result<Panel> {
    let mut p = Panel::new(name, "ones", stack, ones_long()?);
    p.vector_input = Some(ones_short(short_len)?);
    Ok(p)
}

pub fn description(id: FigureId) -> &'static str {
    match id {
        FigureId::Fig2 => "transposed convolution, length=stride=3, taps [1,2,3], ones input: the taps tile without overlap",
        FigureId::Fig3 => "transposed convolution, length=3, stride=2, all-ones taps, ones input: partial overlap",
        FigureId::Fig4 => "transposed convolution, length=3, stride=1, all-ones taps, ones input: full overlap with border ramps",
        FigureId::Fig5 => "transposed convolutions on ones: partial (3,2) and full (4,2) overlap, constant and random taps",
        FigureId::Fig6 => "three layers of nearest or linear interpolation x2 + convolution (length 9), synthetic harmonic signal and white noise at 4 kHz; the harmonic signal stands in for a music excerpt",
        FigureId::Fig7 => "three subpixel layers (convolution length 3 + periodic shuffle x2), ones and white noise at 4 kHz",
        FigureId::Fig8 => "three transposed layers (length 4, stride 2) and three linear x2 layers without convolutions, ones and white noise at 4 kHz",
        FigureId::Fig9 => "offset experiment pair: transposed (8,4) and subpixel x4 stacks with random biases and a first-layer ReLU, versus the same stacks without both, white noise",
        FigureId::Fig10 => "three transposed layers (length 4, stride 2) on ones, analyzed with center=false and center=true",
    }
}

/// Builds the panels of a figure. All randomness derives from `seed`.
pub fn panels(id: FigureId, seed: u64) -> Result<Vec<Panel>> {
    let noise = || recipes::noise(INPUT_LEN, seed, 1);
    let p = match id {
        FigureId::Fig2 => vec![vector_panel(
            "ones",
            explicit_transposed(&[1.0, 2.0, 3.0], 3)?,
            4,
        )?],
        FigureId::Fig3 => vec![vector_panel(
            "ones",
            Stack::build(spec(0, vec![recipes::constant_transposed(3, 2, 1.0)]))?,
            4,
        )?],
        FigureId::Fig4 => vec![vector_panel(
            "ones",
            Stack::build(spec(0, vec![recipes::constant_transposed(3, 1, 1.0)]))?,
            5,
        )?],
        FigureId::Fig5 => vec![
            vector_panel(
                "partial_constant",
                Stack::build(spec(seed, vec![recipes::constant_transposed(3, 2, 1.0)]))?,
                8,
            )?,
            vector_panel(
                "partial_random",
                Stack::build(spec(seed, vec![LayerSpec::transposed(3, 2)]))?,
                8,
            )?,
            vector_panel(
                "full_constant",
                Stack::build(spec(seed, vec![recipes::constant_transposed(4, 2, 1.0)]))?,
                8,
            )?,
            vector_panel(
                "full_random",
                Stack::build(spec(seed, vec![LayerSpec::transposed(4, 2)]))?,
                8,
            )?,
        ],
        FigureId::Fig6 => {
            let mut out = Vec::new();
            for (mode, label) in [
                (InterpMode::Nearest, "nearest"),
                (InterpMode::Linear, "linear"),
            ] {
                let stack =
                    Stack::build(spec(seed, vec![LayerSpec::interp_plus_conv(mode, 2, 9); 3]))?;
                out.push(Panel::new(
                    format!("{label}_music"),
                    "synthetic harmonic signal",
                    stack.clone(),
                    recipes::music(INPUT_LEN, seed)?,
                ));
                out.push(Panel::new(
                    format!("{label}_noise"),
                    "white noise",
                    stack,
                    noise()?,
                ));
            }
            out
        }
        FigureId::Fig7 => {
            let stack = Stack::build(spec(seed, vec![LayerSpec::subpixel(2, 3); 3]))?;
            vec![
                Panel::new("ones", "ones", stack.clone(), ones_long()?),
                Panel::new("noise", "white noise", stack, noise()?),
            ]
        }
        FigureId::Fig8 => {
            let transposed = Stack::build(spec(seed, vec![LayerSpec::transposed(4, 2); 3]))?;
            let linear = recipes::interpolation_stack(InterpMode::Linear)?;
            vec![
                Panel::new("transposed_ones", "ones", transposed.clone(), ones_long()?),
                Panel::new("transposed_noise", "white noise", transposed, noise()?),
                Panel::new("linear_ones", "ones", linear.clone(), ones_long()?),
                Panel::new("linear_noise", "white noise", linear, noise()?),
            ]
        }
        FigureId::Fig9 => {
            let (with_t, without_t) = recipes::offset_pair(seed, 3, 8, 4)?;
            let sub = |offset: bool| -> Result<Stack> {
                let layers = (0..3)
                    .map(|i| {
                        let l = LayerSpec::subpixel(4, 3);
                        match (offset, i) {
                            (false, _) => l,
                            (true, 0) => l
                                .with_bias(None)
                                .with_activation(upsample_lab::Activation::Relu),
                            (true, _) => l.with_bias(None),
                        }
                    })
                    .collect();
                Ok(Stack::build(spec(seed, layers))?)
            };
            vec![
                Panel::new("transposed_original", "white noise", with_t, noise()?),
                Panel::new("transposed_modified", "white noise", without_t, noise()?),
                Panel::new("subpixel_original", "white noise", sub(true)?, noise()?),
                Panel::new("subpixel_modified", "white noise", sub(false)?, noise()?),
            ]
        }
        FigureId::Fig10 => {
            let stack = Stack::build(spec(seed, vec![LayerSpec::transposed(4, 2); 3]))?;
            let mut left = Panel::new("center_false", "ones", stack.clone(), ones_long()?);
            left.center = Some(false);
            let mut right = Panel::new("center_true", "ones", stack, ones_long()?);
            right.center = Some(true);
            vec![left, right]
        }
    };
    Ok(p)
}

struct PanelOutput {
    spectrograms: Vec<(usize, Spectrogram)>,
    report: PanelReport,
}

fn run_panel(panel: &Panel, cfg: &AnalysisConfig, exec: Execution) -> Result<PanelOutput> {
    let mut cfg = *cfg;
    if let Some(c) = panel.center {
        cfg.stft.center = c;
    }
    let outputs = apply_stack(&panel.input, &panel.stack)?;
    let mut spectrograms = Vec::new();
    for (k, y) in outputs.iter().enumerate() {
        if cfg.stft.center || y.time() >= cfg.stft.n_fft {
            spectrograms.push((k, signal_spectrogram_with(y, &cfg.stft, exec)?));
        }
    }
    let last = outputs.len() - 1;
    let final_spec = match spectrograms.last() {
        Some((k, s)) if *k == last => s.clone(),
        _ => anyhow::bail!(
            "panel {}: final output ({} samples) is shorter than one frame",
            panel.name,
            outputs[last].time()
        ),
    };
    let report = ArtifactReport::from_spectrogram(&final_spec, Some(&panel.stack), &cfg)?;
    let vector = match &panel.vector_input {
        Some(v) => Some(
            apply_stack(v, &panel.stack)?
                .last()
                .expect("non-empty")
                .samples()
                .to_vec(),
        ),
        None => None,
    };
    Ok(PanelOutput {
        report: PanelReport {
            input: panel.input_label,
            stack: panel.stack.spec().clone(),
            vector,
            spectrogram_layers: spectrograms.iter().map(|(k, _)| *k).collect(),
            report,
        },
        spectrograms,
    })
}

/// Computes every panel (in parallel under `exec`) and writes
/// `<panel>_layer<k>` spectrograms, `<panel>_vector.csv` where defined,
/// and `report.json`.
pub fn run_figure(
    id: FigureId,
    seed: u64,
    cfg: &AnalysisConfig,
    exec: Execution,
    out: &mut OutputDir,
) -> Result<FigureReport> {
    let panels = panels(id, seed)?;
    let results = exec.map(panels.len(), |i| run_panel(&panels[i], cfg, exec));
    let mut report = FigureReport {
        figure: id,
        description: description(id),
        panels: BTreeMap::new(),
    };
    for (panel, result) in panels.iter().zip(results) {
        let result = result?;
        for (k, s) in &result.spectrograms {
            out.write_spectrogram(&format!("{}_layer{k}", panel.name), s)?;
        }
        if let Some(v) = &result.report.vector {
            let line: Vec<String> = v.iter().map(f64::to_string).collect();
            out.write_text(
                &format!("{}_vector.csv", panel.name),
                &(line.join(",") + "\n"),
            )?;
        }
        report.panels.insert(panel.name.clone(), result.report);
    }
    out.write_json("report.json", &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector_of(id: FigureId) -> Vec<f64> {
        let panels = panels(id, 0).unwrap();
        let p = &panels[0];
        apply_stack(p.vector_input.as_ref().unwrap(), &p.stack)
            .unwrap()
            .last()
            .unwrap()
            .samples()
            .to_vec()
    }

    #[test]
    fn golden_vectors() {
        assert_eq!(
            vector_of(FigureId::Fig2),
            [1., 2., 3., 1., 2., 3., 1., 2., 3., 1., 2., 3.]
        );
        assert_eq!(
            vector_of(FigureId::Fig3),
            [1., 1., 2., 1., 2., 1., 2., 1., 1.]
        );
        assert_eq!(vector_of(FigureId::Fig4), [1., 2., 3., 3., 3., 2., 1.]);
    }

    #[test]
    fn every_figure_has_panels() {
        for id in [
            FigureId::Fig2,
            FigureId::Fig3,
            FigureId::Fig4,
            FigureId::Fig5,
            FigureId::Fig6,
            FigureId::Fig7,
            FigureId::Fig8,
            FigureId::Fig9,
            FigureId::Fig10,
        ] {
            assert!(!panels(id, 1).unwrap().is_empty(), "{}", id.name());
        }
    }
}
