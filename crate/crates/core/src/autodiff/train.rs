//! Toy L1 training of an upsampling stack on band-limited sinusoids.

use super::graph::record_stack;
use super::tape::Tape;
use crate::artifacts::{analyze, AnalysisConfig, ArtifactReport};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::layer::{apply_stack, LayerKind, Stack};
use crate::rng::{derive_seed, Prng};
use crate::signal::Signal;
use crate::synth;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    /// Seeds the held-out noise used for the before/after reports.
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Length of the held-out noise, in input samples.
    pub eval_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            learning_rate: 2e-4,
            loss: LossKind::L1,
            seed: 0,
            optimizer: Optimizer::default(),
            eval_len: 8192,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero rate is accepted: it is the frozen-parameter control run.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::InvalidParameter(
                    "Adam betas must lie in [0,1), epsilon > 0".into(),
                ));
            }
        }
        if self.eval_len == 0 {
            return Err(Error::InvalidParameter("eval_len must be positive".into()));
        }
        Ok(())
    }
}

/// One training pair: a stack input and its ideal output.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Signal,
    pub target: Signal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub stack: Stack,
    /// Loss before each update, followed by the loss after the last one.
    pub losses: Vec<LossPoint>,
    pub pre: ArtifactReport,
    pub post: ArtifactReport,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.losses.first().map_or(f64::NAN, |p| p.loss)
    }

    pub fn final_loss(&self) -> f64 {
        self.losses.last().map_or(f64::NAN, |p| p.loss)
    }

    /// `step,loss` rows with a header line.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for p in &self.losses {
            s.push_str(&format!("{},{}\n", p.step, p.loss));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyDataConfig {
    pub examples: usize,
    /// Input length in samples at the stack's input rate.
    pub input_len: usize,
    pub max_components: usize,
    /// Component frequencies are drawn in this band, as fractions of the input rate.
    pub band: (f64, f64),
    pub seed: u64,
}

impl Default for ToyDataConfig {
    fn default() -> Self {
        Self {
            examples: 8,
            input_len: 256,
            max_components: 3,
            band: (0.02, 0.35),
            seed: 0,
        }
    }
}

/// Where a stack places a feature of its input, in output samples, assuming
/// every kernel is centered on its middle tap.
pub fn nominal_delay(stack: &Stack) -> f64 {
    let mut d = 0.0;
    for layer in stack.layers() {
        let s = &layer.spec;
        let half = (s.length as f64 - 1.0) / 2.0;
        let hold = (s.factor as f64 - 1.0) / 2.0;
        d = match s.kind {
            LayerKind::TransposedConv => d * s.stride as f64 + half,
            LayerKind::PlainConv => (d - half) / s.stride as f64,
            LayerKind::NearestUpsample => d * s.factor as f64 + hold,
            LayerKind::LinearUpsample => d * s.factor as f64,
            LayerKind::InterpPlusConv => {
                let interp = match s.interp.unwrap_or(crate::ops::InterpMode::Nearest) {
                    crate::ops::InterpMode::Nearest => hold,
                    crate::ops::InterpMode::Linear => 0.0,
                };
                d * s.factor as f64 + interp - half
            }
            LayerKind::SubpixelConv => (d - half) * s.factor as f64 + hold,
        };
    }
    d
}

/// Sinusoid mixtures at the input rate paired with the same mixtures
/// rendered analytically at the output rate, shifted by [`nominal_delay`].
pub fn toy_dataset(stack: &Stack, cfg: &ToyDataConfig) -> Result<Vec<Example>> {
    if cfg.examples == 0 || cfg.input_len == 0 || cfg.max_components == 0 {
        return Err(Error::InvalidParameter(
            "toy dataset needs examples, samples and components".into(),
        ));
    }
    let (lo, hi) = cfg.band;
    if !(0.0 < lo && lo < hi && hi < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "band {lo}..{hi} is not inside (0, 0.5)"
        )));
    }
    if stack.spec().input_channels != 1 {
        return Err(Error::Shape("toy dataset is mono".into()));
    }
    let rate_in = stack.input_rate();
    let rate_out = stack.output_rate();
    let delay = nominal_delay(stack);
    let probe = Signal::zeros(1, cfg.input_len, rate_in)?;
    let out = apply_stack(&probe, stack)?;
    let out = out.last().expect("non-empty");
    if out.channels() != 1 {
        return Err(Error::Shape("toy dataset needs a mono stack output".into()));
    }
    let out_len = out.time();
    (0..cfg.examples)
        .map(|i| {
            let mut rng = Prng::new(derive_seed(cfg.seed, i as u64));
            let n = 1 + (rng.next_u64() % cfg.max_components as u64) as usize;
            let comps: Vec<(f64, f64, f64)> = (0..n)
                .map(|_| {
                    let f = rng.uniform(lo, hi) * rate_in as f64;
                    let a = rng.uniform(0.2, 1.0) / n as f64;
                    let p = rng.uniform(0.0, TAU);
                    (f, a, p)
                })
                .collect();
            Ok(Example {
                input: synth::sines(&comps, cfg.input_len, rate_in, 0.0)?,
                target: synth::sines(&comps, out_len, rate_out, delay)?,
            })
        })
        .collect()
}

fn held_out_noise(stack: &Stack, cfg: &TrainConfig) -> Result<Signal> {
    let rows = (0..stack.spec().input_channels)
        .map(|c| {
            synth::white_noise(
                cfg.eval_len,
                stack.input_rate(),
                derive_seed(cfg.seed, c as u64),
            )
            .map(Signal::into_samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Signal::from_channels(rows, stack.input_rate())
}

/// Flattened copy of every trainable value: per layer weights then bias.
fn gather(stack: &Stack) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in stack.layers().iter().filter_map(|l| l.kernel.as_ref()) {
        out.push(k.weights().to_vec());
        if let Some(b) = k.bias() {
            out.push(b.to_vec());
        }
    }
    out
}

fn scatter(stack: &mut Stack, params: &[Vec<f64>]) {
    let mut it = params.iter();
    for k in stack
        .layers_mut()
        .iter_mut()
        .filter_map(|l| l.kernel.as_mut())
    {
        k.weights_mut()
            .copy_from_slice(it.next().expect("weights slot"));
        if let Some(b) = k.bias_mut() {
            b.copy_from_slice(it.next().expect("bias slot"));
        }
    }
}

/// Mean L1 loss over the dataset and its gradient, in [`gather`] order.
fn loss_and_grad(stack: &Stack, data: &[Example], exec: Execution) -> Result<(f64, Vec<Vec<f64>>)> {
    let per_example = exec.try_map(data.len(), |i| -> Result<(f64, Vec<Vec<f64>>)> {
        let ex = &data[i];
        let mut tape = Tape::new();
        let rec = record_stack(&mut tape, stack, &ex.input)?;
        let loss = tape.l1_loss(rec.output(), &ex.target)?;
        let grads = tape.backward(loss)?;
        let mut flat = Vec::new();
        for lp in &rec.params {
            for id in lp.weights.iter().chain(lp.bias.iter()) {
                flat.push(grads.param(*id).to_vec());
            }
        }
        Ok((tape.value(loss).samples()[0], flat))
    })?;
    let n = data.len() as f64;
    let mut total = 0.0;
    let mut acc: Vec<Vec<f64>> = gather(stack).iter().map(|p| vec![0.0; p.len()]).collect();
    for (loss, grads) in per_example {
        total += loss;
        for (a, g) in acc.iter_mut().zip(grads) {
            a.iter_mut().zip(g).for_each(|(a, g)| *a += g);
        }
    }
    for a in &mut acc {
        a.iter_mut().for_each(|v| *v /= n);
    }
    Ok((total / n, acc))
}

/// Trains every kernel and bias of `stack` to map inputs onto targets.
///
/// Interpolation layers stay fixed; only convolution kernels and biases are
/// updated. Examples are evaluated in parallel and reduced in index order,
/// so results do not depend on the thread count.
pub fn train_toy(
    stack: &Stack,
    data: &[Example],
    cfg: &TrainConfig,
    analysis: &AnalysisConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training dataset is empty".into()));
    }
    let noise = held_out_noise(stack, cfg)?;
    let pre = analyze(&noise, stack, analysis)?;

    let mut model = stack.clone();
    let mut params = gather(&model);
    let mut m: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut v = m.clone();
    let mut losses = Vec::with_capacity(cfg.steps + 1);

    for step in 0..=cfg.steps {
        let (loss, grads) = loss_and_grad(&model, data, exec)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        losses.push(LossPoint { step, loss });
        if step == cfg.steps {
            break;
        }
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(&grads) {
                    p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = (step + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(&grads).zip(&mut m).zip(&mut v) {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p[i] -= lr * mh / (vh.sqrt() + epsilon);
                    }
                }
            }
        }
        scatter(&mut model, &params);
    }

    let post = analyze(&noise, &model, analysis)?;
    Ok(TrainOutcome {
        stack: model,
        losses,
        pre,
        post,
    })
}
