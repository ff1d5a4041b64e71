//! Command-line definitions and dispatch.

use crate::experiments::{self, ExperimentName, GradientConfig, OffsetConfig, TrainingConfig};
use crate::figures::{self, FigureId};
use crate::output::{Format, OutputDir};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::{Path, PathBuf};
use upsample_lab::artifacts::{analyze_stack, AnalysisConfig, ArtifactReport};
use upsample_lab::spectral::StftConfig;
use upsample_lab::{Execution, Stack, StackSpec};

/// Exit status when the analysis finds tonal artifacts.
pub const EXIT_TONAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "upsample-lab",
    version,
    about = "Upsampling layers and their spectral artifacts"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "UPSAMPLE_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 2048)]
    pub nfft: usize,
    #[arg(long, global = true, default_value_t = 512)]
    pub hop: usize,
    /// Center frames on their timestamps (reflect padding).
    #[arg(long, global = true)]
    pub center: bool,
    /// Minimum prominence of a tonal peak, in dB.
    #[arg(
        long = "prominence-db",
        global = true,
        default_value_t = 10.0,
        allow_negative_numbers = true
    )]
    pub prominence_db: f64,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reproduce one figure as spectrogram data and a report.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
    },
    /// Run a stack on a WAV file and report its artifacts.
    Analyze {
        input: PathBuf,
        /// Stack description (JSON).
        #[arg(long)]
        stack: PathBuf,
        /// Little-endian f64 weights; the stack is initialized from its seed otherwise.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Also write the spectrogram of every layer.
        #[arg(long)]
        spectrograms: bool,
    },
    /// Run a named experiment.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
        /// JSON configuration; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Critic stride (gradient experiment).
        #[arg(long)]
        stride: Option<usize>,
        /// Optimizer steps (training experiment).
        #[arg(long)]
        steps: Option<usize>,
        /// Learning rate (training experiment).
        #[arg(long)]
        lr: Option<f64>,
    },
}

impl GlobalArgs {
    pub fn analysis(&self) -> Result<AnalysisConfig> {
        let cfg = AnalysisConfig {
            stft: StftConfig {
                n_fft: self.nfft,
                hop: self.hop,
                center: self.center,
                ..StftConfig::default()
            },
            min_prominence_db: self.prominence_db,
            ..AnalysisConfig::default()
        };
        cfg.stft.validate()?;
        anyhow::ensure!(self.prominence_db.is_finite(), "prominence must be finite");
        anyhow::ensure!(self.jobs >= 1, "--jobs must be at least 1");
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        if self.jobs > 1 {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
        }
    }
}

#[derive(Serialize)]
struct HashedConfig<'a, T: Serialize> {
    analysis: &'a AnalysisConfig,
    command: T,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    let analysis = g.analysis()?;
    let exec = g.execution();
    with_pool(g.jobs, || dispatch(&cli, &analysis, exec))
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs <= 1 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T: Send>(_jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    f()
}

fn dispatch(cli: &Cli, analysis: &AnalysisConfig, exec: Execution) -> Result<i32> {
    let g = &cli.global;
    let mut out = OutputDir::create(&g.out, g.format)?;
    match &cli.command {
        Command::Figure { id } => {
            figures::run_figure(*id, g.seed, analysis, exec, &mut out)?;
            let cfg = HashedConfig {
                analysis,
                command: serde_json::json!({"figure": id, "format": g.format}),
            };
            out.finish(
                &format!("figure {}", id.name()),
                g.seed,
                serde_json::to_value(cfg)?,
            )?;
            Ok(0)
        }
        Command::Analyze {
            input,
            stack,
            weights,
            spectrograms,
        } => {
            out.record_input(input)?;
            out.record_input(stack)?;
            let spec_text = std::fs::read_to_string(stack)
                .with_context(|| format!("cannot read stack {}", stack.display()))?;
            let spec = StackSpec::from_json(&spec_text)
                .with_context(|| format!("invalid stack {}", stack.display()))?;
            let model = match weights {
                Some(w) => {
                    out.record_input(w)?;
                    let blob = std::fs::read(w)
                        .with_context(|| format!("cannot read weights {}", w.display()))?;
                    Stack::from_weight_blob(spec.clone(), &blob)?
                }
                None => Stack::build(spec.clone())?,
            };
            let x = upsample_lab::io::read_wav(input)
                .with_context(|| format!("cannot read WAV {}", input.display()))?;
            let result = analyze_stack(&x, &model, analysis, exec)?;
            if *spectrograms {
                let mut k_spec = result.spectrograms.iter();
                for (k, y) in result.outputs.iter().enumerate() {
                    if analysis.stft.center || y.time() >= analysis.stft.n_fft {
                        let s = k_spec.next().expect("one spectrogram per long output");
                        out.write_spectrogram(&format!("layer{k}"), s)?;
                    }
                }
            }
            out.write_json("report.json", &result.report)?;
            let cfg = HashedConfig {
                analysis,
                command: serde_json::json!({"analyze": spec, "spectrograms": spectrograms}),
            };
            out.finish("analyze", g.seed, serde_json::to_value(cfg)?)?;
            println!("{}", result.report.to_json()?);
            Ok(exit_code(&result.report))
        }
        Command::Experiment {
            name,
            config,
            stride,
            steps,
            lr,
        } => {
            let config = config.as_deref();
            let value = match name {
                ExperimentName::Offset => {
                    let cfg: OffsetConfig = read_config(config)?;
                    let summary = experiments::run_offset(&cfg, g.seed, analysis, exec)?;
                    experiments::write_offset(&mut out, &summary)?;
                    serde_json::to_value(HashedConfig {
                        analysis,
                        command: &cfg,
                    })?
                }
                ExperimentName::Gradient => {
                    let mut cfg: GradientConfig = read_config(config)?;
                    if let Some(s) = stride {
                        cfg.stride = *s;
                    }
                    let (result, spec) = experiments::run_gradient(&cfg, g.seed, analysis)?;
                    experiments::write_gradient(&mut out, &result, &spec)?;
                    serde_json::to_value(HashedConfig {
                        analysis,
                        command: &cfg,
                    })?
                }
                ExperimentName::Training => {
                    let mut cfg: TrainingConfig = read_config(config)?;
                    if let Some(s) = steps {
                        cfg.steps = *s;
                    }
                    if let Some(r) = lr {
                        cfg.learning_rate = *r;
                    }
                    let run = experiments::run_training(&cfg, g.seed, analysis, exec)?;
                    experiments::write_training(&mut out, &run)?;
                    serde_json::to_value(HashedConfig {
                        analysis,
                        command: &cfg,
                    })?
                }
            };
            let label = serde_json::to_value(name)?;
            out.finish(
                &format!("experiment {}", label.as_str().unwrap_or("?")),
                g.seed,
                value,
            )?;
            Ok(0)
        }
    }
}

fn exit_code(report: &ArtifactReport) -> i32 {
    if report.verdicts.tonal {
        EXIT_TONAL
    } else {
        0
    }
}
