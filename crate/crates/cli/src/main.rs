//! `trllm`: predict, evaluate, generate data, render and make weights.
//!
//! JSON results go to stdout, logs to stderr. Exit codes: 2 for argument
//! errors, 3 for data errors, 4 for transport errors.

mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use trllm_core::dataset::{bundled_scenarios, write_dataset, DatasetConfig, DEFAULT_SPEED_MPS};
use trllm_core::eval::{
    load_manifest, run_evaluation, Embedder, EvalConfig, HashingEmbedder, Method, RemoteEmbedder, Scenario,
};
use trllm_core::goal::dump::{save_heatmap, stack_from_container, stack_to_container};
use trllm_core::goal::{load_weights, save_weights, unet_forward, GoalPredictorKind, UNetSpec, DEFAULT_BETA};
use trllm_core::llm::{AblationMode, ChatBackend, HeuristicBackend, HttpChatClient, LlmEndpointConfig, ScriptedBackend};
use trllm_core::predict::{predict_scene, Prediction, PredictOptions};
use trllm_core::raster::{rasterize, DEFAULT_SIGMA_PX, EPOCHS};
use trllm_core::render::render_prediction;
use trllm_core::scene::{load_scene, Scene, DEFAULT_EXTENT_M};
use trllm_core::trajectory::Trajectory;

use error::CliError;

#[derive(Parser)]
#[command(name = "trllm", version, about = "Target-object and action prediction from text context and trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank the scene's objects for one scenario and predict the action.
    Predict(PredictArgs),
    /// Run the evaluation grid over a dataset manifest.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset.
    GenData(GenDataArgs),
    /// Render a prediction as a PNG.
    Render(RenderArgs),
    /// Write a seeded random U-Net weight container.
    MakeWeights(MakeWeightsArgs),
    /// Run the U-Net on one input and dump the heatmap (and optionally the
    /// raster stack) for comparison with other implementations.
    Forward(ForwardArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorChoice {
    Unet,
    Geometric,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedderChoice {
    Hashing,
    Remote,
}

#[derive(Args)]
struct LlmArgs {
    /// `heuristic`, or a JSON file mapping prompt hashes to responses.
    #[arg(long, conflicts_with = "llm_endpoint")]
    mock_llm: Option<String>,
    /// Base URL of an OpenAI-compatible API, e.g. http://localhost:11434/v1.
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4o-mini")]
    llm_model: String,
    #[arg(long, default_value_t = 60.0)]
    llm_timeout: f64,
    #[arg(long, default_value_t = 3)]
    llm_retries: u32,
}

impl LlmArgs {
    fn backend(&self) -> Result<(Box<dyn ChatBackend>, String), CliError> {
        match (&self.mock_llm, &self.llm_endpoint) {
            (Some(m), _) if m == "heuristic" => Ok((Box::new(HeuristicBackend), "mock:heuristic".into())),
            (Some(path), _) => Ok((
                Box::new(ScriptedBackend::from_file(Path::new(path)).map_err(|e| CliError::Data(e.to_string()))?),
                format!("mock:script:{}", file_name(path)),
            )),
            (None, Some(url)) => {
                let cfg = self.endpoint_config(url, &self.llm_model);
                let label = format!("{}@{}", cfg.model_name, cfg.base_url);
                Ok((Box::new(HttpChatClient::new(cfg)?), label))
            }
            (None, None) => Err(CliError::Usage("one of --mock-llm or --llm-endpoint is required".into())),
        }
    }

    fn endpoint_config(&self, url: &str, model: &str) -> LlmEndpointConfig {
        LlmEndpointConfig {
            base_url: url.to_string(),
            model_name: model.to_string(),
            timeout_secs: self.llm_timeout,
            max_retries: self.llm_retries,
            ..LlmEndpointConfig::default()
        }
    }
}

fn file_name(path: &str) -> String {
    Path::new(path)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

#[derive(Args)]
struct PredictorArgs {
    #[arg(long, value_enum, default_value = "geometric")]
    predictor: PredictorChoice,
    /// Weight container; required with `--predictor unet`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Detour penalty per meter for the geometric predictor.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
}

impl PredictorArgs {
    fn check(&self) -> Result<(), CliError> {
        if matches!(self.predictor, PredictorChoice::Unet) && self.weights.is_none() {
            return Err(CliError::Usage("--predictor unet needs --weights".into()));
        }
        Ok(())
    }

    fn build(&self) -> Result<GoalPredictorKind, CliError> {
        self.check()?;
        match self.predictor {
            PredictorChoice::Unet => {
                let weights = load_weights(self.weights.as_deref().expect("checked"))?;
                let spec = UNetSpec::infer(&weights)?;
                Ok(GoalPredictorKind::unet(spec, weights)?)
            }
            PredictorChoice::Geometric => {
                GoalPredictorKind::geometric(self.beta).map_err(|e| CliError::Usage(e.to_string()))
            }
            PredictorChoice::Uniform => Ok(GoalPredictorKind::Uniform),
        }
    }
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long, default_value = "fused")]
    method: Method,
    #[command(flatten)]
    predictor: PredictorArgs,
    /// Observe the trajectory only up to this progress distance (meters).
    #[arg(long)]
    d_min: Option<f64>,
    #[arg(long, default_value = "all")]
    ablation: AblationMode,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[command(flatten)]
    llm: LlmArgs,
}

impl PredictArgs {
    fn run(&self) -> Result<(Scene, Scenario, Prediction, PredictOptions), CliError> {
        self.predictor.check()?;
        if let Some(d) = self.d_min {
            if !(d.is_finite() && d >= 0.0) {
                return Err(CliError::Usage(format!("--d-min must be non-negative, got {d}")));
            }
        }
        let (chat, _) = self.llm.backend()?;
        let predictor = self.predictor.build()?;
        let scene = load_scene(&self.scene)?;
        let scenario = Scenario::load(&self.scenario)?;
        let traj = Trajectory::load_csv(&self.trajectory)?;
        let opts = PredictOptions {
            method: self.method,
            ablation: self.ablation,
            d_min_m: self.d_min,
            k: self.k as usize,
            ..PredictOptions::default()
        };
        let prediction = predict_scene(&scene, &scenario, &traj, &predictor, chat.as_ref(), &opts)?;
        Ok((scene, scenario, prediction, opts))
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "llm,trajectory,fused")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "all,wo_conv,wo_conv_hist")]
    ablations: Vec<AblationMode>,
    /// Progress thresholds in meters, ascending.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pairs evaluated concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    #[command(flatten)]
    llm: LlmArgs,
    #[arg(long, value_enum, default_value = "hashing")]
    embedder: EmbedderChoice,
    /// Base URL for `--embedder remote`; defaults to `--llm-endpoint`.
    #[arg(long)]
    embed_endpoint: Option<String>,
    #[arg(long, default_value = "text-embedding-3-small")]
    embed_model: String,
}

impl EvaluateArgs {
    fn embedder(&self) -> Result<Box<dyn Embedder>, CliError> {
        match self.embedder {
            EmbedderChoice::Hashing => Ok(Box::new(HashingEmbedder::default())),
            EmbedderChoice::Remote => {
                let url = self
                    .embed_endpoint
                    .as_ref()
                    .or(self.llm.llm_endpoint.as_ref())
                    .ok_or_else(|| CliError::Usage("--embedder remote needs --embed-endpoint".into()))?;
                Ok(Box::new(RemoteEmbedder::new(self.llm.endpoint_config(url, &self.embed_model))?))
            }
        }
    }

    fn run(&self) -> Result<serde_json::Value, CliError> {
        self.predictor.check()?;
        let (chat, llm_backend) = self.llm.backend()?;
        let embedder = self.embedder()?;
        let cfg = EvalConfig {
            methods: self.methods.clone(),
            ablations: self.ablations.clone(),
            d_thresholds_m: self.thresholds.clone(),
            trials: self.trials as usize,
            k: self.k as usize,
            predictor: self.predictor.build()?,
            seed: self.seed,
            jobs: self.jobs as usize,
            llm_backend,
            ..EvalConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let pairs = load_manifest(&self.manifest)?;
        if pairs.is_empty() {
            return Err(CliError::Data(format!("{} lists no pairs", self.manifest.display())));
        }
        let report = run_evaluation(&pairs, &cfg, chat.as_ref(), embedder.as_ref())?;
        fs::create_dir_all(&self.out).map_err(|e| CliError::Data(format!("{}: {e}", self.out.display())))?;
        report.write_files(&self.out)?;
        eprint!("{}", report.to_text());
        let invalid: usize = report.cells.iter().map(|c| c.stats.invalid_observations).sum();
        Ok(json!({
            "report_json": self.out.join("report.json"),
            "report_txt": self.out.join("report.txt"),
            "pairs": pairs.len(),
            "cells": report.cells.len(),
            "invalid_observations": invalid,
        }))
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    scenes: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    rooms: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    objects: u64,
    #[arg(long, default_value_t = DEFAULT_SPEED_MPS)]
    speed: f64,
    /// JSON list of scenarios; defaults to the eight bundled ones.
    #[arg(long)]
    scenarios: Option<PathBuf>,
}

impl GenDataArgs {
    fn run(&self) -> Result<serde_json::Value, CliError> {
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(CliError::Usage(format!("--speed must be positive, got {}", self.speed)));
        }
        let scenarios = match &self.scenarios {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<Vec<Scenario>>(&text)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
            }
            None => bundled_scenarios(),
        };
        let cfg = DatasetConfig {
            seed: self.seed,
            scenes: self.scenes as usize,
            rooms: self.rooms as usize,
            objects: self.objects as usize,
            speed_mps: self.speed,
        };
        let summary = write_dataset(&self.out, &cfg, &scenarios)?;
        Ok(json!({
            "out": self.out,
            "manifest": self.out.join("manifest.json"),
            "summary": summary,
        }))
    }
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    predict: PredictArgs,
    #[arg(long)]
    out: PathBuf,
    /// Output pixels per grid cell.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=8))]
    scale: u32,
}

#[derive(Args)]
struct MakeWeightsArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Values are uniform in (-scale, scale).
    #[arg(long, default_value_t = 0.05)]
    scale: f32,
    /// Five encoder widths; defaults to the full network.
    #[arg(long, value_delimiter = ',')]
    encoder: Option<Vec<usize>>,
    /// Five decoder widths; defaults to the full network.
    #[arg(long, value_delimiter = ',')]
    decoder: Option<Vec<usize>>,
}

impl MakeWeightsArgs {
    fn run(&self) -> Result<serde_json::Value, CliError> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CliError::Usage(format!("--scale must be positive, got {}", self.scale)));
        }
        let widths = |v: &Option<Vec<usize>>, default: [usize; 5], flag: &str| -> Result<[usize; 5], CliError> {
            match v {
                None => Ok(default),
                Some(v) if v.len() == 5 && v.iter().all(|&w| w > 0) => Ok([v[0], v[1], v[2], v[3], v[4]]),
                Some(_) => Err(CliError::Usage(format!("--{flag} takes five positive widths"))),
            }
        };
        let full = UNetSpec::default();
        let spec = UNetSpec::with_widths(
            widths(&self.encoder, full.encoder_channels, "encoder")?,
            widths(&self.decoder, full.decoder_channels, "decoder")?,
        );
        let weights = spec.random_weights(self.seed, self.scale);
        save_weights(&weights, &self.out)?;
        let params: usize = weights.tensors().iter().map(|t| t.data.len()).sum();
        info!("wrote {} tensors, {params} parameters", weights.tensors().len());
        Ok(json!({
            "out": self.out,
            "tensors": weights.tensors().len(),
            "parameters": params,
            "encoder": spec.encoder_channels,
            "decoder": spec.decoder_channels,
        }))
    }
}

#[derive(Args)]
struct ForwardArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Precomputed raster stack container; replaces `--scene`/`--trajectory`.
    #[arg(long, conflicts_with_all = ["scene", "trajectory"])]
    stack: Option<PathBuf>,
    #[arg(long, requires = "trajectory")]
    scene: Option<PathBuf>,
    #[arg(long, requires = "scene")]
    trajectory: Option<PathBuf>,
    /// Physical side length of the grid when reading `--stack`.
    #[arg(long, default_value_t = DEFAULT_EXTENT_M)]
    extent: f64,
    /// Heatmap dump (TRLH).
    #[arg(long)]
    out: PathBuf,
    /// Also write the raster stack fed to the network.
    #[arg(long)]
    stack_out: Option<PathBuf>,
}

impl ForwardArgs {
    fn run(&self) -> Result<serde_json::Value, CliError> {
        let stack = match (&self.stack, &self.scene, &self.trajectory) {
            (Some(path), _, _) => stack_from_container(&load_weights(path)?, self.extent)?,
            (None, Some(scene), Some(traj)) => {
                let scene = load_scene(scene)?;
                let traj = Trajectory::load_csv(traj)?;
                rasterize(&traj.resample_to_epochs(EPOCHS), &scene.map, DEFAULT_SIGMA_PX)?
            }
            _ => return Err(CliError::Usage("give --stack, or --scene with --trajectory".into())),
        };
        if let Some(path) = &self.stack_out {
            save_weights(&stack_to_container(&stack), path)?;
        }
        let weights = load_weights(&self.weights)?;
        let spec = UNetSpec::infer(&weights)?;
        let heatmap = unet_forward(&spec, &weights, &stack)?;
        save_heatmap(&heatmap, &self.out)?;
        let (lo, hi) = heatmap
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Ok(json!({
            "out": self.out,
            "stack_out": self.stack_out,
            "height": heatmap.geometry.height_px,
            "width": heatmap.geometry.width_px,
            "min": lo,
            "max": hi,
        }))
    }
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::Predict(args) => {
            let (scene, scenario, prediction, opts) = args.run()?;
            Ok(serde_json::to_value(prediction.summary(&scene, &scenario, &opts)).expect("summary serializes"))
        }
        Command::Evaluate(args) => args.run(),
        Command::GenData(args) => args.run(),
        Command::Render(args) => {
            let (scene, scenario, prediction, opts) = args.predict.run()?;
            render_prediction(
                &scene,
                &prediction.observed,
                &prediction.heatmap,
                &prediction.probs,
                args.scale,
                &args.out,
            )?;
            Ok(json!({
                "out": args.out,
                "prediction": prediction.summary(&scene, &scenario, &opts),
            }))
        }
        Command::MakeWeights(args) => args.run(),
        Command::Forward(args) => args.run(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("JSON output");
            // A closed stdout (e.g. piped into `head`) is not an error.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
