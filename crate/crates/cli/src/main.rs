//! `shindo`: ingest catalogs, train and run the linear intensity models,
//! compute the attenuation-relation baseline, evaluate and render maps.
//!
//! Exit codes: 0 on success, 2 for usage, configuration and input errors,
//! 3 for numeric failures (non-finite loss or values).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "shindo", version, about = "Seismic intensity distribution prediction on a geographic grid")]
struct Cli {
    /// RNG seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// TOML or JSON file whose values override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a catalog, write it time-sorted and optionally a split file.
    Ingest(IngestArgs),
    /// Train a classification or regression model, or sweep the patch size.
    Train(TrainArgs),
    /// Predict the intensity grid for one hypocenter.
    Predict(PredictArgs),
    /// Attenuation-relation baseline grid for one hypocenter or catalog event.
    Gmpe(GmpeArgs),
    /// Score models on a split and print a comparison table.
    Evaluate(EvaluateArgs),
    /// Draw a grid CSV as a PPM image.
    Render(RenderArgs),
    /// Generate a seeded synthetic catalog (and AVS30 grid) for experiments.
    Synth(SynthArgs),
}

/// Grid window; ignored where a model file fixes the grid.
#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct GridArgs {
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    #[arg(long, default_value_t = 30.0)]
    pub lat_min: f64,
    #[arg(long, default_value_t = 46.0)]
    pub lat_max: f64,
    #[arg(long, default_value_t = 128.0)]
    pub lon_min: f64,
    #[arg(long, default_value_t = 146.0)]
    pub lon_max: f64,
    /// mercator | equirectangular
    #[arg(long, default_value = "mercator")]
    pub projection: String,
}

/// Site amplification input for the baseline.
#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct SiteArgs {
    /// AVS30 grid CSV (m/s, 0 = no data).
    #[arg(long)]
    pub avs30: Option<PathBuf>,
    /// Use one AVS30 value everywhere instead of a grid file.
    #[arg(long)]
    pub uniform_avs30: Option<f64>,
    /// slant | epicentral
    #[arg(long, default_value = "slant")]
    pub distance: String,
    /// central | minus | plus (standard deviation of the amplification term)
    #[arg(long, default_value = "central")]
    pub amp_sigma: String,
}

/// Hypocenter given on the command line. Latitude and longitude accept
/// decimal degrees or `deg:min`.
#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct HypocenterArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub lat: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: Option<String>,
    #[arg(long)]
    pub depth: Option<f64>,
    /// JMA magnitude.
    #[arg(long)]
    pub mag: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// auto | jsonl | csv
    #[arg(long, default_value = "auto")]
    pub format: String,
    /// Canonical time-sorted JSONL output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub min_magnitude: f64,
    /// Write a chronological train/validation/test split file.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
    /// Split sizes `train:validation:test`; default is the 1455:227:175 proportions.
    #[arg(long)]
    pub split_sizes: Option<String>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Split file; default is a chronological 1455:227:175-proportioned split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// classification | regression
    #[arg(long, default_value = "classification")]
    pub kind: String,
    /// Patch size (odd); default 17 for classification, 5 for regression.
    #[arg(long)]
    pub k: Option<usize>,
    /// power10-half | identity
    #[arg(long, default_value = "power10-half")]
    pub mag_transform: String,
    #[arg(long, default_value_t = 5.0)]
    pub mag_ref: f64,
    #[arg(long, default_value_t = 100.0)]
    pub depth_scale: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// inverse-frequency | none (classification only)
    #[arg(long, default_value = "inverse-frequency")]
    pub class_weights: String,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    pub early_stop: Option<usize>,
    /// f32 | f64 arithmetic during training (the model file always stores f32).
    #[arg(long, default_value = "f32")]
    pub precision: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Training log CSV; default `<output stem>.log.csv`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Patch-size sweep `start:end:step` (end inclusive); reports validation r per k.
    #[arg(long)]
    pub sweep_k: Option<String>,
    /// CSV of the sweep results.
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct PredictArgs {
    /// regression | classification | hybrid | gmpe
    #[arg(long, default_value = "hybrid")]
    pub mode: String,
    /// Model file for regression or classification mode.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Regression model (hybrid mode).
    #[arg(long)]
    pub reg_model: Option<PathBuf>,
    /// Classification model (hybrid mode).
    #[arg(long)]
    pub cls_model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hypocenter: HypocenterArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub site: SiteArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    /// Grid CSV output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also render the prediction to this PPM file.
    #[arg(long)]
    pub render: Option<PathBuf>,
    /// grayscale | classes
    #[arg(long, default_value = "grayscale")]
    pub palette: String,
    #[arg(long, default_value_t = 8)]
    pub block: usize,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct GmpeArgs {
    /// Catalog holding `--event`.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Event id to take the hypocenter from.
    #[arg(long)]
    pub event: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub hypocenter: HypocenterArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub site: SiteArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Split file; default is a chronological 1455:227:175-proportioned split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// train | validation | test
    #[arg(long, default_value = "test")]
    pub part: String,
    #[arg(long)]
    pub reg_model: Option<PathBuf>,
    #[arg(long)]
    pub cls_model: Option<PathBuf>,
    /// Comma-separated subset of gmpe,classification,regression,hybrid;
    /// default is every model the given artifacts allow.
    #[arg(long)]
    pub models: Option<String>,
    /// Score the observations against themselves.
    #[arg(long)]
    pub self_test: bool,
    /// Metrics JSON, keyed by model.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// `pred_class,true_class` per evaluated cell; with several models one
    /// file per model, named `<stem>.<model>.csv`.
    #[arg(long)]
    pub dump_pairs: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub site: SiteArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct RenderArgs {
    /// Grid CSV to draw.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// grayscale | classes
    #[arg(long, default_value = "grayscale")]
    pub palette: String,
    /// Pixels per cell side.
    #[arg(long, default_value_t = 8)]
    pub block: usize,
    /// Epicenter marker `lat,lon` (decimal or deg:min each).
    #[arg(long, allow_hyphen_values = true)]
    pub epicenter: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Serialize, Deserialize, Clone, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub events: usize,
    #[arg(long, default_value_t = 400)]
    pub stations: usize,
    /// Catalog JSONL output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write a seeded AVS30 grid CSV.
    #[arg(long)]
    pub avs30_out: Option<PathBuf>,
    /// Also write a chronological 1455:227:175-proportioned split.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridArgs,
}

/// Settings shared by every subcommand after config merging.
pub struct Context {
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GlobalArgs {
    seed: u64,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => Default::default(),
    };
    macro_rules! merged {
        ($args:expr, $section:literal) => {{
            let args = config::apply(&$args, &cfg, $section)?;
            let global = config::apply(&GlobalArgs { seed: cli.seed }, &strip_sections(&cfg, $section), "")?;
            (args, Context { seed: global.seed })
        }};
    }
    match cli.command {
        Command::Ingest(a) => {
            let (a, ctx) = merged!(a, "ingest");
            commands::ingest(&a, &ctx)
        }
        Command::Train(a) => {
            let (a, ctx) = merged!(a, "train");
            commands::train(&a, &ctx)
        }
        Command::Predict(a) => {
            let (a, ctx) = merged!(a, "predict");
            commands::predict(&a, &ctx)
        }
        Command::Gmpe(a) => {
            let (a, ctx) = merged!(a, "gmpe");
            commands::gmpe(&a, &ctx)
        }
        Command::Evaluate(a) => {
            let (a, ctx) = merged!(a, "evaluate");
            commands::evaluate(&a, &ctx)
        }
        Command::Render(a) => {
            let (a, ctx) = merged!(a, "render");
            commands::render(&a, &ctx)
        }
        Command::Synth(a) => {
            let (a, ctx) = merged!(a, "synth");
            commands::synth(&a, &ctx)
        }
    }
}

/// Top-level keys plus the subcommand section's `seed`, if any.
fn strip_sections(
    cfg: &serde_json::Map<String, serde_json::Value>,
    section: &str,
) -> serde_json::Map<String, serde_json::Value> {
    let mut out: serde_json::Map<_, _> = cfg
        .iter()
        .filter(|(k, _)| k.as_str() == "seed")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if let Some(seed) = cfg.get(section).and_then(|s| s.get("seed")) {
        out.insert("seed".into(), seed.clone());
    }
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<shindo::Error>(),
            Some(shindo::Error::NonFinite(_) | shindo::Error::NonFiniteLoss { .. })
        )
    });
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
