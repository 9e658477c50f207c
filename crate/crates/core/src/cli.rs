//! The `sarvessel` command line.
//!
//! Every subcommand reads an optional JSON [`RunConfig`] (`--config`), lets
//! a few flags override it, and writes JSON reports (plus PGM images where
//! asked). `--seed` overrides every seed in the config. Errors map to exit
//! code 2 (configuration or validation) or 3 (I/O).
//!
//! The pipelines are plain functions ([`cmd_synth`], [`run_bench`], ...) so
//! they can be driven from code as well as from the binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cfar::{cfar_detect, cluster_with_gap, CfarConfig, CfarVariant};
use crate::cnn::{self, Architecture, Network, TrainConfig, TrainHistory};
use crate::dataset::{build_chips, denoise_scene};
use crate::detector::{detect_counted, DetectConfig, Detection, ProposalMode};
use crate::eval::{
    chip_confusion, match_box_detections, split_dataset, time_ms, ConfusionCounts, EvalMode,
    EvalReport,
};
use crate::fsio::{read_json, with_suffix, write_json};
use crate::pgm::{burn_boxes, mask_to_gray, to_gray, write_pgm};
use crate::scene_io::{
    load_scene, save_scene, synth_scene, Band, Chip, ChipLabel, GroundTruth, SarScene, SynthParams,
};
use crate::wavelet::{DenoiseConfig, ThresholdRule, WaveletFamily};
use crate::{rng, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "sarvessel",
    version,
    about = "Vessel detection in dual-polarization SAR rasters"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic speckle scene with vessels and its truth file.
    Synth(SynthArgs),
    /// Wavelet-denoise every band of a scene.
    Denoise(DenoiseArgs),
    /// Run the CFAR baseline on one band.
    Cfar(CfarArgs),
    /// Train the chip classifier on annotated scenes.
    Train(TrainArgs),
    /// Detect vessels in a scene with a trained network.
    Detect(DetectArgs),
    /// Score detections or chip predictions against truth.
    Eval(EvalArgs),
    /// Synthesize, train, and evaluate in one seeded run.
    Bench(BenchArgs),
}

#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (scene stem, weight file, or report, per subcommand).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub vessels: Option<usize>,
    #[arg(long)]
    pub looks: Option<u32>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input scene stem.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_parser = parse_name::<WaveletFamily>)]
    pub family: Option<WaveletFamily>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long, value_parser = parse_name::<ThresholdRule>)]
    pub rule: Option<ThresholdRule>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct CfarArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value = "VV")]
    pub band: String,
    #[arg(long)]
    pub pfa: Option<f64>,
    #[arg(long, value_parser = parse_name::<CfarVariant>)]
    pub variant: Option<CfarVariant>,
    #[arg(long)]
    pub guard: Option<usize>,
    #[arg(long)]
    pub train: Option<usize>,
    /// Merge hits up to this many empty pixels apart.
    #[arg(long)]
    pub gap: Option<usize>,
    /// Write the detection mask as a PGM image.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Annotated scene stems (repeatable).
    #[arg(long = "scene")]
    pub scenes: Vec<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_chips: Option<usize>,
    #[arg(long)]
    pub init_weights: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_parser = parse_name::<ProposalMode>)]
    pub mode: Option<ProposalMode>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Write the VV band with detection outlines as a PGM image.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_name::<EvalMode>, default_value = "box")]
    pub mode: EvalMode,
    /// Box mode: detections JSON written by `detect`.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Box mode: truth JSON file.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub iou_min: f64,
    /// Chip mode: weight file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Chip mode: held-out annotated scene stems (repeatable).
    #[arg(long = "scene")]
    pub scenes: Vec<PathBuf>,
    /// Training history JSON whose training time is copied into the report.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub train_scenes: Option<usize>,
    #[arg(long)]
    pub test_scenes: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Also save the trained network here.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

fn parse_name<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

/// Everything a subcommand may need. Sections are optional and each
/// subcommand validates only its own; unknown keys are rejected.
///
/// Chips for training and chip-mode evaluation use `detect.chip_size` and
/// go through `detect.denoise`, so the network sees what the detector
/// feeds it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub synth: Option<SynthParams>,
    pub denoise: Option<DenoiseConfig>,
    pub cfar: Option<CfarConfig>,
    pub dataset: Option<DatasetConfig>,
    pub train: Option<TrainConfig>,
    pub detect: Option<DetectConfig>,
    pub bench: Option<BenchConfig>,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref()).map_err(|e| match e {
            Error::Json { path, source } => Error::Config(format!("{}: {source}", path.display())),
            other => other,
        })
    }

    fn resolve(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if common.seed.is_some() {
            cfg.seed = common.seed;
        }
        Ok(cfg)
    }

    fn detect_cfg(&self) -> DetectConfig {
        self.detect.clone().unwrap_or_default()
    }

    fn train_cfg(&self) -> TrainConfig {
        let mut t = self.train.clone().unwrap_or_default();
        if let Some(s) = self.seed {
            t.seed = s;
        }
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub scenes: Vec<PathBuf>,
    pub weights: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub overlay: Option<PathBuf>,
    pub mask: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Total chip cap, half per class.
    pub max_chips: Option<usize>,
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            max_chips: None,
            train_fraction: 0.75,
        }
    }
}

/// The one-shot benchmark recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_train_scenes: usize,
    pub n_test_scenes: usize,
    /// Generator settings for both scene sets; its seed is ignored.
    pub scene: SynthParams,
    pub n_chips: usize,
    pub train_fraction: f64,
    pub iou_min: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_train_scenes: 20,
            n_test_scenes: 5,
            scene: SynthParams::default(),
            n_chips: 1000,
            train_fraction: 0.75,
            iou_min: 0.5,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train_scenes == 0 || self.n_test_scenes == 0 {
            return Err(Error::Config(
                "bench needs at least one training and one test scene".into(),
            ));
        }
        if self.n_chips < 4 {
            return Err(Error::Config("bench needs at least 4 chips".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(Error::Config(format!(
                "iou_min {} must lie in [0, 1]",
                self.iou_min
            )));
        }
        self.scene.validate()
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let summary = match cli.command {
        Command::Synth(a) => cmd_synth(&a)?,
        Command::Denoise(a) => cmd_denoise(&a)?,
        Command::Cfar(a) => cmd_cfar(&a)?,
        Command::Train(a) => cmd_train(&a)?,
        Command::Detect(a) => cmd_detect(&a)?,
        Command::Eval(a) => serde_json::to_value(cmd_eval(&a)?).expect("report serializes"),
        Command::Bench(a) => serde_json::to_value(cmd_bench(&a)?).expect("report serializes"),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn required<'a>(
    flag: &'a Option<PathBuf>,
    fallback: &'a Option<PathBuf>,
    name: &str,
) -> Result<&'a PathBuf> {
    flag.as_ref()
        .or(fallback.as_ref())
        .ok_or_else(|| Error::Config(format!("--{name} is required")))
}

fn first_scene<'a>(flag: &'a Option<PathBuf>, cfg: &'a RunConfig) -> Result<&'a PathBuf> {
    flag.as_ref()
        .or(cfg.paths.scenes.first())
        .ok_or_else(|| Error::Config("--scene is required".into()))
}

fn band_stats(scene: &SarScene) -> Value {
    let bands: Vec<Value> = scene
        .bands()
        .iter()
        .zip(scene.planes())
        .map(|(b, p)| {
            let mean = p.iter().map(|&v| f64::from(v)).sum::<f64>() / p.len() as f64;
            let max = p.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v));
            json!({ "band": b.as_str(), "mean": mean, "max": max })
        })
        .collect();
    json!({ "scene_id": scene.scene_id(), "rows": scene.rows(), "cols": scene.cols(), "bands": bands })
}

/// Writes a synthetic scene; returns its per-band statistics.
pub fn cmd_synth(args: &SynthArgs) -> Result<Value> {
    let cfg = RunConfig::resolve(&args.common)?;
    let mut p = cfg.synth.clone().unwrap_or_default();
    p.rows = args.rows.unwrap_or(p.rows);
    p.cols = args.cols.unwrap_or(p.cols);
    p.n_vessels = args.vessels.unwrap_or(p.n_vessels);
    p.looks = args.looks.unwrap_or(p.looks);
    if let Some(s) = cfg.seed {
        p.seed = s;
    }
    let out = required(&args.common.out, &cfg.paths.out, "out")?;
    let (scene, truth) = synth_scene(&p)?;
    save_scene(&scene, Some(&truth), out)?;
    let mut stats = band_stats(&scene);
    stats["n_vessels"] = json!(truth.len());
    Ok(stats)
}

/// Denoises every band and writes the result (with the input's truth, if
/// any) under the output stem.
pub fn cmd_denoise(args: &DenoiseArgs) -> Result<Value> {
    let cfg = RunConfig::resolve(&args.common)?;
    let mut d = cfg.denoise.clone().unwrap_or_default();
    d.family = args.family.unwrap_or(d.family);
    d.levels = args.levels.unwrap_or(d.levels);
    d.rule = args.rule.unwrap_or(d.rule);
    let input = first_scene(&args.scene, &cfg)?;
    let out = required(&args.common.out, &cfg.paths.out, "out")?;
    let (scene, truth) = load_scene(input)?;
    let (clean, ms) = time_ms(|| denoise_scene(&scene, &d));
    let clean = clean?;
    save_scene(&clean, truth.as_ref(), out)?;
    Ok(json!({ "input": band_stats(&scene), "output": band_stats(&clean), "denoise_time_ms": ms }))
}

/// CFAR on one band, clustered into boxes.
pub fn cmd_cfar(args: &CfarArgs) -> Result<Value> {
    let cfg = RunConfig::resolve(&args.common)?;
    let mut c = cfg.cfar.clone().unwrap_or_default();
    c.pfa = args.pfa.unwrap_or(c.pfa);
    c.variant = args.variant.unwrap_or(c.variant);
    c.guard_radius = args.guard.unwrap_or(c.guard_radius);
    c.train_radius = args.train.unwrap_or(c.train_radius);
    c.validate()?;
    let gap = args.gap.unwrap_or(cfg.detect_cfg().cluster_gap);
    let band: Band = args.band.parse()?;
    let (scene, _) = load_scene(first_scene(&args.scene, &cfg)?)?;
    let plane = scene.band(band).ok_or_else(|| {
        Error::Validation(format!("scene {} has no {band} band", scene.scene_id()))
    })?;
    let (res, ms) = time_ms(|| cfar_detect(plane, &c));
    let res = res?;
    let boxes = cluster_with_gap(&res.mask, gap);
    let report = json!({
        "scene_id": scene.scene_id(),
        "band": band.as_str(),
        "config": c,
        "cluster_gap": gap,
        "n_detections": res.n_detections,
        "cfar_time_ms": ms,
        "boxes": boxes,
    });
    if let Some(out) = args.common.out.as_ref().or(cfg.paths.out.as_ref()) {
        write_json(out, &report)?;
    }
    if let Some(mask) = args.mask.as_ref().or(cfg.paths.mask.as_ref()) {
        write_pgm(mask, &mask_to_gray(&res.mask))?;
    }
    Ok(report)
}

fn load_annotated(stems: &[PathBuf]) -> Result<Vec<(SarScene, GroundTruth)>> {
    if stems.is_empty() {
        return Err(Error::Config("at least one --scene is required".into()));
    }
    stems
        .iter()
        .map(|stem| {
            let (scene, truth) = load_scene(stem)?;
            let truth = truth.ok_or_else(|| {
                Error::Validation(format!("scene {} has no truth file", stem.display()))
            })?;
            Ok((scene, truth))
        })
        .collect()
}

fn preprocess(
    scenes: Vec<(SarScene, GroundTruth)>,
    denoise: Option<&DenoiseConfig>,
) -> Result<Vec<(SarScene, GroundTruth)>> {
    match denoise {
        None => Ok(scenes),
        Some(d) => scenes
            .into_iter()
            .map(|(s, t)| Ok((denoise_scene(&s, d)?, t)))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryFile {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub training_time_ms: f64,
    pub n_train: usize,
    pub n_val: usize,
}

impl HistoryFile {
    fn new(h: &TrainHistory, n_train: usize, n_val: usize) -> Self {
        Self {
            train_loss: h.train_loss.clone(),
            val_accuracy: h.val_accuracy.clone(),
            training_time_ms: h.wall_time_ms,
            n_train,
            n_val,
        }
    }
}

/// Path of the history JSON written next to a weight file.
pub fn history_path(weights: &Path) -> PathBuf {
    with_suffix(weights, ".history.json")
}

/// Builds chips from annotated scenes, splits, trains, and writes the
/// weights plus `<weights>.history.json`.
pub fn cmd_train(args: &TrainArgs) -> Result<Value> {
    let cfg = RunConfig::resolve(&args.common)?;
    let det = cfg.detect_cfg();
    det.validate()?;
    let mut t = cfg.train_cfg();
    t.epochs = args.epochs.unwrap_or(t.epochs);
    if args.init_weights.is_some() {
        t.init_weights_path = args.init_weights.clone();
    }
    t.validate()?;
    let mut ds = cfg.dataset.clone().unwrap_or_default();
    ds.max_chips = args.max_chips.or(ds.max_chips);
    let out = required(&args.common.out, &cfg.paths.weights, "out")?;
    let stems = if args.scenes.is_empty() {
        &cfg.paths.scenes
    } else {
        &args.scenes
    };
    let scenes = preprocess(load_annotated(stems)?, det.denoise.as_ref())?;
    let n_bands = scenes[0].0.n_bands();
    let chips = build_chips(
        &scenes,
        det.chip_size,
        ds.max_chips,
        rng::derive_seed(t.seed, 1),
    )?;
    let (train_set, val_set) =
        split_dataset(&chips, ds.train_fraction, rng::derive_seed(t.seed, 2))?;
    let net = Network::new(
        Architecture::default_for(det.chip_size, n_bands),
        rng::derive_seed(t.seed, 3),
    )?;
    let (net, history) = cnn::train(net, &train_set, &val_set, &t)?;
    cnn::save_weights(&net, out)?;
    let hist = HistoryFile::new(&history, train_set.len(), val_set.len());
    write_json(&history_path(out), &hist)?;
    Ok(json!({
        "weights": out,
        "n_train": hist.n_train,
        "n_val": hist.n_val,
        "epochs": history.train_loss.len(),
        "final_train_loss": history.train_loss.last(),
        "final_val_accuracy": history.val_accuracy.last(),
        "training_time_ms": hist.training_time_ms,
    }))
}

/// The detections JSON written by `detect`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub scene_id: String,
    pub detection_time_ms: f64,
    pub n_proposals: usize,
    pub detections: Vec<Detection>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DetectionsInput {
    File(DetectionsFile),
    Bare(Vec<Detection>),
}

/// Reads either a [`DetectionsFile`] or a bare array of detections.
pub fn read_detections(path: &Path) -> Result<(Vec<Detection>, Option<DetectionsFile>)> {
    match read_json::<DetectionsInput>(path)? {
        DetectionsInput::File(f) => Ok((f.detections.clone(), Some(f))),
        DetectionsInput::Bare(d) => Ok((d, None)),
    }
}

pub fn cmd_detect(args: &DetectArgs) -> Result<Value> {
    let cfg = RunConfig::resolve(&args.common)?;
    let mut det = cfg.detect_cfg();
    det.proposal_mode = args.mode.unwrap_or(det.proposal_mode);
    det.score_threshold = args.threshold.unwrap_or(det.score_threshold);
    det.validate()?;
    let (scene, _) = load_scene(first_scene(&args.scene, &cfg)?)?;
    let net = cnn::load_weights(required(&args.weights, &cfg.paths.weights, "weights")?)?;
    let (detections, n_proposals, ms) = detect_counted(&scene, &net, &det)?;
    let file = DetectionsFile {
        scene_id: scene.scene_id().to_owned(),
        detection_time_ms: ms,
        n_proposals,
        detections,
    };
    if let Some(out) = args.common.out.as_ref().or(cfg.paths.out.as_ref()) {
        write_json(out, &file)?;
    }
    if let Some(path) = args.overlay.as_ref().or(cfg.paths.overlay.as_ref()) {
        write_pgm(path, &overlay(&scene, &file.detections))?;
    }
    Ok(serde_json::to_value(&file).expect("detections serialize"))
}

/// The first band rescaled to gray with detection outlines burned in.
pub fn overlay(scene: &SarScene, detections: &[Detection]) -> crate::Grid<u8> {
    let plane = scene.band(Band::VV).unwrap_or(&scene.planes()[0]);
    let mut img = to_gray(plane);
    burn_boxes(&mut img, detections.iter().map(|d| &d.bbox));
    img
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let cfg = RunConfig::resolve(&args.common)?;
    let training_time_ms = match &args.history {
        Some(p) => read_json::<HistoryFile>(p)?.training_time_ms,
        None => 0.0,
    };
    let report = match args.mode {
        EvalMode::Box => {
            if !args.scenes.is_empty() || args.weights.is_some() {
                return Err(Error::Config(
                    "box mode takes --detections and --truth, not scenes or weights".into(),
                ));
            }
            let dets_path = required(&args.detections, &cfg.paths.detections, "detections")?;
            let truth_path = required(&args.truth, &cfg.paths.truth, "truth")?;
            let (dets, file) = read_detections(dets_path)?;
            let truth: GroundTruth = read_json(truth_path)?;
            truth.validate(usize::MAX, usize::MAX)?;
            let counts = match_box_detections(
                &dets,
                &truth,
                args.iou_min,
                file.as_ref().map(|f| f.n_proposals),
            );
            let ms = file.map_or(0.0, |f| f.detection_time_ms);
            EvalReport::new(counts, EvalMode::Box, training_time_ms, ms)?
        }
        EvalMode::Chip => {
            if args.detections.is_some() || args.truth.is_some() {
                return Err(Error::Config(
                    "chip mode takes --weights and --scene, not detections".into(),
                ));
            }
            let det = cfg.detect_cfg();
            det.validate()?;
            let net = cnn::load_weights(required(&args.weights, &cfg.paths.weights, "weights")?)?;
            let stems = if args.scenes.is_empty() {
                &cfg.paths.scenes
            } else {
                &args.scenes
            };
            let scenes = preprocess(load_annotated(stems)?, det.denoise.as_ref())?;
            let max_chips = cfg.dataset.clone().unwrap_or_default().max_chips;
            let chips = build_chips(
                &scenes,
                net.architecture().input_shape.0,
                max_chips,
                cfg.seed.unwrap_or(0),
            )?;
            let (counts, per_chip_ms) = classify_chips(&net, &chips)?;
            EvalReport::new(counts, EvalMode::Chip, training_time_ms, per_chip_ms)?
        }
    };
    if let Some(out) = args.common.out.as_ref().or(cfg.paths.out.as_ref()) {
        write_json(out, &report)?;
    }
    Ok(report)
}

/// Chip-level confusion counts and mean inference time per chip.
pub fn classify_chips(net: &Network, chips: &[Chip]) -> Result<(ConfusionCounts, f64)> {
    let labels: Vec<ChipLabel> = chips
        .iter()
        .map(|c| {
            c.label
                .ok_or_else(|| Error::Validation("chip without label".into()))
        })
        .collect::<Result<_>>()?;
    let (preds, ms) = time_ms(|| net.predict(chips));
    let preds: Vec<ChipLabel> = preds?.into_iter().map(ChipLabel::from_index).collect();
    Ok((
        chip_confusion(&preds, &labels)?,
        ms / chips.len().max(1) as f64,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEcho {
    pub bench: BenchConfig,
    pub train: TrainConfig,
    pub detect: DetectConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub train: usize,
    pub val: usize,
    pub test_scenes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTimings {
    pub synth_ms: f64,
    pub training_time_ms: f64,
    /// Mean per validation chip.
    pub chip_inference_ms: f64,
    /// Mean full-scene detect time on the test scenes.
    pub scene_detect_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub config: BenchEcho,
    pub dataset: DatasetSizes,
    pub chip: EvalReport,
    #[serde(rename = "box")]
    pub box_: EvalReport,
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub timings: BenchTimings,
}

impl BenchReport {
    /// The report with every wall-clock field removed.
    pub fn without_timings(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("report is an object");
        obj.remove("timings");
        obj.insert("chip".into(), self.chip.without_timings());
        obj.insert("box".into(), self.box_.without_timings());
        v
    }
}

pub struct BenchOutcome {
    pub report: BenchReport,
    pub network: Network,
}

const TRAIN_SCENES: u64 = 1;
const TEST_SCENES: u64 = 2;
const CHIPS: u64 = 3;
const SPLIT: u64 = 4;
const INIT: u64 = 5;
const TRAINING: u64 = 6;

/// Synthesize training scenes, cut and split chips, train, evaluate on the
/// validation chips (chip mode) and on fresh test scenes (box mode). Every
/// random choice derives from `seed`.
pub fn run_bench(cfg: &RunConfig, seed: u64) -> Result<BenchOutcome> {
    let bench = cfg.bench.clone().unwrap_or_default();
    bench.validate()?;
    let det = cfg.detect_cfg();
    det.validate()?;
    let mut t = cfg.train.clone().unwrap_or_default();
    t.seed = rng::derive_seed(seed, TRAINING);
    t.validate()?;
    let scene_at = |stream: u64, i: usize| {
        synth_scene(&SynthParams {
            seed: rng::derive_seed(rng::derive_seed(seed, stream), i as u64),
            ..bench.scene.clone()
        })
    };
    let total_start = std::time::Instant::now();

    let (chips, synth_ms) = time_ms(|| -> Result<Vec<Chip>> {
        let raw = (0..bench.n_train_scenes)
            .map(|i| scene_at(TRAIN_SCENES, i))
            .collect::<Result<Vec<_>>>()?;
        let scenes = preprocess(raw, det.denoise.as_ref())?;
        build_chips(
            &scenes,
            det.chip_size,
            Some(bench.n_chips),
            rng::derive_seed(seed, CHIPS),
        )
    });
    let chips = chips?;
    let (train_set, val_set) =
        split_dataset(&chips, bench.train_fraction, rng::derive_seed(seed, SPLIT))?;
    let n_bands = chips[0].n_bands;
    let net = Network::new(
        Architecture::default_for(det.chip_size, n_bands),
        rng::derive_seed(seed, INIT),
    )?;
    let (net, history) = cnn::train(net, &train_set, &val_set, &t)?;

    let (chip_counts, chip_ms) = classify_chips(&net, &val_set)?;
    let chip = EvalReport::new(chip_counts, EvalMode::Chip, history.wall_time_ms, chip_ms)?;

    let mut box_counts = ConfusionCounts::default();
    let mut detect_ms = 0.0;
    for i in 0..bench.n_test_scenes {
        let (scene, truth) = scene_at(TEST_SCENES, i)?;
        let (dets, n_proposals, ms) = detect_counted(&scene, &net, &det)?;
        box_counts += match_box_detections(&dets, &truth, bench.iou_min, Some(n_proposals));
        detect_ms += ms;
    }
    let scene_detect_ms = detect_ms / bench.n_test_scenes as f64;
    let box_ = EvalReport::new(
        box_counts,
        EvalMode::Box,
        history.wall_time_ms,
        scene_detect_ms,
    )?;

    let report = BenchReport {
        seed,
        config: BenchEcho {
            bench: bench.clone(),
            train: t,
            detect: det,
        },
        dataset: DatasetSizes {
            train: train_set.len(),
            val: val_set.len(),
            test_scenes: bench.n_test_scenes,
        },
        chip,
        box_,
        train_loss: history.train_loss,
        val_accuracy: history.val_accuracy,
        timings: BenchTimings {
            synth_ms,
            training_time_ms: history.wall_time_ms,
            chip_inference_ms: chip_ms,
            scene_detect_ms,
            total_ms: total_start.elapsed().as_secs_f64() * 1e3,
        },
    };
    Ok(BenchOutcome {
        report,
        network: net,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    let mut cfg = RunConfig::resolve(&args.common)?;
    let mut bench = cfg.bench.clone().unwrap_or_default();
    bench.n_train_scenes = args.train_scenes.unwrap_or(bench.n_train_scenes);
    bench.n_test_scenes = args.test_scenes.unwrap_or(bench.n_test_scenes);
    cfg.bench = Some(bench);
    if let Some(e) = args.epochs {
        cfg.train.get_or_insert_with(TrainConfig::default).epochs = e;
    }
    let seed = cfg.seed.unwrap_or(0);
    let outcome = run_bench(&cfg, seed)?;
    if let Some(path) = args.weights.as_ref().or(cfg.paths.weights.as_ref()) {
        cnn::save_weights(&outcome.network, path)?;
    }
    if let Some(out) = args.common.out.as_ref().or(cfg.paths.out.as_ref()) {
        write_json(out, &outcome.report)?;
    }
    Ok(outcome.report)
}
