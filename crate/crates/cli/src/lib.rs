//! Subcommands behind the `eyespot` binary. Each `cmd_*` function is
//! usable in-process; the binary only parses arguments and maps results to
//! exit codes.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eyespot::classifier::{load_model, save_model, MlpParams};
use eyespot::config::{Config, Sidecar};
use eyespot::dataset::{
    bootstrap_train, build_positives, compute_layout, load_dataset, save_dataset, scan_windows, BootstrapObserver,
    CanonicalLayout, EyeSource, Label, Manifest, Preprocessor, RoundReport,
};
use eyespot::detector::{annotate, detect, to_json_line};
use eyespot::gabor::make_bank;
use eyespot::imaging::{load_image, save_png_gray, ImageGray};
use eyespot::metrics::{match_detections, EvalReport};
use eyespot::synth;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "eyespot",
    version,
    about = "Eye detection with skin segmentation, Gabor features and a small neural network"
)]
pub struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true, env = "EYESPOT_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of face and scenery images with a manifest.
    Synth(SynthArgs),
    /// Align, augment and preprocess the labelled eyes of a manifest into a dataset cache.
    MakeDataset(MakeDatasetArgs),
    /// Train the classifier with bootstrap negative mining on scenery images.
    Train(TrainArgs),
    /// Detect eyes in images. Exits 0 when something was found, 2 when nothing was.
    Detect(DetectArgs),
    /// Evaluate a model against the eye boxes of a manifest.
    Eval(EvalArgs),
    /// Write every kernel of the configured Gabor bank as a PNG.
    GaborPreview(GaborPreviewArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for images and manifest.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of face images.
    #[arg(long)]
    pub faces: Option<usize>,
    /// Number of eye-free scenery images.
    #[arg(long)]
    pub scenery: Option<usize>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MakeDatasetArgs {
    /// JSON-lines manifest; its eye entries are used.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output dataset cache.
    #[arg(long)]
    pub out: PathBuf,
    /// Top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Augmented variants per labelled eye.
    #[arg(long)]
    pub augment_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset cache from make-dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Manifest whose scenery entries are mined for negatives.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest whose scenery entries are scanned for false positives after every round.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training epochs per round.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mining rounds after the first training pass.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Hidden layer size.
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Model file from train.
    #[arg(long)]
    pub model: PathBuf,
    /// Print one JSON object per image instead of plain text.
    #[arg(long)]
    pub json: bool,
    /// Directory for copies of the images with face and eye boxes drawn.
    #[arg(long)]
    pub annotate: Option<PathBuf>,
    /// Detection score threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Images to process.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest with eye boxes; scenery entries are ignored.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model file from train.
    #[arg(long)]
    pub model: PathBuf,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// IoU needed for a detection to match a truth box.
    #[arg(long)]
    pub iou: Option<f64>,
    /// Detection score threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GaborPreviewArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated wavelengths in pixels.
    #[arg(long, value_delimiter = ',')]
    pub wavelengths: Option<Vec<f64>>,
    /// Comma-separated orientations in degrees.
    #[arg(long, value_delimiter = ',')]
    pub orientations: Option<Vec<f64>>,
    /// Comma-separated phases in degrees.
    #[arg(long, value_delimiter = ',')]
    pub phases: Option<Vec<f64>>,
}

pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn checked(cfg: Config) -> Result<Config> {
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn load_gray(path: &Path) -> Result<ImageGray> {
    Ok(load_image(path)
        .with_context(|| format!("loading {}", path.display()))?
        .to_gray())
}

pub fn cmd_synth(cfg: &Config, args: &SynthArgs, out: &mut dyn Write) -> Result<Manifest> {
    let mut cfg = cfg.clone();
    if let Some(n) = args.faces {
        cfg.synth.faces = n;
    }
    if let Some(n) = args.scenery {
        cfg.synth.scenery = n;
    }
    if let Some(s) = args.seed {
        cfg.synth.seed = s;
    }
    let cfg = checked(cfg)?;
    let manifest = synth::generate(&cfg.synth)?.write(&args.out)?;
    writeln!(
        out,
        "wrote {} face and {} scenery images to {}",
        cfg.synth.faces,
        cfg.synth.scenery,
        args.out.display()
    )?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSummary {
    pub positives: usize,
    pub negatives: usize,
}

pub fn cmd_make_dataset(cfg: &Config, args: &MakeDatasetArgs, out: &mut dyn Write) -> Result<DatasetSummary> {
    let mut cfg = cfg.clone();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.augment_count {
        cfg.augment.count = n;
    }
    let cfg = checked(cfg)?;
    let manifest = Manifest::load(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let mut sources = Vec::new();
    for (id, entry) in manifest.entries.iter().enumerate() {
        if entry.role != eyespot::dataset::Role::Eye {
            continue;
        }
        sources.push(EyeSource {
            id,
            image: load_gray(&entry.resolved)?,
            eyes: entry.eye_point_pairs(),
        });
    }
    if sources.is_empty() {
        bail!("{} has no eye entries", args.manifest.display());
    }
    let faces: Vec<Vec<_>> = sources.iter().flat_map(|s| s.eyes.iter().map(|p| p.to_vec())).collect();
    let layout = compute_layout(&faces, cfg.window.width, cfg.window.height, cfg.window.margin)?;
    let mode = cfg.preprocess_mode()?;
    let pre = Preprocessor::new(&mode, layout.window_w, layout.window_h)?;
    let samples = build_positives(&sources, &layout, &cfg.augment_config(), &pre)?;
    save_dataset(&samples, &args.out)?;
    Sidecar {
        layout,
        preprocess: mode,
    }
    .save(&args.out)?;
    let summary = DatasetSummary {
        positives: samples.iter().filter(|s| s.label == Label::Eye).count(),
        negatives: samples.iter().filter(|s| s.label == Label::NonEye).count(),
    };
    writeln!(
        out,
        "eye: {}\nnon-eye: {}\nwrote {}",
        summary.positives,
        summary.negatives,
        args.out.display()
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub rounds: Vec<RoundReport>,
    /// Held-out scenery false positives after each round, when requested.
    pub heldout_fp: Vec<usize>,
    pub log_lines: usize,
}

struct TrainLog<'a> {
    sinks: Vec<&'a mut dyn Write>,
    lines: usize,
    heldout: Vec<ImageGray>,
    heldout_fp: Vec<usize>,
    pre: &'a Preprocessor,
    stride: usize,
    threshold: f64,
    failure: Option<std::io::Error>,
}

impl TrainLog<'_> {
    fn line(&mut self, text: &str) {
        self.lines += 1;
        for s in self.sinks.iter_mut() {
            if let Err(e) = writeln!(s, "{text}") {
                self.failure.get_or_insert(e);
            }
        }
    }
}

impl BootstrapObserver for TrainLog<'_> {
    fn on_epoch(&mut self, round: usize, epoch: usize, loss: f64) {
        self.line(&format!("round {round} epoch {} loss {loss:.8}", epoch + 1));
    }

    fn on_round(&mut self, report: &RoundReport, model: &MlpParams) -> eyespot::Result<()> {
        let mined = report.mined.map_or_else(|| "-".to_string(), |n| n.to_string());
        self.line(&format!(
            "round {} samples {}+{} mined {mined}",
            report.round, report.positives, report.negatives
        ));
        if !self.heldout.is_empty() {
            let mut fp = 0;
            for img in &self.heldout {
                fp += scan_windows(model, img, self.pre, self.stride, self.threshold)?.len();
            }
            self.heldout_fp.push(fp);
            self.line(&format!("round {} heldout_fp {fp}", report.round));
        }
        Ok(())
    }
}

fn log_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".log");
    name.into()
}

fn meta_or_default(cfg: &Config, file: &Path) -> Result<Sidecar> {
    Ok(match Sidecar::load(file)? {
        Some(m) => m,
        None => Sidecar {
            layout: cfg.default_layout()?,
            preprocess: cfg.preprocess_mode()?,
        },
    })
}

/// Trains and writes the model, its sidecar and `<model>.log`; log lines are
/// also echoed to `out`.
pub fn cmd_train(cfg: &Config, args: &TrainArgs, out: &mut dyn Write) -> Result<TrainSummary> {
    let mut cfg = cfg.clone();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.epochs {
        cfg.train.epochs = n;
    }
    if let Some(n) = args.rounds {
        cfg.mining.rounds = n;
    }
    if let Some(n) = args.hidden {
        cfg.train.hidden = n;
    }
    let cfg = checked(cfg)?;
    let samples = load_dataset(&args.dataset).with_context(|| format!("reading {}", args.dataset.display()))?;
    let meta = meta_or_default(&cfg, &args.dataset)?;
    let pre = Preprocessor::new(&meta.preprocess, meta.layout.window_w, meta.layout.window_h)?;
    if let Some(s) = samples.iter().find(|s| s.vector.len() != pre.vector_len()) {
        bail!(
            "dataset vectors have {} values but the {}x{} window needs {}",
            s.vector.len(),
            meta.layout.window_w,
            meta.layout.window_h,
            pre.vector_len()
        );
    }
    if samples.iter().any(|s| s.label != Label::Eye) {
        bail!("dataset cache must hold eye samples only; negatives are generated during training");
    }
    let manifest = Manifest::load(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let scenery = manifest
        .scenery()
        .map(|e| load_gray(&e.resolved))
        .collect::<Result<Vec<_>>>()?;
    if scenery.is_empty() {
        bail!("{} has no scenery entries to mine", args.manifest.display());
    }
    let heldout = match &args.heldout {
        Some(p) => Manifest::load(p)
            .with_context(|| format!("reading {}", p.display()))?
            .scenery()
            .map(|e| load_gray(&e.resolved))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let log_file_path = log_path(&args.out);
    let mut log_file = std::fs::File::create(&log_file_path)
        .map(std::io::BufWriter::new)
        .with_context(|| format!("creating {}", log_file_path.display()))?;
    let mining = cfg.mining_config();
    let mut log = TrainLog {
        sinks: vec![&mut log_file, out],
        lines: 0,
        heldout,
        heldout_fp: Vec::new(),
        pre: &pre,
        stride: mining.stride,
        threshold: mining.threshold,
        failure: None,
    };
    let (model, rounds) = bootstrap_train(
        &samples,
        &scenery,
        &pre,
        cfg.train.hidden,
        &cfg.train_config(),
        &mining,
        &mut log,
    )?;
    if let Some(e) = log.failure.take() {
        return Err(e).context("writing training log");
    }
    let summary = TrainSummary {
        rounds,
        heldout_fp: std::mem::take(&mut log.heldout_fp),
        log_lines: log.lines,
    };
    drop(log);
    log_file.flush()?;
    save_model(&model, &args.out)?;
    meta.save(&args.out)?;
    Ok(summary)
}

fn load_detector(cfg: &Config, model_path: &Path) -> Result<(MlpParams, CanonicalLayout, Preprocessor)> {
    let model = load_model(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let meta = meta_or_default(cfg, model_path)?;
    let pre = Preprocessor::new(&meta.preprocess, meta.layout.window_w, meta.layout.window_h)?;
    if model.n_in() != pre.vector_len() {
        bail!(
            "model expects {} inputs but the {}x{} window gives {}",
            model.n_in(),
            meta.layout.window_w,
            meta.layout.window_h,
            pre.vector_len()
        );
    }
    Ok((model, meta.layout, pre))
}

/// Returns the total number of detections over all images.
pub fn cmd_detect(cfg: &Config, args: &DetectArgs, out: &mut dyn Write) -> Result<usize> {
    let mut cfg = cfg.clone();
    if let Some(t) = args.threshold {
        cfg.pipeline.threshold = t;
    }
    let cfg = checked(cfg)?;
    let (model, layout, pre) = load_detector(&cfg, &args.model)?;
    if let Some(dir) = &args.annotate {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut total = 0;
    for path in &args.images {
        let img = load_image(path).with_context(|| format!("loading {}", path.display()))?;
        let outcome = detect(&img, &model, &layout, &pre, &cfg.pipeline)?;
        total += outcome.detections.len();
        let shown = path.display().to_string();
        if args.json {
            writeln!(out, "{}", to_json_line(&shown, &outcome))?;
        } else {
            let face = outcome
                .face
                .map_or_else(|| "none".to_string(), |f| format!("{:?}", f.to_array()));
            write!(out, "{shown}: face {face}, {} eye(s)", outcome.detections.len())?;
            for d in &outcome.detections {
                write!(out, " {:?} {:.3}", d.bbox.to_array(), d.score)?;
            }
            writeln!(out)?;
        }
        if let Some(dir) = &args.annotate {
            let stem = path
                .file_stem()
                .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
            eyespot::imaging::save_png_rgb(&annotate(&img, &outcome), dir.join(format!("{stem}.annotated.png")))?;
        }
    }
    Ok(total)
}

pub fn cmd_eval(cfg: &Config, args: &EvalArgs, out: &mut dyn Write) -> Result<EvalReport> {
    let mut cfg = cfg.clone();
    if let Some(t) = args.iou {
        cfg.eval.iou = t;
    }
    if let Some(t) = args.threshold {
        cfg.pipeline.threshold = t;
    }
    let cfg = checked(cfg)?;
    let (model, layout, pre) = load_detector(&cfg, &args.model)?;
    let manifest = Manifest::load(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let mut results = Vec::new();
    for entry in manifest.eyes() {
        if entry.boxes.is_empty() {
            bail!("{}: evaluation needs eye boxes", entry.path);
        }
        let img = load_image(&entry.resolved).with_context(|| format!("loading {}", entry.resolved.display()))?;
        let outcome = detect(&img, &model, &layout, &pre, &cfg.pipeline)?;
        results.push(match_detections(
            &outcome.detections,
            &outcome.rejected,
            &entry.boxes,
            cfg.match_criterion(),
        ));
    }
    if results.is_empty() {
        bail!("{} has no eye entries to evaluate", args.manifest.display());
    }
    let report = EvalReport::from_results(&results)?;
    write!(out, "{}", report.to_table())?;
    let json = report.to_json();
    writeln!(out, "{json}")?;
    if let Some(p) = &args.json_out {
        std::fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(report)
}

fn preview_name(wavelength: f64, orientation_deg: f64, phase_deg: f64) -> String {
    format!("gabor_l{wavelength}_t{orientation_deg}_p{phase_deg}.png")
}

/// Min-max scaled 8-bit intensities, row-major.
pub fn kernel_intensities(taps: &[f64]) -> Vec<u8> {
    let lo = taps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = taps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    taps.iter()
        .map(|t| {
            if span > 0.0 {
                ((t - lo) / span * 255.0).round() as u8
            } else {
                128
            }
        })
        .collect()
}

pub fn cmd_gabor_preview(cfg: &Config, args: &GaborPreviewArgs, out: &mut dyn Write) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.clone();
    if let Some(v) = &args.wavelengths {
        cfg.bank.wavelengths = v.clone();
    }
    if let Some(v) = &args.orientations {
        cfg.bank.orientations_deg = v.clone();
    }
    if let Some(v) = &args.phases {
        cfg.bank.phases_deg = v.clone();
    }
    let cfg = checked(cfg)?;
    let b = &cfg.bank;
    let radians = |v: &[f64]| v.iter().map(|d| d.to_radians()).collect::<Vec<_>>();
    let bank = make_bank(
        &b.wavelengths,
        &radians(&b.orientations_deg),
        &radians(&b.phases_deg),
        b.aspect,
        b.bandwidth,
    )?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let names = b.wavelengths.iter().flat_map(|&l| {
        b.orientations_deg
            .iter()
            .flat_map(move |&t| b.phases_deg.iter().map(move |&p| preview_name(l, t, p)))
    });
    let mut written = Vec::new();
    for (kernel, name) in bank.iter().zip(names) {
        let path = args.out.join(name);
        save_png_gray(kernel.size(), kernel.size(), &kernel_intensities(kernel.taps()), &path)?;
        writeln!(out, "{}", path.display())?;
        written.push(path);
    }
    Ok(written)
}

/// Process exit code for a finished command.
pub fn run(cli: &Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<u8> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a, out).map(|_| 0),
        Command::MakeDataset(a) => cmd_make_dataset(&cfg, a, out).map(|_| 0),
        Command::Train(a) => cmd_train(&cfg, a, log).map(|_| 0),
        Command::Detect(a) => cmd_detect(&cfg, a, out).map(|n| if n > 0 { 0 } else { 2 }),
        Command::Eval(a) => cmd_eval(&cfg, a, out).map(|_| 0),
        Command::GaborPreview(a) => cmd_gabor_preview(&cfg, a, out).map(|_| 0),
    }
}
