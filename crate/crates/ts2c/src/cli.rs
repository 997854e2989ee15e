//! Argument parsing and command dispatch for the `ts2c` binary.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags or values), 2 for
//! data errors (unreadable, malformed or inconsistent inputs).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use ts2c_core::eval::{self, ApMode, RecallCurve, TopBox};
use ts2c_core::pseudomask::{self, MaskConfig, MaskError, DEFAULT_BG_THRESHOLD, DEFAULT_FG_THRESHOLD};
use ts2c_core::scoring::{Ranking, DEFAULT_ENLARGE_RATIO, DEFAULT_POOL_SIZE, DEFAULT_TOP_FRACTION};
use ts2c_core::synth::TrapParams;
use ts2c_core::{EmptyRingPolicy, ScoringConfig};

use crate::bundle::{self, json_bytes};
use crate::csvio::{self, write_file};
use crate::error::FormatError;
use crate::manifest::RunManifest;
use crate::mapfile::{self, Greymap};
use crate::pipeline::{self, SweepReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

const MAP_NORMALIZATION: &str = "tscf: stored floats; pgm: sample / maxval";

#[derive(Debug, Parser)]
#[command(name = "ts2c", version, about = "Mine tight object boxes from segmentation confidence maps")]
pub struct Cli {
    /// Worker threads for data-parallel work (default: one per core)
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a corpus of certified part-trap scenes
    Synth(SynthArgs),
    /// Score proposals and write per-class candidate pools
    Score(ScoreArgs),
    /// Evaluate pools or detections against ground truth
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Build a pseudo segmentation mask from CAMs and saliency
    Mask(MaskArgs),
    /// Draw boxes over a confidence map for inspection
    Overlay(OverlayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Noiseless, unblurred maps
    Clean,
    /// Gaussian noise 0.08 and box blur 1
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FailureMode {
    None,
    /// Two touching same-class objects per scene
    Linked,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Corpus directory to create; must be empty if it exists
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Clean)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value_t = FailureMode::None)]
    pub failure_mode: FailureMode,
    /// Gaussian noise sigma (overrides the preset)
    #[arg(long)]
    pub noise: Option<f64>,
    /// Box blur radius in pixels (overrides the preset)
    #[arg(long)]
    pub blur: Option<u32>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Number of object classes to draw from
    #[arg(long)]
    pub classes: Option<u32>,
    /// Tight proposals per object
    #[arg(long)]
    pub tight: Option<usize>,
    /// Part-covering proposals per object
    #[arg(long)]
    pub partial: Option<usize>,
    /// Loose proposals per object
    #[arg(long)]
    pub loose: Option<usize>,
    /// Background proposals per scene
    #[arg(long)]
    pub background: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    /// Rank by mean confidence inside the box only
    Purity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmptyRing {
    Zero,
    Skip,
}

impl From<EmptyRing> for EmptyRingPolicy {
    fn from(e: EmptyRing) -> Self {
        match e {
            EmptyRing::Zero => EmptyRingPolicy::Zero,
            EmptyRing::Skip => EmptyRingPolicy::Skip,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Bundle or corpus directory
    #[arg(long)]
    pub input: PathBuf,
    /// Scored CSV to write
    #[arg(long)]
    pub out: PathBuf,
    /// Context enlargement ratio
    #[arg(long, default_value_t = DEFAULT_ENLARGE_RATIO)]
    pub ratio: f64,
    /// Fraction of the ring's strongest pixels to average
    #[arg(long = "top-frac", default_value_t = DEFAULT_TOP_FRACTION)]
    pub top_frac: f64,
    /// Pool size per image and class
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool: usize,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// What a box with no ring pixels gets
    #[arg(long = "empty-ring", value_enum, default_value_t = EmptyRing::Zero)]
    pub empty_ring: EmptyRing,
    /// Manifest path (default: <out>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Metrics JSON (printed to stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plain-text report
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Recall of candidate pools at several cut-offs
    Recall {
        /// Scored CSV
        #[arg(long)]
        scored: PathBuf,
        /// Ground-truth CSV, bundle or corpus
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_KS)]
        ks: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Correct localization of each pool's top box
    Corloc {
        #[arg(long)]
        scored: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// VOC average precision of scored detections
    Map {
        /// Box CSV with a score column, or a scored CSV
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long = "ap-mode", value_enum, default_value_t = ApModeArg::ElevenPoint)]
        ap_mode: ApModeArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recall@1 over a grid of ratios and fractions
    Sweep {
        /// Bundle or corpus directory
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1.1, 1.2, 1.3, 1.4])]
        ratios: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7, 1.0])]
        fracs: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
        pool: usize,
        #[arg(long = "empty-ring", value_enum, default_value_t = EmptyRing::Zero)]
        empty_ring: EmptyRing,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApModeArg {
    ElevenPoint,
    Area,
}

impl From<ApModeArg> for ApMode {
    fn from(m: ApModeArg) -> Self {
        match m {
            ApModeArg::ElevenPoint => ApMode::ElevenPoint,
            ApModeArg::Area => ApMode::Area,
        }
    }
}

fn unit_interval(s: &str) -> Result<f32, String> {
    let v: f32 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Activation map for one image label (repeatable; .tscf or class_<id>.pgm)
    #[arg(long)]
    pub cam: Vec<PathBuf>,
    /// Saliency map with values in [0, 1]
    #[arg(long)]
    pub saliency: PathBuf,
    /// Mask PGM to write
    #[arg(long)]
    pub out: PathBuf,
    /// Stats JSON (default: <out>.stats.json)
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long = "fg-thresh", value_parser = unit_interval, default_value_t = DEFAULT_FG_THRESHOLD)]
    pub fg_thresh: f32,
    #[arg(long = "bg-thresh", value_parser = unit_interval, default_value_t = DEFAULT_BG_THRESHOLD)]
    pub bg_thresh: f32,
    /// Manifest path (default: <out>.manifest.json)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    /// Confidence map (.tscf or .pgm)
    #[arg(long)]
    pub map: PathBuf,
    /// Box or scored CSV
    #[arg(long)]
    pub boxes: PathBuf,
    /// 8-bit PGM to write
    #[arg(long)]
    pub out: PathBuf,
    /// Only rows of this image
    #[arg(long)]
    pub image_id: Option<String>,
    /// Only rows of this class
    #[arg(long)]
    pub class: Option<u32>,
    /// Only the first N rows left after filtering
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Data(m) => f.write_str(m),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::Data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n as usize);
    }
    let pool = builder.build().map_err(|e| CliError::Data(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(e) => cmd_eval(e),
        Command::Mask(a) => cmd_mask(a),
        Command::Overlay(a) => cmd_overlay(a),
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parent_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new(""))
}

/// Writes `manifest` to `path` after hashing `outputs` relative to its directory.
fn finish_manifest(mut manifest: RunManifest, path: &Path, outputs: &[&Path]) -> CliResult {
    for out in outputs {
        let rel = relative_to(out, parent_of(path));
        manifest.outputs.insert(rel, crate::manifest::hash_file(out)?);
    }
    manifest.write(path)?;
    Ok(())
}

fn relative_to(file: &Path, dir: &Path) -> String {
    let rel = file.strip_prefix(dir).unwrap_or(file);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

pub fn synth_params(a: &SynthArgs) -> CliResult<TrapParams> {
    let mut p = match a.preset {
        Preset::Clean => TrapParams::default(),
        Preset::Noisy => TrapParams::noisy(),
    };
    p.linked = a.failure_mode == FailureMode::Linked;
    if let Some(n) = a.noise {
        if !(n.is_finite() && n >= 0.0) {
            return Err(CliError::Usage(format!("--noise {n} must be a non-negative number")));
        }
        p.noise_sigma = n;
    }
    macro_rules! set {
        ($($field:ident => $target:expr),*) => {$(
            if let Some(v) = a.$field { $target = v; }
        )*};
    }
    set!(blur => p.blur_radius, width => p.image_w, height => p.image_h, classes => p.num_classes,
         tight => p.counts.tight, partial => p.counts.partial, loose => p.counts.loose,
         background => p.counts.background);
    if p.num_classes == 0 {
        return Err(CliError::Usage("--classes must be at least 1".into()));
    }
    Ok(p)
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let params = synth_params(a)?;
    if let Ok(mut entries) = std::fs::read_dir(&a.out) {
        if entries.next().is_some() {
            return Err(CliError::Data(format!("{} exists and is not empty", a.out.display())));
        }
    }
    std::fs::create_dir_all(&a.out).map_err(|e| FormatError::Io { path: a.out.clone(), source: e })?;
    let bundles = pipeline::synth_bundles(&params, a.scenes, a.seed).map_err(|e| CliError::Data(e.to_string()))?;
    for (i, b) in bundles.iter().enumerate() {
        bundle::write_bundle(&a.out.join(pipeline::scene_id(i)), b)?;
    }
    let manifest_path = a.out.join(bundle::CORPUS_MANIFEST);
    let mut manifest = RunManifest::new("synth", json!({ "scenes": a.scenes, "params": params })).seed(a.seed);
    manifest.add_tree(&a.out, &manifest_path)?;
    manifest.write(&manifest_path)?;
    log::info!("wrote {} scenes to {}", bundles.len(), a.out.display());
    Ok(())
}

pub fn scoring_config(ratio: f64, top_frac: f64, pool: usize, empty_ring: EmptyRing) -> CliResult<ScoringConfig> {
    let cfg = ScoringConfig { enlarge_ratio: ratio, top_fraction: top_frac, pool_size: pool, empty_ring_policy: empty_ring.into() };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn cmd_score(a: &ScoreArgs) -> CliResult {
    let cfg = scoring_config(a.ratio, a.top_frac, a.pool, a.empty_ring)?;
    let ranking = match a.baseline {
        Some(Baseline::Purity) => Ranking::PurityOnly,
        None => Ranking::Objectness,
    };
    let corpus = bundle::read_bundles(&a.input)?;
    warn_all(&corpus.warnings);
    let pools = pipeline::score_corpus(&corpus, &cfg, ranking).map_err(|m| CliError::Data(m.join("; ")))?;
    csvio::write_scored(&a.out, &pools)?;
    let manifest = RunManifest::new(
        "score",
        json!({ "scoring": cfg, "ranking": ranking, "map_normalization": MAP_NORMALIZATION }),
    )
    .input(&a.input);
    let mpath = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    finish_manifest(manifest, &mpath, &[&a.out])
}

fn emit<T: Serialize>(output: &OutputArgs, manifest: RunManifest, value: &T, report: String) -> CliResult {
    let bytes = json_bytes(value);
    let mut written: Vec<&Path> = Vec::new();
    match &output.out {
        Some(p) => {
            write_file(p, &bytes)?;
            written.push(p);
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if let Some(r) = &output.report {
        write_file(r, report.as_bytes())?;
        written.push(r);
    }
    if let Some(anchor) = written.first() {
        finish_manifest(manifest, &with_suffix(anchor, ".manifest.json"), &written)?;
    }
    Ok(())
}

fn check_ids<'a>(ids: impl IntoIterator<Item = &'a str>, truth: &[eval::GroundTruth]) -> CliResult {
    let unknown = pipeline::unknown_images(ids, truth);
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("image ids missing from the ground truth: {}", unknown.join(", "))))
    }
}

fn recall_report(c: &RecallCurve) -> String {
    let mut s = String::from("k\trecall\n");
    for (k, r) in c.ks.iter().zip(&c.recall) {
        s.push_str(&format!("{k}\t{r:.6}\n"));
    }
    s.push_str(&format!("# upper_bound_at_1\t{:.6}\tinstances\t{}\n", c.upper_bound, c.total_instances));
    s
}

fn cmd_eval(e: &EvalCommand) -> CliResult {
    match e {
        EvalCommand::Recall { scored, truth, ks, output } => {
            if ks.is_empty() || ks.contains(&0) {
                return Err(CliError::Usage("--ks needs positive cut-offs".into()));
            }
            let rows = csvio::read_scored(scored)?;
            let gt = pipeline::load_truth(truth)?;
            check_ids(rows.iter().map(|r| r.image_id.as_str()), &gt)?;
            let curve = eval::recall_at_k(&csvio::group_pools(&rows), &gt, ks);
            let m = RunManifest::new("eval recall", json!({ "ks": ks })).input(scored).input(truth);
            emit(output, m, &curve, recall_report(&curve))
        }
        EvalCommand::Corloc { scored, truth, output } => {
            let rows = csvio::read_scored(scored)?;
            let gt = pipeline::load_truth(truth)?;
            check_ids(rows.iter().map(|r| r.image_id.as_str()), &gt)?;
            let tops: Vec<TopBox> = csvio::group_pools(&rows).iter().filter_map(TopBox::from_pool).collect();
            let res = eval::corloc(&tops, &gt);
            let mut report = String::from("class\tcorloc\timages\n");
            for (c, v) in &res.per_class {
                report.push_str(&format!("{c}\t{v:.6}\t{}\n", res.images.get(c).copied().unwrap_or(0)));
            }
            report.push_str(&format!("mean\t{:.6}\n", res.mean));
            let m = RunManifest::new("eval corloc", json!({ "iou_threshold": eval::IOU_THRESHOLD })).input(scored).input(truth);
            emit(output, m, &res, report)
        }
        EvalCommand::Map { detections, truth, ap_mode, output } => {
            let dets = read_detections(detections)?;
            let gt = pipeline::load_truth(truth)?;
            check_ids(dets.iter().map(|d| d.image_id.as_str()), &gt)?;
            let mode = ApMode::from(*ap_mode);
            let res = eval::voc_ap(&dets, &gt, mode);
            let mut report = String::from("class\tap\n");
            for (c, v) in &res.per_class {
                report.push_str(&format!("{c}\t{v:.6}\n"));
            }
            report.push_str(&format!("mAP\t{:.6}\n", res.map));
            let m = RunManifest::new("eval map", json!({ "mode": mode, "iou_threshold": eval::IOU_THRESHOLD }))
                .input(detections)
                .input(truth);
            emit(output, m, &res, report)
        }
        EvalCommand::Sweep { corpus, ratios, fracs, pool, empty_ring, output } => {
            if ratios.is_empty() || fracs.is_empty() {
                return Err(CliError::Usage("--ratios and --fracs need at least one value".into()));
            }
            let base = scoring_config(DEFAULT_ENLARGE_RATIO, DEFAULT_TOP_FRACTION, *pool, *empty_ring)?;
            for &r in ratios {
                for &f in fracs {
                    scoring_config(r, f, *pool, *empty_ring)?;
                }
            }
            let c = bundle::read_bundles(corpus)?;
            warn_all(&c.warnings);
            let table = eval::ablation_sweep(&c.records(), ratios, fracs, &base);
            let m = RunManifest::new("eval sweep", json!({ "ratios": ratios, "fracs": fracs, "base": base })).input(corpus);
            emit(output, m, &SweepReport::from(&table), table.to_tsv())
        }
    }
}

fn read_detections(path: &Path) -> CliResult<Vec<eval::Detection>> {
    // a scored CSV also satisfies the box header, so try it first
    match csvio::read_scored(path) {
        Ok(rows) => Ok(csvio::scored_detections(&rows)),
        Err(FormatError::MissingColumns { .. }) => Ok(csvio::box_detections(path, &csvio::read_boxes(path)?)?),
        Err(e) => Err(e.into()),
    }
}

/// Widens through the shortest decimal form, so 0.78f32 is recorded as 0.78.
fn decimal(v: f32) -> f64 {
    v.to_string().parse().expect("float display parses back")
}

fn cmd_mask(a: &MaskArgs) -> CliResult {
    let cfg = MaskConfig::new(a.fg_thresh, a.bg_thresh).map_err(|e| CliError::Usage(e.to_string()))?;
    let saliency = mapfile::read_confmap(&a.saliency)?;
    let mut cams = Vec::with_capacity(a.cam.len());
    for p in &a.cam {
        cams.push(pseudomask::normalize_cam(mapfile::read_raw_map(p)?));
    }
    let mask = pseudomask::generate_mask(&cams, &saliency, &cfg).map_err(|e| match e {
        MaskError::BadThresholds { .. } => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    mapfile::write_mask(&mask, &a.out)?;
    let stats_path = a.stats.clone().unwrap_or_else(|| with_suffix(&a.out, ".stats.json"));
    write_file(&stats_path, &json_bytes(&pseudomask::mask_stats(&mask)))?;
    let mut m = RunManifest::new(
        "mask",
        json!({
            "fg_threshold": decimal(cfg.fg_threshold),
            "bg_threshold": decimal(cfg.bg_threshold),
            "cam_normalization": "divide by map maximum",
            "map_normalization": MAP_NORMALIZATION,
        }),
    );
    for p in &a.cam {
        m = m.input(p);
    }
    m = m.input(&a.saliency);
    let mpath = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    finish_manifest(m, &mpath, &[&a.out, &stats_path])
}

/// Level of the map underneath the outlines; outlines use 255.
const OVERLAY_MAP_MAX: f64 = 200.0;

fn cmd_overlay(a: &OverlayArgs) -> CliResult {
    let map = mapfile::read_confmap(&a.map)?;
    let rows = csvio::read_boxes(&a.boxes)?;
    let (w, h) = (map.width(), map.height());
    let mut samples: Vec<u16> = map.values().iter().map(|&v| (f64::from(v) * OVERLAY_MAP_MAX).round() as u16).collect();
    let selected = rows
        .iter()
        .filter(|r| a.image_id.as_ref().is_none_or(|id| *id == r.image_id))
        .filter(|r| a.class.is_none_or(|c| c == r.class_id))
        .take(a.top.unwrap_or(usize::MAX));
    let mut outside = Vec::new();
    for r in selected {
        let b = r.bbox;
        if !b.fits_in(w, h) {
            outside.push(b.to_string());
            continue;
        }
        let (x0, y0, x1, y1) = (b.x0(), b.y0(), b.x1() - 1, b.y1() - 1);
        for x in x0..=x1 {
            samples[(y0 * w + x) as usize] = 255;
            samples[(y1 * w + x) as usize] = 255;
        }
        for y in y0..=y1 {
            samples[(y * w + x0) as usize] = 255;
            samples[(y * w + x1) as usize] = 255;
        }
    }
    if !outside.is_empty() {
        return Err(CliError::Data(format!("boxes outside the {w}x{h} map: {}", outside.join(", "))));
    }
    mapfile::write_greymap(&Greymap { width: w, height: h, maxval: 255, samples }, &a.out)?;
    Ok(())
}
