//! Umbrella command-line tool: segmentation, codebook and feature
//! extraction, detector training and scoring, action-model training
//! and inference, the evaluation protocol, and synthetic corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use actionrec::config::{load_config, FileConfig};
use actionrec::descriptors::{
    dense_descriptors, read_features_csv, superpixel_descriptors, train_codebook_with_k, Codebook,
    write_features_csv, SuperpixelDescriptor, CODEBOOK_WORDS,
};
use actionrec::detector::{
    read_scores_csv, train_multiclass_named, write_scores_csv, DetectorModel, ScoreVector,
    DEFAULT_EPOCHS,
};
use actionrec::harness::{
    ingest, read_binary_labels_csv, read_class_column, render_report, report_emit, run_protocol,
    DatasetLayout, ProtocolConfig, ReportFormat, SynthRule,
};
use actionrec::imaging::load_ppm;
use actionrec::segmentation::{read_label_pgm, segment, write_label_pgm, SegmentationParams};
use actionrec::structmodel::{
    infer_exact, infer_greedy, train_lssvm, ActionModel, ExampleMeasurements, TrainConfig,
};
use actionrec::{Error, Result};

#[derive(Parser)]
#[command(
    name = "actionrec",
    version,
    about = "Still-image action recognition through latent superpixel classes",
    propagate_version = true
)]
struct Cli {
    /// Configuration file (TOML or JSON)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Default seed for seeded subcommands
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for the protocol (0 = runtime default)
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a PPM image into superpixels
    Segment(SegmentArgs),
    /// Visual-word codebook
    #[command(subcommand)]
    Codebook(CodebookCommand),
    /// Per-superpixel descriptors
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Superpixel class detector
    #[command(subcommand)]
    Detector(DetectorCommand),
    /// Latent-variable action model
    #[command(subcommand)]
    Action(ActionCommand),
    /// One-vs-rest evaluation protocol
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Generate a synthetic measurement corpus
    Synth(SynthArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Input image (binary PPM, maxval 255)
    #[arg(long, value_name = "PPM")]
    input: PathBuf,
    /// Gaussian pre-smoothing bandwidth
    #[arg(long)]
    sigma: Option<f64>,
    /// Merge threshold scale
    #[arg(long)]
    k: Option<f64>,
    /// Minimum superpixel size in pixels
    #[arg(long)]
    min_size: Option<usize>,
    /// Output label map (PGM; 16-bit when over 256 superpixels)
    #[arg(long, value_name = "PGM")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum CodebookCommand {
    /// Cluster dense gradient descriptors from a directory of images
    Train(CodebookTrainArgs),
}

#[derive(Args)]
struct CodebookTrainArgs {
    /// Directory of training images (*.ppm, non-recursive)
    #[arg(long, value_name = "DIR")]
    images: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Vocabulary size
    #[arg(long)]
    words: Option<usize>,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Extract one descriptor row per superpixel
    Extract(FeaturesExtractArgs),
}

#[derive(Args)]
struct FeaturesExtractArgs {
    #[arg(long, value_name = "PPM")]
    image: PathBuf,
    /// Label map produced by `segment`
    #[arg(long, value_name = "PGM")]
    seg: PathBuf,
    #[arg(long, value_name = "JSON")]
    codebook: PathBuf,
    /// Output CSV, one row per superpixel
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DetectorCommand {
    /// Fit the multiclass detector on labeled superpixel descriptors
    Train(DetectorTrainArgs),
    /// Emit per-superpixel class posteriors
    Score(DetectorScoreArgs),
}

#[derive(Args)]
struct DetectorTrainArgs {
    /// Descriptor CSV (one row per superpixel)
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    /// Single-column CSV of class names, aligned with the feature rows
    #[arg(long, value_name = "CSV")]
    labels: PathBuf,
    /// Regularization strength
    #[arg(long = "C", value_name = "F")]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args)]
struct DetectorScoreArgs {
    #[arg(long, value_name = "CSV")]
    features: PathBuf,
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Output CSV, one probability row per superpixel
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ActionCommand {
    /// Train the latent structural SVM on per-image score files
    Train(ActionTrainArgs),
    /// Infer the action label and latent states for one image
    Infer(ActionInferArgs),
}

#[derive(Args)]
struct ActionTrainArgs {
    /// Directory of per-image score CSVs
    #[arg(long, value_name = "DIR")]
    scores: PathBuf,
    /// CSV rows `name,label`; name is a score file (with or without .csv)
    #[arg(long, value_name = "CSV")]
    labels: PathBuf,
    /// Regularization strength
    #[arg(long = "C", value_name = "F")]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Inner solver epochs per round
    #[arg(long)]
    epochs: Option<usize>,
    /// Alternation rounds cap
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Scale pairwise features by 1/(T-1)
    #[arg(long)]
    normalize_pairs: bool,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
}

#[derive(Args)]
struct ActionInferArgs {
    /// Score CSV of one image
    #[arg(long, value_name = "CSV")]
    scores: PathBuf,
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Exhaustive search instead of greedy ascent (small T only)
    #[arg(long)]
    exact: bool,
}

#[derive(Subcommand)]
enum ProtocolCommand {
    /// Evaluate every action class of a dataset
    Run(ProtocolRunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    FolderPerClass,
    ManifestFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Tsv,
    Json,
}

#[derive(Args)]
struct ProtocolRunArgs {
    /// Dataset root
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = LayoutArg::FolderPerClass)]
    layout: LayoutArg,
    /// Artifact cache directory
    #[arg(long, value_name = "DIR")]
    workdir: Option<PathBuf>,
    /// Pre-trained codebook (otherwise trained from the train split)
    #[arg(long, value_name = "JSON")]
    codebook: Option<PathBuf>,
    /// Pre-trained detector model (required)
    #[arg(long, value_name = "JSON")]
    detector: Option<PathBuf>,
    /// Negatives sampled from each non-positive class
    #[arg(long)]
    per_class_negatives: Option<usize>,
    /// Regularization for the per-class action models
    #[arg(long = "C", value_name = "F")]
    c: Option<f64>,
    /// Report file; omitted = print to stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    format: FormatArg,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of superpixel states
    #[arg(long)]
    k: usize,
    /// Smallest superpixel count per example
    #[arg(long)]
    t_min: usize,
    /// Largest superpixel count per example
    #[arg(long)]
    t_max: usize,
    /// Number of examples
    #[arg(long)]
    n: usize,
    /// Evidence flip probability in [0, 0.5)
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Label rule: contains:<state> or min-count:<state>:<min>
    /// (default contains:<k-1>)
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (scores/, labels.csv, latents.csv)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Global flags that outlive the subcommand dispatch.
#[derive(Clone, Copy)]
struct Globals {
    seed: Option<u64>,
    jobs: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let globals = Globals { seed: cli.seed, jobs: cli.jobs };
    match cli.command {
        Command::Segment(args) => run_segment(args, &cfg),
        Command::Codebook(CodebookCommand::Train(args)) => run_codebook_train(args, &cfg, globals),
        Command::Features(FeaturesCommand::Extract(args)) => run_features_extract(args),
        Command::Detector(DetectorCommand::Train(args)) => run_detector_train(args, &cfg, globals),
        Command::Detector(DetectorCommand::Score(args)) => run_detector_score(args, &cfg),
        Command::Action(ActionCommand::Train(args)) => run_action_train(args, &cfg, globals),
        Command::Action(ActionCommand::Infer(args)) => run_action_infer(args),
        Command::Protocol(ProtocolCommand::Run(args)) => run_protocol_cmd(args, &cfg, globals),
        Command::Synth(args) => run_synth(args, globals),
    }
}

fn effective_seed(local: Option<u64>, globals: Globals) -> u64 {
    local.or(globals.seed).unwrap_or(0)
}

fn segmentation_params(args_sigma: Option<f64>, args_k: Option<f64>, args_min: Option<usize>, cfg: &FileConfig) -> SegmentationParams {
    let d = SegmentationParams::default();
    SegmentationParams {
        sigma: args_sigma.or(cfg.segmentation.sigma).unwrap_or(d.sigma),
        k: args_k.or(cfg.segmentation.k).unwrap_or(d.k),
        min_size: args_min.or(cfg.segmentation.min_size).unwrap_or(d.min_size),
    }
}

fn run_segment(args: SegmentArgs, cfg: &FileConfig) -> Result<()> {
    let params = segmentation_params(args.sigma, args.k, args.min_size, cfg);
    let img = load_ppm(&args.input)?;
    let seg = segment(&img, &params)?;
    write_label_pgm(&seg, &args.out)?;
    println!("{} superpixels -> {}", seg.num_segments(), args.out.display());
    Ok(())
}

fn ppm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for item in entries {
        let item = item.map_err(|e| Error::io(dir, e))?;
        let path = item.path();
        if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some("ppm") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Validation(format!("no .ppm images in {}", dir.display())));
    }
    Ok(files)
}

fn run_codebook_train(args: CodebookTrainArgs, cfg: &FileConfig, globals: Globals) -> Result<()> {
    let files = ppm_files(&args.images)?;
    let mut pool = Vec::new();
    for file in &files {
        pool.extend(dense_descriptors(&load_ppm(file)?)?);
    }
    let words = args.words.or(cfg.codebook.words).unwrap_or(CODEBOOK_WORDS);
    let book = train_codebook_with_k(&pool, words, effective_seed(args.seed, globals))?;
    book.save(&args.out)?;
    println!(
        "{} words from {} descriptors across {} images -> {}",
        book.words,
        pool.len(),
        files.len(),
        args.out.display()
    );
    Ok(())
}

fn run_features_extract(args: FeaturesExtractArgs) -> Result<()> {
    let img = load_ppm(&args.image)?;
    let seg = read_label_pgm(&args.seg)?;
    let book = Codebook::load(&args.codebook)?;
    let descs = superpixel_descriptors(&img, &seg, &book)?;
    write_features_csv(&descs, &args.out)?;
    let dim = descs.first().map_or(0, |d| d.values.len());
    println!("{} superpixels x {} features -> {}", descs.len(), dim, args.out.display());
    Ok(())
}

/// Optionally appends the constant-1 bias substitute, mirroring the
/// `detector.append_constant` config switch at train and score time.
fn maybe_append_constant(rows: &mut [SuperpixelDescriptor], cfg: &FileConfig) {
    if cfg.detector.append_constant.unwrap_or(false) {
        for row in rows.iter_mut() {
            row.values.push(1.0);
        }
    }
}

fn run_detector_train(args: DetectorTrainArgs, cfg: &FileConfig, globals: Globals) -> Result<()> {
    let mut rows = read_features_csv(&args.features)?;
    maybe_append_constant(&mut rows, cfg);
    let labels = read_class_column(&args.labels)?;
    if labels.len() != rows.len() {
        return Err(Error::Validation(format!(
            "{} feature rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let mut class_names: Vec<String> = labels.clone();
    class_names.sort();
    class_names.dedup();
    let id_of = |name: &str| class_names.iter().position(|c| c == name).expect("name present");
    let samples: Vec<(SuperpixelDescriptor, usize)> = rows
        .into_iter()
        .zip(labels.iter())
        .map(|(row, name)| (row, id_of(name)))
        .collect();
    let c = args.c.or(cfg.detector.c).unwrap_or(1.0);
    let epochs = args.epochs.or(cfg.detector.epochs).unwrap_or(DEFAULT_EPOCHS);
    let model = train_multiclass_named(
        &samples,
        class_names,
        c,
        effective_seed(args.seed, globals),
        epochs,
    )?;
    model.save(&args.out)?;
    println!(
        "detector over {} classes, {} features -> {}",
        model.num_classes(),
        model.feature_dim,
        args.out.display()
    );
    Ok(())
}

fn run_detector_score(args: DetectorScoreArgs, cfg: &FileConfig) -> Result<()> {
    let model = DetectorModel::load(&args.model)?;
    let mut rows = read_features_csv(&args.features)?;
    maybe_append_constant(&mut rows, cfg);
    let scores: Vec<ScoreVector> = rows
        .iter()
        .map(|row| actionrec::detector::score(&model, row))
        .collect::<Result<_>>()?;
    write_scores_csv(&scores, &args.out)?;
    println!(
        "{} score rows over {} classes -> {}",
        scores.len(),
        model.num_classes(),
        args.out.display()
    );
    Ok(())
}

/// Resolves a label name to a score file inside the directory: the
/// name is used verbatim when it already ends in .csv.
fn score_file_path(dir: &Path, name: &str) -> PathBuf {
    if name.ends_with(".csv") {
        dir.join(name)
    } else {
        dir.join(format!("{name}.csv"))
    }
}

fn run_action_train(args: ActionTrainArgs, cfg: &FileConfig, globals: Globals) -> Result<()> {
    let labels = read_binary_labels_csv(&args.labels)?;
    if labels.is_empty() {
        return Err(Error::Validation(format!("{} lists no examples", args.labels.display())));
    }
    let mut data = Vec::with_capacity(labels.len());
    for (name, y) in &labels {
        let path = score_file_path(&args.scores, name);
        data.push((ExampleMeasurements::new(read_scores_csv(&path)?)?, *y));
    }
    let train_config = TrainConfig {
        seed: effective_seed(args.seed, globals),
        epochs: args.epochs.or(cfg.action.epochs).unwrap_or(50),
        max_rounds: args.max_rounds.or(cfg.action.max_rounds).unwrap_or(10),
        normalize_pairs: args.normalize_pairs || cfg.action.normalize_pairs.unwrap_or(false),
    };
    let c = args.c.or(cfg.action.c).unwrap_or(1.0);
    let (model, report) = train_lssvm(&data, c, &train_config)?;
    model.save(&args.out)?;
    println!(
        "trained on {} examples with {} states -> {}",
        data.len(),
        model.k,
        args.out.display()
    );
    println!(
        "rounds: {} (converged: {}), risk violations: {}, final risk: {:.6}",
        report.rounds,
        if report.converged { "yes" } else { "no" },
        report.risk_violations,
        report.risks.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn run_action_infer(args: ActionInferArgs) -> Result<()> {
    let model = ActionModel::load(&args.model)?;
    let x = ExampleMeasurements::new(read_scores_csv(&args.scores)?)?;
    let (y, h, score) =
        if args.exact { infer_exact(&model, &x)? } else { infer_greedy(&model, &x)? };
    println!("y\t{y}");
    let states: Vec<String> = h.states().iter().map(usize::to_string).collect();
    println!("h\t{}", states.join(" "));
    println!("score\t{score:.6}");
    Ok(())
}

fn run_protocol_cmd(args: ProtocolRunArgs, cfg: &FileConfig, globals: Globals) -> Result<()> {
    let layout = match args.layout {
        LayoutArg::FolderPerClass => DatasetLayout::FolderPerClass,
        LayoutArg::ManifestFile => DatasetLayout::ManifestFile,
    };
    let manifest = ingest(&args.data, layout)?;
    let defaults = ProtocolConfig::default();
    let config = ProtocolConfig {
        workdir: args
            .workdir
            .or_else(|| cfg.protocol.workdir.clone())
            .unwrap_or(defaults.workdir),
        segmentation: segmentation_params(None, None, None, cfg),
        codebook_path: args.codebook.or_else(|| cfg.protocol.codebook.clone()),
        codebook_words: cfg.codebook.words.unwrap_or(CODEBOOK_WORDS),
        detector_path: args.detector.or_else(|| cfg.protocol.detector.clone()),
        c: args.c.or(cfg.protocol.c).unwrap_or(defaults.c),
        per_class_negatives: args
            .per_class_negatives
            .or(cfg.protocol.per_class_negatives)
            .unwrap_or(defaults.per_class_negatives),
        epochs: cfg.protocol.epochs.unwrap_or(defaults.epochs),
        max_rounds: cfg.protocol.max_rounds.unwrap_or(defaults.max_rounds),
        normalize_pairs: cfg.protocol.normalize_pairs.unwrap_or(false),
        seed: globals.seed.unwrap_or(0),
        jobs: globals.jobs.unwrap_or(0),
    };
    let report = run_protocol(&manifest, &config)?;
    let format = match args.format {
        FormatArg::Tsv => ReportFormat::Tsv,
        FormatArg::Json => ReportFormat::Json,
    };
    match &args.out {
        Some(path) => {
            report_emit(&report, format, path)?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |a| format!("{a:.4}"));
            println!(
                "{} classes, mean positive {} / mean negative {} -> {}",
                report.rows.len(),
                fmt(report.mean_positive_accuracy()),
                fmt(report.mean_negative_accuracy()),
                path.display()
            );
        }
        None => print!("{}", render_report(&report, format)),
    }
    Ok(())
}

fn parse_rule(text: Option<&str>, k: usize) -> Result<SynthRule> {
    let Some(text) = text else {
        return Ok(SynthRule::ContainsState(k.saturating_sub(1)));
    };
    let parts: Vec<&str> = text.split(':').collect();
    let parse_num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Validation(format!("bad number {s:?} in rule {text:?}")))
    };
    match parts.as_slice() {
        ["contains", state] => Ok(SynthRule::ContainsState(parse_num(state)?)),
        ["min-count", state, min] => Ok(SynthRule::MinCountOfState {
            state: parse_num(state)?,
            min: parse_num(min)?,
        }),
        _ => Err(Error::Validation(format!(
            "unknown rule {text:?}; expected contains:<state> or min-count:<state>:<min>"
        ))),
    }
}

fn run_synth(args: SynthArgs, globals: Globals) -> Result<()> {
    let rule = parse_rule(args.rule.as_deref(), args.k)?;
    let (data, truth) = actionrec::harness::synth_generate(
        args.k,
        (args.t_min, args.t_max),
        args.n,
        rule,
        args.noise,
        effective_seed(args.seed, globals),
    )?;
    let scores_dir = args.out.join("scores");
    fs::create_dir_all(&scores_dir).map_err(|e| Error::io(&scores_dir, e))?;
    let mut labels = String::new();
    let mut latents = String::new();
    let width = (args.n.max(2) - 1).ilog10() as usize + 1;
    for (i, ((x, y), h)) in data.iter().zip(&truth).enumerate() {
        let name = format!("ex_{i:0width$}");
        let rows: Vec<ScoreVector> = x.iter().cloned().collect();
        write_scores_csv(&rows, scores_dir.join(format!("{name}.csv")))?;
        labels.push_str(&format!("{name},{y}\n"));
        let states: Vec<String> = h.states().iter().map(usize::to_string).collect();
        latents.push_str(&format!("{name},{}\n", states.join(" ")));
    }
    let labels_path = args.out.join("labels.csv");
    fs::write(&labels_path, labels).map_err(|e| Error::io(&labels_path, e))?;
    let latents_path = args.out.join("latents.csv");
    fs::write(&latents_path, latents).map_err(|e| Error::io(&latents_path, e))?;
    let positives = data.iter().filter(|(_, y)| *y == 1).count();
    println!(
        "{} examples ({} positive) with {} states -> {}",
        data.len(),
        positives,
        args.k,
        args.out.display()
    );
    Ok(())
}
