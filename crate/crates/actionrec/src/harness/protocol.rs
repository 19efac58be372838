//! The one-vs-rest evaluation protocol: stage segmentations, features
//! and detector scores as cached on-disk artifacts, then train one
//! latent SVM per action class on a sub-sampled training list and
//! score the full test split.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::descriptors::{
    dense_descriptors, read_features_csv, superpixel_descriptors, train_codebook_with_k, Codebook,
    write_features_csv, CODEBOOK_WORDS,
};
use crate::detector::{self, read_scores_csv, write_scores_csv, DetectorModel, ScoreVector};
use crate::error::{Error, Result};
use crate::harness::dataset::{subsample_negatives, DatasetEntry, DatasetManifest, Split};
use crate::harness::report::{ClassOutcome, EvalReport};
use crate::imaging::load_ppm;
use crate::segmentation::{read_label_pgm, segment, write_label_pgm, SegmentationParams};
use crate::structmodel::{infer_greedy, train_lssvm, ExampleMeasurements, TrainConfig};
use crate::util;

/// Everything `run_protocol` needs beyond the manifest. The detector
/// is always a pre-trained artifact; it is never retrained here. The
/// codebook may be an artifact too, or is trained once from the train
/// split and cached under the work directory.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Cache root for staged artifacts (`seg/`, `features/`, `scores/`).
    pub workdir: PathBuf,
    pub segmentation: SegmentationParams,
    pub codebook_path: Option<PathBuf>,
    pub codebook_words: usize,
    pub detector_path: Option<PathBuf>,
    /// Regularization for the per-class latent SVMs.
    pub c: f64,
    /// Negatives drawn from each non-positive class per model.
    pub per_class_negatives: usize,
    pub epochs: usize,
    pub max_rounds: usize,
    pub normalize_pairs: bool,
    pub seed: u64,
    /// Worker threads; 0 picks the runtime default.
    pub jobs: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            workdir: PathBuf::from("actionrec_cache"),
            segmentation: SegmentationParams::default(),
            codebook_path: None,
            codebook_words: CODEBOOK_WORDS,
            detector_path: None,
            c: 1.0,
            per_class_negatives: 5,
            epochs: 50,
            max_rounds: 10,
            normalize_pairs: false,
            seed: 0,
            jobs: 0,
        }
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_detector(config: &ProtocolConfig) -> Result<DetectorModel> {
    let path = config.detector_path.as_ref().ok_or_else(|| Error::Config {
        stage: "detector".into(),
        reason: "no detector model configured; train one with `actionrec detector train` \
                 and set detector_path"
            .into(),
    })?;
    if !path.is_file() {
        return Err(Error::Config {
            stage: "detector".into(),
            reason: format!("detector model not found at {}", path.display()),
        });
    }
    DetectorModel::load(path)
}

/// Loads the configured codebook, or trains one from the train split
/// and caches it at `<workdir>/codebook.json`.
fn load_or_train_codebook(manifest: &DatasetManifest, config: &ProtocolConfig) -> Result<Codebook> {
    if let Some(path) = &config.codebook_path {
        if !path.is_file() {
            return Err(Error::Config {
                stage: "codebook".into(),
                reason: format!("codebook not found at {}", path.display()),
            });
        }
        return Codebook::load(path);
    }
    let cached = config.workdir.join("codebook.json");
    if cached.is_file() {
        return Codebook::load(&cached);
    }
    let mut pool = Vec::new();
    for entry in manifest.split_entries(Split::Train) {
        let img = load_ppm(manifest.resolve(entry))?;
        pool.extend(dense_descriptors(&img)?);
    }
    let book = train_codebook_with_k(
        &pool,
        config.codebook_words,
        util::stage_seed(config.seed, "codebook"),
    )?;
    book.save(&cached)?;
    Ok(book)
}

/// Runs the image through the staged pipeline, reusing any cached
/// artifact, and returns its per-superpixel score vectors.
fn staged_scores(
    manifest: &DatasetManifest,
    entry: &DatasetEntry,
    book: &Codebook,
    model: &DetectorModel,
    config: &ProtocolConfig,
) -> Result<ExampleMeasurements> {
    let key = format!("{:016x}", util::fnv1a64(entry.path.as_bytes()));
    let seg_path = config.workdir.join("seg").join(format!("{key}.pgm"));
    let feat_path = config.workdir.join("features").join(format!("{key}.csv"));
    let score_path = config.workdir.join("scores").join(format!("{key}.csv"));

    if !score_path.is_file() {
        if !feat_path.is_file() {
            let img = load_ppm(manifest.resolve(entry))?;
            let seg = if seg_path.is_file() {
                read_label_pgm(&seg_path)?
            } else {
                let seg = segment(&img, &config.segmentation)?;
                write_label_pgm(&seg, &seg_path)?;
                seg
            };
            let descs = superpixel_descriptors(&img, &seg, book)?;
            write_features_csv(&descs, &feat_path)?;
        }
        let descs = read_features_csv(&feat_path)?;
        let scores: Vec<ScoreVector> =
            descs.iter().map(|d| detector::score(model, d)).collect::<Result<_>>()?;
        write_scores_csv(&scores, &score_path)?;
    }
    ExampleMeasurements::new(read_scores_csv(&score_path)?)
}

fn run_inner(manifest: &DatasetManifest, config: &ProtocolConfig) -> Result<EvalReport> {
    for sub in ["seg", "features", "scores"] {
        ensure_dir(&config.workdir.join(sub))?;
    }
    let model = load_detector(config)?;
    let book = load_or_train_codebook(manifest, config)?;

    let measurements: HashMap<&str, ExampleMeasurements> = manifest
        .entries()
        .par_iter()
        .map(|e| Ok((e.path.as_str(), staged_scores(manifest, e, &book, &model, config)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let test_entries: Vec<&DatasetEntry> = manifest.split_entries(Split::Test).collect();
    let rows: Vec<ClassOutcome> = manifest
        .class_names()
        .par_iter()
        .map(|class| {
            let class_seed = util::stage_seed(config.seed, &format!("class:{class}"));
            let picks = subsample_negatives(
                manifest,
                class,
                config.per_class_negatives,
                util::stage_seed(class_seed, "subsample"),
            )?;
            let data: Vec<(ExampleMeasurements, usize)> = picks
                .iter()
                .map(|e| (measurements[e.path.as_str()].clone(), usize::from(&e.class == class)))
                .collect();
            let train_config = TrainConfig {
                seed: util::stage_seed(class_seed, "train"),
                epochs: config.epochs,
                max_rounds: config.max_rounds,
                normalize_pairs: config.normalize_pairs,
            };
            let (action_model, _) = train_lssvm(&data, config.c, &train_config)?;
            let mut row = ClassOutcome::new(class.clone());
            for entry in &test_entries {
                let (y_hat, _, _) = infer_greedy(&action_model, &measurements[entry.path.as_str()])?;
                row.observe(&entry.class == class, y_hat == 1);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    Ok(EvalReport { rows })
}

/// Evaluates every class of the manifest. Deterministic for a fixed
/// manifest, config, and artifact set: the global seed fans out to
/// per-stage and per-class seeds, so two runs emit identical reports.
/// Every class needs at least one training image; the latent SVM
/// cannot fit a single-label training list.
pub fn run_protocol(manifest: &DatasetManifest, config: &ProtocolConfig) -> Result<EvalReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config { stage: "protocol".into(), reason: e.to_string() })?;
    pool.install(|| run_inner(manifest, config))
}
