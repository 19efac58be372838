//! Bag-of-features codebook: a 400-word k-means vocabulary over dense
//! gradient descriptors, with hard-assignment histograms.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptors::dense::{DenseGradientDescriptor, DESCRIPTOR_DIM};
use crate::error::{Error, Result};
use crate::util;

pub const CODEBOOK_WORDS: usize = 400;
const MAX_LLOYD_ITERS: usize = 100;
const SCHEMA_VERSION: u32 = 1;

/// A trained k-means vocabulary. `trained_on` is a fingerprint of the
/// training corpus so downstream artifacts can detect mismatches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Codebook {
    schema_version: u32,
    pub words: usize,
    pub dim: usize,
    pub trained_on: String,
    pub centroids: Vec<Vec<f64>>,
}

impl Codebook {
    /// Index of the nearest centroid, lowest index on ties.
    pub fn assign(&self, values: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = dist2(c, values);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Format { path: path.as_ref().into(), reason: e.to_string() })?;
        util::write_atomic(path.as_ref(), &bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let book: Codebook = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        if book.schema_version != SCHEMA_VERSION {
            return Err(Error::Format {
                path: path.into(),
                reason: format!(
                    "unsupported codebook schema_version {} (expected {SCHEMA_VERSION})",
                    book.schema_version
                ),
            });
        }
        book.validate().map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        Ok(book)
    }

    fn validate(&self) -> Result<()> {
        if self.centroids.len() != self.words {
            return Err(Error::Shape(format!(
                "codebook declares {} words but stores {} centroids",
                self.words,
                self.centroids.len()
            )));
        }
        if let Some(row) = self.centroids.iter().find(|c| c.len() != self.dim) {
            return Err(Error::Shape(format!(
                "centroid has {} values, expected {}",
                row.len(),
                self.dim
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.centroids {
            if !seen.insert(bit_key(c)) {
                return Err(Error::Validation("codebook contains duplicate centroids".into()));
            }
        }
        Ok(())
    }
}

/// Trains the standard 400-word codebook.
pub fn train_codebook(descs: &[DenseGradientDescriptor], seed: u64) -> Result<Codebook> {
    train_codebook_with_k(descs, CODEBOOK_WORDS, seed)
}

/// Trains a codebook with an explicit vocabulary size. Zero descriptors
/// are excluded; fails with `InsufficientData` unless at least `k`
/// bit-distinct descriptors remain.
pub fn train_codebook_with_k(
    descs: &[DenseGradientDescriptor],
    k: usize,
    seed: u64,
) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::Domain("codebook size must be positive".into()));
    }
    let points: Vec<&[f64]> = descs
        .iter()
        .filter(|d| !d.is_zero())
        .map(|d| d.values.as_slice())
        .collect();
    if let Some(p) = points.iter().find(|p| p.len() != DESCRIPTOR_DIM) {
        return Err(Error::Shape(format!(
            "descriptor has {} values, expected {DESCRIPTOR_DIM}",
            p.len()
        )));
    }
    let mut distinct: Vec<&[f64]> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &points {
        if seen.insert(bit_key(p)) {
            distinct.push(p);
        }
    }
    if distinct.len() < k {
        return Err(Error::InsufficientData(format!(
            "codebook training needs {k} distinct non-zero descriptors, found {}",
            distinct.len()
        )));
    }

    let mut centroids = plus_plus_init(&distinct, k, seed);
    let mut assign = vec![usize::MAX; points.len()];
    let mut last_objective = f64::INFINITY;
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        let mut objective = 0.0;
        for (pi, p) in points.iter().enumerate() {
            let (ci, d) = nearest(&centroids, p);
            objective += d;
            if assign[pi] != ci {
                assign[pi] = ci;
                changed = true;
            }
        }
        debug_assert!(objective <= last_objective + 1e-9 * (1.0 + last_objective));
        last_objective = objective;
        if !changed {
            break;
        }
        update_means(&points, &assign, &mut centroids);
        reseed_empty(&points, &assign, &mut centroids);
    }
    // means of distinct clusters can still coincide; reseeding the later
    // duplicate from the farthest point restores pairwise distinctness
    for _ in 0..10 {
        if dedupe_centroids(&points, &mut centroids) {
            break;
        }
    }

    let book = Codebook {
        schema_version: SCHEMA_VERSION,
        words: k,
        dim: DESCRIPTOR_DIM,
        trained_on: corpus_fingerprint(descs),
        centroids,
    };
    book.validate()?;
    Ok(book)
}

/// Histogram of codeword assignments over the given descriptors,
/// L1-normalized; all-zero when no descriptor carries gradient energy.
pub fn bof_histogram(descs: &[&DenseGradientDescriptor], book: &Codebook) -> Vec<f64> {
    let mut hist = vec![0.0; book.words];
    let mut total = 0.0;
    for d in descs {
        if d.is_zero() {
            continue;
        }
        hist[book.assign(&d.values)] += 1.0;
        total += 1.0;
    }
    if total > 0.0 {
        for h in &mut hist {
            *h /= total;
        }
    }
    hist
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(c, p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// k-means++ over the distinct points: first centroid uniform, then
/// each next sampled proportional to squared distance from the chosen
/// set.
fn plus_plus_init(distinct: &[&[f64]], k: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = util::rng_from(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..distinct.len());
    centroids.push(distinct[first].to_vec());
    let mut d2: Vec<f64> = distinct.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = d2.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        centroids.push(distinct[pick].to_vec());
        for (i, p) in distinct.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centroids.last().unwrap()));
        }
    }
    centroids
}

fn update_means(points: &[&[f64]], assign: &[usize], centroids: &mut [Vec<f64>]) {
    let mut counts = vec![0usize; centroids.len()];
    let mut sums = vec![vec![0.0; DESCRIPTOR_DIM]; centroids.len()];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(*p) {
            *s += v;
        }
    }
    for (ci, c) in centroids.iter_mut().enumerate() {
        if counts[ci] == 0 {
            continue; // left for reseed_empty
        }
        for (cv, s) in c.iter_mut().zip(&sums[ci]) {
            *cv = s / counts[ci] as f64;
        }
    }
}

/// Moves each empty cluster onto the point farthest from its current
/// centroid (lowest point index on ties).
fn reseed_empty(points: &[&[f64]], assign: &[usize], centroids: &mut [Vec<f64>]) {
    let mut counts = vec![0usize; centroids.len()];
    for &a in assign {
        counts[a] += 1;
    }
    let mut d2: Vec<f64> = points
        .iter()
        .zip(assign)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .collect();
    for ci in 0..centroids.len() {
        if counts[ci] > 0 {
            continue;
        }
        let far = d2
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        centroids[ci] = points[far].to_vec();
        d2[far] = -1.0; // each reseed takes a different point
    }
}

/// Returns true when all centroids are pairwise distinct; otherwise
/// reseeds later duplicates and reports false.
fn dedupe_centroids(points: &[&[f64]], centroids: &mut [Vec<f64>]) -> bool {
    let mut seen = BTreeSet::new();
    let mut dupes = Vec::new();
    for (i, c) in centroids.iter().enumerate() {
        if !seen.insert(bit_key(c)) {
            dupes.push(i);
        }
    }
    if dupes.is_empty() {
        return true;
    }
    let mut d2: Vec<f64> = points.iter().map(|p| nearest(centroids, p).1).collect();
    for ci in dupes {
        let far = d2
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        centroids[ci] = points[far].to_vec();
        d2[far] = -1.0;
    }
    false
}

fn bit_key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

/// FNV-1a over the little-endian bytes of every descriptor value, in
/// corpus order, prefixed with the corpus size.
fn corpus_fingerprint(descs: &[DenseGradientDescriptor]) -> String {
    let mut bytes = Vec::with_capacity(8 + descs.len() * DESCRIPTOR_DIM * 8);
    bytes.extend_from_slice(&(descs.len() as u64).to_le_bytes());
    for d in descs {
        for v in &d.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    format!("{:016x}", util::fnv1a64(&bytes))
}
