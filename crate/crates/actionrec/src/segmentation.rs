//! Graph-based over-segmentation into superpixels.
//!
//! Edges of the 4-neighbour grid are processed in Kruskal order; two
//! components merge when the connecting weight does not exceed either
//! side's internal difference plus the adaptive threshold `k / |C|`.
//! A post-pass then folds every component smaller than `min_size` into
//! its most-similar neighbour (smallest boundary edge weight first).
//!
//! Edge weights are Euclidean color distances on the Gaussian-smoothed
//! image, measured on a 0..255 sample scale, so `k` is comparable to the
//! customary defaults of this algorithm family.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{self, ImageBuffer};

/// Parameters of the graph merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationParams {
    /// Gaussian pre-smoothing std-dev in pixels.
    pub sigma: f64,
    /// Merge-threshold scale; larger values merge more aggressively.
    pub k: f64,
    /// Minimum component size in pixels, enforced by the post-pass.
    pub min_size: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            sigma: 0.8,
            k: 300.0,
            min_size: 100,
        }
    }
}

impl SegmentationParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::Domain(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.k > 0.0) {
            return Err(Error::Domain(format!("k must be > 0, got {}", self.k)));
        }
        if self.min_size < 1 {
            return Err(Error::Domain("min_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-pixel superpixel identifiers, contiguous `0..T-1`, each label's
/// pixel set 4-connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    num_segments: usize,
}

impl SegmentLabelMap {
    /// Builds a label map from raw labels, verifying the contiguity and
    /// connectivity invariants.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Shape("label count does not match dimensions".into()));
        }
        let num_segments = validate_labels(width, height, &labels)?;
        Ok(SegmentLabelMap {
            width,
            height,
            labels,
            num_segments,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// T, the number of superpixels.
    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel indices (row-major) of one superpixel.
    pub fn pixels_of(&self, label: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }
}

fn validate_labels(width: usize, height: usize, labels: &[u32]) -> Result<usize> {
    let max = *labels.iter().max().expect("non-empty") as usize;
    let t = max + 1;
    let mut seen = vec![false; t];
    for &l in labels {
        seen[l as usize] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::Validation("labels are not contiguous 0..T-1".into()));
    }
    // each label's pixel set must be 4-connected: one flood fill per label
    let mut component = vec![u32::MAX; labels.len()];
    let mut components_seen = 0usize;
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if component[start] != u32::MAX {
            continue;
        }
        components_seen += 1;
        if components_seen > t {
            return Err(Error::Validation(
                "a label covers more than one connected component".into(),
            ));
        }
        let label = labels[start];
        component[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if component[j] == u32::MAX && labels[j] == label {
                    component[j] = label;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
    }
    if components_seen != t {
        return Err(Error::Validation(
            "label map has disconnected label regions".into(),
        ));
    }
    Ok(t)
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (big, small) = if self.size[a as usize] >= self.size[b as usize] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        big
    }

    fn size_of(&self, root: u32) -> u32 {
        self.size[root as usize]
    }
}

/// Over-segments a 3-channel image.
pub fn segment(img: &ImageBuffer, params: &SegmentationParams) -> Result<SegmentLabelMap> {
    params.validate()?;
    if img.channels() != 3 {
        return Err(Error::Shape("segmentation expects a 3-channel image".into()));
    }
    let (w, h) = (img.width(), img.height());
    let n = w * h;

    let smoothed = smooth_channels(img, params.sigma)?;

    // one weight per 4-neighbour edge, on a 0..255 sample scale
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(2 * n);
    let mut weights: Vec<f64> = Vec::with_capacity(2 * n);
    let dist = |a: usize, b: usize| -> f64 {
        let pa = &smoothed.data()[a * 3..a * 3 + 3];
        let pb = &smoothed.data()[b * 3..b * 3 + 3];
        let mut s = 0.0;
        for c in 0..3 {
            let d = (pa[c] - pb[c]) * 255.0;
            s += d * d;
        }
        s.sqrt()
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                edges.push((i as u32, (i + 1) as u32));
                weights.push(dist(i, i + 1));
            }
            if y + 1 < h {
                edges.push((i as u32, (i + w) as u32));
                weights.push(dist(i, i + w));
            }
        }
    }

    // Kruskal order; ties broken by edge index so runs are reproducible
    let mut order: Vec<u32> = (0..edges.len() as u32).collect();
    order.sort_by(|&a, &b| {
        weights[a as usize]
            .total_cmp(&weights[b as usize])
            .then(a.cmp(&b))
    });

    let mut dsu = DisjointSet::new(n);
    let mut threshold = vec![params.k; n];
    for &e in &order {
        let (p, q) = edges[e as usize];
        let a = dsu.find(p);
        let b = dsu.find(q);
        if a == b {
            continue;
        }
        let wgt = weights[e as usize];
        if wgt <= threshold[a as usize] && wgt <= threshold[b as usize] {
            let root = dsu.union(a, b);
            threshold[root as usize] = wgt + params.k / f64::from(dsu.size_of(root));
        }
    }

    // fold undersized components into the neighbour across their smallest
    // boundary edge (edges revisited in the same sorted order)
    for &e in &order {
        let (p, q) = edges[e as usize];
        let a = dsu.find(p);
        let b = dsu.find(q);
        if a != b
            && ((dsu.size_of(a) as usize) < params.min_size
                || (dsu.size_of(b) as usize) < params.min_size)
        {
            dsu.union(a, b);
        }
    }

    // relabel roots to contiguous ids in row-major first-occurrence order
    let mut remap = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut next = 0u32;
    for i in 0..n {
        let root = dsu.find(i as u32) as usize;
        if remap[root] == u32::MAX {
            remap[root] = next;
            next += 1;
        }
        labels[i] = remap[root];
    }

    SegmentLabelMap::new(w, h, labels)
}

fn smooth_channels(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let taps = imaging::gaussian_kernel_1d(sigma);
    let planes = [
        imaging::filter_separable(&img.channel(0)?, &taps, &taps)?,
        imaging::filter_separable(&img.channel(1)?, &taps, &taps)?,
        imaging::filter_separable(&img.channel(2)?, &taps, &taps)?,
    ];
    ImageBuffer::from_planes(&planes)
}

/// Per-label pixel count and inclusive bounding box `(x0, y0, x1, y1)`.
pub fn superpixel_stats(seg: &SegmentLabelMap) -> Vec<(u32, usize, (usize, usize, usize, usize))> {
    let t = seg.num_segments();
    let mut count = vec![0usize; t];
    let mut bbox = vec![(usize::MAX, usize::MAX, 0usize, 0usize); t];
    for y in 0..seg.height() {
        for x in 0..seg.width() {
            let l = seg.label_at(x, y) as usize;
            count[l] += 1;
            let b = &mut bbox[l];
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
    }
    (0..t as u32).map(|l| (l, count[l as usize], bbox[l as usize])).collect()
}

/// Writes a label map as binary PGM: maxval 255 while `T <= 255`, and a
/// 16-bit big-endian PGM (maxval 65535) once `T > 255`.
pub fn write_label_pgm(seg: &SegmentLabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let wide = seg.num_segments() > 255;
    let maxval = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", seg.width(), seg.height(), maxval).into_bytes();
    for &l in seg.labels() {
        if wide {
            out.extend_from_slice(&(l as u16).to_be_bytes());
        } else {
            out.push(l as u8);
        }
    }
    crate::util::write_atomic(path, &out)
}

/// Reads a label map produced by [`write_label_pgm`], re-validating the
/// partition invariants.
pub fn read_label_pgm(path: impl AsRef<Path>) -> Result<SegmentLabelMap> {
    let path = path.as_ref();
    let (w, h, maxval, payload) = imaging::pnm_raw(path)?;
    let labels: Vec<u32> = if maxval > 255 {
        payload
            .chunks_exact(2)
            .map(|b| u32::from(u16::from_be_bytes([b[0], b[1]])))
            .collect()
    } else {
        payload.iter().map(|&b| u32::from(b)).collect()
    };
    SegmentLabelMap::new(w, h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_half_image(w: usize, h: usize) -> ImageBuffer {
        // left half dark red, right half bright blue; the color distance
        // (more than 250 on the 0..255 scale) dwarfs any reasonable k
        let mut data = Vec::with_capacity(w * h * 3);
        for _y in 0..h {
            for x in 0..w {
                if x < w / 2 {
                    data.extend_from_slice(&[0.2, 0.0, 0.0]);
                } else {
                    data.extend_from_slice(&[0.0, 0.0, 1.0]);
                }
            }
        }
        ImageBuffer::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn uniform_image_is_one_segment() {
        let img = ImageBuffer::filled(8, 8, 3, 0.4).unwrap();
        let seg = segment(&img, &SegmentationParams::default()).unwrap();
        assert_eq!(seg.num_segments(), 1);
    }

    #[test]
    fn two_halves_split_on_the_true_column() {
        // Independent trace of the merge criterion on the 6x6 instance:
        // within each half every edge weight is 0, so the first rounds of
        // Kruskal processing union each half completely (0 <= k/|C| always).
        // Every cross-boundary edge weighs ~255*sqrt(0.2^2+1^2) > 100, far
        // above threshold k=20 for components of size >= 1, so the halves
        // never merge. Both halves have 18 >= min_size pixels, so the
        // post-pass does nothing: T = 2, split at column 3.
        let img = two_half_image(6, 6);
        let params = SegmentationParams {
            sigma: 0.0,
            k: 20.0,
            min_size: 4,
        };
        let seg = segment(&img, &params).unwrap();
        assert_eq!(seg.num_segments(), 2);
        for y in 0..6 {
            for x in 0..6 {
                let expect = if x < 3 { seg.label_at(0, 0) } else { seg.label_at(5, 0) };
                assert_eq!(seg.label_at(x, y), expect, "pixel ({x},{y})");
            }
        }
        // labels are the contiguous relabeling 0, 1
        assert_eq!(seg.label_at(0, 0), 0);
        assert_eq!(seg.label_at(5, 0), 1);
    }

    #[test]
    fn min_size_post_pass_absorbs_specks() {
        // a single discordant pixel cannot survive min_size = 4
        let mut data = vec![0.5; 8 * 8 * 3];
        data[(3 * 8 + 3) * 3] = 0.0;
        data[(3 * 8 + 3) * 3 + 1] = 0.0;
        data[(3 * 8 + 3) * 3 + 2] = 0.0;
        let img = ImageBuffer::new(8, 8, 3, data).unwrap();
        let params = SegmentationParams {
            sigma: 0.0,
            k: 10.0,
            min_size: 4,
        };
        let seg = segment(&img, &params).unwrap();
        let stats = superpixel_stats(&seg);
        assert!(stats.iter().all(|&(_, c, _)| c >= 4));
    }

    #[test]
    fn small_image_degrades_to_single_segment() {
        let img = two_half_image(4, 4);
        let params = SegmentationParams {
            sigma: 0.0,
            k: 20.0,
            min_size: 100, // larger than the whole image
        };
        let seg = segment(&img, &params).unwrap();
        assert_eq!(seg.num_segments(), 1);
    }

    #[test]
    fn stats_cover_the_full_partition() {
        let img = two_half_image(4, 4);
        let params = SegmentationParams {
            sigma: 0.0,
            k: 20.0,
            min_size: 1,
        };
        let seg = segment(&img, &params).unwrap();
        let stats = superpixel_stats(&seg);
        assert_eq!(stats.len(), 2);
        assert_eq!(stats[0].1 + stats[1].1, 16);
        assert_eq!(stats[0].1, 8);
        assert_eq!(stats[0].2, (0, 0, 1, 3));
        assert_eq!(stats[1].2, (2, 0, 3, 3));
    }

    #[test]
    fn single_segment_stats_are_full_frame() {
        let img = ImageBuffer::filled(4, 4, 3, 0.2).unwrap();
        let seg = segment(&img, &SegmentationParams::default()).unwrap();
        assert_eq!(superpixel_stats(&seg), vec![(0, 16, (0, 0, 3, 3))]);
    }

    #[test]
    fn invalid_params_are_domain_errors() {
        let img = ImageBuffer::filled(4, 4, 3, 0.2).unwrap();
        for params in [
            SegmentationParams { sigma: -1.0, ..Default::default() },
            SegmentationParams { k: 0.0, ..Default::default() },
            SegmentationParams { min_size: 0, ..Default::default() },
        ] {
            assert!(matches!(segment(&img, &params), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn label_map_rejects_gaps_and_disconnection() {
        // gap: labels {0, 2}
        assert!(SegmentLabelMap::new(2, 1, vec![0, 2]).is_err());
        // disconnected: same label on two opposite corners only
        let labels = vec![0, 1, 1, 0];
        assert!(SegmentLabelMap::new(2, 2, labels).is_err());
    }

    #[test]
    fn label_pgm_roundtrip_8bit() {
        let img = two_half_image(6, 6);
        let params = SegmentationParams { sigma: 0.0, k: 20.0, min_size: 4 };
        let seg = segment(&img, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("seg.pgm");
        write_label_pgm(&seg, &p).unwrap();
        assert_eq!(read_label_pgm(&p).unwrap(), seg);
    }

    #[test]
    fn label_pgm_roundtrip_16bit() {
        // checkerboard at k tiny and min_size 1 gives one label per pixel
        let mut data = Vec::new();
        for y in 0..20 {
            for x in 0..20 {
                let v = if (x + y) % 2 == 0 { 0.0 } else { 1.0 };
                data.extend_from_slice(&[v, v, v]);
            }
        }
        let img = ImageBuffer::new(20, 20, 3, data).unwrap();
        let params = SegmentationParams { sigma: 0.0, k: 1e-6, min_size: 1 };
        let seg = segment(&img, &params).unwrap();
        assert_eq!(seg.num_segments(), 400);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wide.pgm");
        write_label_pgm(&seg, &p).unwrap();
        assert_eq!(read_label_pgm(&p).unwrap(), seg);
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = crate::util::rng_from(5);
        use rand::Rng;
        let data: Vec<f64> = (0..16 * 16 * 3).map(|_| rng.random()).collect();
        let img = ImageBuffer::new(16, 16, 3, data).unwrap();
        let params = SegmentationParams { sigma: 0.5, k: 80.0, min_size: 4 };
        let a = segment(&img, &params).unwrap();
        let b = segment(&img, &params).unwrap();
        assert_eq!(a, b);
    }
}
