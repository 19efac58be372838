//! Dense 128-dimensional gradient orientation descriptors.
//!
//! Descriptors are extracted on a 4-pixel grid at three cell sizes
//! (4, 6 and 8 pixels), so window footprints are 16, 24 and 32 pixels.
//! Each window is divided into 4x4 cells with 8 orientation bins per
//! cell; gradient magnitudes are scattered with bilinear spatial and
//! linear circular orientation interpolation, then the 128-vector is
//! L2-normalized, clipped at 0.2 and renormalized.

use crate::error::Result;
use crate::imaging::{self, ColorSpace, ImageBuffer};

pub const DESCRIPTOR_DIM: usize = 128;
pub const GRID_STEP: usize = 4;
pub const CELL_SIZES: [usize; 3] = [4, 6, 8];
const CELLS: usize = 4;
const ORI_BINS: usize = 8;
const CLIP: f64 = 0.2;

/// One dense descriptor: 128 values, the window center in pixel
/// coordinates, and the cell size it was extracted at.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradientDescriptor {
    pub values: Vec<f64>,
    pub center: (usize, usize),
    pub scale: usize,
}

impl DenseGradientDescriptor {
    /// True for windows with no gradient energy; these take no part in
    /// codebook training or histogram assignment.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Extracts descriptors at every grid position and cell size that fits
/// in the image, ordered by cell size, then row-major by window origin.
pub fn dense_descriptors(img: &ImageBuffer) -> Result<Vec<DenseGradientDescriptor>> {
    let gray = if img.channels() == 1 {
        img.clone()
    } else {
        imaging::convert_colorspace(img, ColorSpace::Gray)?
    };
    let (w, h) = (gray.width(), gray.height());
    let (gx, gy) = central_gradients(&gray);

    let mut out = Vec::new();
    for cell in CELL_SIZES {
        let f = CELLS * cell;
        if w < f || h < f {
            continue;
        }
        for y0 in (0..=h - f).step_by(GRID_STEP) {
            for x0 in (0..=w - f).step_by(GRID_STEP) {
                let values = window_descriptor(&gx, &gy, w, x0, y0, cell);
                out.push(DenseGradientDescriptor {
                    values,
                    center: (x0 + f / 2, y0 + f / 2),
                    scale: cell,
                });
            }
        }
    }
    Ok(out)
}

/// Central differences with clamped borders.
fn central_gradients(gray: &ImageBuffer) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (gray.width(), gray.height());
    let d = gray.data();
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let xl = x.saturating_sub(1);
            let xr = (x + 1).min(w - 1);
            let yu = y.saturating_sub(1);
            let yd = (y + 1).min(h - 1);
            gx[y * w + x] = (d[y * w + xr] - d[y * w + xl]) / 2.0;
            gy[y * w + x] = (d[yd * w + x] - d[yu * w + x]) / 2.0;
        }
    }
    (gx, gy)
}

fn window_descriptor(gx: &[f64], gy: &[f64], w: usize, x0: usize, y0: usize, cell: usize) -> Vec<f64> {
    let f = CELLS * cell;
    let mut bins = vec![0.0; DESCRIPTOR_DIM];
    for py in 0..f {
        for px in 0..f {
            let i = (y0 + py) * w + (x0 + px);
            let (dx, dy) = (gx[i], gy[i]);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
            let o = theta * ORI_BINS as f64 / std::f64::consts::TAU;
            let u = (px as f64 + 0.5) / cell as f64 - 0.5;
            let v = (py as f64 + 0.5) / cell as f64 - 0.5;
            scatter(&mut bins, mag, u, v, o);
        }
    }
    normalize(&mut bins);
    bins
}

/// Trilinear scatter: bilinear over the 4x4 cell grid (weight falls to
/// zero outside the two nearest cells), linear circular over
/// orientation bins.
fn scatter(bins: &mut [f64], mag: f64, u: f64, v: f64, o: f64) {
    let iu = u.floor();
    let iv = v.floor();
    let io = o.floor();
    let (fu, fv, fo) = (u - iu, v - iv, o - io);
    for (du, wu) in [(0.0, 1.0 - fu), (1.0, fu)] {
        let cu = iu + du;
        if !(0.0..CELLS as f64).contains(&cu) || wu == 0.0 {
            continue;
        }
        for (dv, wv) in [(0.0, 1.0 - fv), (1.0, fv)] {
            let cv = iv + dv;
            if !(0.0..CELLS as f64).contains(&cv) || wv == 0.0 {
                continue;
            }
            for (dob, wo) in [(0, 1.0 - fo), (1, fo)] {
                let co = (io as usize + dob) % ORI_BINS;
                bins[(cv as usize * CELLS + cu as usize) * ORI_BINS + co] += mag * wu * wv * wo;
            }
        }
    }
}

fn normalize(bins: &mut [f64]) {
    let norm = bins.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    for b in bins.iter_mut() {
        *b = (*b / norm).min(CLIP);
    }
    let norm = bins.iter().map(|b| b * b).sum::<f64>().sqrt();
    for b in bins.iter_mut() {
        *b /= norm;
    }
}
