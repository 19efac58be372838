//! Color-space conversions.
//!
//! All outputs are rescaled to fixed `[0, 1]` ranges per channel:
//!
//! * `GRAY` — BT.601 luma, `0.299 R + 0.587 G + 0.114 B`, already in `[0, 1]`.
//! * `YCrCb` — BT.601 full-range; `Cr`/`Cb` carry a 0.5 offset so neutral
//!   grays sit at 0.5.
//! * `LAB` — CIELAB through the sRGB (D65) intermediate, then
//!   `L ∈ [0, 100] → [0, 1]` and `a, b ∈ [-128, 127] → [0, 1]`.

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    Rgb,
    Lab,
    YCrCb,
    Gray,
}

/// Converts a 3-channel RGB image into the target space. A single-channel
/// input is accepted only for the `Gray` identity.
pub fn convert_colorspace(img: &ImageBuffer, target: ColorSpace) -> Result<ImageBuffer> {
    if img.channels() == 1 {
        return match target {
            ColorSpace::Gray => Ok(img.clone()),
            _ => Err(Error::Shape(
                "single-channel input can only convert to GRAY".into(),
            )),
        };
    }
    match target {
        ColorSpace::Rgb => Ok(img.clone()),
        ColorSpace::Gray => {
            let data = img
                .data()
                .chunks_exact(3)
                .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
                .collect();
            ImageBuffer::new(img.width(), img.height(), 1, data)
        }
        ColorSpace::YCrCb => {
            let mut data = Vec::with_capacity(img.data().len());
            for px in img.data().chunks_exact(3) {
                let (r, g, b) = (px[0], px[1], px[2]);
                let y = 0.299 * r + 0.587 * g + 0.114 * b;
                let cr = 0.5 + 0.5 * r - 0.418688 * g - 0.081312 * b;
                let cb = 0.5 - 0.168736 * r - 0.331264 * g + 0.5 * b;
                data.push(y.clamp(0.0, 1.0));
                data.push(cr.clamp(0.0, 1.0));
                data.push(cb.clamp(0.0, 1.0));
            }
            ImageBuffer::new(img.width(), img.height(), 3, data)
        }
        ColorSpace::Lab => {
            let mut data = Vec::with_capacity(img.data().len());
            for px in img.data().chunks_exact(3) {
                let (l, a, b) = srgb_to_lab(px[0], px[1], px[2]);
                data.push((l / 100.0).clamp(0.0, 1.0));
                data.push(((a + 128.0) / 255.0).clamp(0.0, 1.0));
                data.push(((b + 128.0) / 255.0).clamp(0.0, 1.0));
            }
            ImageBuffer::new(img.width(), img.height(), 3, data)
        }
    }
}

fn srgb_linearize(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

// D65 reference white
const XN: f64 = 0.95047;
const YN: f64 = 1.0;
const ZN: f64 = 1.08883;

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Unscaled CIELAB: `L ∈ [0, 100]`, `a`/`b` roughly `[-128, 127]`.
fn srgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let (rl, gl, bl) = (srgb_linearize(r), srgb_linearize(g), srgb_linearize(b));
    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    let (fx, fy, fz) = (lab_f(x / XN), lab_f(y / YN), lab_f(z / ZN));
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}
