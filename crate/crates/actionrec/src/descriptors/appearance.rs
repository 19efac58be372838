//! The 51-feature appearance descriptor: 40 color moments and 11 texture
//! responses.
//!
//! Color moments are population mean, standard deviation, skewness and
//! kurtosis over ten channels, in channel-major order:
//! `R, G, B, L, A, B*, Y, Cr, Cb, gray`, each contributing
//! `(mean, std, skew, kurt)`. Texture features are superpixel means of
//! eleven filter responses on the gray image: one 5x5 box filter, five
//! Gaussians and five Laplacian-of-Gaussian responses at
//! sigma in {1, 2, 4, 8, 16}.

use crate::error::Result;
use crate::imaging::{self, ColorSpace, ImageBuffer};
use crate::segmentation::SegmentLabelMap;

pub const APPEARANCE_DIM: usize = 51;
const TEXTURE_SIGMAS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// 51 appearance features for one superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceDescriptor {
    pub values: Vec<f64>,
}

/// Shared per-image state: the ten color planes and the eleven texture
/// response images. Building it once amortizes the filtering across all
/// superpixels of an image.
pub struct AppearanceContext {
    planes: Vec<ImageBuffer>,  // 10 color channels
    texture: Vec<ImageBuffer>, // 11 filter responses
}

impl AppearanceContext {
    pub fn new(img: &ImageBuffer) -> Result<Self> {
        let lab = imaging::convert_colorspace(img, ColorSpace::Lab)?;
        let ycc = imaging::convert_colorspace(img, ColorSpace::YCrCb)?;
        let gray = imaging::convert_colorspace(img, ColorSpace::Gray)?;
        let mut planes = Vec::with_capacity(10);
        for c in 0..3 {
            planes.push(img.channel(c)?);
        }
        for c in 0..3 {
            planes.push(lab.channel(c)?);
        }
        for c in 0..3 {
            planes.push(ycc.channel(c)?);
        }
        planes.push(gray.clone());

        let mut texture = Vec::with_capacity(11);
        texture.push(imaging::filter2d(&gray, &imaging::box_kernel(5)?)?);
        for sigma in TEXTURE_SIGMAS {
            let taps = imaging::gaussian_kernel_1d(sigma);
            texture.push(imaging::filter_separable(&gray, &taps, &taps)?);
        }
        for sigma in TEXTURE_SIGMAS {
            texture.push(imaging::log_response(&gray, sigma)?);
        }
        Ok(AppearanceContext { planes, texture })
    }

    /// Appearance descriptor of one superpixel.
    pub fn descriptor_for(&self, seg: &SegmentLabelMap, label: u32) -> Result<AppearanceDescriptor> {
        let pixels = seg.pixels_of(label);
        if pixels.is_empty() {
            return Err(crate::error::Error::Domain(format!(
                "superpixel label {label} out of range (T = {})",
                seg.num_segments()
            )));
        }
        let mut values = Vec::with_capacity(APPEARANCE_DIM);
        for plane in &self.planes {
            let (mean, std, skew, kurt) = population_moments(plane.data(), &pixels);
            values.extend_from_slice(&[mean, std, skew, kurt]);
        }
        for response in &self.texture {
            let mean =
                pixels.iter().map(|&i| response.data()[i]).sum::<f64>() / pixels.len() as f64;
            values.push(mean);
        }
        debug_assert_eq!(values.len(), APPEARANCE_DIM);
        Ok(AppearanceDescriptor { values })
    }
}

/// Computes the appearance descriptor for one superpixel, building the
/// shared filter bank for just this call. Batch callers should reuse an
/// [`AppearanceContext`].
pub fn appearance(
    img: &ImageBuffer,
    seg: &SegmentLabelMap,
    label: u32,
) -> Result<AppearanceDescriptor> {
    AppearanceContext::new(img)?.descriptor_for(seg, label)
}

/// Two-pass population moments of the samples selected by `pixels`.
/// Skewness and kurtosis of zero-variance regions are defined as 0.
fn population_moments(plane: &[f64], pixels: &[usize]) -> (f64, f64, f64, f64) {
    let n = pixels.len() as f64;
    let mean = pixels.iter().map(|&i| plane[i]).sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let d = plane[i] - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= 1e-24 {
        return (mean, 0.0, 0.0, 0.0);
    }
    let std = m2.sqrt();
    (mean, std, m3 / (m2 * std), m4 / (m2 * m2))
}
