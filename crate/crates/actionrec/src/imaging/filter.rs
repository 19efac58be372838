//! Spatial filtering with clamp-to-edge borders.
//!
//! `filter2d` is the general dense path; Gaussian and Laplacian-of-Gaussian
//! responses go through the separable path, which is what the texture bank
//! and segmentation pre-smoothing use.

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// Odd-sized 2-D coefficient grid, row-major.
#[derive(Debug, Clone)]
pub struct Kernel2d {
    width: usize,
    height: usize,
    coeffs: Vec<f64>,
}

impl Kernel2d {
    pub fn new(width: usize, height: usize, coeffs: Vec<f64>) -> Result<Self> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(Error::Shape(format!(
                "kernel dimensions must be odd, got {width}x{height}"
            )));
        }
        if coeffs.len() != width * height {
            return Err(Error::Shape("kernel coefficient count mismatch".into()));
        }
        Ok(Kernel2d {
            width,
            height,
            coeffs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Normalized box kernel of the given odd side length.
pub fn box_kernel(side: usize) -> Result<Kernel2d> {
    let n = side * side;
    Kernel2d::new(side, side, vec![1.0 / n as f64; n])
}

/// Correlates a single-channel image with a 2-D kernel. Borders are
/// handled by clamp-to-edge replication; output has the input's size.
pub fn filter2d(img: &ImageBuffer, kernel: &Kernel2d) -> Result<ImageBuffer> {
    if img.channels() != 1 {
        return Err(Error::Shape("filter2d expects a single-channel image".into()));
    }
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (kw, kh) = (kernel.width as isize, kernel.height as isize);
    let (rx, ry) = (kw / 2, kh / 2);
    let src = img.data();
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..kh {
                let sy = (y + ky - ry).clamp(0, h - 1);
                let row = (sy * w) as usize;
                let krow = (ky * kw) as usize;
                for kx in 0..kw {
                    let sx = (x + kx - rx).clamp(0, w - 1);
                    acc += kernel.coeffs[krow + kx as usize] * src[row + sx as usize];
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    ImageBuffer::new(img.width(), img.height(), 1, out)
}

/// Separable correlation: a horizontal pass with `kx` followed by a
/// vertical pass with `ky`. Both taps vectors must have odd length.
pub fn filter_separable(img: &ImageBuffer, kx: &[f64], ky: &[f64]) -> Result<ImageBuffer> {
    if img.channels() != 1 {
        return Err(Error::Shape("separable filter expects a single channel".into()));
    }
    if kx.len() % 2 == 0 || ky.len() % 2 == 0 {
        return Err(Error::Shape("separable taps must have odd length".into()));
    }
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.data();
    let rx = (kx.len() / 2) as isize;
    let mut mid = vec![0.0; (w * h) as usize];
    for y in 0..h {
        let row = (y * w) as usize;
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &c) in kx.iter().enumerate() {
                let sx = (x + i as isize - rx).clamp(0, w - 1);
                acc += c * src[row + sx as usize];
            }
            mid[row + x as usize] = acc;
        }
    }
    let ry = (ky.len() / 2) as isize;
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &c) in ky.iter().enumerate() {
                let sy = (y + i as isize - ry).clamp(0, h - 1);
                acc += c * mid[(sy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    ImageBuffer::new(img.width(), img.height(), 1, out)
}

/// 1-D Gaussian taps, radius `ceil(3*sigma)`, normalized to sum 1.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    let sigma = sigma.max(1e-6);
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// 1-D second derivative of a Gaussian, adjusted to sum exactly to zero
/// so that Laplacian responses vanish on constant images.
pub fn gaussian_second_derivative_1d(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let s2 = sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| {
            let x2 = (i * i) as f64;
            (x2 - s2) / (s2 * s2) * (-x2 / (2.0 * s2)).exp()
        })
        .collect();
    let mean = taps.iter().sum::<f64>() / taps.len() as f64;
    for t in &mut taps {
        *t -= mean;
    }
    taps
}

/// Laplacian-of-Gaussian response, computed as Gxx*G + G*Gyy via two
/// separable passes.
pub fn log_response(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    let g = gaussian_kernel_1d(sigma);
    let g2 = gaussian_second_derivative_1d(sigma);
    let a = filter_separable(img, &g2, &g)?;
    let b = filter_separable(img, &g, &g2)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x + y)
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn even_kernel_dimension_rejected() {
        assert!(matches!(
            Kernel2d::new(2, 3, vec![0.0; 6]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            Kernel2d::new(3, 4, vec![0.0; 12]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn identity_kernel_is_identity() {
        let img = ImageBuffer::new(3, 2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let k = Kernel2d::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(filter2d(&img, &k).unwrap(), img);
    }

    #[test]
    fn normalized_kernel_preserves_constant_image() {
        let img = ImageBuffer::filled(5, 5, 1, 0.37).unwrap();
        let out = filter2d(&img, &box_kernel(3).unwrap()).unwrap();
        for &v in out.data() {
            assert_abs_diff_eq!(v, 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn dyadic_normalized_kernel_preserves_constant_exactly() {
        // center 1/2, eight neighbours 1/16: sums to exactly 1.0 in binary
        let mut coeffs = vec![1.0 / 16.0; 9];
        coeffs[4] = 0.5;
        let k = Kernel2d::new(3, 3, coeffs).unwrap();
        let img = ImageBuffer::filled(6, 4, 1, 0.3125).unwrap();
        let out = filter2d(&img, &k).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.3125));
    }

    #[test]
    fn impulse_with_box_kernel_spreads_to_ninths() {
        // hand convolution: the interior 3x3 patch around the impulse
        // becomes 1/9, everything further away 0
        let mut data = vec![0.0; 49];
        data[3 * 7 + 3] = 1.0;
        let img = ImageBuffer::new(7, 7, 1, data).unwrap();
        let out = filter2d(&img, &box_kernel(3).unwrap()).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let expect = if (2..=4).contains(&x) && (2..=4).contains(&y) {
                    1.0 / 9.0
                } else {
                    0.0
                };
                assert_abs_diff_eq!(out.sample(x, y, 0), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn separable_gaussian_matches_dense_outer_product() {
        let taps = gaussian_kernel_1d(1.0);
        let n = taps.len();
        let mut dense = Vec::with_capacity(n * n);
        for ty in &taps {
            for tx in &taps {
                dense.push(ty * tx);
            }
        }
        let k = Kernel2d::new(n, n, dense).unwrap();
        let mut rng = crate::util::rng_from(23);
        use rand::Rng;
        let data: Vec<f64> = (0..15 * 11).map(|_| rng.random()).collect();
        let img = ImageBuffer::new(15, 11, 1, data).unwrap();
        let a = filter2d(&img, &k).unwrap();
        let b = filter_separable(&img, &taps, &taps).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_response_vanishes_on_constant_images() {
        let img = ImageBuffer::filled(12, 9, 1, 0.642).unwrap();
        for sigma in [1.0, 2.0, 4.0] {
            let out = log_response(&img, sigma).unwrap();
            for &v in out.data() {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
        }
    }
}
