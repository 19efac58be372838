//! Minimal image container plus the color-space and filtering primitives
//! the segmentation and descriptor stages are built on.
//!
//! Samples are `f64` in `[0, 1]`, row-major, channels interleaved. Only
//! binary PPM (P6) and PGM (P5) with maxval 255 are read and written; see
//! [`pnm`]. JPEG/PNG sources must be converted to PPM beforehand (e.g.
//! `convert in.jpg out.ppm`).

mod color;
mod filter;
mod pnm;

pub use color::{convert_colorspace, ColorSpace};
pub use filter::{
    box_kernel, filter2d, filter_separable, gaussian_kernel_1d, gaussian_second_derivative_1d,
    log_response, Kernel2d,
};
pub use pnm::{load_ppm, save_ppm};
pub(crate) use pnm::read_pgm_raw as pnm_raw;

use crate::error::{Error, Result};

/// Row-major floating-point image with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!(
                "images carry 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "sample count {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    /// Constant-valued single- or three-channel image.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set_sample(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Result<ImageBuffer> {
        if c >= self.channels {
            return Err(Error::Shape(format!(
                "channel {c} out of range for {}-channel image",
                self.channels
            )));
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px[c])
            .collect();
        ImageBuffer::new(self.width, self.height, 1, data)
    }

    /// Reassembles a 3-channel image from three single-channel planes.
    pub fn from_planes(planes: &[ImageBuffer; 3]) -> Result<ImageBuffer> {
        let (w, h) = (planes[0].width, planes[0].height);
        for p in planes.iter() {
            if p.channels != 1 || p.width != w || p.height != h {
                return Err(Error::Shape(
                    "planes must be single-channel and equally sized".into(),
                ));
            }
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for i in 0..w * h {
            data.push(planes[0].data[i]);
            data.push(planes[1].data[i]);
            data.push(planes[2].data[i]);
        }
        ImageBuffer::new(w, h, 3, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dimensions() {
        assert!(matches!(
            ImageBuffer::new(0, 4, 1, vec![]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(matches!(
            ImageBuffer::new(2, 2, 3, vec![0.0; 5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn channel_extraction_and_reassembly() {
        let img = ImageBuffer::new(2, 1, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let r = img.channel(0).unwrap();
        let g = img.channel(1).unwrap();
        let b = img.channel(2).unwrap();
        assert_eq!(r.data(), &[0.1, 0.4]);
        let back = ImageBuffer::from_planes(&[r, g, b]).unwrap();
        assert_eq!(back, img);
    }
}
