//! Binary PPM (P6) / PGM (P5) reader and writer, maxval 255 only.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// Loads a binary P6 PPM (3 channels) or P5 PGM (1 channel).
///
/// Samples are scaled to `[0, 1]` by dividing by the maxval, which must
/// be 255. Header comments (`#` to end of line) are accepted.
pub fn load_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    let magic = cur.token(path)?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => {
            return Err(Error::format(
                path,
                format!("expected P6 or P5 magic, got {other:?}"),
            ))
        }
    };
    let width: usize = cur.int(path, "width")?;
    let height: usize = cur.int(path, "height")?;
    let maxval: usize = cur.int(path, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, "zero width or height"));
    }
    if maxval != 255 {
        return Err(Error::format(
            path,
            format!("only maxval 255 is supported, got {maxval}"),
        ));
    }
    // Exactly one whitespace byte separates the header from the payload.
    cur.single_whitespace(path)?;

    let expected = width * height * channels;
    let payload = &cur.bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!(
                    "truncated payload: expected {expected} bytes, found {}",
                    payload.len()
                ),
            ),
        ));
    }
    let data = payload[..expected]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    ImageBuffer::new(width, height, channels, data)
}

/// Writes a 3-channel image as binary P6, or a single-channel image as
/// binary P5. Samples are clamped to `[0, 1]` and quantized to maxval 255.
pub fn save_ppm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads one PNM sample payload without interpreting it; used by the
/// label-map codec which stores raw integers at maxval 255 or 65535.
pub(crate) fn read_pgm_raw(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let magic = cur.token(path)?;
    if magic != "P5" {
        return Err(Error::format(path, format!("expected P5, got {magic:?}")));
    }
    let width: usize = cur.int(path, "width")?;
    let height: usize = cur.int(path, "height")?;
    let maxval: usize = cur.int(path, "maxval")?;
    cur.single_whitespace(path)?;
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * bytes_per;
    let payload = &cur.bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated payload"),
        ));
    }
    Ok((width, height, maxval, payload[..expected].to_vec()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Next whitespace-delimited header token, skipping `#` comments.
    fn token(&mut self, path: &Path) -> Result<String> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(path, "unexpected end of header"));
        }
        String::from_utf8(self.bytes[start..self.pos].to_vec())
            .map_err(|_| Error::format(path, "non-ASCII header token"))
    }

    fn int(&mut self, path: &Path, what: &str) -> Result<usize> {
        let tok = self.token(path)?;
        tok.parse()
            .map_err(|_| Error::format(path, format!("invalid {what}: {tok:?}")))
    }

    fn single_whitespace(&mut self, path: &Path) -> Result<()> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::format(path, "missing separator before payload"))
        }
    }
}
