//! Superpixel descriptors: 51 appearance features concatenated with a
//! 400-bin bag-of-features histogram, 451 values per superpixel.

pub mod appearance;
pub mod codebook;
pub mod dense;

use std::path::Path;

pub use appearance::{appearance, AppearanceContext, AppearanceDescriptor, APPEARANCE_DIM};
pub use codebook::{bof_histogram, train_codebook, train_codebook_with_k, Codebook, CODEBOOK_WORDS};
pub use dense::{dense_descriptors, DenseGradientDescriptor, CELL_SIZES, DESCRIPTOR_DIM, GRID_STEP};

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;
use crate::segmentation::SegmentLabelMap;

/// Combined per-superpixel descriptor: appearance features first, then
/// the codeword histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelDescriptor {
    pub values: Vec<f64>,
}

/// 51 + codebook words; 451 with the standard 400-word codebook.
pub fn superpixel_dim(book: &Codebook) -> usize {
    APPEARANCE_DIM + book.words
}

/// Descriptor of a single superpixel. Batch callers should prefer
/// [`superpixel_descriptors`], which shares the filter bank and the
/// dense extraction across all labels.
pub fn superpixel_descriptor(
    img: &ImageBuffer,
    seg: &SegmentLabelMap,
    label: u32,
    book: &Codebook,
) -> Result<SuperpixelDescriptor> {
    let ctx = AppearanceContext::new(img)?;
    let dense = dense_descriptors(img)?;
    descriptor_for(&ctx, &dense, seg, label, book)
}

/// Descriptors for every superpixel of the image, indexed by label.
pub fn superpixel_descriptors(
    img: &ImageBuffer,
    seg: &SegmentLabelMap,
    book: &Codebook,
) -> Result<Vec<SuperpixelDescriptor>> {
    if seg.width() != img.width() || seg.height() != img.height() {
        return Err(Error::Shape(format!(
            "label map is {}x{} but image is {}x{}",
            seg.width(),
            seg.height(),
            img.width(),
            img.height()
        )));
    }
    let ctx = AppearanceContext::new(img)?;
    let dense = dense_descriptors(img)?;
    (0..seg.num_segments() as u32)
        .map(|label| descriptor_for(&ctx, &dense, seg, label, book))
        .collect()
}

/// A dense descriptor belongs to the superpixel containing its window
/// center.
fn descriptor_for(
    ctx: &AppearanceContext,
    dense: &[DenseGradientDescriptor],
    seg: &SegmentLabelMap,
    label: u32,
    book: &Codebook,
) -> Result<SuperpixelDescriptor> {
    let mut values = ctx.descriptor_for(seg, label)?.values;
    let members: Vec<&DenseGradientDescriptor> = dense
        .iter()
        .filter(|d| seg.label_at(d.center.0, d.center.1) == label)
        .collect();
    values.extend(bof_histogram(&members, book));
    Ok(SuperpixelDescriptor { values })
}

/// Writes one headerless CSV row per superpixel, row index = label.
pub fn write_features_csv(descs: &[SuperpixelDescriptor], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        for d in descs {
            w.write_record(d.values.iter().map(|v| format!("{v:.17e}")))
                .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    crate::util::write_atomic(path, &buf)
}

/// Reads a features CSV; every row must have the same width.
pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<SuperpixelDescriptor>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
    let mut out = Vec::new();
    let mut width = None;
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })?;
        let values: Vec<f64> = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Format {
                    path: path.into(),
                    reason: format!("row {row}: not a number: {f:?}"),
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Format {
                    path: path.into(),
                    reason: format!("row {row} has {} values, expected {w}", values.len()),
                });
            }
            _ => {}
        }
        out.push(SuperpixelDescriptor { values });
    }
    Ok(out)
}
