use std::path::Path;

use super::{Dataset, Split, NUM_CLASSES};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.display().to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32_at(&self, offset: usize) -> Result<u32> {
        let b = self
            .bytes
            .get(offset..offset + 4)
            .ok_or_else(|| self.err(offset, "header truncated"))?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn expect_magic(&self, magic: u32) -> Result<()> {
        let got = self.u32_at(0)?;
        if got != magic {
            return Err(self.err(0, format!("magic {got:#010x}, expected {magic:#010x}")));
        }
        Ok(())
    }

    fn payload(&self, start: usize, len: usize) -> Result<&[u8]> {
        if self.bytes.len() < start + len {
            return Err(self.err(
                self.bytes.len(),
                format!("payload truncated: need {len} bytes from offset {start}"),
            ));
        }
        Ok(&self.bytes[start..start + len])
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads an IDX3 image file: `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read(path)?;
    let r = Reader {
        path,
        bytes: &bytes,
    };
    r.expect_magic(IMAGE_MAGIC)?;
    let n = r.u32_at(4)? as usize;
    let rows = r.u32_at(8)? as usize;
    let cols = r.u32_at(12)? as usize;
    let data = r.payload(16, n * rows * cols)?.to_vec();
    Ok((n, rows, cols, data))
}

/// Reads an IDX1 label file.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read(path)?;
    let r = Reader {
        path,
        bytes: &bytes,
    };
    r.expect_magic(LABEL_MAGIC)?;
    let n = r.u32_at(4)? as usize;
    let labels = r.payload(8, n)?.to_vec();
    if let Some(pos) = labels.iter().position(|&l| l as usize >= NUM_CLASSES) {
        return Err(r.err(8 + pos, format!("label {} out of range", labels[pos])));
    }
    Ok(labels)
}

/// Pairs an IDX image file with its label file.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (n, rows, cols, pixels) = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if lab.len() != n {
        return Err(Error::Format {
            path: labels.display().to_string(),
            offset: 4,
            message: format!(
                "{} labels for {n} images in {}",
                lab.len(),
                images.display()
            ),
        });
    }
    Dataset::new(
        "mnist",
        Split::Train,
        (rows, cols),
        pixels.into_iter().map(f64::from).collect(),
        lab.into_iter().map(usize::from).collect(),
    )
}
