//! IDX binaries: big-endian magic and dimension words followed by raw bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            offset: offset as u64,
            message: "truncated header".into(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

/// Parses an image file into rows of `pixel / 255`.
pub fn read_idx_images(bytes: &[u8], path: &Path) -> Result<Matrix> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let dim = rows * cols;
    let need = 16 + count * dim;
    if bytes.len() < need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: format!("truncated pixel data: {count} images of {rows}x{cols} need {need} bytes"),
        });
    }
    let data = bytes[16..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Matrix::from_vec(count, dim, data)
}

pub fn read_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let count = be_u32(bytes, 4, path)? as usize;
    let need = 8 + count;
    if bytes.len() < need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            message: format!("truncated label data: {count} labels need {need} bytes"),
        });
    }
    Ok(bytes[8..need].iter().map(|&b| usize::from(b)).collect())
}

/// Loads an image/label file pair; counts must agree.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<(Matrix, Vec<usize>)> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let ib = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let lb = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    let x = read_idx_images(&ib, ip)?;
    let y = read_idx_labels(&lb, lp)?;
    if x.rows() != y.len() {
        return Err(Error::Format {
            path: lp.to_path_buf(),
            offset: 4,
            message: format!("label count {} does not match image count {}", y.len(), x.rows()),
        });
    }
    Ok((x, y))
}

/// Serializes images (values in `[0,1]`, rounded to the nearest byte).
pub fn write_idx_images(path: impl AsRef<Path>, x: &Matrix, rows: usize, cols: usize) -> Result<()> {
    let path = path.as_ref();
    if rows * cols != x.cols() {
        return Err(Error::InvalidArgument(format!(
            "{rows}x{cols} images do not match row length {}",
            x.cols()
        )));
    }
    let mut out = Vec::with_capacity(16 + x.as_slice().len());
    for word in [IMAGES_MAGIC, x.rows() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend(
        x.as_slice()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, y: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(8 + y.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(y.len() as u32).to_be_bytes());
    for &l in y {
        let b = u8::try_from(l).map_err(|_| Error::InvalidArgument(format!("label {l} does not fit in a byte")))?;
        out.push(b);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
