//! Versioned binary checkpoints.
//!
//! Layout (all integers `u32` little-endian):
//!
//! ```text
//! "DAUTO1"
//! n_dims, dims[0..n_dims]      input dim followed by encoder widths
//! num_classes
//! dropout                      f64 LE
//! parameters                   f64 LE, in `DautoModel::params_mut` order
//! ```

use std::fs;
use std::path::Path;

use super::{Architecture, DautoModel};
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"DAUTO1";

impl DautoModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.architecture();
        let mut out = Vec::with_capacity(64 + 8 * self.num_params());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let dims: Vec<u32> = std::iter::once(arch.input_dim)
            .chain(arch.hidden.iter().copied())
            .map(|d| d as u32)
            .collect();
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(arch.num_classes as u32).to_le_bytes());
        out.extend_from_slice(&arch.dropout.to_le_bytes());
        for p in self.param_values() {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0, path };
        if cur.take(6)? != CHECKPOINT_MAGIC {
            return Err(cur.error(0, "bad magic, expected DAUTO1"));
        }
        let n_dims = cur.u32()? as usize;
        if !(2..=64).contains(&n_dims) {
            return Err(cur.error(6, &format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let num_classes = cur.u32()? as usize;
        let dropout = cur.f64()?;
        let arch = Architecture {
            input_dim: dims[0],
            hidden: dims[1..].to_vec(),
            num_classes,
            dropout,
        };
        arch.validate()
            .map_err(|e| cur.error(10, &format!("invalid architecture: {e}")))?;
        // Shapes come from a throwaway init; every value is overwritten.
        let mut model = DautoModel::new(arch, &mut Rng::new(0))?;
        let expected = 8 * model.num_params();
        if cur.remaining() != expected {
            return Err(cur.error(
                cur.pos as u64,
                &format!("expected {expected} parameter bytes, found {}", cur.remaining()),
            ));
        }
        for p in model.params_mut() {
            for v in p.values.iter_mut() {
                *v = cur.f64()?;
            }
        }
        Ok(model)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn error(&self, offset: u64, message: &str) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset,
            message: message.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| self.error(self.pos as u64, "truncated checkpoint"))?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn save_checkpoint(model: &DautoModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DautoModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    DautoModel::from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let arch = Architecture::new(5, vec![4, 3], 3).with_dropout(0.3);
        let model = DautoModel::new(arch, &mut Rng::new(8)).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..6], b"DAUTO1");
        let back = DautoModel::from_bytes(&bytes, Path::new("m.bin")).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let model = DautoModel::new(Architecture::new(2, vec![3], 2), &mut Rng::new(1)).unwrap();
        let mut bytes = model.to_bytes();
        assert!(DautoModel::from_bytes(&bytes[..bytes.len() - 1], Path::new("m")).is_err());
        bytes[0] = b'X';
        assert!(DautoModel::from_bytes(&bytes, Path::new("m")).is_err());
    }
}
