//! Binary model files.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u32` metadata length,
//! metadata as JSON, `u64` parameter count, then the parameters as `f64` in
//! [`GnnModel::parameters`] order.

use std::path::Path;

use super::{GnnModel, ModelMeta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"QSEERGNN";
pub const MODEL_VERSION: u32 = 1;

pub fn save(model: &GnnModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<GnnModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

fn to_bytes(model: &GnnModel) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(model.meta()).map_err(|e| Error::Format(e.to_string()))?;
    let params = model.parameters();
    let mut out = Vec::with_capacity(24 + meta.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for x in params {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("model file truncated at byte {}", self.bytes.len())))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

fn from_bytes(bytes: &[u8]) -> Result<GnnModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != MODEL_VERSION {
        return Err(Error::Version {
            found: version,
            supported: MODEL_VERSION,
        });
    }
    let meta_len = u32::from_le_bytes(r.array()?) as usize;
    let meta: ModelMeta =
        serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::Format(format!("model metadata: {e}")))?;
    let mut model = GnnModel::new(meta).map_err(|e| Error::Format(e.to_string()))?;
    let count = u64::from_le_bytes(r.array()?) as usize;
    if count != model.num_parameters() {
        return Err(Error::Format(format!(
            "model declares {count} parameters, metadata implies {}",
            model.num_parameters()
        )));
    }
    let raw = r.take(
        count
            .checked_mul(8)
            .ok_or_else(|| Error::Format("parameter count overflow".into()))?,
    )?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes in model file",
            bytes.len() - r.pos
        )));
    }
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    model.set_parameters(&params)?;
    Ok(model)
}
