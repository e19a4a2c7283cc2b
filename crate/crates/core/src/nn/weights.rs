//! `CTXW` weights container.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "CTXW" | version | count | count x (name_len | name (UTF-8) | rank | dims[rank] | f32 LE data)
//! ```
//!
//! Tensors are named `<layer index>.<layer kind>.<parameter>`, e.g. `0.conv2d.kernel`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{Model, NnError, Tensor};

pub const MAGIC: &[u8; 4] = b"CTXW";
pub const FORMAT_VERSION: u32 = 1;

fn tensor_names(model: &Model) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    for (i, layer) in model.layers().iter().enumerate() {
        for (j, pname) in layer.kind().param_names().iter().enumerate() {
            out.push((format!("{i}.{}.{pname}", layer.kind().name()), i, j));
        }
    }
    out
}

pub fn encode_weights(model: &Model) -> Vec<u8> {
    let names = tensor_names(model);
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(names.len() as u32).to_le_bytes());
    for (name, i, j) in names {
        let t = &model.layers()[i].params()[j];
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(NnError::TruncatedWeights)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes a container into named tensors, in file order.
pub fn decode_weights(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, NnError> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = c.take(4).map_err(|_| NnError::BadMagic)?;
    if magic != MAGIC {
        return Err(NnError::BadMagic);
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(NnError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = c.u32()?;
    let mut out = Vec::with_capacity(count.min(4096) as usize);
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| NnError::CorruptWeights("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(c.u32()? as usize);
        }
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(NnError::TruncatedWeights)?;
        let raw = c.take(n.checked_mul(4).ok_or(NnError::TruncatedWeights)?)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        out.push((name, Tensor::new(dims, data)?));
    }
    if c.pos != bytes.len() {
        return Err(NnError::CorruptWeights("trailing bytes after the last tensor".into()));
    }
    Ok(out)
}

/// Loads named tensors into `model`. With `allow_missing`, model tensors absent from
/// the file keep their values (used to load a backbone into a full model).
pub fn apply_weights(model: &mut Model, tensors: Vec<(String, Tensor)>, allow_missing: bool) -> Result<(), NnError> {
    let names = tensor_names(model);
    let mut by_name: BTreeMap<String, Tensor> = BTreeMap::new();
    for (name, t) in tensors {
        if by_name.insert(name.clone(), t).is_some() {
            return Err(NnError::CorruptWeights(format!("duplicate tensor {name}")));
        }
    }
    let mut staged = Vec::new();
    for (name, i, j) in &names {
        let want = model.layers()[*i].params()[*j].shape();
        match by_name.remove(name) {
            Some(t) if t.shape() == want => staged.push((*i, *j, t)),
            Some(t) => {
                return Err(NnError::WeightShapeMismatch {
                    name: name.clone(),
                    found: t.shape().to_vec(),
                    expected: want.to_vec(),
                })
            }
            None if allow_missing => {}
            None => return Err(NnError::MissingTensor(name.clone())),
        }
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(NnError::WeightShapeMismatch {
            name: extra.clone(),
            found: by_name[extra].shape().to_vec(),
            expected: Vec::new(),
        });
    }
    let layers = model.layers_mut();
    for (i, j, t) in staged {
        let mut params = layers[i].params().to_vec();
        params[j] = t;
        layers[i].set_params(params)?;
    }
    Ok(())
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<(), NnError> {
    let path = path.as_ref();
    let bytes = encode_weights(model);
    let mut f = std::fs::File::create(path).map_err(|e| NnError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| NnError::io(path, e))
}

pub fn load_weights(model: &mut Model, path: impl AsRef<Path>) -> Result<(), NnError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| NnError::io(path, e))?;
    apply_weights(model, decode_weights(&bytes)?, false)
}

/// Like [`load_weights`] but tolerates model tensors missing from the file.
pub fn load_partial_weights(model: &mut Model, path: impl AsRef<Path>) -> Result<(), NnError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| NnError::io(path, e))?;
    apply_weights(model, decode_weights(&bytes)?, true)
}
