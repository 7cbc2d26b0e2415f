//! Binary model files.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "SNER" | version | embed_dim | hidden | max_seq_len | trained
//! vocab tokens | entity tags | dtype tags      (count, then len + UTF-8 each)
//! tensor count | per tensor: ndim, dims…, f64 LE data
//! ```
//!
//! Tensors follow parameter registration order: embedding, forward LSTM
//! (`w_f w_i w_c w_o b_f b_i b_c b_o`), backward LSTM, entity head
//! (`dense_w dense_b attn proj_w proj_b transitions`), dtype head.

use std::fs;
use std::path::Path;

use crate::error::{NnError, Result};
use crate::model::{ModelConfig, MultiTaskModel, TagSet, Vocab};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SNER";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_strings(out: &mut Vec<u8>, items: &[String]) {
    put_u32(out, items.len());
    for s in items {
        put_u32(out, s.len());
        out.extend_from_slice(s.as_bytes());
    }
}

pub fn to_bytes(model: &MultiTaskModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION as usize);
    put_u32(&mut out, model.config.embed_dim);
    put_u32(&mut out, model.config.hidden);
    put_u32(&mut out, model.config.max_seq_len);
    put_u32(&mut out, usize::from(model.trained));
    put_strings(&mut out, model.vocab.tokens());
    put_strings(&mut out, model.entity_tags.tags());
    put_strings(&mut out, model.dtype_tags.tags());
    put_u32(&mut out, model.params.len());
    for t in model.params.tensors() {
        put_u32(&mut out, t.shape().len());
        for &d in t.shape() {
            put_u32(&mut out, d);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.u32()?;
        let mut v = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = self.u32()?;
            let s = std::str::from_utf8(self.take(len)?).map_err(|e| NnError::Format(e.to_string()))?;
            v.push(s.to_string());
        }
        Ok(v)
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<MultiTaskModel> {
    if buf.len() < 8 || &buf[..4] != MAGIC {
        return Err(NnError::Version("bad magic bytes".into()));
    }
    let mut r = Reader { buf, pos: 4 };
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(NnError::Version(format!("format version {version}, expected {FORMAT_VERSION}")));
    }
    let config = ModelConfig {
        embed_dim: r.u32()?,
        hidden: r.u32()?,
        max_seq_len: r.u32()?,
    };
    let trained = r.u32()? != 0;
    let vocab = Vocab::from_tokens(r.strings()?)?;
    let entity_tags = TagSet::from_list(r.strings()?)?;
    let dtype_tags = TagSet::from_list(r.strings()?)?;

    // A freshly built model fixes the expected order and shapes.
    let mut model = MultiTaskModel::new(config, vocab, entity_tags, dtype_tags, 0)?;
    let count = r.u32()?;
    if count != model.params.len() {
        return Err(NnError::Format(format!("{count} tensors, expected {}", model.params.len())));
    }
    for id in model.params.ids().collect::<Vec<_>>() {
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let expected = model.params.get(id).shape().to_vec();
        if shape != expected {
            return Err(NnError::Format(format!(
                "tensor {} has shape {shape:?}, expected {expected:?}",
                model.params.name(id)
            )));
        }
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let t = Tensor::new(shape, data)?;
        if !t.is_finite() {
            return Err(NnError::Format(format!("tensor {} has non-finite values", model.params.name(id))));
        }
        *model.params.get_mut(id) = t;
    }
    if r.pos != buf.len() {
        return Err(NnError::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    model.trained = trained;
    Ok(model)
}

pub fn save_model(model: &MultiTaskModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MultiTaskModel> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&buf)
}
