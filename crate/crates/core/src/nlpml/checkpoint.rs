//! Binary model checkpoints: magic, version, a JSON config block, the flat
//! parameter vector and the lookup table, numbers as little-endian `f32`.

use std::path::Path;
use std::sync::Arc;

use super::input::LookupTable;
use super::model::{CnnConfig, CnnModel, ParamLayout};
use super::NlpError;

const MAGIC: &[u8; 8] = b"VOLTCNN\0";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &CnnModel, path: &Path) -> Result<(), NlpError> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CnnModel, NlpError> {
    from_bytes(&std::fs::read(path)?)
}

fn push_f32s(b: &mut Vec<u8>, xs: &[f64]) {
    b.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for &x in xs {
        b.extend_from_slice(&(x as f32).to_le_bytes());
    }
}

fn to_bytes(model: &CnnModel) -> Result<Vec<u8>, NlpError> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(&model.cfg).map_err(|e| NlpError::Format(e.to_string()))?;
    b.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    b.extend_from_slice(&cfg);
    b.extend_from_slice(&(model.dim() as u32).to_le_bytes());
    push_f32s(&mut b, &model.params);
    let t = &model.table;
    b.extend_from_slice(&(t.len() as u64).to_le_bytes());
    for tok in t.tokens() {
        b.extend_from_slice(&(tok.len() as u32).to_le_bytes());
        b.extend_from_slice(tok.as_bytes());
    }
    push_f32s(&mut b, &t.data);
    Ok(b)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NlpError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NlpError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NlpError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize, NlpError> {
        usize::try_from(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
            .map_err(|_| NlpError::Format("length overflow".into()))
    }

    fn f32s(&mut self) -> Result<Vec<f64>, NlpError> {
        let n = self.u64()?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| NlpError::Format("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }
}

fn from_bytes(bytes: &[u8]) -> Result<CnnModel, NlpError> {
    if !bytes.starts_with(MAGIC) {
        return Err(NlpError::Format("not a model checkpoint".into()));
    }
    let mut r = Reader { buf: bytes, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(NlpError::Format(format!("unsupported version {version}")));
    }
    let cfg_len = r.u32()? as usize;
    let cfg: CnnConfig = serde_json::from_slice(r.take(cfg_len)?).map_err(|e| NlpError::Format(e.to_string()))?;
    cfg.validate()?;
    let dim = r.u32()? as usize;
    let params = r.f32s()?;
    let layout = ParamLayout::new(&cfg.widths, cfg.filters, dim);
    if params.len() != layout.len {
        return Err(NlpError::Format(format!("expected {} parameters, found {}", layout.len, params.len())));
    }
    let n_tokens = r.u64()?;
    let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
    for _ in 0..n_tokens {
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?).map_err(|_| NlpError::Format("token not utf-8".into()))?;
        tokens.push(s.to_string());
    }
    let data = r.f32s()?;
    if data.len() != n_tokens * dim {
        return Err(NlpError::Format(format!("table has {} values for {n_tokens} tokens", data.len())));
    }
    if r.pos != bytes.len() {
        return Err(NlpError::Format("trailing bytes".into()));
    }
    let table = Arc::new(LookupTable::from_parts(dim, tokens, data));
    Ok(CnnModel { cfg, layout, params, table })
}
