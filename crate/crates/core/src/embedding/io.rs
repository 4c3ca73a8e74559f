//! Embedding files.
//!
//! Text: first line `N M`, then one `token v1 ... vM` line per vocabulary
//! entry (FastText vectors are written composed). Loading a text file gives
//! a Word2Vec-style embedding with zero output vectors and unit counts.
//!
//! Binary (all little-endian):
//!
//! ```text
//! "VOLTEXTE" u32 version
//! u64 N  u64 M
//! u8 subword flag  [u32 ngram_min  u32 ngram_max  u64 buckets]
//! N × (u64 count, u32 byte length, utf-8 token)
//! u64 input rows, rows × M f32
//! u64 output rows, rows × M f32
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{EmbedError, Embedding, EmbeddingMatrix, SubwordConfig, Vocabulary};

const MAGIC: &[u8; 8] = b"VOLTEXTE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// `.txt`/`.vec` are text, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt" | "vec") => Self::Text,
            _ => Self::Binary,
        }
    }
}

pub fn save_embedding(emb: &Embedding, path: &Path, format: EmbeddingFormat) -> Result<(), EmbedError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    match format {
        EmbeddingFormat::Text => write_text(emb, &mut w)?,
        EmbeddingFormat::Binary => w.write_all(&to_bytes(emb))?,
    }
    w.flush()?;
    Ok(())
}

/// Detects the format from the magic bytes.
pub fn load_embedding(path: &Path) -> Result<Embedding, EmbedError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        from_bytes(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| EmbedError::FormatError("not utf-8 text".into()))?;
        from_text(&text)
    }
}

fn write_text<W: Write>(emb: &Embedding, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{} {}", emb.vocab.len(), emb.dim())?;
    for i in 0..emb.vocab.len() {
        write!(w, "{}", emb.vocab.token(i))?;
        for v in emb.vector_at(i) {
            write!(w, " {}", v as f32)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn from_text(text: &str) -> Result<Embedding, EmbedError> {
    let bad = |m: String| EmbedError::FormatError(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let hv: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| bad(format!("bad header {header:?}")))?;
    let [n, dim]: [usize; 2] = hv.try_into().map_err(|_| bad(format!("bad header {header:?}")))?;
    let mut tokens = Vec::with_capacity(n);
    let mut input = Vec::with_capacity(n * dim);
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let mut parts = line.split_whitespace();
        let tok = parts.next().ok_or_else(|| bad(format!("line {}: empty", k + 2)))?;
        let before = input.len();
        for p in parts {
            input.push(p.parse::<f32>().map_err(|_| bad(format!("line {}: bad number {p:?}", k + 2)))?);
        }
        if input.len() - before != dim {
            return Err(bad(format!("line {}: expected {dim} values", k + 2)));
        }
        tokens.push(tok.to_string());
    }
    if tokens.len() != n {
        return Err(bad(format!("header says {n} rows, found {}", tokens.len())));
    }
    let vocab = Vocabulary::from_parts(tokens, vec![1; n], None);
    Ok(Embedding { vocab, matrix: EmbeddingMatrix { dim, input, output: vec![0.0; n * dim] } })
}

fn to_bytes(emb: &Embedding) -> Vec<u8> {
    let m = &emb.matrix;
    let mut b = Vec::with_capacity(64 + 4 * (m.input.len() + m.output.len()));
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&(emb.vocab.len() as u64).to_le_bytes());
    b.extend_from_slice(&(m.dim as u64).to_le_bytes());
    match emb.vocab.subword_config() {
        Some(sw) => {
            b.push(1);
            b.extend_from_slice(&(sw.ngram_min as u32).to_le_bytes());
            b.extend_from_slice(&(sw.ngram_max as u32).to_le_bytes());
            b.extend_from_slice(&(sw.buckets as u64).to_le_bytes());
        }
        None => b.push(0),
    }
    for (t, &c) in emb.vocab.tokens().iter().zip(emb.vocab.counts()) {
        b.extend_from_slice(&c.to_le_bytes());
        b.extend_from_slice(&(t.len() as u32).to_le_bytes());
        b.extend_from_slice(t.as_bytes());
    }
    for block in [&m.input, &m.output] {
        b.extend_from_slice(&((block.len() / m.dim.max(1)) as u64).to_le_bytes());
        for v in block.iter() {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbedError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| EmbedError::FormatError(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, EmbedError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, EmbedError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, EmbedError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, EmbedError> {
        usize::try_from(self.u64()?).map_err(|_| EmbedError::FormatError("length overflow".into()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, EmbedError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| EmbedError::FormatError("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn from_bytes(bytes: &[u8]) -> Result<Embedding, EmbedError> {
    let mut r = Reader { buf: bytes, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(EmbedError::FormatError(format!("unsupported version {version}")));
    }
    let n = r.len()?;
    let dim = r.len()?;
    let subwords = match r.u8()? {
        0 => None,
        1 => Some(SubwordConfig {
            ngram_min: r.u32()? as usize,
            ngram_max: r.u32()? as usize,
            buckets: r.len()?,
        }),
        f => return Err(EmbedError::FormatError(format!("bad subword flag {f}"))),
    };
    let mut tokens = Vec::new();
    let mut counts = Vec::new();
    for _ in 0..n {
        counts.push(r.u64()?);
        let len = r.u32()? as usize;
        let s = std::str::from_utf8(r.take(len)?).map_err(|_| EmbedError::FormatError("token not utf-8".into()))?;
        tokens.push(s.to_string());
    }
    let in_rows = r.len()?;
    let expected_in = n + subwords.map_or(0, |s| s.buckets);
    if in_rows != expected_in {
        return Err(EmbedError::FormatError(format!("expected {expected_in} input rows, found {in_rows}")));
    }
    let input = r.f32s(in_rows * dim)?;
    let out_rows = r.len()?;
    if out_rows != n {
        return Err(EmbedError::FormatError(format!("expected {n} output rows, found {out_rows}")));
    }
    let output = r.f32s(out_rows * dim)?;
    if r.pos != bytes.len() {
        return Err(EmbedError::FormatError("trailing bytes".into()));
    }
    Ok(Embedding { vocab: Vocabulary::from_parts(tokens, counts, subwords), matrix: EmbeddingMatrix { dim, input, output } })
}
