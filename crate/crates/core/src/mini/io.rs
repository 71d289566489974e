//! Model files and loss traces.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "DTHXMINI"
//! version        u32
//! dims           7 x u32  char_embed, char_rnn, token_rnn, arc, max_lemma_len, epochs, batch_size
//! learning_rate  f64
//! clip_norm      f64
//! seed           u64
//! chars          u32 count, then one u32 scalar value each
//! relations      u32 count, then (u32 byte length, UTF-8) each
//! pos            u32 count, then u32 scalar values
//! morph          8 x (u32 count, then u32 scalar values)
//! params         u64 count, then f64 values in tensor order
//! ```

use std::fmt::Write as _;

use super::{Layout, MiniConfig, MiniError, MiniModel, Vocab, MORPH_POSITIONS};

pub const MAGIC: &[u8; 8] = b"DTHXMINI";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("size fits in u32").to_le_bytes());
}

fn put_chars(out: &mut Vec<u8>, chars: &[char]) {
    put_u32(out, chars.len());
    for c in chars {
        out.extend_from_slice(&(*c as u32).to_le_bytes());
    }
}

pub fn write_model(model: &MiniModel) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::with_capacity(64 + 8 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for d in [
        c.char_embed_dim,
        c.char_rnn_dim,
        c.token_rnn_dim,
        c.arc_dim,
        c.max_lemma_len,
        c.epochs,
        c.batch_size,
    ] {
        put_u32(&mut out, d);
    }
    out.extend_from_slice(&c.learning_rate.to_le_bytes());
    out.extend_from_slice(&c.clip_norm.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    put_chars(&mut out, &model.vocab.chars);
    put_u32(&mut out, model.vocab.relations.len());
    for r in &model.vocab.relations {
        put_u32(&mut out, r.len());
        out.extend_from_slice(r.as_bytes());
    }
    put_chars(&mut out, &model.vocab.pos);
    for m in &model.vocab.morph {
        put_chars(&mut out, m);
    }
    out.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MiniError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| MiniError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, MiniError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, MiniError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, MiniError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn chars(&mut self) -> Result<Vec<char>, MiniError> {
        let n = self.u32()?;
        (0..n)
            .map(|_| {
                let v = self.u32()? as u32;
                char::from_u32(v).ok_or_else(|| MiniError::Format(format!("invalid character U+{v:04X}")))
            })
            .collect()
    }
}

pub fn read_model(bytes: &[u8]) -> Result<MiniModel, MiniError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(MiniError::Format("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(MiniError::Format(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32()?;
    }
    let config = MiniConfig {
        char_embed_dim: dims[0],
        char_rnn_dim: dims[1],
        token_rnn_dim: dims[2],
        arc_dim: dims[3],
        max_lemma_len: dims[4],
        epochs: dims[5],
        batch_size: dims[6],
        learning_rate: r.f64()?,
        clip_norm: r.f64()?,
        seed: r.u64()?,
    };
    config.validate()?;
    let chars = r.chars()?;
    let n_rel = r.u32()?;
    let mut relations = Vec::new();
    for _ in 0..n_rel {
        let len = r.u32()?;
        let s = std::str::from_utf8(r.take(len)?).map_err(|e| MiniError::Format(e.to_string()))?;
        relations.push(s.to_string());
    }
    let pos = r.chars()?;
    let mut morph: [Vec<char>; MORPH_POSITIONS] = Default::default();
    for m in &mut morph {
        *m = r.chars()?;
    }
    let vocab = Vocab {
        chars,
        relations,
        pos,
        morph,
    };
    let sorted = vocab.chars.windows(2).all(|w| w[0] < w[1]) && vocab.relations.windows(2).all(|w| w[0] < w[1]);
    if !sorted {
        return Err(MiniError::Format("vocabulary is not sorted".into()));
    }
    let layout = Layout::new(&config, &vocab);
    let count = r.u64()?;
    if count != layout.total as u64 {
        return Err(MiniError::Format(format!(
            "{count} parameters stored, configuration needs {}",
            layout.total
        )));
    }
    let params = (0..layout.total).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(MiniError::Format("non-finite parameter".into()));
    }
    if r.pos != bytes.len() {
        return Err(MiniError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut model = MiniModel::new(config, vocab)?;
    model.params = params;
    Ok(model)
}

/// `epoch,loss` rows with shortest round-trip floats.
pub fn render_loss_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (e, l) in trace.iter().enumerate() {
        let _ = writeln!(out, "{e},{l:?}");
    }
    out
}
