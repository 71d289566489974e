//! A small character-level arc-scoring parser trained from scratch.
//!
//! Each token's characters are embedded and run through an LSTM whose final
//! state is the token vector. A learned root vector is prepended and a
//! bidirectional LSTM yields one context vector per position `0..=n`. Two
//! `tanh(linear(x))` projections give head and dependent representations
//! `H` and `D`, and arc scores are the dot products `D_i . H_h`. Softmax
//! heads on top predict relations (from `[H_head; D_i]`), the coarse POS,
//! the eight morphology positions, and the lemma character by character.
//!
//! Gradients are derived by hand; [`grad_check`] compares them with central
//! finite differences.

mod io;
mod linalg;
mod lstm;
mod toy;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ScoreMatrix;
use crate::mst;
use crate::rng::SplitMix64;
use crate::treebank::{Sentence, Token, TAG_LEN, UNSET};

use linalg::{add_into, add_outer, add_transpose_product, affine, argmax, dot, softmax_xent};

pub use io::{read_model, render_loss_csv, write_model, FORMAT_VERSION, MAGIC};
pub use toy::toy_corpus;

/// Reserved character index for anything outside the vocabulary.
pub const UNK: usize = 0;
/// Reserved character index ending a lemma.
pub const STOP: usize = 1;
const RESERVED: usize = 2;
pub const MORPH_POSITIONS: usize = TAG_LEN - 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiniError {
    #[error("non-finite loss {loss} at epoch {epoch}, batch starting with sentence {sentence:?}")]
    NonFiniteLoss { epoch: usize, sentence: String, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("model file: {0}")]
    Format(String),
}

/// Network and training settings. Readable from TOML with these key names;
/// missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiniConfig {
    pub char_embed_dim: usize,
    pub char_rnn_dim: usize,
    pub token_rnn_dim: usize,
    pub arc_dim: usize,
    pub max_lemma_len: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient norm cap per batch; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for MiniConfig {
    fn default() -> Self {
        MiniConfig {
            char_embed_dim: 16,
            char_rnn_dim: 32,
            token_rnn_dim: 32,
            arc_dim: 32,
            max_lemma_len: 12,
            learning_rate: 0.1,
            seed: 7,
            epochs: 150,
            batch_size: 1,
            clip_norm: 5.0,
        }
    }
}

impl MiniConfig {
    /// Dimensions small enough for an exhaustive finite-difference check.
    pub fn tiny(seed: u64) -> Self {
        MiniConfig {
            char_embed_dim: 3,
            char_rnn_dim: 4,
            token_rnn_dim: 3,
            arc_dim: 4,
            max_lemma_len: 4,
            learning_rate: 0.1,
            seed,
            epochs: 1,
            batch_size: 1,
            clip_norm: 0.0,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, MiniError> {
        let cfg: MiniConfig = toml::from_str(text).map_err(|e| MiniError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MiniError> {
        let dims = [
            self.char_embed_dim,
            self.char_rnn_dim,
            self.token_rnn_dim,
            self.arc_dim,
            self.max_lemma_len,
            self.epochs,
            self.batch_size,
        ];
        if dims.contains(&0) {
            return Err(MiniError::Config(
                "dimensions, epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(MiniError::Config(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return Err(MiniError::Config(format!("clip norm {}", self.clip_norm)));
        }
        Ok(())
    }
}

/// Output vocabularies, fixed when the model is created.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    /// Characters at indices `2..`; 0 is unknown, 1 is the lemma stop symbol.
    pub chars: Vec<char>,
    pub relations: Vec<String>,
    pub pos: Vec<char>,
    pub morph: [Vec<char>; MORPH_POSITIONS],
}

impl Vocab {
    pub fn from_corpus(corpus: &[Sentence]) -> Self {
        use std::collections::BTreeSet;
        let mut chars = BTreeSet::new();
        let mut relations = BTreeSet::new();
        let mut pos = BTreeSet::new();
        let mut morph: [BTreeSet<char>; MORPH_POSITIONS] = Default::default();
        for t in corpus.iter().flat_map(|s| &s.tokens) {
            chars.extend(t.form.chars());
            chars.extend(t.lemma.chars());
            relations.insert(t.relation.clone());
            let tag = tag_chars(&t.postag);
            pos.insert(tag[0]);
            for (set, c) in morph.iter_mut().zip(&tag[1..]) {
                set.insert(*c);
            }
        }
        Vocab {
            chars: chars.into_iter().collect(),
            relations: relations.into_iter().collect(),
            pos: pos.into_iter().collect(),
            morph: morph.map(|s| s.into_iter().collect()),
        }
    }

    pub fn char_count(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn char_index(&self, c: char) -> usize {
        self.chars.binary_search(&c).map_or(UNK, |i| i + RESERVED)
    }

    fn index_chars(&self, s: &str) -> Vec<usize> {
        let ids: Vec<usize> = s.chars().map(|c| self.char_index(c)).collect();
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }
}

fn tag_chars(postag: &str) -> [char; TAG_LEN] {
    let mut out = [UNSET; TAG_LEN];
    for (slot, c) in out.iter_mut().zip(postag.chars()) {
        *slot = c;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tensor {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Tensor {
    fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }
}

/// Placement of every parameter tensor in the flat parameter vector, in
/// serialization order.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    char_embed: Tensor,
    char_w: Tensor,
    char_b: Tensor,
    root: Tensor,
    fwd_w: Tensor,
    fwd_b: Tensor,
    bwd_w: Tensor,
    bwd_b: Tensor,
    head_w: Tensor,
    head_b: Tensor,
    dep_w: Tensor,
    dep_b: Tensor,
    rel_w: Tensor,
    rel_b: Tensor,
    pos_w: Tensor,
    pos_b: Tensor,
    morph_w: Vec<Tensor>,
    morph_b: Vec<Tensor>,
    lemma_w: Tensor,
    lemma_b: Tensor,
    total: usize,
}

impl Layout {
    fn new(cfg: &MiniConfig, vocab: &Vocab) -> Self {
        let mut offset = 0;
        let mut take = |rows: usize, cols: usize| {
            let t = Tensor { offset, rows, cols };
            offset += rows * cols;
            t
        };
        let (ce, ch, th, a) = (cfg.char_embed_dim, cfg.char_rnn_dim, cfg.token_rnn_dim, cfg.arc_dim);
        let v = vocab.char_count();
        let char_embed = take(v, ce);
        let char_w = take(4 * ch, ce + ch);
        let char_b = take(4 * ch, 1);
        let root = take(ch, 1);
        let fwd_w = take(4 * th, ch + th);
        let fwd_b = take(4 * th, 1);
        let bwd_w = take(4 * th, ch + th);
        let bwd_b = take(4 * th, 1);
        let head_w = take(a, 2 * th);
        let head_b = take(a, 1);
        let dep_w = take(a, 2 * th);
        let dep_b = take(a, 1);
        let rel_w = take(vocab.relations.len(), 2 * a);
        let rel_b = take(vocab.relations.len(), 1);
        let pos_w = take(vocab.pos.len(), 2 * th);
        let pos_b = take(vocab.pos.len(), 1);
        let mut morph_w = Vec::new();
        let mut morph_b = Vec::new();
        for classes in &vocab.morph {
            morph_w.push(take(classes.len(), 2 * th));
            morph_b.push(take(classes.len(), 1));
        }
        let lemma_w = take(cfg.max_lemma_len * v, ch);
        let lemma_b = take(cfg.max_lemma_len * v, 1);
        Layout {
            char_embed,
            char_w,
            char_b,
            root,
            fwd_w,
            fwd_b,
            bwd_w,
            bwd_b,
            head_w,
            head_b,
            dep_w,
            dep_b,
            rel_w,
            rel_b,
            pos_w,
            pos_b,
            morph_w,
            morph_b,
            lemma_w,
            lemma_b,
            total: offset,
        }
    }

    fn named(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> = [
            ("char_embed", self.char_embed),
            ("char_lstm.weight", self.char_w),
            ("char_lstm.bias", self.char_b),
            ("root", self.root),
            ("token_lstm_fwd.weight", self.fwd_w),
            ("token_lstm_fwd.bias", self.fwd_b),
            ("token_lstm_bwd.weight", self.bwd_w),
            ("token_lstm_bwd.bias", self.bwd_b),
            ("head_proj.weight", self.head_w),
            ("head_proj.bias", self.head_b),
            ("dep_proj.weight", self.dep_w),
            ("dep_proj.bias", self.dep_b),
            ("relation.weight", self.rel_w),
            ("relation.bias", self.rel_b),
            ("pos.weight", self.pos_w),
            ("pos.bias", self.pos_b),
        ]
        .into_iter()
        .map(|(n, t)| (n.to_string(), t))
        .collect();
        for (k, (w, b)) in self.morph_w.iter().zip(&self.morph_b).enumerate() {
            out.push((format!("morph{}.weight", k + 2), *w));
            out.push((format!("morph{}.bias", k + 2), *b));
        }
        out.push(("lemma.weight".into(), self.lemma_w));
        out.push(("lemma.bias".into(), self.lemma_b));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniModel {
    pub config: MiniConfig,
    pub vocab: Vocab,
    layout: Layout,
    params: Vec<f64>,
}

/// Gold targets of one sentence; labels missing from the vocabulary are
/// `None` and contribute no loss.
struct Targets {
    heads: Vec<usize>,
    relation: Vec<Option<usize>>,
    pos: Vec<Option<usize>>,
    morph: Vec<[Option<usize>; MORPH_POSITIONS]>,
    lemma: Vec<Vec<usize>>,
}

/// Forward state kept for the backward pass.
struct Encoded {
    chars: Vec<lstm::Trace>,
    /// Token-level inputs, position 0 being the root vector.
    pooled: Vec<Vec<f64>>,
    fwd: lstm::Trace,
    bwd: lstm::Trace,
    ctx: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub heads: Vec<usize>,
    pub relations: Vec<String>,
    pub postags: Vec<String>,
    pub lemmas: Vec<String>,
}

impl MiniModel {
    /// Seeded initialization: Glorot-uniform weights, embeddings and root
    /// uniform in [-1, 1), zero biases except a forget-gate bias of 1.
    pub fn new(config: MiniConfig, vocab: Vocab) -> Result<Self, MiniError> {
        config.validate()?;
        if vocab.relations.is_empty() || vocab.pos.is_empty() || vocab.morph.iter().any(|m| m.is_empty()) {
            return Err(MiniError::Config("vocabulary has an empty label set".into()));
        }
        let layout = Layout::new(&config, &vocab);
        let mut params = vec![0.0; layout.total];
        let mut rng = SplitMix64::new(config.seed);
        for (name, t) in layout.named() {
            if name.ends_with(".bias") {
                continue;
            }
            let scale = if name == "char_embed" || name == "root" {
                1.0
            } else {
                (6.0 / (t.rows + t.cols) as f64).sqrt()
            };
            for p in &mut params[t.range()] {
                *p = scale * (2.0 * rng.next_f64() - 1.0);
            }
        }
        for (t, h) in [
            (layout.char_b, config.char_rnn_dim),
            (layout.fwd_b, config.token_rnn_dim),
            (layout.bwd_b, config.token_rnn_dim),
        ] {
            for p in &mut params[t.offset + h..t.offset + 2 * h] {
                *p = 1.0;
            }
        }
        Ok(MiniModel {
            config,
            vocab,
            layout,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter tensors as `(name, offset, len)` in storage order.
    pub fn tensors(&self) -> Vec<(String, usize, usize)> {
        self.layout
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.offset, t.rows * t.cols))
            .collect()
    }

    fn tensor(&self, name: &str) -> Option<Range<usize>> {
        self.layout
            .named()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.range())
    }

    fn p(&self, t: Tensor) -> &[f64] {
        &self.params[t.range()]
    }

    /// Context vectors for positions `0..=n` (root first).
    pub fn encode(&self, sentence: &Sentence) -> Vec<Vec<f64>> {
        self.run_encoder(&self.params, sentence).ctx
    }

    pub fn encode_batch(&self, sentences: &[Sentence]) -> Vec<Vec<Vec<f64>>> {
        sentences.iter().map(|s| self.encode(s)).collect()
    }

    fn run_encoder(&self, theta: &[f64], sentence: &Sentence) -> Encoded {
        let l = &self.layout;
        let ce = self.config.char_embed_dim;
        let ch = self.config.char_rnn_dim;
        let th = self.config.token_rnn_dim;
        let embed = &theta[l.char_embed.range()];
        let mut chars = Vec::with_capacity(sentence.len());
        let mut pooled = vec![theta[l.root.range()].to_vec()];
        for t in &sentence.tokens {
            let xs = self
                .vocab
                .index_chars(&t.form)
                .into_iter()
                .map(|c| embed[c * ce..(c + 1) * ce].to_vec())
                .collect();
            let trace = lstm::forward(&theta[l.char_w.range()], &theta[l.char_b.range()], ch, xs);
            pooled.push(trace.h[trace.h.len() - 1].clone());
            chars.push(trace);
        }
        let fwd = lstm::forward(&theta[l.fwd_w.range()], &theta[l.fwd_b.range()], th, pooled.clone());
        let rev: Vec<Vec<f64>> = pooled.iter().rev().cloned().collect();
        let bwd = lstm::forward(&theta[l.bwd_w.range()], &theta[l.bwd_b.range()], th, rev);
        let n = sentence.len();
        let ctx = (0..=n)
            .map(|j| {
                let mut v = fwd.h[j + 1].clone();
                v.extend_from_slice(&bwd.h[n - j + 1]);
                v
            })
            .collect();
        Encoded {
            chars,
            pooled,
            fwd,
            bwd,
            ctx,
        }
    }

    fn projections(&self, theta: &[f64], ctx: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let l = &self.layout;
        let proj = |w: Tensor, b: Tensor| -> Vec<Vec<f64>> {
            ctx.iter()
                .map(|v| {
                    affine(&theta[w.range()], &theta[b.range()], v)
                        .into_iter()
                        .map(f64::tanh)
                        .collect()
                })
                .collect()
        };
        (proj(l.head_w, l.head_b), proj(l.dep_w, l.dep_b))
    }

    fn score_rows(h: &[Vec<f64>], d: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = h.len() - 1;
        (1..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| if j == i { f64::NEG_INFINITY } else { dot(&d[i], &h[j]) })
                    .collect()
            })
            .collect()
    }

    /// Arc scores `D_i . H_h` from context vectors, diagonal masked.
    pub fn arc_scores(&self, ctx: &[Vec<f64>]) -> ScoreMatrix {
        let (h, d) = self.projections(&self.params, ctx);
        ScoreMatrix::from_rows(Self::score_rows(&h, &d)).expect("context holds at least one token")
    }

    fn targets(&self, s: &Sentence) -> Targets {
        let idx_char = |set: &[char], c: char| set.binary_search(&c).ok();
        let max_len = self.config.max_lemma_len;
        Targets {
            heads: s.heads(),
            relation: s
                .tokens
                .iter()
                .map(|t| self.vocab.relations.binary_search(&t.relation).ok())
                .collect(),
            pos: s.tokens.iter().map(|t| idx_char(&self.vocab.pos, t.pos())).collect(),
            morph: s
                .tokens
                .iter()
                .map(|t| {
                    let tag = tag_chars(&t.postag);
                    std::array::from_fn(|k| idx_char(&self.vocab.morph[k], tag[k + 1]))
                })
                .collect(),
            lemma: s
                .tokens
                .iter()
                .map(|t| {
                    let mut seq: Vec<usize> = t.lemma.chars().map(|c| self.vocab.char_index(c)).collect();
                    seq.push(STOP);
                    seq.truncate(max_len);
                    seq
                })
                .collect(),
        }
    }

    /// Summed cross-entropy of one sentence under `theta`, with the gradient
    /// accumulated into `grad` when given.
    fn loss_grad(&self, theta: &[f64], sentence: &Sentence, grad: Option<&mut [f64]>) -> f64 {
        self.loss_terms(theta, sentence, grad).iter().sum()
    }

    /// The individual cross-entropy terms in a fixed order.
    fn loss_terms(&self, theta: &[f64], sentence: &Sentence, grad: Option<&mut [f64]>) -> Vec<f64> {
        let l = &self.layout;
        let n = sentence.len();
        if n == 0 {
            return Vec::new();
        }
        let (a, th, ch) = (self.config.arc_dim, self.config.token_rnn_dim, self.config.char_rnn_dim);
        let v = self.vocab.char_count();
        let gold = self.targets(sentence);
        let enc = self.run_encoder(theta, sentence);
        let (hs, ds) = self.projections(theta, &enc.ctx);
        let rows = Self::score_rows(&hs, &ds);

        let mut terms = Vec::new();
        let mut d_h = vec![vec![0.0; a]; n + 1];
        let mut d_d = vec![vec![0.0; a]; n + 1];
        let mut d_ctx = vec![vec![0.0; 2 * th]; n + 1];
        let mut d_pooled = vec![vec![0.0; ch]; n + 1];
        let want = grad.is_some();
        let mut g = if want { vec![0.0; theta.len()] } else { Vec::new() };

        for i in 1..=n {
            let (li, ds_row) = softmax_xent(&rows[i - 1], gold.heads[i - 1]);
            terms.push(li);
            for (j, s) in ds_row.iter().enumerate() {
                if *s == 0.0 {
                    continue;
                }
                for k in 0..a {
                    d_d[i][k] += s * hs[j][k];
                    d_h[j][k] += s * ds[i][k];
                }
            }

            if let Some(r) = gold.relation[i - 1] {
                let head = gold.heads[i - 1];
                let mut x = hs[head].clone();
                x.extend_from_slice(&ds[i]);
                let (lr, dl) = softmax_xent(&affine(&theta[l.rel_w.range()], &theta[l.rel_b.range()], &x), r);
                terms.push(lr);
                if want {
                    add_outer(&mut g[l.rel_w.range()], &dl, &x);
                    add_into(&mut g[l.rel_b.range()], &dl);
                    let mut dx = vec![0.0; 2 * a];
                    add_transpose_product(&theta[l.rel_w.range()], &dl, &mut dx);
                    add_into(&mut d_h[head], &dx[..a]);
                    add_into(&mut d_d[i], &dx[a..]);
                }
            }

            let mut heads_for_token: Vec<(Tensor, Tensor, Option<usize>)> = vec![(l.pos_w, l.pos_b, gold.pos[i - 1])];
            for k in 0..MORPH_POSITIONS {
                heads_for_token.push((l.morph_w[k], l.morph_b[k], gold.morph[i - 1][k]));
            }
            for (w, b, target) in heads_for_token {
                let Some(target) = target else { continue };
                let x = &enc.ctx[i];
                let (lt, dl) = softmax_xent(&affine(&theta[w.range()], &theta[b.range()], x), target);
                terms.push(lt);
                if !want {
                    continue;
                }
                add_outer(&mut g[w.range()], &dl, x);
                add_into(&mut g[b.range()], &dl);
                add_transpose_product(&theta[w.range()], &dl, &mut d_ctx[i]);
            }

            let c = &enc.pooled[i];
            for (p, &target) in gold.lemma[i - 1].iter().enumerate() {
                let rows_w = l.lemma_w.offset + p * v * ch..l.lemma_w.offset + (p + 1) * v * ch;
                let rows_b = l.lemma_b.offset + p * v..l.lemma_b.offset + (p + 1) * v;
                let (lt, dl) = softmax_xent(&affine(&theta[rows_w.clone()], &theta[rows_b.clone()], c), target);
                terms.push(lt);
                if !want {
                    continue;
                }
                add_outer(&mut g[rows_w.clone()], &dl, c);
                add_into(&mut g[rows_b], &dl);
                add_transpose_product(&theta[rows_w], &dl, &mut d_pooled[i]);
            }
        }

        let Some(grad) = grad else { return terms };

        for (dy, (w, b), out) in [(&d_h, (l.head_w, l.head_b), &hs), (&d_d, (l.dep_w, l.dep_b), &ds)] {
            for j in 0..=n {
                let dz: Vec<f64> = dy[j].iter().zip(&out[j]).map(|(d, y)| d * (1.0 - y * y)).collect();
                add_outer(&mut g[w.range()], &dz, &enc.ctx[j]);
                add_into(&mut g[b.range()], &dz);
                add_transpose_product(&theta[w.range()], &dz, &mut d_ctx[j]);
            }
        }

        let dh_fwd: Vec<Vec<f64>> = d_ctx.iter().map(|d| d[..th].to_vec()).collect();
        let dh_bwd: Vec<Vec<f64>> = d_ctx.iter().rev().map(|d| d[th..].to_vec()).collect();
        let (gw, rest) = split_pair(&mut g, l.fwd_w, l.fwd_b);
        let dx_fwd = lstm::backward(&theta[l.fwd_w.range()], th, &enc.fwd, &dh_fwd, gw, rest);
        let (gw, rest) = split_pair(&mut g, l.bwd_w, l.bwd_b);
        let dx_bwd = lstm::backward(&theta[l.bwd_w.range()], th, &enc.bwd, &dh_bwd, gw, rest);
        for j in 0..=n {
            add_into(&mut d_pooled[j], &dx_fwd[j]);
            add_into(&mut d_pooled[j], &dx_bwd[n - j]);
        }
        add_into(&mut g[l.root.range()], &d_pooled[0]);

        let ce = self.config.char_embed_dim;
        for (i, t) in sentence.tokens.iter().enumerate() {
            let trace = &enc.chars[i];
            let steps = trace.h.len() - 1;
            let mut dh = vec![vec![0.0; ch]; steps];
            dh[steps - 1] = d_pooled[i + 1].clone();
            let (gw, gb) = split_pair(&mut g, l.char_w, l.char_b);
            let dx = lstm::backward(&theta[l.char_w.range()], ch, trace, &dh, gw, gb);
            for (c, d) in self.vocab.index_chars(&t.form).into_iter().zip(dx) {
                let off = l.char_embed.offset + c * ce;
                add_into(&mut g[off..off + ce], &d);
            }
        }

        add_into(grad, &g);
        terms
    }

    /// Total loss of a sentence under the current parameters.
    pub fn sentence_loss(&self, sentence: &Sentence) -> f64 {
        self.loss_grad(&self.params, sentence, None)
    }

    pub fn corpus_loss(&self, corpus: &[Sentence]) -> f64 {
        corpus.iter().map(|s| self.sentence_loss(s)).sum()
    }

    /// Loss and analytic gradient of one sentence.
    pub fn gradient(&self, sentence: &Sentence) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.params.len()];
        let loss = self.loss_grad(&self.params, sentence, Some(&mut g));
        (loss, g)
    }

    pub fn predict(&self, sentence: &Sentence) -> Prediction {
        let n = sentence.len();
        if n == 0 {
            return Prediction {
                heads: vec![],
                relations: vec![],
                postags: vec![],
                lemmas: vec![],
            };
        }
        let l = &self.layout;
        let enc = self.run_encoder(&self.params, sentence);
        let (hs, ds) = self.projections(&self.params, &enc.ctx);
        let matrix = ScoreMatrix::from_rows(Self::score_rows(&hs, &ds)).expect("non-empty sentence");
        let heads = mst::decode(&matrix, true)
            .expect("dense scores always admit a tree")
            .heads;
        let v = self.vocab.char_count();
        let ch = self.config.char_rnn_dim;
        let mut out = Prediction {
            heads: heads.clone(),
            relations: Vec::with_capacity(n),
            postags: Vec::with_capacity(n),
            lemmas: Vec::with_capacity(n),
        };
        for i in 1..=n {
            let mut x = hs[heads[i - 1]].clone();
            x.extend_from_slice(&ds[i]);
            let r = argmax(&affine(self.p(l.rel_w), self.p(l.rel_b), &x));
            out.relations.push(self.vocab.relations[r].clone());

            let ctx = &enc.ctx[i];
            let mut tag = String::with_capacity(TAG_LEN);
            tag.push(self.vocab.pos[argmax(&affine(self.p(l.pos_w), self.p(l.pos_b), ctx))]);
            for k in 0..MORPH_POSITIONS {
                let c = argmax(&affine(self.p(l.morph_w[k]), self.p(l.morph_b[k]), ctx));
                tag.push(self.vocab.morph[k][c]);
            }
            out.postags.push(tag);

            let mut lemma = String::new();
            for p in 0..self.config.max_lemma_len {
                let w = &self.params[l.lemma_w.offset + p * v * ch..l.lemma_w.offset + (p + 1) * v * ch];
                let b = &self.params[l.lemma_b.offset + p * v..l.lemma_b.offset + (p + 1) * v];
                match argmax(&affine(w, b, &enc.pooled[i])) {
                    STOP => break,
                    UNK => lemma.push(char::REPLACEMENT_CHARACTER),
                    c => lemma.push(self.vocab.chars[c - RESERVED]),
                }
            }
            out.lemmas.push(lemma);
        }
        out
    }

    /// The input sentence with every predicted field filled in.
    pub fn annotate(&self, sentence: &Sentence) -> Sentence {
        let p = self.predict(sentence);
        let tokens = sentence
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Token {
                id: t.id,
                form: t.form.clone(),
                lemma: p.lemmas[i].clone(),
                postag: p.postags[i].clone(),
                head: p.heads[i],
                relation: p.relations[i].clone(),
                elliptical: t.elliptical,
            })
            .collect();
        Sentence::new(sentence.sentence_id.clone(), sentence.provenance.clone(), tokens)
    }
}

fn split_pair(g: &mut [f64], w: Tensor, b: Tensor) -> (&mut [f64], &mut [f64]) {
    debug_assert_eq!(w.range().end, b.offset);
    let (left, right) = g.split_at_mut(b.offset);
    (&mut left[w.range()], &mut right[..b.rows * b.cols])
}

/// Per-epoch corpus loss; entry 0 is the loss before training.
pub type LossTrace = Vec<f64>;

/// Minibatch gradient descent on the summed loss, averaged per batch, with
/// sentences reshuffled every epoch from the configured seed.
pub fn train(mut model: MiniModel, corpus: &[Sentence]) -> Result<(MiniModel, LossTrace), MiniError> {
    if corpus.is_empty() {
        return Err(MiniError::EmptyCorpus);
    }
    let cfg = model.config.clone();
    cfg.validate()?;
    let initial = model.corpus_loss(corpus);
    if !initial.is_finite() {
        return Err(MiniError::NonFiniteLoss {
            epoch: 0,
            sentence: corpus[0].sentence_id.clone(),
            loss: initial,
        });
    }
    let mut trace = vec![initial];
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    for epoch in 1..=cfg.epochs {
        SplitMix64::new(cfg.seed.wrapping_add(epoch as u64)).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &s in batch {
                loss += model.loss_grad(&model.params, &corpus[s], Some(&mut grad));
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(MiniError::NonFiniteLoss {
                    epoch,
                    sentence: corpus[batch[0]].sentence_id.clone(),
                    loss,
                });
            }
            let mut step = cfg.learning_rate / batch.len() as f64;
            if cfg.clip_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / batch.len() as f64;
                if norm > cfg.clip_norm {
                    step *= cfg.clip_norm / norm;
                }
            }
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= step * g;
            }
        }
        let loss = model.corpus_loss(corpus);
        if !loss.is_finite() {
            return Err(MiniError::NonFiniteLoss {
                epoch,
                sentence: corpus[0].sentence_id.clone(),
                loss,
            });
        }
        log::debug!("epoch {epoch}: loss {loss}");
        trace.push(loss);
    }
    Ok((model, trace))
}

/// Fraction of tokens whose decoded head matches gold.
pub fn head_accuracy(model: &MiniModel, corpus: &[Sentence]) -> f64 {
    let mut right = 0usize;
    let mut total = 0usize;
    for s in corpus {
        let p = model.predict(s);
        right += p.heads.iter().zip(s.heads()).filter(|(a, b)| **a == *b).count();
        total += s.len();
    }
    if total == 0 {
        return 1.0;
    }
    right as f64 / total as f64
}

/// Deliberate corruption of the analytic gradient, for exercising the check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GradFault {
    /// Negates the gradient of the named tensor.
    FlipSign(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Flat index of the parameter with the largest error, with its
    /// analytic and numeric derivatives.
    pub worst_param: (usize, f64, f64),
    /// Largest error per tensor, in storage order.
    pub per_tensor: Vec<(String, f64)>,
}

impl GradCheck {
    pub fn worst(&self) -> (&str, f64) {
        self.per_tensor
            .iter()
            .fold(("", 0.0), |acc, (n, e)| if *e > acc.1 { (n.as_str(), *e) } else { acc })
    }
}

/// Compares the analytic gradient with the fourth-order central difference
/// `(8 (L(θ+ε) - L(θ-ε)) - (L(θ+2ε) - L(θ-2ε))) / 12ε` on every parameter. The error per parameter is
/// `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn grad_check(
    model: &MiniModel,
    sentence: &Sentence,
    epsilon: f64,
    fault: Option<&GradFault>,
) -> Result<GradCheck, MiniError> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(MiniError::Config(format!("epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    let (_, mut analytic) = model.gradient(sentence);
    if let Some(GradFault::FlipSign(name)) = fault {
        let r = model
            .tensor(name)
            .ok_or_else(|| MiniError::Config(format!("no tensor named {name:?}")))?;
        analytic[r].iter_mut().for_each(|g| *g = -*g);
    }
    let mut theta = model.params.clone();
    let mut per_tensor = Vec::new();
    let mut max_rel_error = 0.0f64;
    let mut worst_param = (0, 0.0, 0.0);
    for (name, t) in model.layout.named() {
        let mut worst = 0.0f64;
        for k in t.range() {
            let orig = theta[k];
            let mut at = |step: f64| {
                theta[k] = orig + step;
                model.loss_terms(&theta, sentence, None)
            };
            let (p2, p1, m1, m2) = (at(2.0 * epsilon), at(epsilon), at(-epsilon), at(-2.0 * epsilon));
            theta[k] = orig;
            // differencing term by term avoids cancellation in the large total
            let numeric = (0..p1.len())
                .map(|t| 8.0 * (p1[t] - m1[t]) - (p2[t] - m2[t]))
                .sum::<f64>()
                / (12.0 * epsilon);
            let a = analytic[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if err > max_rel_error.max(worst) {
                worst_param = (k, a, numeric);
            }
            worst = worst.max(err);
        }
        max_rel_error = max_rel_error.max(worst);
        per_tensor.push((name, worst));
    }
    Ok(GradCheck {
        max_rel_error,
        worst_param,
        per_tensor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(seed: u64) -> (MiniModel, Vec<Sentence>) {
        let corpus = toy_corpus(3, 6);
        let model = MiniModel::new(MiniConfig::tiny(seed), Vocab::from_corpus(&corpus)).unwrap();
        (model, corpus)
    }

    #[test]
    fn shapes() {
        let (model, corpus) = small_model(1);
        let ctx = model.encode(&corpus[0]);
        assert_eq!(ctx.len(), corpus[0].len() + 1);
        assert!(ctx.iter().all(|v| v.len() == 2 * model.config.token_rnn_dim));
        let total: usize = model.tensors().iter().map(|t| t.2).sum();
        assert_eq!(total, model.param_count());
    }

    #[test]
    fn single_token_and_empty_form() {
        let (model, corpus) = small_model(2);
        let mut s = corpus[0].clone();
        s.tokens.truncate(1);
        s.tokens[0].head = 0;
        s.tokens[0].form = String::new();
        let ctx = model.encode(&s);
        assert_eq!(ctx.len(), 2);
        let m = model.arc_scores(&ctx);
        assert_eq!(m.n(), 1);
        assert_eq!(m.get(1, 1), f64::NEG_INFINITY);
        assert!(m.get(1, 0).is_finite());
        assert_eq!(model.predict(&s).heads, vec![0]);
    }

    #[test]
    fn zero_parameters_give_zero_scores() {
        let (mut model, corpus) = small_model(3);
        model.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let m = model.arc_scores(&model.encode(&corpus[1]));
        for i in 1..=m.n() {
            for h in 0..=m.n() {
                let want = if h == i { f64::NEG_INFINITY } else { 0.0 };
                assert_eq!(m.get(i, h), want);
            }
        }
    }

    #[test]
    fn grad_check_tiny() {
        let (model, corpus) = small_model(4);
        let r = grad_check(&model, &corpus[0], 1e-3, None).unwrap();
        assert!(r.max_rel_error < 1e-4, "{:?}", r.per_tensor);
        let bad = grad_check(
            &model,
            &corpus[0],
            1e-3,
            Some(&GradFault::FlipSign("head_proj.weight".into())),
        )
        .unwrap();
        assert!(bad.max_rel_error > 0.1);
        assert_eq!(bad.worst().0, "head_proj.weight");
    }

    #[test]
    fn learning_rate_zero_is_inert() {
        let (mut model, corpus) = small_model(5);
        model.config.learning_rate = 0.0;
        model.config.epochs = 3;
        let before = model.params().to_vec();
        let (after, trace) = train(model, &corpus).unwrap();
        assert_eq!(after.params(), &before[..]);
        assert!(trace.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn predictions_are_valid_trees() {
        let (model, corpus) = small_model(6);
        for s in &corpus {
            let p = model.predict(s);
            assert!(crate::treebank::validate_heads(&p.heads, true).is_ok());
            assert!(p.postags.iter().all(|t| t.chars().count() == TAG_LEN));
        }
    }
}
