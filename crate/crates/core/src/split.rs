//! Deterministic train/validation/test partitioning.
//!
//! A fifth of the corpus (rounded down) is held out as a fixed test set. The
//! rest is cut into five contiguous folds; ten runs use fold `r mod 5` for
//! validation and the remaining folds for training, so every
//! train/validation split is trained twice with different seeds.
//!
//! Shuffling is a Fisher-Yates pass driven by [`SplitMix64`] seeded with the
//! manifest seed, so a manifest regenerates bit-identically from the
//! corpus order and the seed.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ingest::write_conllu;
use crate::rng::SplitMix64;
use crate::treebank::Sentence;

pub const FOLDS: usize = 5;
pub const REPETITIONS: usize = 2;
pub const RUNS: usize = FOLDS * REPETITIONS;
pub const MIN_SENTENCES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("need at least {MIN_SENTENCES} sentences, found {0}")]
    TooFewSentences(usize),
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("sentence id {0:?} contains whitespace")]
    InvalidId(String),
    #[error("manifest does not match corpus: {0}")]
    IdMismatch(String),
    #[error("run {0} out of range 0..{RUNS}")]
    NoSuchRun(usize),
    #[error("manifest line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub index: usize,
    pub fold: usize,
    pub repetition: usize,
    /// Training seed: manifest seed XOR run index.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub seed: u64,
    pub test_ids: Vec<String>,
    pub folds: Vec<Vec<String>>,
    pub runs: Vec<Run>,
}

fn fold_sizes(m: usize) -> [usize; FOLDS] {
    let mut sizes = [m / FOLDS; FOLDS];
    for s in sizes.iter_mut().take(m % FOLDS) {
        *s += 1;
    }
    sizes
}

fn runs_for(seed: u64) -> Vec<Run> {
    (0..RUNS)
        .map(|r| Run {
            index: r,
            fold: r % FOLDS,
            repetition: r / FOLDS,
            seed: seed ^ r as u64,
        })
        .collect()
}

/// Builds the manifest from sentence ids in corpus order.
pub fn make_splits<S: AsRef<str>>(ids: &[S], seed: u64) -> Result<RunManifest, SplitError> {
    let n = ids.len();
    if n < MIN_SENTENCES {
        return Err(SplitError::TooFewSentences(n));
    }
    let mut seen = HashSet::with_capacity(n);
    for id in ids {
        let id = id.as_ref();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(SplitError::InvalidId(id.to_string()));
        }
        if !seen.insert(id) {
            return Err(SplitError::DuplicateId(id.to_string()));
        }
    }
    let mut order: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
    SplitMix64::new(seed).shuffle(&mut order);

    let test_len = n / 5;
    let mut rest = order.split_off(test_len);
    let test_ids = order;
    let mut folds = Vec::with_capacity(FOLDS);
    for size in fold_sizes(rest.len()) {
        let tail = rest.split_off(size);
        folds.push(std::mem::replace(&mut rest, tail));
    }
    Ok(RunManifest {
        seed,
        test_ids,
        folds,
        runs: runs_for(seed),
    })
}

pub fn corpus_splits(corpus: &[Sentence], seed: u64) -> Result<RunManifest, SplitError> {
    let ids: Vec<&str> = corpus.iter().map(|s| s.sentence_id.as_str()).collect();
    make_splits(&ids, seed)
}

impl RunManifest {
    pub fn run(&self, index: usize) -> Result<&Run, SplitError> {
        self.runs.get(index).ok_or(SplitError::NoSuchRun(index))
    }

    /// Ids in (train, validation) order for one run.
    pub fn train_val_ids(&self, index: usize) -> Result<(Vec<&str>, Vec<&str>), SplitError> {
        let run = self.run(index)?;
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != run.fold)
            .flat_map(|(_, ids)| ids.iter().map(String::as_str))
            .collect();
        let val = self.folds[run.fold].iter().map(String::as_str).collect();
        Ok((train, val))
    }

    pub fn all_ids(&self) -> impl Iterator<Item = &String> {
        self.test_ids.iter().chain(self.folds.iter().flatten())
    }

    /// Plain `key = value` text, one list per line with space-separated ids.
    pub fn render(&self) -> String {
        let mut out = String::from("# split manifest v1\n");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "test = {}", self.test_ids.join(" "));
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(out, "fold.{i} = {}", f.join(" "));
        }
        for r in &self.runs {
            let _ = writeln!(
                out,
                "run.{} = fold={} repetition={} seed={}",
                r.index, r.fold, r.repetition, r.seed
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SplitError> {
        let mut seed = None;
        let mut test_ids = None;
        let mut folds: Vec<Option<Vec<String>>> = vec![None; FOLDS];
        let mut runs: Vec<Option<Run>> = vec![None; RUNS];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let syntax = |message: String| SplitError::Syntax { line, message };
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (key, value) = raw
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| syntax("expected `key = value`".to_string()))?;
            let ids = || value.split_whitespace().map(str::to_string).collect::<Vec<_>>();
            if key == "seed" {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| syntax(format!("bad seed {value:?}")))?,
                );
            } else if key == "test" {
                test_ids = Some(ids());
            } else if let Some(i) = key.strip_prefix("fold.") {
                let i: usize = i
                    .parse()
                    .ok()
                    .filter(|&i| i < FOLDS)
                    .ok_or_else(|| syntax(format!("bad fold {key:?}")))?;
                folds[i] = Some(ids());
            } else if let Some(i) = key.strip_prefix("run.") {
                let index: usize = i
                    .parse()
                    .ok()
                    .filter(|&i| i < RUNS)
                    .ok_or_else(|| syntax(format!("bad run {key:?}")))?;
                let mut fields = HashMap::new();
                for kv in value.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| syntax(format!("bad run field {kv:?}")))?;
                    let v: u64 = v.parse().map_err(|_| syntax(format!("bad run field {kv:?}")))?;
                    fields.insert(k, v);
                }
                let get = |k: &str| fields.get(k).copied().ok_or_else(|| syntax(format!("run missing {k}")));
                runs[index] = Some(Run {
                    index,
                    fold: get("fold")? as usize,
                    repetition: get("repetition")? as usize,
                    seed: get("seed")?,
                });
            } else {
                return Err(syntax(format!("unknown key {key:?}")));
            }
        }
        let missing = |what: &str| SplitError::Syntax {
            line: 0,
            message: format!("missing {what}"),
        };
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let manifest = RunManifest {
            seed,
            test_ids: test_ids.ok_or_else(|| missing("test"))?,
            folds: folds
                .into_iter()
                .enumerate()
                .map(|(i, f)| f.ok_or_else(|| missing(&format!("fold.{i}"))))
                .collect::<Result<_, _>>()?,
            runs: runs
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.ok_or_else(|| missing(&format!("run.{i}"))))
                .collect::<Result<_, _>>()?,
        };
        if manifest.runs != runs_for(seed) {
            return Err(missing("consistent run table"));
        }
        Ok(manifest)
    }
}

/// CoNLL-U bytes of the three partitions of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFiles {
    pub train: Vec<u8>,
    pub validation: Vec<u8>,
    pub test: Vec<u8>,
}

/// Writes the train, validation and test sets of `run`, each in manifest
/// order. The corpus must contain exactly the manifest's ids.
pub fn materialize_split(corpus: &[Sentence], manifest: &RunManifest, run: usize) -> Result<SplitFiles, SplitError> {
    let by_id: HashMap<&str, &Sentence> = corpus.iter().map(|s| (s.sentence_id.as_str(), s)).collect();
    if by_id.len() != corpus.len() {
        let mut seen = HashSet::new();
        let dup = corpus
            .iter()
            .find(|s| !seen.insert(&s.sentence_id))
            .expect("duplicate exists");
        return Err(SplitError::DuplicateId(dup.sentence_id.clone()));
    }
    let manifest_ids: HashSet<&str> = manifest.all_ids().map(String::as_str).collect();
    if manifest_ids.len() != by_id.len() || manifest.all_ids().count() != manifest_ids.len() {
        return Err(SplitError::IdMismatch(format!(
            "corpus has {} sentences, manifest lists {}",
            by_id.len(),
            manifest.all_ids().count()
        )));
    }
    if let Some(id) = manifest_ids.iter().find(|id| !by_id.contains_key(*id)) {
        return Err(SplitError::IdMismatch(format!("sentence {id:?} not in corpus")));
    }
    let (train, val) = manifest.train_val_ids(run)?;
    let collect = |ids: &[&str]| -> Vec<Sentence> { ids.iter().map(|id| by_id[id].clone()).collect() };
    let test: Vec<&str> = manifest.test_ids.iter().map(String::as_str).collect();
    Ok(SplitFiles {
        train: write_conllu(&collect(&train)),
        validation: write_conllu(&collect(&val)),
        test: write_conllu(&collect(&test)),
    })
}
