//! Python bindings: treebank I/O, normalization, decoding, scoring, the
//! correlated t-test, splits and the small parser.

use std::collections::BTreeMap;

use agdt_core::bayes::{self, Rope, ScoreVector};
use agdt_core::eval::{format_mean_sd, EvalMode, METRICS};
use agdt_core::ingest;
use agdt_core::mini::{self, MiniConfig, MiniModel, Vocab};
use agdt_core::{mst, normalize_pipeline, split, treebank, NormalizationConfig, ScoreMatrix};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Token", module = "agdt", get_all, set_all, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyToken {
    id: usize,
    form: String,
    lemma: String,
    postag: String,
    head: usize,
    relation: String,
    elliptical: bool,
}

#[pymethods]
impl PyToken {
    #[new]
    #[pyo3(signature = (id, form, head, relation, lemma = None, postag = None, elliptical = false))]
    fn new(
        id: usize,
        form: String,
        head: usize,
        relation: String,
        lemma: Option<String>,
        postag: Option<String>,
        elliptical: bool,
    ) -> Self {
        PyToken {
            id,
            lemma: lemma.unwrap_or_else(|| form.clone()),
            form,
            postag: postag.unwrap_or_else(|| "-".repeat(treebank::TAG_LEN)),
            head,
            relation,
            elliptical,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Token({}, {:?}, head={}, relation={:?})",
            self.id, self.form, self.head, self.relation
        )
    }
}

impl From<&treebank::Token> for PyToken {
    fn from(t: &treebank::Token) -> Self {
        PyToken {
            id: t.id,
            form: t.form.clone(),
            lemma: t.lemma.clone(),
            postag: t.postag.clone(),
            head: t.head,
            relation: t.relation.clone(),
            elliptical: t.elliptical,
        }
    }
}

impl From<PyToken> for treebank::Token {
    fn from(t: PyToken) -> Self {
        treebank::Token {
            id: t.id,
            form: t.form,
            lemma: t.lemma,
            postag: t.postag,
            head: t.head,
            relation: t.relation,
            elliptical: t.elliptical,
        }
    }
}

#[pyclass(name = "Sentence", module = "agdt", eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PySentence {
    inner: treebank::Sentence,
}

#[pymethods]
impl PySentence {
    #[new]
    #[pyo3(signature = (sentence_id, tokens, provenance = String::new()))]
    fn new(sentence_id: String, tokens: Vec<PyToken>, provenance: String) -> Self {
        PySentence {
            inner: treebank::Sentence::new(sentence_id, provenance, tokens.into_iter().map(Into::into).collect()),
        }
    }

    #[getter]
    fn sentence_id(&self) -> &str {
        &self.inner.sentence_id
    }

    #[getter]
    fn provenance(&self) -> &str {
        &self.inner.provenance
    }

    #[getter]
    fn tokens(&self) -> Vec<PyToken> {
        self.inner.tokens.iter().map(PyToken::from).collect()
    }

    fn heads(&self) -> Vec<usize> {
        self.inner.heads()
    }

    /// `None` for a valid tree, otherwise the reason it is not one.
    #[pyo3(signature = (single_root = true))]
    fn tree_problem(&self, single_root: bool) -> Option<String> {
        let v = treebank::validate_tree(&self.inner, single_root);
        (!v.is_ok()).then(|| v.to_string())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Sentence({:?}, {} tokens)", self.inner.sentence_id, self.inner.len())
    }
}

fn wrap(sentences: Vec<treebank::Sentence>) -> Vec<PySentence> {
    sentences.into_iter().map(|inner| PySentence { inner }).collect()
}

fn unwrap(sentences: &[PySentence]) -> Vec<treebank::Sentence> {
    sentences.iter().map(|s| s.inner.clone()).collect()
}

#[pyfunction]
fn read_conllu(text: &str) -> PyResult<Vec<PySentence>> {
    Ok(wrap(ingest::read_conllu(text.as_bytes()).map_err(value_err)?))
}

#[pyfunction]
fn write_conllu(sentences: Vec<PySentence>) -> String {
    String::from_utf8(ingest::write_conllu(&unwrap(&sentences))).expect("CoNLL-U output is UTF-8")
}

/// Returns the sentences and the reader's warnings as `line: message`.
#[pyfunction]
#[pyo3(signature = (text, provenance = "document"))]
fn read_agdt_xml(text: &str, provenance: &str) -> PyResult<(Vec<PySentence>, Vec<String>)> {
    let r = ingest::read_agdt_xml(text.as_bytes(), provenance).map_err(value_err)?;
    let warnings = r.warnings.iter().map(|w| w.to_string()).collect();
    Ok((wrap(r.sentences), warnings))
}

fn config_of(toml: Option<&str>) -> PyResult<NormalizationConfig> {
    match toml {
        Some(t) => NormalizationConfig::from_toml_str(t).map_err(value_err),
        None => Ok(NormalizationConfig::default()),
    }
}

/// Normalizes a sentence with the default configuration or a TOML one.
/// Returns the new sentence and the per-stage change counts.
#[pyfunction]
#[pyo3(signature = (sentence, config_toml = None))]
fn normalize(sentence: &PySentence, config_toml: Option<&str>) -> PyResult<(PySentence, BTreeMap<String, usize>)> {
    let config = config_of(config_toml)?;
    let (inner, report) = normalize_pipeline(&sentence.inner, &config).map_err(value_err)?;
    let counts = report
        .render()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.parse().expect("report counts are integers")))
        .collect();
    Ok((PySentence { inner }, counts))
}

fn matrix_of(rows: Vec<Vec<f64>>) -> PyResult<ScoreMatrix> {
    ScoreMatrix::from_rows(rows).map_err(PyValueError::new_err)
}

/// Maximum spanning arborescence. `rows[i-1][h]` scores token `i` attaching
/// to head `h`; returns `(heads, total_score)`.
#[pyfunction]
#[pyo3(signature = (rows, single_root = true))]
fn decode(rows: Vec<Vec<f64>>, single_root: bool) -> PyResult<(Vec<usize>, f64)> {
    let t = mst::decode(&matrix_of(rows)?, single_root).map_err(value_err)?;
    Ok((t.heads, t.total_score))
}

/// Exhaustive search over all head vectors, for up to six tokens.
#[pyfunction]
#[pyo3(signature = (rows, single_root = true))]
fn brute_force_decode(rows: Vec<Vec<f64>>, single_root: bool) -> PyResult<(Vec<usize>, f64)> {
    let t = mst::brute_force_decode(&matrix_of(rows)?, single_root).map_err(value_err)?;
    Ok((t.heads, t.total_score))
}

/// F1 per metric. Strict mode rejects system trees with cycles or several
/// root children.
#[pyfunction]
#[pyo3(signature = (gold, system, strict = true))]
fn evaluate(gold: Vec<PySentence>, system: Vec<PySentence>, strict: bool) -> PyResult<BTreeMap<String, f64>> {
    let mode = if strict {
        EvalMode::StrictTree
    } else {
        EvalMode::Permissive
    };
    let report = agdt_core::evaluate(&unwrap(&gold), &unwrap(&system), mode).map_err(value_err)?;
    Ok(METRICS
        .iter()
        .zip(report.scores())
        .map(|(k, v)| (k.to_string(), v))
        .collect())
}

/// `mean (SD)` with two decimals and the sample standard deviation.
#[pyfunction]
fn mean_sd(scores: Vec<f64>) -> PyResult<String> {
    format_mean_sd(&scores).map_err(value_err)
}

#[pyclass(name = "Posterior", module = "agdt", get_all, frozen)]
struct PyPosterior {
    mean_diff: f64,
    scale: f64,
    dof: u32,
    p_left: f64,
    p_rope: f64,
    p_right: f64,
    degenerate: bool,
}

#[pymethods]
impl PyPosterior {
    fn __repr__(&self) -> String {
        format!(
            "Posterior(left={:.4}, rope={:.4}, right={:.4})",
            self.p_left, self.p_rope, self.p_right
        )
    }
}

/// Correlated Bayesian t-test on the paired differences `x - y`.
#[pyfunction]
#[pyo3(signature = (x, y, rope = (-1.0, 1.0), rho = bayes::DEFAULT_RHO))]
fn correlated_ttest(x: Vec<f64>, y: Vec<f64>, rope: (f64, f64), rho: f64) -> PyResult<PyPosterior> {
    let x = ScoreVector::new("x", x).map_err(value_err)?;
    let y = ScoreVector::new("y", y).map_err(value_err)?;
    let rope = Rope { lo: rope.0, hi: rope.1 };
    let s = bayes::correlated_ttest(&x, &y, rope, rho).map_err(value_err)?;
    Ok(PyPosterior {
        mean_diff: s.mean_diff,
        scale: s.scale,
        dof: s.dof,
        p_left: s.p_left,
        p_rope: s.p_rope,
        p_right: s.p_right,
        degenerate: s.degenerate,
    })
}

#[pyfunction]
fn student_t_cdf(t: f64, dof: u32) -> f64 {
    bayes::student_t_cdf(t, dof)
}

/// Test block and five folds from sentence ids; returns
/// `(test_ids, folds, manifest_text)`.
#[pyfunction]
fn make_splits(ids: Vec<String>, seed: u64) -> PyResult<(Vec<String>, Vec<Vec<String>>, String)> {
    let m = split::make_splits(&ids, seed).map_err(value_err)?;
    let text = m.render();
    Ok((m.test_ids, m.folds, text))
}

#[pyfunction]
fn toy_corpus(seed: u64, count: usize) -> Vec<PySentence> {
    wrap(mini::toy_corpus(seed, count))
}

#[pyclass(name = "MiniModel", module = "agdt")]
struct PyMiniModel {
    inner: MiniModel,
}

#[pymethods]
impl PyMiniModel {
    /// Trains a fresh model and returns it with the per-epoch loss trace.
    /// `config_toml` overrides the defaults; `tiny` starts from the small
    /// gradient-check configuration instead.
    #[staticmethod]
    #[pyo3(signature = (corpus, config_toml = None, tiny = false, epochs = None, seed = None))]
    fn train(
        py: Python<'_>,
        corpus: Vec<PySentence>,
        config_toml: Option<&str>,
        tiny: bool,
        epochs: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<(Self, Vec<f64>)> {
        let mut config = match (config_toml, tiny) {
            (Some(t), _) => MiniConfig::from_toml_str(t).map_err(value_err)?,
            (None, true) => MiniConfig::tiny(0),
            (None, false) => MiniConfig::default(),
        };
        if let Some(e) = epochs {
            config.epochs = e;
        }
        if let Some(s) = seed {
            config.seed = s;
        }
        let corpus = unwrap(&corpus);
        let (inner, trace) = py
            .detach(|| {
                let model = MiniModel::new(config, Vocab::from_corpus(&corpus))?;
                mini::train(model, &corpus)
            })
            .map_err(value_err)?;
        Ok((PyMiniModel { inner }, trace))
    }

    #[staticmethod]
    fn load(bytes: &[u8]) -> PyResult<Self> {
        Ok(PyMiniModel {
            inner: mini::read_model(bytes).map_err(value_err)?,
        })
    }

    fn save(&self) -> Vec<u8> {
        mini::write_model(&self.inner)
    }

    /// The sentence with predicted heads, relations, tags and lemmas.
    fn annotate(&self, sentence: &PySentence) -> PySentence {
        PySentence {
            inner: self.inner.annotate(&sentence.inner),
        }
    }

    fn head_accuracy(&self, corpus: Vec<PySentence>) -> f64 {
        mini::head_accuracy(&self.inner, &unwrap(&corpus))
    }

    fn loss(&self, corpus: Vec<PySentence>) -> f64 {
        self.inner.corpus_loss(&unwrap(&corpus))
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
}

#[pymodule]
fn agdt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyToken>()?;
    m.add_class::<PySentence>()?;
    m.add_class::<PyPosterior>()?;
    m.add_class::<PyMiniModel>()?;
    m.add_function(wrap_pyfunction!(read_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(write_conllu, m)?)?;
    m.add_function(wrap_pyfunction!(read_agdt_xml, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_decode, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(mean_sd, m)?)?;
    m.add_function(wrap_pyfunction!(correlated_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(student_t_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(make_splits, m)?)?;
    m.add_function(wrap_pyfunction!(toy_corpus, m)?)?;
    Ok(())
}
