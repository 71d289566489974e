use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use agdt_core::bayes::{
    compare_all_pairs, posterior_grid, read_score_vectors, render_grid_csv, render_pair_table, Rope, ScoreVector,
};
use agdt_core::eval::{evaluate, format_mean_sd, EvalMode};
use agdt_core::ingest::{read_agdt_xml, read_catalog, read_conllu, read_score_matrices, write_conllu};
use agdt_core::mini::{self, MiniConfig, MiniModel, Vocab};
use agdt_core::mst;
use agdt_core::normalize::{normalize_corpus, NormalizationConfig, NormalizationReport};
use agdt_core::split::{corpus_splits, materialize_split};
use agdt_core::stats::{compute_stats, StatsReport};
use agdt_core::treebank::{validate_tree, Sentence};
use rayon::prelude::*;

use crate::files::{read, read_text, stem, write_atomic};
use crate::{
    CliError, Command, CompareArgs, DecodeArgs, EvalArgs, EvalFormat, NormalizeArgs, RopeArgs, SplitArgs, TrainMiniArgs,
};

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    let text = match command {
        Command::Normalize(a) => cmd_normalize(&a)?,
        Command::Stats(a) => {
            let report = cmd_stats(&a.inputs, a.catalog.as_deref(), a.jobs)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            report.render()
        }
        Command::Split(a) => cmd_split(&a)?,
        Command::Decode(a) => cmd_decode(&a)?,
        Command::Eval(a) => cmd_eval(&a)?,
        Command::Compare(a) => cmd_compare(&a)?,
        Command::TrainMini(a) => cmd_train_mini(&a)?,
        Command::Report(a) => cmd_report(&read_text(&a.scores)?, rope_of(&a.rope)?, a.rope.rho)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Internal(format!("writing output: {e}")))
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Reads AGDT XML (by `.xml` extension) or CoNLL-U. Sentences without a
/// provenance get the file stem; sanitization warnings go to stderr.
pub fn load_corpus(path: &Path) -> Result<Vec<Sentence>, CliError> {
    let bytes = read(path)?;
    let is_xml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml"));
    let mut sentences = if is_xml {
        let parsed = read_agdt_xml(&bytes, &stem(path)).map_err(|e| data_err(path, e))?;
        for w in &parsed.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        parsed.sentences
    } else {
        read_conllu(&bytes).map_err(|e| data_err(path, e))?
    };
    for s in &mut sentences {
        if s.provenance.is_empty() {
            s.provenance = stem(path);
        }
    }
    Ok(sentences)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn load_all(paths: &[PathBuf], jobs: usize) -> Result<Vec<Vec<Sentence>>, CliError> {
    pool(jobs)?.install(|| paths.par_iter().map(|p| load_corpus(p)).collect())
}

fn cmd_normalize(a: &NormalizeArgs) -> Result<String, CliError> {
    let config = match &a.config {
        Some(p) => NormalizationConfig::from_toml_str(&read_text(p)?).map_err(|e| data_err(p, e))?,
        None => NormalizationConfig::default(),
    };
    let mut stems = BTreeSet::new();
    for p in &a.inputs {
        if !stems.insert(stem(p)) {
            return Err(CliError::Usage(format!(
                "two inputs share the output name {}.conllu",
                stem(p)
            )));
        }
    }
    let reports: Vec<NormalizationReport> = pool(a.jobs)?.install(|| {
        a.inputs
            .par_iter()
            .map(|p| -> Result<NormalizationReport, CliError> {
                let corpus = load_corpus(p)?;
                let (normalized, report) = normalize_corpus(&corpus, &config).map_err(|e| data_err(p, e))?;
                if let Some(bad) = normalized.iter().find(|s| !s.is_well_formed()) {
                    return Err(CliError::Internal(format!(
                        "{}: sentence {} is malformed after normalization",
                        p.display(),
                        bad.sentence_id
                    )));
                }
                if config.single_root_enforce {
                    for s in &normalized {
                        let v = validate_tree(s, true);
                        if !v.is_ok() {
                            eprintln!("warning: {}: sentence {}: {v}", p.display(), s.sentence_id);
                        }
                    }
                }
                write_atomic(
                    &a.out_dir.join(format!("{}.conllu", stem(p))),
                    &write_conllu(&normalized),
                )?;
                Ok(report)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let total: NormalizationReport = reports.into_iter().sum();
    let text = total.render();
    if let Some(p) = &a.report {
        write_atomic(p, text.as_bytes())?;
    }
    Ok(text)
}

/// Token statistics over `inputs`, joined with the catalog when given.
pub fn cmd_stats(inputs: &[PathBuf], catalog: Option<&Path>, jobs: usize) -> Result<StatsReport, CliError> {
    let corpus: Vec<Sentence> = load_all(inputs, jobs)?.into_iter().flatten().collect();
    let catalog = match catalog {
        Some(p) => Some(read_catalog(&read(p)?).map_err(|e| data_err(p, e))?),
        None => None,
    };
    Ok(compute_stats(&corpus, catalog.as_deref()))
}

fn cmd_split(a: &SplitArgs) -> Result<String, CliError> {
    let corpus: Vec<Sentence> = load_all(&a.inputs, 1)?.into_iter().flatten().collect();
    let manifest = corpus_splits(&corpus, a.seed).map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(&a.out_dir.join("manifest.txt"), manifest.render().as_bytes())?;
    if !a.manifest_only {
        for run in &manifest.runs {
            let files = materialize_split(&corpus, &manifest, run.index).map_err(|e| CliError::Data(e.to_string()))?;
            let dir = a.out_dir.join(format!("run-{:02}", run.index));
            write_atomic(&dir.join("train.conllu"), &files.train)?;
            write_atomic(&dir.join("validation.conllu"), &files.validation)?;
            write_atomic(&dir.join("test.conllu"), &files.test)?;
        }
    }
    let folds: Vec<String> = manifest.folds.iter().map(|f| f.len().to_string()).collect();
    Ok(format!(
        "sentences={}\ntest={}\nfolds={}\nruns={}\n",
        corpus.len(),
        manifest.test_ids.len(),
        folds.join(","),
        manifest.runs.len()
    ))
}

fn cmd_decode(a: &DecodeArgs) -> Result<String, CliError> {
    let matrices = read_score_matrices(&read(&a.scores)?).map_err(|e| data_err(&a.scores, e))?;
    let single_root = !a.multi_root;
    let trees = matrices
        .iter()
        .enumerate()
        .map(|(k, m)| mst::decode(m, single_root).map_err(|e| data_err(&a.scores, format!("matrix {}: {e}", k + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    let bytes = match &a.conllu {
        Some(path) => {
            let mut sentences = read_conllu(&read(path)?).map_err(|e| data_err(path, e))?;
            if sentences.len() != trees.len() {
                return Err(CliError::Data(format!(
                    "{} holds {} sentences but {} has {} matrices",
                    path.display(),
                    sentences.len(),
                    a.scores.display(),
                    trees.len()
                )));
            }
            for (s, t) in sentences.iter_mut().zip(&trees) {
                if s.len() != t.heads.len() {
                    return Err(CliError::Data(format!(
                        "sentence {}: {} tokens but a {}-row matrix",
                        s.sentence_id,
                        s.len(),
                        t.heads.len()
                    )));
                }
                for (tok, h) in s.tokens.iter_mut().zip(&t.heads) {
                    tok.head = *h;
                }
            }
            write_conllu(&sentences)
        }
        None => {
            let mut text = String::new();
            for t in &trees {
                let heads: Vec<String> = t.heads.iter().map(|h| h.to_string()).collect();
                let _ = writeln!(text, "{}\t{:?}", heads.join(" "), t.total_score);
            }
            text.into_bytes()
        }
    };
    match &a.output {
        Some(p) => {
            write_atomic(p, &bytes)?;
            Ok(String::new())
        }
        None => String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string())),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let gold = read_conllu(&read(&a.gold)?).map_err(|e| data_err(&a.gold, e))?;
    let system = read_conllu(&read(&a.system)?).map_err(|e| data_err(&a.system, e))?;
    let mode = if a.permissive {
        EvalMode::Permissive
    } else {
        EvalMode::StrictTree
    };
    let report = evaluate(&gold, &system, mode).map_err(|e| data_err(&a.system, e))?;
    Ok(match a.format {
        EvalFormat::Table => report.render_table(),
        EvalFormat::Kv => report.render_kv(),
    })
}

fn rope_of(r: &RopeArgs) -> Result<Rope, CliError> {
    if r.rope_lo.is_nan() || r.rope_hi.is_nan() || r.rope_lo >= r.rope_hi {
        return Err(CliError::Usage(format!("empty rope [{}, {}]", r.rope_lo, r.rope_hi)));
    }
    if !(0.0..1.0).contains(&r.rho) {
        return Err(CliError::Usage(format!("--rho must lie in [0, 1), got {}", r.rho)));
    }
    Ok(Rope {
        lo: r.rope_lo,
        hi: r.rope_hi,
    })
}

fn cmd_compare(a: &CompareArgs) -> Result<String, CliError> {
    let rope = rope_of(&a.rope)?;
    let vectors = read_score_vectors(&read_text(&a.scores)?).map_err(|e| data_err(&a.scores, e))?;
    let pairs = compare_all_pairs(&vectors, rope, a.rope.rho).map_err(|e| data_err(&a.scores, e))?;
    if let Some(dir) = &a.grid_dir {
        for p in &pairs {
            match posterior_grid(&p.summary, a.grid_points, a.grid_span) {
                Ok(grid) => write_atomic(
                    &dir.join(format!("{}.csv", p.label())),
                    render_grid_csv(&grid).as_bytes(),
                )?,
                Err(e) => eprintln!("note: {}: {e}", p.label()),
            }
        }
    }
    Ok(render_pair_table(&pairs))
}

/// Mean (SD) per model and metric, then the pairwise table of each metric.
/// Vector names of the form `model:metric` spread over metric columns;
/// plain names form a single `F1` column.
pub fn cmd_report(scores: &str, rope: Rope, rho: f64) -> Result<String, CliError> {
    let vectors = read_score_vectors(scores).map_err(|e| CliError::Data(e.to_string()))?;
    if vectors.is_empty() {
        return Err(CliError::Data("no score vectors".into()));
    }
    let mut models: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    let mut cells: Vec<(String, String, ScoreVector)> = Vec::new();
    for v in vectors {
        let (model, metric) = match v.model_name.split_once(':') {
            Some((m, k)) => (m.to_string(), k.to_string()),
            None => (v.model_name.clone(), "F1".to_string()),
        };
        if cells.iter().any(|(m, k, _)| *m == model && *k == metric) {
            return Err(CliError::Data(format!("duplicate scores for {model}:{metric}")));
        }
        if !models.contains(&model) {
            models.push(model.clone());
        }
        if !metrics.contains(&metric) {
            metrics.push(metric.clone());
        }
        cells.push((model, metric, v));
    }
    let cell = |m: &str, k: &str| cells.iter().find(|(a, b, _)| a == m && b == k).map(|c| &c.2);

    let mut out = format!("model\t{}\n", metrics.join("\t"));
    for m in &models {
        out.push_str(m);
        for k in &metrics {
            let text = match cell(m, k) {
                Some(v) => format_mean_sd(&v.scores).map_err(|e| CliError::Data(e.to_string()))?,
                None => "-".to_string(),
            };
            out.push('\t');
            out.push_str(&text);
        }
        out.push('\n');
    }
    for k in &metrics {
        let per_metric: Vec<ScoreVector> = models
            .iter()
            .filter_map(|m| {
                cell(m, k).map(|v| ScoreVector {
                    model_name: m.clone(),
                    scores: v.scores.clone(),
                })
            })
            .collect();
        if per_metric.len() < 2 {
            continue;
        }
        let pairs = compare_all_pairs(&per_metric, rope, rho).map_err(|e| CliError::Data(e.to_string()))?;
        let _ = write!(out, "\n# {k}\n{}", render_pair_table(&pairs));
    }
    Ok(out)
}

fn cmd_train_mini(a: &TrainMiniArgs) -> Result<String, CliError> {
    let mut config = match &a.config {
        Some(p) => MiniConfig::from_toml_str(&read_text(p)?).map_err(|e| data_err(p, e))?,
        None => MiniConfig::default(),
    };
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.batch_size {
        config.batch_size = v;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = match (&a.train, a.toy) {
        (Some(p), _) => read_conllu(&read(p)?).map_err(|e| data_err(p, e))?,
        (None, Some(n)) => mini::toy_corpus(config.seed, n),
        (None, None) => unreachable!("clap requires one of --train and --toy"),
    };
    if corpus.is_empty() {
        return Err(CliError::Data("training corpus is empty".into()));
    }
    let model = MiniModel::new(config, Vocab::from_corpus(&corpus)).map_err(|e| CliError::Data(e.to_string()))?;
    let (model, trace) = mini::train(model, &corpus).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(p) = &a.model_out {
        write_atomic(p, &mini::write_model(&model))?;
    }
    if let Some(p) = &a.loss_csv {
        write_atomic(p, mini::render_loss_csv(&trace).as_bytes())?;
    }
    if let (Some(input), Some(output)) = (&a.predict, &a.predictions) {
        let sentences = read_conllu(&read(input)?).map_err(|e| data_err(input, e))?;
        let annotated: Vec<Sentence> = sentences.iter().map(|s| model.annotate(s)).collect();
        write_atomic(output, &write_conllu(&annotated))?;
    }
    Ok(format!(
        "epochs={}\nfinal_loss={:?}\ntrain_head_accuracy={}\n",
        trace.len() - 1,
        trace[trace.len() - 1],
        mini::head_accuracy(&model, &corpus)
    ))
}
