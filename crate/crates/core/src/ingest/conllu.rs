use std::fmt::Write as _;

use super::{utf8, IngestError};
use crate::treebank::{
    feats_to_postag, is_placeholder_form, parse_feats, postag_to_feats, render_feats, sanitize_postag, Sentence, Token,
    UNSET,
};

const SENT_ID: &str = "# sent_id = ";
const DOC_ID: &str = "# doc_id = ";
const ELLIPSIS: &str = "Ellipsis=Yes";

/// Serializes sentences as CoNLL-U.
///
/// UPOS is the first tag character, XPOS the full tag, FEATS the sorted
/// feature pairs, and MISC marks elliptical tokens with `Ellipsis=Yes`.
pub fn write_conllu(sentences: &[Sentence]) -> Vec<u8> {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "{SENT_ID}{}", s.sentence_id);
        if !s.provenance.is_empty() {
            let _ = writeln!(out, "{DOC_ID}{}", s.provenance);
        }
        for t in &s.tokens {
            let feats = postag_to_feats(&t.postag)
                .map(|f| render_feats(&f))
                .unwrap_or_else(|_| "_".to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t_\t{}",
                t.id,
                t.form,
                t.lemma,
                t.pos(),
                t.postag,
                feats,
                t.head,
                t.relation,
                if t.elliptical { ELLIPSIS } else { "_" },
            );
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses CoNLL-U. Multiword ranges and empty nodes are rejected, as is a
/// file whose last sentence is not closed by a blank line.
pub fn read_conllu(bytes: &[u8]) -> Result<Vec<Sentence>, IngestError> {
    let text = utf8(bytes)?;
    let mut sentences = Vec::new();
    let mut current: Option<Pending> = None;
    let mut last_line = 0;

    let mut lines: Vec<&str> = text.split('\n').collect();
    if text.ends_with('\n') || text.is_empty() {
        lines.pop();
    }
    for (idx, raw) in lines.into_iter().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        last_line = line;
        if raw.is_empty() {
            match current.take() {
                Some(p) if !p.tokens.is_empty() => {
                    sentences.push(p.finish(sentences.len() + 1)?);
                }
                Some(_) => {
                    return Err(IngestError::BlankLineProtocol {
                        line,
                        message: "comment block without tokens".to_string(),
                    })
                }
                None => {}
            }
            continue;
        }
        let pending = current.get_or_insert_with(Pending::default);
        if let Some(comment) = raw.strip_prefix('#') {
            if !pending.tokens.is_empty() {
                return Err(IngestError::BlankLineProtocol {
                    line,
                    message: "comment inside a sentence".to_string(),
                });
            }
            let full = format!("#{comment}");
            if let Some(id) = full.strip_prefix(SENT_ID) {
                pending.sentence_id = Some(id.to_string());
            } else if let Some(doc) = full.strip_prefix(DOC_ID) {
                pending.provenance = doc.to_string();
            }
            continue;
        }
        let token = parse_token(raw, line, pending.tokens.len() + 1)?;
        pending.tokens.push((line, token));
    }

    if let Some(p) = current {
        return Err(IngestError::BlankLineProtocol {
            line: last_line,
            message: if p.tokens.is_empty() {
                "comment block without tokens".to_string()
            } else {
                "file does not end with an empty line".to_string()
            },
        });
    }
    Ok(sentences)
}

#[derive(Default)]
struct Pending {
    sentence_id: Option<String>,
    provenance: String,
    tokens: Vec<(usize, Token)>,
}

impl Pending {
    fn finish(self, index: usize) -> Result<Sentence, IngestError> {
        let n = self.tokens.len();
        let mut tokens = Vec::with_capacity(n);
        for (line, t) in self.tokens {
            if t.head > n {
                return Err(IngestError::BadField {
                    line,
                    message: format!("head {} outside sentence of {} tokens", t.head, n),
                });
            }
            tokens.push(t);
        }
        Ok(Sentence {
            sentence_id: self.sentence_id.unwrap_or_else(|| index.to_string()),
            provenance: self.provenance,
            tokens,
        })
    }
}

fn parse_token(raw: &str, line: usize, expected: usize) -> Result<Token, IngestError> {
    let cols: Vec<&str> = raw.split('\t').collect();
    if cols.len() != 10 {
        return Err(IngestError::ColumnCount {
            line,
            found: cols.len(),
        });
    }
    let id_col = cols[0];
    if id_col.contains('-') || id_col.contains('.') {
        return Err(IngestError::Unsupported {
            line,
            message: format!("multiword or empty-node id {id_col:?}"),
        });
    }
    if id_col.parse::<usize>().ok() != Some(expected) {
        return Err(IngestError::NonContiguousIds {
            line,
            expected,
            found: id_col.to_string(),
        });
    }
    let bad = |message: String| IngestError::BadField { line, message };

    let form = cols[1];
    if form.is_empty() {
        return Err(bad("empty FORM".to_string()));
    }
    let postag = if cols[4] != "_" {
        let (tag, warning) = sanitize_postag(cols[4]);
        if let Some(w) = warning {
            log::warn!("line {line}: {w}");
        }
        tag
    } else {
        let pos = match cols[3] {
            "_" => UNSET,
            upos => {
                let mut cs = upos.chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => c,
                    _ => return Err(bad(format!("UPOS {upos:?} is not a single tag character"))),
                }
            }
        };
        let feats = parse_feats(cols[5]).map_err(|e| bad(e.to_string()))?;
        feats_to_postag(pos, &feats).map_err(|e| bad(e.to_string()))?
    };
    let head = cols[6]
        .parse::<usize>()
        .map_err(|_| bad(format!("HEAD {:?} is not a number", cols[6])))?;
    let relation = cols[7];
    if relation.is_empty() || relation == "_" {
        return Err(bad("missing DEPREL".to_string()));
    }
    let elliptical = cols[9].split('|').any(|m| m == ELLIPSIS) || is_placeholder_form(form);

    Ok(Token {
        id: expected,
        form: form.to_string(),
        lemma: cols[2].to_string(),
        postag,
        head,
        relation: relation.to_string(),
        elliptical,
    })
}
