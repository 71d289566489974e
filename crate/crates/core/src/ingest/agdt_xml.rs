use std::collections::HashMap;

use super::{IngestError, Warning};
use crate::treebank::{is_placeholder_form, sanitize_postag, Sentence, Token};

/// Relation used when a word carries none.
pub const UNDEFINED_RELATION: &str = "UNDEFINED";

#[derive(Debug, Clone, PartialEq)]
pub struct XmlRead {
    pub sentences: Vec<Sentence>,
    pub warnings: Vec<Warning>,
}

/// Reads `sentence`/`word` elements. `default_provenance` is used for
/// sentences without a `document_id` attribute.
///
/// Word ids need not be contiguous; tokens are renumbered 1..=n in document
/// order and heads are remapped accordingly.
pub fn read_agdt_xml(bytes: &[u8], default_provenance: &str) -> Result<XmlRead, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::XmlSyntax {
        line: bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1,
        message: "input is not valid UTF-8".to_string(),
    })?;
    let doc = roxmltree::Document::parse(text).map_err(|e| IngestError::XmlSyntax {
        line: e.pos().row as usize,
        message: e.to_string(),
    })?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row as usize;

    let mut sentences = Vec::new();
    let mut warnings = Vec::new();
    for (index, snode) in doc.descendants().filter(|n| n.has_tag_name("sentence")).enumerate() {
        let sentence_id = snode
            .attribute("id")
            .map(str::to_string)
            .unwrap_or_else(|| (index + 1).to_string());
        let provenance = snode.attribute("document_id").unwrap_or(default_provenance).to_string();

        let words: Vec<_> = snode.children().filter(|n| n.has_tag_name("word")).collect();
        if words.is_empty() {
            return Err(IngestError::EmptySentence {
                line: line_of(snode),
                sentence: sentence_id,
            });
        }

        // original numeric id -> new 1-based position
        let mut positions: HashMap<u64, usize> = HashMap::new();
        let mut raw_heads = Vec::with_capacity(words.len());
        let mut tokens = Vec::with_capacity(words.len());
        let mut placeholders = 0usize;
        for (i, w) in words.iter().enumerate() {
            let line = line_of(*w);
            let mut warn = |message: String| warnings.push(Warning { line, message });
            let raw_id = w.attribute("id").unwrap_or("").trim();
            match raw_id.parse::<u64>() {
                Ok(id) => {
                    if positions.insert(id, i + 1).is_some() {
                        return Err(IngestError::DuplicateTokenId {
                            line,
                            id: raw_id.to_string(),
                        });
                    }
                }
                Err(_) => warn(format!("non-numeric word id {raw_id:?}")),
            }

            let form_attr = w.attribute("form").unwrap_or("").trim();
            let elliptical = w.attribute("artificial").is_some() || is_placeholder_form(form_attr);
            let form = if !form_attr.is_empty() {
                form_attr.to_string()
            } else if elliptical {
                let f = format!("[{placeholders}]");
                placeholders += 1;
                f
            } else {
                warn("empty form".to_string());
                "_".to_string()
            };

            let lemma = match w.attribute("lemma").map(str::trim) {
                Some(l) if !l.is_empty() => l.to_string(),
                _ => {
                    if !elliptical {
                        warn("empty lemma replaced by form".to_string());
                    }
                    form.clone()
                }
            };

            let (postag, tag_warning) = sanitize_postag(w.attribute("postag").unwrap_or("").trim());
            if let Some(msg) = tag_warning {
                if !(elliptical && msg == "missing postag") {
                    warn(msg);
                }
            }

            let relation = match w.attribute("relation").map(str::trim) {
                Some(r) if !r.is_empty() => r.to_string(),
                _ => {
                    warn("empty relation".to_string());
                    UNDEFINED_RELATION.to_string()
                }
            };

            let raw_head = w.attribute("head").unwrap_or("").trim();
            let head = match raw_head.parse::<u64>() {
                Ok(h) => Some(h),
                Err(_) => {
                    warn(format!("non-numeric head {raw_head:?}"));
                    None
                }
            };
            raw_heads.push((line, head));
            tokens.push(Token {
                id: i + 1,
                form,
                lemma,
                postag,
                head: 0,
                relation,
                elliptical,
            });
        }

        for (token, (line, raw)) in tokens.iter_mut().zip(raw_heads) {
            let Some(h) = raw else { continue };
            if h == 0 {
                continue;
            }
            match positions.get(&h) {
                Some(&p) if p == token.id => warnings.push(Warning {
                    line,
                    message: "word is its own head".to_string(),
                }),
                Some(&p) => token.head = p,
                None => warnings.push(Warning {
                    line,
                    message: format!("head {h} does not name a word in the sentence"),
                }),
            }
        }
        sentences.push(Sentence::new(sentence_id, provenance, tokens));
    }
    Ok(XmlRead { sentences, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(xml: &str) -> XmlRead {
        read_agdt_xml(xml.as_bytes(), "doc").unwrap()
    }

    #[test]
    fn one_word_sentence() {
        let r = read(
            r#"<treebank><sentence id="1"><word id="1" form="ἦλθε" lemma="ἔρχομαι" postag="v3saia---" head="0" relation="PRED"/></sentence></treebank>"#,
        );
        assert_eq!(r.sentences.len(), 1);
        let s = &r.sentences[0];
        assert_eq!(s.tokens.len(), 1);
        assert_eq!(s.tokens[0].head, 0);
        assert_eq!(s.tokens[0].relation, "PRED");
        assert_eq!(s.provenance, "doc");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn non_numeric_head_becomes_root() {
        let r = read(
            r#"<treebank><sentence><word id="1" form="a" lemma="a" postag="v3saia---" head="x" relation="PRED"/></sentence></treebank>"#,
        );
        assert_eq!(r.sentences[0].tokens[0].head, 0);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].message.contains("non-numeric head"));
    }

    #[test]
    fn artificial_word_is_elliptical() {
        let r = read(
            r#"<treebank><sentence id="7" document_id="urn:x">
<word id="1" form="καί" lemma="καί" postag="c--------" head="2" relation="COORD"/>
<word id="2" insertion_id="0002e" artificial="elliptic" relation="PRED" head="0"/>
</sentence></treebank>"#,
        );
        let s = &r.sentences[0];
        assert_eq!(s.provenance, "urn:x");
        assert_eq!(s.sentence_id, "7");
        assert!(s.tokens[1].elliptical);
        assert_eq!(s.tokens[1].form, "[0]");
        assert_eq!(s.tokens[1].postag, "---------");
        assert!(r.warnings.iter().all(|w| !w.message.contains("lemma")));
    }

    #[test]
    fn sparse_ids_are_renumbered() {
        let r = read(
            r#"<treebank><sentence>
<word id="3" form="a" lemma="a" postag="n-s---mn-" head="7" relation="SBJ"/>
<word id="7" form="b" lemma="b" postag="v3spia---" head="0" relation="PRED"/>
</sentence></treebank>"#,
        );
        assert_eq!(r.sentences[0].heads(), vec![2, 0]);
    }

    #[test]
    fn sanitizes_missing_fields() {
        let r = read(r#"<treebank><sentence><word id="1" form="a" head="0"/></sentence></treebank>"#);
        let t = &r.sentences[0].tokens[0];
        assert_eq!(t.lemma, "a");
        assert_eq!(t.relation, UNDEFINED_RELATION);
        assert_eq!(t.postag, "---------");
        assert_eq!(r.warnings.len(), 3);
    }

    #[test]
    fn structural_errors() {
        let dup = r#"<treebank><sentence>
<word id="1" form="a" head="0" relation="PRED"/>
<word id="1" form="b" head="1" relation="OBJ"/></sentence></treebank>"#;
        assert!(matches!(
            read_agdt_xml(dup.as_bytes(), "d"),
            Err(IngestError::DuplicateTokenId { line: 3, .. })
        ));
        assert!(matches!(
            read_agdt_xml(b"<treebank><sentence id=\"1\"></sentence></treebank>", "d"),
            Err(IngestError::EmptySentence { .. })
        ));
        assert!(matches!(
            read_agdt_xml(b"<treebank>\n<sentence id=></sentence>", "d"),
            Err(IngestError::XmlSyntax { line: 2, .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn never_panics(bytes in proptest::collection::vec(proptest::num::u8::ANY, 0..200)) {
            let _ = read_agdt_xml(&bytes, "d");
        }

        #[test]
        fn never_panics_on_mangled_xml(cut in 0usize..200, junk in "[<>/=\" a-z0-9]{0,10}") {
            let xml = r#"<treebank><sentence id="1"><word id="1" form="a" lemma="a" postag="v3saia---" head="0" relation="PRED"/><word id="2" form="b" head="1"/></sentence></treebank>"#;
            let cut = cut.min(xml.len());
            let mangled = format!("{}{}{}", &xml[..cut], junk, &xml[cut..]);
            let _ = read_agdt_xml(mangled.as_bytes(), "d");
        }
    }
}
