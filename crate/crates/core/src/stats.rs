//! Token counts per document, with optional catalog aggregates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::treebank::{DocumentMeta, Sentence};

pub const UNKNOWN_GENRE: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentCount {
    /// Sentence provenance, matched against catalog URNs.
    pub document: String,
    pub sentences: u64,
    pub tokens: u64,
    pub elliptical: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub author: String,
    pub genre: String,
    /// Century of the earliest date in the range, signed as in [`crate::treebank::YearMonth::century`].
    pub century: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatalogMismatch {
    NotInCatalog(String),
    TokenCount {
        document: String,
        catalog: u64,
        counted: u64,
    },
}

impl std::fmt::Display for CatalogMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CatalogMismatch::NotInCatalog(d) => write!(f, "document {d:?} is not in the catalog"),
            CatalogMismatch::TokenCount {
                document,
                catalog,
                counted,
            } => {
                write!(
                    f,
                    "document {document:?}: catalog lists {catalog} tokens, counted {counted}"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StatsReport {
    /// In order of first appearance.
    pub documents: Vec<DocumentCount>,
    pub total: u64,
    pub groups: BTreeMap<GroupKey, u64>,
    pub warnings: Vec<CatalogMismatch>,
}

pub fn compute_stats(corpus: &[Sentence], catalog: Option<&[DocumentMeta]>) -> StatsReport {
    let mut documents: Vec<DocumentCount> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for s in corpus {
        let slot = *index.entry(s.provenance.as_str()).or_insert_with(|| {
            documents.push(DocumentCount {
                document: s.provenance.clone(),
                sentences: 0,
                tokens: 0,
                elliptical: 0,
            });
            documents.len() - 1
        });
        let d = &mut documents[slot];
        d.sentences += 1;
        d.tokens += s.len() as u64;
        d.elliptical += s.tokens.iter().filter(|t| t.elliptical).count() as u64;
    }
    let total = documents.iter().map(|d| d.tokens).sum();

    let mut groups = BTreeMap::new();
    let mut warnings = Vec::new();
    if let Some(catalog) = catalog {
        let by_urn: BTreeMap<&str, &DocumentMeta> = catalog.iter().map(|m| (m.cts_urn.as_str(), m)).collect();
        for d in &documents {
            match by_urn.get(d.document.as_str()) {
                None => warnings.push(CatalogMismatch::NotInCatalog(d.document.clone())),
                Some(meta) => {
                    if meta.token_count != d.tokens {
                        warnings.push(CatalogMismatch::TokenCount {
                            document: d.document.clone(),
                            catalog: meta.token_count,
                            counted: d.tokens,
                        });
                    }
                    let key = GroupKey {
                        author: meta.author.clone(),
                        genre: meta.genre.clone().unwrap_or_else(|| UNKNOWN_GENRE.to_string()),
                        century: meta.date_range.0.century(),
                    };
                    *groups.entry(key).or_insert(0) += d.tokens;
                }
            }
        }
    }
    StatsReport {
        documents,
        total,
        groups,
        warnings,
    }
}

impl StatsReport {
    pub fn render(&self) -> String {
        let mut out = String::from("document\tsentences\ttokens\n");
        for d in &self.documents {
            let _ = writeln!(out, "{}\t{}\t{}", d.document, d.sentences, d.tokens);
        }
        let _ = writeln!(
            out,
            "total\t{}\t{}",
            self.documents.iter().map(|d| d.sentences).sum::<u64>(),
            self.total
        );
        if !self.groups.is_empty() {
            out.push_str("\nauthor\tgenre\tcentury\ttokens\n");
            for (k, v) in &self.groups {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", k.author, k.genre, k.century, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::fixtures::sentence;
    use crate::treebank::YearMonth;

    fn doc(urn: &str, author: &str, year: i32, tokens: u64) -> DocumentMeta {
        DocumentMeta {
            cts_urn: urn.into(),
            author: author.into(),
            title: "t".into(),
            date_range: (
                YearMonth { year, month: 1 },
                YearMonth {
                    year: year + 10,
                    month: 12,
                },
            ),
            token_count: tokens,
            genre: Some("history".into()),
        }
    }

    #[test]
    fn three_by_four() {
        let corpus: Vec<_> = (0..3).map(|_| sentence(&[0, 1, 1, 1])).collect();
        let r = compute_stats(&corpus, None);
        assert_eq!(r.total, 12);
        assert_eq!(r.documents.len(), 1);
        assert_eq!(r.documents[0].sentences, 3);
        assert!(r.render().contains("total\t3\t12\n"));
    }

    #[test]
    fn catalog_join_and_mismatch() {
        let mut a = sentence(&[0, 1]);
        a.provenance = "urn:a".into();
        let mut b = sentence(&[0, 1, 2]);
        b.provenance = "urn:b".into();
        let mut c = sentence(&[0]);
        c.provenance = "urn:c".into();
        let cat = vec![doc("urn:a", "Thucydides", -430, 2), doc("urn:b", "Thucydides", -430, 4)];
        let r = compute_stats(&[a, b, c], Some(&cat));
        assert_eq!(r.total, 6);
        let key = GroupKey {
            author: "Thucydides".into(),
            genre: "history".into(),
            century: -5,
        };
        assert_eq!(r.groups[&key], 5);
        assert_eq!(r.warnings.len(), 2);
        assert!(matches!(r.warnings[0], CatalogMismatch::TokenCount { counted: 3, .. }));
        assert_eq!(r.warnings[1], CatalogMismatch::NotInCatalog("urn:c".into()));
    }
}
