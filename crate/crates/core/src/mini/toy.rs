//! Seeded synthetic treebank of short Greek clauses.

use crate::rng::SplitMix64;
use crate::treebank::{Sentence, Token};

const NOUNS: [(&str, &str, &str); 5] = [
    ("ἀνήρ", "ἄνδρα", "ἀνήρ"),
    ("ἵππος", "ἵππον", "ἵππος"),
    ("στρατηγός", "στρατηγόν", "στρατηγός"),
    ("δοῦλος", "δοῦλον", "δοῦλος"),
    ("λόγος", "λόγον", "λόγος"),
];
const ADJECTIVES: [(&str, &str, &str); 2] = [("ἀγαθός", "ἀγαθόν", "ἀγαθός"), ("καλός", "καλόν", "καλός")];
const ARTICLE: (&str, &str, &str) = ("ὁ", "τόν", "ὁ");
const VERBS: [(&str, &str); 5] = [
    ("λέγει", "λέγω"),
    ("ἄγει", "ἄγω"),
    ("ἔχει", "ἔχω"),
    ("φέρει", "φέρω"),
    ("ὁρᾷ", "ὁράω"),
];

struct Word {
    form: &'static str,
    lemma: &'static str,
    postag: &'static str,
    relation: &'static str,
    /// Index of the head word within the clause, `None` for the verb.
    head: Option<usize>,
}

/// Noun phrase words in surface order; the noun is last.
fn noun_phrase(
    rng: &mut SplitMix64,
    nominative: bool,
) -> Vec<(&'static str, &'static str, &'static str, &'static str)> {
    let pick = |pair: (&'static str, &'static str, &'static str)| if nominative { pair.0 } else { pair.1 };
    let case = |p: char| -> &'static str {
        match (p, nominative) {
            ('l', true) => "l-s---mn-",
            ('l', false) => "l-s---ma-",
            ('a', true) => "a-s---mn-",
            ('a', false) => "a-s---ma-",
            (_, true) => "n-s---mn-",
            (_, false) => "n-s---ma-",
        }
    };
    let mut words = Vec::new();
    if rng.below(2) == 0 {
        words.push((pick(ARTICLE), ARTICLE.2, case('l'), "ATR"));
    }
    if rng.below(3) == 0 {
        let adj = ADJECTIVES[rng.below(ADJECTIVES.len() as u64) as usize];
        words.push((pick(adj), adj.2, case('a'), "ATR"));
    }
    let noun = NOUNS[rng.below(NOUNS.len() as u64) as usize];
    words.push((pick(noun), noun.2, case('n'), if nominative { "SBJ" } else { "OBJ" }));
    words
}

/// `count` clauses of a subject, a verb and an optional object in free word
/// order, with articles and adjectives attached to their noun.
pub fn toy_corpus(seed: u64, count: usize) -> Vec<Sentence> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|k| {
            let verb = VERBS[rng.below(VERBS.len() as u64) as usize];
            let mut chunks = vec![noun_phrase(&mut rng, true), vec![(verb.0, verb.1, "v3spia---", "PRED")]];
            if rng.below(4) != 0 {
                chunks.push(noun_phrase(&mut rng, false));
            }
            rng.shuffle(&mut chunks);

            let mut words: Vec<Word> = Vec::new();
            let mut nouns = Vec::new();
            let mut verb_at = 0;
            for chunk in chunks {
                let start = words.len();
                let last = start + chunk.len() - 1;
                for (j, (form, lemma, postag, relation)) in chunk.into_iter().enumerate() {
                    let head = if relation == "PRED" {
                        verb_at = start + j;
                        None
                    } else if start + j == last {
                        nouns.push(last);
                        None
                    } else {
                        Some(last)
                    };
                    words.push(Word {
                        form,
                        lemma,
                        postag,
                        relation,
                        head,
                    });
                }
            }
            for n in nouns {
                words[n].head = Some(verb_at);
            }
            let tokens = words
                .into_iter()
                .enumerate()
                .map(|(i, w)| Token {
                    id: i + 1,
                    form: w.form.to_string(),
                    lemma: w.lemma.to_string(),
                    postag: w.postag.to_string(),
                    head: w.head.map_or(0, |h| h + 1),
                    relation: w.relation.to_string(),
                    elliptical: false,
                })
                .collect();
            Sentence::new(format!("toy-{}", k + 1), "toy", tokens)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::validate_tree;

    #[test]
    fn clauses_are_single_rooted_trees() {
        let corpus = toy_corpus(11, 30);
        assert_eq!(corpus.len(), 30);
        for s in &corpus {
            assert!(validate_tree(s, true).is_ok(), "{s:?}");
            assert!((2..=7).contains(&s.len()));
        }
        assert_eq!(corpus, toy_corpus(11, 30));
        assert_ne!(corpus, toy_corpus(12, 30));
    }
}
