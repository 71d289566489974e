//! Annotated sentences, positional morphology tags and tree validity.

use std::fmt;

use thiserror::Error;

/// Number of characters in a positional morphology tag.
pub const TAG_LEN: usize = 9;

/// Feature names for tag positions 2..=9, in positional order.
pub const FEATURE_KEYS: [&str; 8] = ["person", "number", "tense", "mood", "voice", "gender", "case", "degree"];

/// Placeholder for an unset tag position.
pub const UNSET: char = '-';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagError {
    #[error("malformed tag {tag:?}: expected {TAG_LEN} characters, found {len}")]
    MalformedTag { tag: String, len: usize },
    #[error("unknown feature key {0:?}")]
    UnknownFeature(String),
    #[error("feature {0:?} must have a single-character value, found {1:?}")]
    BadFeatureValue(String, String),
    #[error("malformed feature pair {0:?}")]
    MalformedPair(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    /// Nine-character positional tag; position 1 is the part of speech.
    pub postag: String,
    /// 0 is the artificial root.
    pub head: usize,
    pub relation: String,
    pub elliptical: bool,
}

impl Token {
    pub fn pos(&self) -> char {
        self.postag.chars().next().unwrap_or(UNSET)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    /// Identifier of the document the sentence was read from.
    pub provenance: String,
}

impl Sentence {
    pub fn new(sentence_id: impl Into<String>, provenance: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            sentence_id: sentence_id.into(),
            provenance: provenance.into(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    /// Ids of tokens attached to the artificial root.
    pub fn root_children(&self) -> Vec<usize> {
        self.tokens.iter().filter(|t| t.head == 0).map(|t| t.id).collect()
    }

    /// True when ids are exactly 1..=n and every head lies in 0..=n.
    pub fn is_well_formed(&self) -> bool {
        let n = self.tokens.len();
        self.tokens
            .iter()
            .enumerate()
            .all(|(i, t)| t.id == i + 1 && t.head <= n)
    }
}

/// Date as (year, month); negative years are BCE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    /// Signed century: 8 for the 8th century CE, -5 for the 5th century BCE.
    pub fn century(&self) -> i32 {
        if self.year > 0 {
            (self.year - 1) / 100 + 1
        } else {
            -((self.year.abs().max(1) - 1) / 100 + 1)
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.year < 0 { '\u{2212}' } else { '+' };
        write!(f, "{}{:04}-{:02}", sign, self.year.abs(), self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentMeta {
    pub cts_urn: String,
    pub author: String,
    pub title: String,
    pub date_range: (YearMonth, YearMonth),
    pub token_count: u64,
    /// Optional sixth catalog column.
    pub genre: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeVerdict {
    Ok,
    /// Token ids on the first cycle found, ascending.
    Cycle(Vec<usize>),
    MultipleRoots(Vec<usize>),
    /// Token whose head is out of range or points to itself.
    DanglingHead(usize),
    /// No token attaches to the root.
    NoRoot,
}

impl TreeVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, TreeVerdict::Ok)
    }
}

impl fmt::Display for TreeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn ids(v: &[usize]) -> String {
            v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            TreeVerdict::Ok => write!(f, "ok"),
            TreeVerdict::Cycle(v) => write!(f, "cycle({})", ids(v)),
            TreeVerdict::MultipleRoots(v) => write!(f, "multiple_roots({})", ids(v)),
            TreeVerdict::DanglingHead(i) => write!(f, "dangling_head({i})"),
            TreeVerdict::NoRoot => write!(f, "no_root"),
        }
    }
}

/// Finds the first cycle in a head vector (`heads[i]` is the head of token
/// `i + 1`), scanning start tokens in ascending order. Heads must be in range.
pub fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; n + 1];
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while v != 0 && state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if v != 0 && state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).expect("node on path");
            let mut cycle = path[pos..].to_vec();
            cycle.sort_unstable();
            for &p in &path {
                state[p] = 2;
            }
            return Some(cycle);
        }
        for &p in &path {
            state[p] = 2;
        }
    }
    None
}

/// Validates a bare head vector.
pub fn validate_heads(heads: &[usize], single_root: bool) -> TreeVerdict {
    let n = heads.len();
    for (i, &h) in heads.iter().enumerate() {
        if h > n || h == i + 1 {
            return TreeVerdict::DanglingHead(i + 1);
        }
    }
    if let Some(cycle) = find_cycle(heads) {
        return TreeVerdict::Cycle(cycle);
    }
    let roots: Vec<usize> = (1..=n).filter(|&i| heads[i - 1] == 0).collect();
    if roots.is_empty() && n > 0 {
        return TreeVerdict::NoRoot;
    }
    if single_root && roots.len() > 1 {
        return TreeVerdict::MultipleRoots(roots);
    }
    TreeVerdict::Ok
}

/// Checks that the head graph is an arborescence rooted at node 0, and,
/// with `single_root`, that exactly one token attaches to the root.
pub fn validate_tree(sentence: &Sentence, single_root: bool) -> TreeVerdict {
    validate_heads(&sentence.heads(), single_root)
}

/// Pads short tags with `-` and discards over-long ones. Returns the tag and
/// a warning when the input had to be changed.
pub fn sanitize_postag(raw: &str) -> (String, Option<String>) {
    let len = raw.chars().count();
    if len == TAG_LEN {
        (raw.to_string(), None)
    } else if len < TAG_LEN {
        let mut tag = raw.to_string();
        tag.extend(std::iter::repeat_n(UNSET, TAG_LEN - len));
        let msg = if len == 0 {
            "missing postag".to_string()
        } else {
            format!("short postag {raw:?} padded")
        };
        (tag, Some(msg))
    } else {
        (
            UNSET.to_string().repeat(TAG_LEN),
            Some(format!("over-long postag {raw:?} discarded")),
        )
    }
}

/// Maps tag positions 2..=9 to `key=value` pairs sorted by key, omitting
/// unset positions.
pub fn postag_to_feats(postag: &str) -> Result<Vec<(String, String)>, TagError> {
    let chars: Vec<char> = postag.chars().collect();
    if chars.len() != TAG_LEN {
        return Err(TagError::MalformedTag {
            tag: postag.to_string(),
            len: chars.len(),
        });
    }
    let mut feats: Vec<(String, String)> = FEATURE_KEYS
        .iter()
        .zip(&chars[1..])
        .filter(|(_, &c)| c != UNSET)
        .map(|(k, c)| (k.to_string(), c.to_string()))
        .collect();
    feats.sort();
    Ok(feats)
}

/// Inverse of [`postag_to_feats`], given the part-of-speech character.
pub fn feats_to_postag(pos: char, feats: &[(String, String)]) -> Result<String, TagError> {
    let mut chars = [UNSET; TAG_LEN];
    chars[0] = pos;
    for (k, v) in feats {
        let slot = FEATURE_KEYS
            .iter()
            .position(|key| key == k)
            .ok_or_else(|| TagError::UnknownFeature(k.clone()))?;
        let mut vs = v.chars();
        match (vs.next(), vs.next()) {
            (Some(c), None) => chars[slot + 1] = c,
            _ => return Err(TagError::BadFeatureValue(k.clone(), v.clone())),
        }
    }
    Ok(chars.iter().collect())
}

/// Renders features in CoNLL-U FEATS style (`_` when empty).
pub fn render_feats(feats: &[(String, String)]) -> String {
    if feats.is_empty() {
        "_".to_string()
    } else {
        feats
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("|")
    }
}

pub fn parse_feats(s: &str) -> Result<Vec<(String, String)>, TagError> {
    if s == "_" {
        return Ok(Vec::new());
    }
    let mut feats = s
        .split('|')
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| TagError::MalformedPair(pair.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    feats.sort();
    Ok(feats)
}

/// True for placeholder forms such as `[0]`, `[12]`.
pub fn is_placeholder_form(form: &str) -> bool {
    form.len() > 2
        && form.starts_with('[')
        && form.ends_with(']')
        && form[1..form.len() - 1].bytes().all(|b| b.is_ascii_digit())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn token(id: usize, form: &str, head: usize) -> Token {
        Token {
            id,
            form: form.to_string(),
            lemma: form.to_string(),
            postag: "n-s---mn-".to_string(),
            head,
            relation: "ATR".to_string(),
            elliptical: false,
        }
    }

    pub fn sentence(heads: &[usize]) -> Sentence {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| token(i + 1, &format!("w{}", i + 1), h))
            .collect();
        Sentence::new("s1", "doc", tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::sentence;
    use super::*;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn chain_to_root_is_ok() {
        assert_eq!(validate_tree(&sentence(&[2, 0, 2]), true), TreeVerdict::Ok);
    }

    #[test]
    fn mutual_heads_are_a_cycle() {
        assert_eq!(validate_tree(&sentence(&[2, 1]), false), TreeVerdict::Cycle(vec![1, 2]));
    }

    #[test]
    fn two_root_children_in_single_root_mode() {
        let s = sentence(&[0, 0, 1]);
        assert_eq!(validate_tree(&s, true), TreeVerdict::MultipleRoots(vec![1, 2]));
        assert_eq!(validate_tree(&s, false), TreeVerdict::Ok);
    }

    #[test]
    fn out_of_range_and_self_heads_dangle() {
        assert_eq!(validate_heads(&[0, 5], false), TreeVerdict::DanglingHead(2));
        assert_eq!(validate_heads(&[0, 2], false), TreeVerdict::DanglingHead(2));
    }

    #[test]
    fn cycle_detached_from_root() {
        assert_eq!(validate_heads(&[0, 3, 4, 2], false), TreeVerdict::Cycle(vec![2, 3, 4]));
    }

    #[test]
    fn verb_tag_features() {
        assert_eq!(
            postag_to_feats("v3spia---").unwrap(),
            pairs(&[
                ("mood", "i"),
                ("number", "s"),
                ("person", "3"),
                ("tense", "p"),
                ("voice", "a")
            ])
        );
        assert_eq!(postag_to_feats("---------").unwrap(), vec![]);
        assert_eq!(
            postag_to_feats("n-s---fn-").unwrap(),
            pairs(&[("case", "n"), ("gender", "f"), ("number", "s")])
        );
    }

    #[test]
    fn tag_length_is_checked() {
        assert!(matches!(
            postag_to_feats("v3s"),
            Err(TagError::MalformedTag { len: 3, .. })
        ));
    }

    #[test]
    fn sanitize_pads_and_discards() {
        assert_eq!(sanitize_postag("v3s").0, "v3s------");
        assert!(sanitize_postag("v3s").1.is_some());
        assert_eq!(sanitize_postag("v3spia---x").0, "---------");
        assert_eq!(sanitize_postag("a-s---mn-"), ("a-s---mn-".to_string(), None));
    }

    #[test]
    fn placeholder_forms() {
        assert!(is_placeholder_form("[0]"));
        assert!(is_placeholder_form("[12]"));
        assert!(!is_placeholder_form("[]"));
        assert!(!is_placeholder_form("[a]"));
        assert!(!is_placeholder_form("λόγος"));
    }

    #[test]
    fn centuries() {
        let ym = |year| YearMonth { year, month: 1 };
        assert_eq!(ym(-799).century(), -8);
        assert_eq!(ym(-430).century(), -5);
        assert_eq!(ym(75).century(), 1);
        assert_eq!(ym(100).century(), 1);
        assert_eq!(ym(101).century(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn tag_strategy() -> impl Strategy<Value = String> {
            proptest::collection::vec(
                prop_oneof![
                    Just('-'),
                    proptest::char::range('a', 'z'),
                    proptest::char::range('1', '3')
                ],
                TAG_LEN,
            )
            .prop_map(|cs| cs.into_iter().collect())
        }

        proptest! {
            #[test]
            fn feats_round_trip(tag in tag_strategy()) {
                let feats = postag_to_feats(&tag).unwrap();
                let pos = tag.chars().next().unwrap();
                prop_assert_eq!(feats_to_postag(pos, &feats).unwrap(), tag);
            }

            #[test]
            fn validity_is_pure(heads in proptest::collection::vec(0usize..6, 1..6)) {
                prop_assert_eq!(validate_heads(&heads, true), validate_heads(&heads, true));
            }
        }
    }
}
