use super::{utf8, IngestError};
use crate::treebank::{DocumentMeta, YearMonth};

/// Reads the document catalog: tab-separated `cts_urn`, author, title,
/// date range and token count, plus an optional genre column. Blank lines,
/// `#` comments and a header row starting with `cts_urn` are skipped.
pub fn read_catalog(bytes: &[u8]) -> Result<Vec<DocumentMeta>, IngestError> {
    let text = utf8(bytes)?;
    let mut docs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') || raw.starts_with("cts_urn\t") {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if cols.len() != 5 && cols.len() != 6 {
            return Err(IngestError::BadField {
                line,
                message: format!("catalog rows have 5 or 6 columns, found {}", cols.len()),
            });
        }
        let date_range = parse_date_range(cols[3]).map_err(|e| match e {
            DateError::Syntax => IngestError::DateSyntax {
                line,
                value: cols[3].to_string(),
            },
            DateError::Order => IngestError::RangeOrder {
                line,
                value: cols[3].to_string(),
            },
        })?;
        let token_count = cols[4]
            .replace(',', "")
            .parse::<u64>()
            .map_err(|_| IngestError::BadField {
                line,
                message: format!("token count {:?} is not a non-negative integer", cols[4]),
            })?;
        docs.push(DocumentMeta {
            cts_urn: cols[0].to_string(),
            author: cols[1].to_string(),
            title: cols[2].to_string(),
            date_range,
            token_count,
            genre: cols.get(5).filter(|g| !g.is_empty()).map(|g| g.to_string()),
        });
    }
    Ok(docs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DateError {
    Syntax,
    Order,
}

/// Parses `<start>/<end>` where each side is `±YYYY-MM`. Both `-` and the
/// minus sign U+2212 mark BCE years; a missing sign means CE.
pub fn parse_date_range(s: &str) -> Result<(YearMonth, YearMonth), DateError> {
    let (a, b) = s.split_once('/').ok_or(DateError::Syntax)?;
    let start = parse_year_month(a.trim())?;
    let end = parse_year_month(b.trim())?;
    if start > end {
        return Err(DateError::Order);
    }
    Ok((start, end))
}

fn parse_year_month(s: &str) -> Result<YearMonth, DateError> {
    let (negative, rest) = if let Some(r) = s.strip_prefix('\u{2212}') {
        (true, r)
    } else if let Some(r) = s.strip_prefix('-') {
        (true, r)
    } else if let Some(r) = s.strip_prefix('+') {
        (false, r)
    } else {
        (false, s)
    };
    let (y, m) = rest.split_once('-').ok_or(DateError::Syntax)?;
    if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(DateError::Syntax);
    }
    let year: i32 = y.parse().map_err(|_| DateError::Syntax)?;
    let month: u8 = m.parse().map_err(|_| DateError::Syntax)?;
    if !(1..=12).contains(&month) {
        return Err(DateError::Syntax);
    }
    Ok(YearMonth {
        year: if negative { -year } else { year },
        month,
    })
}
