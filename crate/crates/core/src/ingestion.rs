//! Rating files → binary feedback matrices.
//!
//! Supported inputs are `user<TAB>item<TAB>rating`, the same three fields
//! comma-separated, and MovieLens-1M `user::item::rating::timestamp`. A
//! trailing timestamp field is accepted (and ignored) in every format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::environment::FeedbackMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RatingTriple {
    pub user: String,
    pub item: String,
    pub rating: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[serde(alias = "tsv")]
    Tab,
    #[serde(alias = "csv")]
    Comma,
    #[serde(alias = "movielens")]
    DoubleColon,
}

impl Delimiter {
    fn as_str(self) -> &'static str {
        match self {
            Delimiter::Tab => "\t",
            Delimiter::Comma => ",",
            Delimiter::DoubleColon => "::",
        }
    }
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab" | "tsv" => Ok(Delimiter::Tab),
            "comma" | "csv" => Ok(Delimiter::Comma),
            "double_colon" | "double-colon" | "movielens" => Ok(Delimiter::DoubleColon),
            other => Err(Error::invalid(format!(
                "unknown format {other:?} (expected tsv, csv or movielens)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedRatings {
    pub triples: Vec<RatingTriple>,
    pub rejected: Vec<RejectedLine>,
}

/// Parses rating lines. Blank lines are skipped; malformed lines are
/// collected in `rejected` with their line numbers.
pub fn parse_ratings(text: &str, delimiter: Delimiter) -> ParsedRatings {
    let mut out = ParsedRatings::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter.as_str()).map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 4 {
            out.rejected.push(RejectedLine {
                line: n + 1,
                reason: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
            continue;
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            out.rejected.push(RejectedLine {
                line: n + 1,
                reason: "empty user or item id".into(),
            });
            continue;
        }
        match fields[2].parse::<f64>() {
            Ok(rating) if rating.is_finite() => out.triples.push(RatingTriple {
                user: fields[0].to_string(),
                item: fields[1].to_string(),
                rating,
            }),
            _ => out.rejected.push(RejectedLine {
                line: n + 1,
                reason: format!("rating {:?} is not a finite number", fields[2]),
            }),
        }
    }
    out
}

/// Reads a rating file. Rejected lines are logged; a file without a single
/// valid line is an error listing the first five rejects.
pub fn load_ratings(path: &Path, delimiter: Delimiter) -> Result<Vec<RatingTriple>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_ratings(&text, delimiter);
    if parsed.triples.is_empty() {
        let mut message = String::from("no valid rating lines");
        for r in parsed.rejected.iter().take(5) {
            write!(message, "; line {}: {}", r.line, r.reason).unwrap();
        }
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message,
        });
    }
    for r in &parsed.rejected {
        log::warn!("{}:{}: skipped ({})", path.display(), r.line, r.reason);
    }
    Ok(parsed.triples)
}

/// How a rating becomes an attraction bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinarizeRule {
    /// 1 iff `rating > threshold` (strict).
    GreaterThan(f64),
    /// 1 for every pair that appears at all.
    Presence,
}

impl BinarizeRule {
    fn attracts(self, rating: f64) -> bool {
        match self {
            BinarizeRule::GreaterThan(t) => rating > t,
            BinarizeRule::Presence => true,
        }
    }
}

/// Feedback matrix plus the ids behind its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub matrix: FeedbackMatrix,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

impl LabeledMatrix {
    pub fn user_index(&self) -> HashMap<&str, usize> {
        self.user_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect()
    }

    pub fn item_index(&self) -> HashMap<&str, usize> {
        self.item_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect()
    }
}

/// Rows and columns in first-appearance order; duplicate pairs OR-combine.
pub fn binarize(triples: &[RatingTriple], rule: BinarizeRule) -> Result<LabeledMatrix> {
    if triples.is_empty() {
        return Err(Error::invalid("no ratings to binarize"));
    }
    if let BinarizeRule::GreaterThan(t) = rule {
        if !t.is_finite() {
            return Err(Error::invalid(format!("threshold {t} is not finite")));
        }
    }
    let mut users: HashMap<&str, usize> = HashMap::new();
    let mut items: HashMap<&str, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut ones = Vec::new();
    for t in triples {
        let u = *users.entry(&t.user).or_insert_with(|| {
            user_ids.push(t.user.clone());
            user_ids.len() - 1
        });
        let i = *items.entry(&t.item).or_insert_with(|| {
            item_ids.push(t.item.clone());
            item_ids.len() - 1
        });
        if rule.attracts(t.rating) {
            ones.push((u, i));
        }
    }
    let (m, l) = (user_ids.len(), item_ids.len());
    let mut bits = vec![0u8; m * l];
    for (u, i) in ones {
        bits[u * l + i] = 1;
    }
    Ok(LabeledMatrix {
        matrix: FeedbackMatrix::new(m, l, bits)?,
        user_ids,
        item_ids,
    })
}

/// Result of [`select_top`]: the reduced matrix and the original indices of
/// its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TopSelection {
    pub matrix: FeedbackMatrix,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Keeps the `l_max` most popular items (largest column sums), then the
/// `m_max` most active users over those items (largest row sums), then
/// drops users with no attraction left. Ties go to the lower original
/// index; kept rows and columns stay in original order.
pub fn select_top(w: &FeedbackMatrix, l_max: usize, m_max: usize) -> Result<TopSelection> {
    if l_max == 0 || m_max == 0 {
        return Err(Error::invalid("l_max and m_max must be at least 1"));
    }
    let cols = top_indices(&w.column_sums(), l_max);
    let narrowed = w.select_columns(&cols)?;
    let mut rows = top_indices(&narrowed.row_sums(), m_max);
    rows.retain(|&r| narrowed.row(r).contains(&1));
    if rows.is_empty() {
        return Err(Error::invalid("no user is attracted by any kept item"));
    }
    Ok(TopSelection {
        matrix: narrowed.select_rows(&rows)?,
        rows,
        cols,
    })
}

fn top_indices(sums: &[usize], keep: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sums.len()).collect();
    idx.sort_by(|&a, &b| sums[b].cmp(&sums[a]).then(a.cmp(&b)));
    idx.truncate(keep);
    idx.sort_unstable();
    idx
}

impl LabeledMatrix {
    pub fn select_top(&self, l_max: usize, m_max: usize) -> Result<LabeledMatrix> {
        let sel = select_top(&self.matrix, l_max, m_max)?;
        Ok(LabeledMatrix {
            user_ids: sel.rows.iter().map(|&r| self.user_ids[r].clone()).collect(),
            item_ids: sel.cols.iter().map(|&c| self.item_ids[c].clone()).collect(),
            matrix: sel.matrix,
        })
    }
}

/// CSV with a header of item ids and one 0/1 row per user.
pub fn matrix_to_csv(w: &FeedbackMatrix, item_ids: Option<&[String]>) -> String {
    let mut out = match item_ids {
        Some(ids) => ids.join(","),
        None => (0..w.items()).map(|i| i.to_string()).collect::<Vec<_>>().join(","),
    };
    out.push('\n');
    for row in w.rows() {
        let line: Vec<&str> = row.iter().map(|&b| if b == 1 { "1" } else { "0" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, w: &FeedbackMatrix, item_ids: Option<&[String]>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(w, item_ids)).map_err(|e| Error::io(path, e))
}

/// Inverse of [`matrix_to_csv`].
pub fn parse_matrix_csv(text: &str) -> std::result::Result<(FeedbackMatrix, Vec<String>), String> {
    let mut lines = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty matrix file")?;
    let item_ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut bits = Vec::new();
    let mut users = 0;
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != item_ids.len() {
            return Err(format!(
                "row {} has {} fields, header has {}",
                n + 1,
                fields.len(),
                item_ids.len()
            ));
        }
        for f in fields {
            bits.push(match f {
                "0" => 0,
                "1" => 1,
                other => return Err(format!("row {}: entry {other:?} is not 0 or 1", n + 1)),
            });
        }
        users += 1;
    }
    let w = FeedbackMatrix::new(users, item_ids.len(), bits).map_err(|e| e.to_string())?;
    Ok((w, item_ids))
}

pub fn read_matrix_csv(path: &Path) -> Result<(FeedbackMatrix, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}
