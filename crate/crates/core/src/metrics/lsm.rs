//! Language Style Matching over function-word categories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::trace::InteractionEvent;

use super::text::tokens;

/// Smoothing term in the per-category denominator.
pub const LSM_EPSILON: f64 = 1e-4;

const DEFAULT_TABLE: &str = include_str!("function_words.tsv");

/// Function-word categories. A word may belong to more than one category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTable {
    categories: Vec<(String, BTreeSet<String>)>,
}

impl CategoryTable {
    /// Parses `category<TAB>word` lines. Blank lines and `#` comments are ignored;
    /// categories keep their first-appearance order.
    pub fn parse(src: &str) -> Result<Self> {
        let mut categories: Vec<(String, BTreeSet<String>)> = Vec::new();
        for (idx, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (cat, word) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected `category<TAB>word`".into(),
            })?;
            let (cat, word) = (cat.trim(), word.trim().to_lowercase());
            if cat.is_empty() || word.is_empty() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "empty category or word".into(),
                });
            }
            match categories.iter_mut().find(|(c, _)| c == cat) {
                Some((_, words)) => {
                    words.insert(word);
                }
                None => categories.push((cat.to_string(), BTreeSet::from([word]))),
            }
        }
        if categories.is_empty() {
            return Err(Error::invalid("category table is empty"));
        }
        Ok(CategoryTable { categories })
    }

    /// The nine built-in categories.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLE).expect("built-in category table parses")
    }

    pub fn builtin_source() -> &'static str {
        DEFAULT_TABLE
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(c, _)| c.as_str())
    }

    pub fn words(&self, category: &str) -> Option<&BTreeSet<String>> {
        self.categories
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, w)| w)
    }

    /// Serializes back to the tab-separated format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (cat, words) in &self.categories {
            for w in words {
                let _ = writeln!(out, "{cat}\t{w}");
            }
        }
        out
    }

    /// Per-category share of a speaker's tokens.
    pub fn proportions<'a, I>(&self, toks: I) -> Option<Vec<f64>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut hits = vec![0usize; self.categories.len()];
        let mut total = 0usize;
        for tok in toks {
            total += 1;
            for (slot, (_, words)) in hits.iter_mut().zip(&self.categories) {
                if words.contains(tok) {
                    *slot += 1;
                }
            }
        }
        (total > 0).then(|| hits.iter().map(|&h| h as f64 / total as f64).collect())
    }
}

impl Default for CategoryTable {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Style match for one category between two speakers.
pub fn category_match(p1: f64, p2: f64) -> f64 {
    1.0 - (p1 - p2).abs() / (p1 + p2 + LSM_EPSILON)
}

/// Mean category match over two proportion profiles.
pub fn pair_lsm(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| category_match(*x, *y)).sum();
    sum / a.len() as f64
}

/// Bin cohesion: pair LSM averaged over every unordered pair of speakers who
/// said at least one token. `None` with fewer than two such speakers.
pub fn lsm(bin: &[InteractionEvent], table: &CategoryTable) -> Option<f64> {
    let mut by_speaker: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for e in bin {
        by_speaker
            .entry(e.speaker_id.as_str())
            .or_default()
            .extend(tokens(&e.text));
    }
    let profiles: Vec<Vec<f64>> = by_speaker
        .values()
        .filter_map(|toks| table.proportions(toks.iter().map(String::as_str)))
        .collect();
    if profiles.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in profiles.iter().enumerate() {
        for b in &profiles[i + 1..] {
            total += pair_lsm(a, b);
            pairs += 1;
        }
    }
    Some(total / pairs as f64)
}
