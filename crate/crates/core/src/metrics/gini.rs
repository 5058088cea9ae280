use std::collections::BTreeMap;

use crate::trace::InteractionEvent;

use super::text::word_count;

/// Gini coefficient `Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² x̄)`, computed through the sorted
/// rank form. `None` when the values sum to zero.
pub fn gini(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ranked: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i + 1) as f64 * x)
        .sum();
    let n = n as f64;
    let g = 2.0 * ranked / (n * total) - (n + 1.0) / n;
    Some(g.max(0.0))
}

/// Per-speaker word counts for one bin. Roster speakers silent in the bin
/// count as zero.
pub fn word_counts(bin: &[InteractionEvent], roster: &[String]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = roster.iter().map(|s| (s.clone(), 0)).collect();
    for e in bin {
        *counts.entry(e.speaker_id.clone()).or_insert(0) += word_count(&e.text);
    }
    counts
}

/// Hierarchy of one bin: Gini of per-speaker word counts.
pub fn gini_word_counts(bin: &[InteractionEvent], roster: &[String]) -> Option<f64> {
    let counts: Vec<f64> = word_counts(bin, roster)
        .into_values()
        .map(|c| c as f64)
        .collect();
    gini(&counts)
}
