//! Dynamic Time Warping per metric dimension and the weighted total cost.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricId, Trajectory};

/// Local distance between two aligned points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delta {
    #[default]
    Absolute,
    Squared,
}

impl Delta {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            Delta::Absolute => (a - b).abs(),
            Delta::Squared => (a - b) * (a - b),
        }
    }
}

impl FromStr for Delta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(Delta::Absolute),
            "squared" => Ok(Delta::Squared),
            _ => Err(Error::invalid(format!("unknown delta `{s}`"))),
        }
    }
}

/// Index pairs `(i, j)` from `(0, 0)` to `(|S|−1, |T|−1)`, each step advancing
/// `i`, `j` or both by one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WarpingPath {
    pub steps: Vec<(usize, usize)>,
}

impl WarpingPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks the boundary and continuity conditions against sequence lengths.
    pub fn is_valid_for(&self, n: usize, m: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.steps.first(), self.steps.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (n - 1, m - 1)
            && self.steps.windows(2).all(|w| {
                let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
            })
    }
}

/// Outcome of aligning two sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub raw_cost: f64,
    pub normalized_cost: f64,
    pub path: WarpingPath,
}

/// Unconstrained DTW with a recovered optimal path.
pub fn dtw(s: &[f64], t: &[f64], delta: Delta) -> Result<Alignment> {
    dtw_windowed(s, t, delta, None)
}

/// DTW restricted to `|i − j| ≤ max(window, ||S| − |T||)` when a window is
/// given.
///
/// Backtracking prefers the diagonal predecessor, then the one that advanced
/// `i`, so the recovered path is the same on every platform.
pub fn dtw_windowed(
    s: &[f64],
    t: &[f64],
    delta: Delta,
    window: Option<usize>,
) -> Result<Alignment> {
    let (n, m) = (s.len(), t.len());
    if n == 0 || m == 0 {
        return Err(Error::invalid("cannot align an empty sequence"));
    }
    let band = window.map(|w| w.max(n.abs_diff(m)));
    let inside = |i: usize, j: usize| band.is_none_or(|w| i.abs_diff(j) <= w);

    let mut cost = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            if !inside(i, j) {
                continue;
            }
            let d = delta.eval(s[i], t[j]);
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { cost[at(i - 1, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { cost[at(i - 1, j)] } else { f64::INFINITY };
                let left = if j > 0 { cost[at(i, j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            cost[at(i, j)] = d + prev;
        }
    }

    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    steps.push((i, j));
    while (i, j) != (0, 0) {
        let diag = if i > 0 && j > 0 { cost[at(i - 1, j - 1)] } else { f64::INFINITY };
        let up = if i > 0 { cost[at(i - 1, j)] } else { f64::INFINITY };
        let left = if j > 0 { cost[at(i, j - 1)] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        steps.push((i, j));
    }
    steps.reverse();

    let raw_cost = cost[at(n - 1, m - 1)];
    Ok(Alignment {
        raw_cost,
        normalized_cost: raw_cost / steps.len() as f64,
        path: WarpingPath { steps },
    })
}

/// Largest `|S|·|T|` the exhaustive oracle accepts.
pub const ORACLE_MAX_CELLS: usize = 36;

/// Minimum path cost found by walking every monotonic, continuous warping
/// path. Exponential; only for checking [`dtw`] on tiny inputs.
pub fn dtw_oracle(s: &[f64], t: &[f64], delta: Delta) -> Result<f64> {
    if s.is_empty() || t.is_empty() {
        return Err(Error::invalid("cannot align an empty sequence"));
    }
    if s.len() * t.len() > ORACLE_MAX_CELLS {
        return Err(Error::invalid(format!(
            "oracle limited to {ORACLE_MAX_CELLS} cells, got {}x{}",
            s.len(),
            t.len()
        )));
    }

    fn walk(s: &[f64], t: &[f64], delta: Delta, i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + delta.eval(s[i], t[j]);
        if i + 1 == s.len() && j + 1 == t.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < s.len() && j + 1 < t.len() {
            walk(s, t, delta, i + 1, j + 1, acc, best);
        }
        if i + 1 < s.len() {
            walk(s, t, delta, i + 1, j, acc, best);
        }
        if j + 1 < t.len() {
            walk(s, t, delta, i, j + 1, acc, best);
        }
    }

    let mut best = f64::INFINITY;
    walk(s, t, delta, 0, 0, 0.0, &mut best);
    Ok(best)
}

/// DTW outcome for one metric dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub metric: MetricId,
    #[serde(rename = "raw")]
    pub raw_cost: f64,
    #[serde(rename = "normalized")]
    pub normalized_cost: f64,
    pub path_length: usize,
    #[serde(skip)]
    pub path: WarpingPath,
}

impl AlignmentResult {
    pub fn new(metric: MetricId, alignment: Alignment) -> Self {
        AlignmentResult {
            metric,
            raw_cost: alignment.raw_cost,
            normalized_cost: alignment.normalized_cost,
            path_length: alignment.path.len(),
            path: alignment.path,
        }
    }
}

/// Weighted sum of per-dimension normalized costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityScore {
    pub trace_id: String,
    pub per_dimension: Vec<AlignmentResult>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl ValidityScore {
    pub fn dims(&self) -> usize {
        self.per_dimension.len()
    }

    pub fn cost(&self, metric: &MetricId) -> Option<f64> {
        self.per_dimension
            .iter()
            .find(|r| &r.metric == metric)
            .map(|r| r.normalized_cost)
    }
}

/// Combines per-dimension results with their weights.
pub fn aggregate(
    trace_id: impl Into<String>,
    results: Vec<AlignmentResult>,
    weights: Vec<f64>,
) -> Result<ValidityScore> {
    if results.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} dimensions but {} weights",
            results.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid(format!("weight {w} must be finite and non-negative")));
    }
    let total = results
        .iter()
        .zip(&weights)
        .map(|(r, w)| w * r.normalized_cost)
        .sum();
    Ok(ValidityScore {
        trace_id: trace_id.into(),
        per_dimension: results,
        weights,
        total,
    })
}

/// Per-metric weights; metrics without an entry weigh 1.
pub type Weights = BTreeMap<MetricId, f64>;

pub fn weight_for(weights: &Weights, metric: &MetricId) -> f64 {
    weights.get(metric).copied().unwrap_or(1.0)
}

/// Aligns every dimension of `sim` against the same dimension of `target`
/// independently and aggregates. Dimensions follow `target`'s order.
pub fn score_trajectory(
    sim: &Trajectory,
    target: &Trajectory,
    weights: &Weights,
    delta: Delta,
    window: Option<usize>,
) -> Result<ValidityScore> {
    let missing: Vec<&str> = target
        .metrics()
        .filter(|m| sim.get(m).is_none())
        .map(MetricId::key)
        .collect();
    let extra: Vec<&str> = sim
        .metrics()
        .filter(|m| target.get(m).is_none())
        .map(MetricId::key)
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::MetricMismatch(format!(
            "trajectory `{}` is missing [{}] and has unexpected [{}]",
            sim.trace_id,
            missing.join(", "),
            extra.join(", ")
        )));
    }

    let mut results = Vec::with_capacity(target.dims());
    let mut ws = Vec::with_capacity(target.dims());
    for t in &target.series {
        let s = sim.get(&t.metric).expect("checked above");
        let alignment = dtw_windowed(&s.alignable(), &t.alignable(), delta, window)?;
        results.push(AlignmentResult::new(t.metric.clone(), alignment));
        ws.push(weight_for(weights, &t.metric));
    }
    aggregate(sim.trace_id.clone(), results, ws)
}
