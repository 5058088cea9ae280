//! Per-bin social signals and the trajectories built from them.

pub mod embedding;
pub mod gini;
pub mod lsm;
pub mod text;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::BinnedTrace;

pub use embedding::{
    divergence, hashed_embedding_provider, EmbeddingProvider, HashedEmbedding, ProviderError,
};
pub use gini::{gini, gini_word_counts};
pub use lsm::{lsm, CategoryTable, LSM_EPSILON};

/// One metric dimension of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MetricId {
    /// Gini of per-speaker word counts.
    Hierarchy,
    /// Mean pairwise embedding distance.
    Divergence,
    /// Language Style Matching.
    Cohesion,
    /// User metric, keyed by name.
    Custom(String),
}

impl MetricId {
    pub const DEFAULTS: [MetricId; 3] =
        [MetricId::Hierarchy, MetricId::Divergence, MetricId::Cohesion];

    pub fn key(&self) -> &str {
        match self {
            MetricId::Hierarchy => "hierarchy",
            MetricId::Divergence => "divergence",
            MetricId::Cohesion => "cohesion",
            MetricId::Custom(k) => k,
        }
    }

    /// Column heading used in score tables.
    pub fn display_name(&self) -> String {
        match self {
            MetricId::Hierarchy => "Hierarchy".into(),
            MetricId::Divergence => "Divergence".into(),
            MetricId::Cohesion => "Cohesion".into(),
            MetricId::Custom(k) => k.clone(),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Err(Error::invalid("empty metric key"));
        }
        Ok(match trimmed.to_ascii_lowercase().as_str() {
            "hierarchy" | "gini" => MetricId::Hierarchy,
            "divergence" => MetricId::Divergence,
            "cohesion" | "lsm" => MetricId::Cohesion,
            _ => MetricId::Custom(trimmed.to_string()),
        })
    }
}

impl From<MetricId> for String {
    fn from(m: MetricId) -> String {
        m.key().to_string()
    }
}

impl TryFrom<String> for MetricId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How bins where a metric is undefined get a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    /// Linear interpolation between the nearest defined bins; edges copy the
    /// nearest defined value.
    #[default]
    Linear,
    /// Carry the previous defined value forward; leading gaps take the first.
    HoldLast,
    /// Leave the bin as NaN; alignment skips it.
    DropBin,
}

impl FillPolicy {
    /// Fills `raw` in place of the undefined entries. Errors when nothing is
    /// defined.
    pub fn apply(self, raw: &[Option<f64>]) -> Option<Vec<f64>> {
        let defined: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .collect();
        let (&(first_idx, first_val), &(last_idx, last_val)) =
            (defined.first()?, defined.last()?);

        let mut out = Vec::with_capacity(raw.len());
        match self {
            FillPolicy::DropBin => out.extend(raw.iter().map(|v| v.unwrap_or(f64::NAN))),
            FillPolicy::HoldLast => {
                let mut last = first_val;
                for v in raw {
                    if let Some(v) = v {
                        last = *v;
                    }
                    out.push(last);
                }
            }
            FillPolicy::Linear => {
                let mut next = 0usize;
                for (i, v) in raw.iter().enumerate() {
                    if let Some(v) = v {
                        out.push(*v);
                        continue;
                    }
                    if i < first_idx {
                        out.push(first_val);
                    } else if i > last_idx {
                        out.push(last_val);
                    } else {
                        while defined[next].0 < i {
                            next += 1;
                        }
                        let (hi_i, hi_v) = defined[next];
                        let (lo_i, lo_v) = defined[next - 1];
                        let frac = (i - lo_i) as f64 / (hi_i - lo_i) as f64;
                        out.push(lo_v + frac * (hi_v - lo_v));
                    }
                }
            }
        }
        Some(out)
    }
}

impl FromStr for FillPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::invalid(format!("unknown fill policy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: MetricId,
    pub values: Vec<f64>,
    /// Bins where the metric was computed rather than filled.
    #[serde(rename = "defined_mask")]
    pub defined: Vec<bool>,
}

impl MetricSeries {
    /// A series with every bin defined.
    pub fn dense(metric: MetricId, values: Vec<f64>) -> Self {
        let defined = vec![true; values.len()];
        MetricSeries {
            metric,
            values,
            defined,
        }
    }

    pub fn from_raw(metric: MetricId, raw: &[Option<f64>], fill: FillPolicy) -> Result<Self> {
        let values = fill.apply(raw).ok_or_else(|| Error::MetricUndefined {
            metric: metric.key().to_string(),
        })?;
        Ok(MetricSeries {
            metric,
            values,
            defined: raw.iter().map(Option::is_some).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values usable for alignment: NaN bins left by [`FillPolicy::DropBin`]
    /// are skipped.
    pub fn alignable(&self) -> Vec<f64> {
        self.values.iter().copied().filter(|v| v.is_finite()).collect()
    }
}

/// K metric series over a shared bin count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrajectoryWire")]
pub struct Trajectory {
    pub trace_id: String,
    pub bin_count: usize,
    pub series: Vec<MetricSeries>,
}

#[derive(Deserialize)]
struct TrajectoryWire {
    trace_id: String,
    bin_count: usize,
    series: Vec<MetricSeries>,
}

impl TryFrom<TrajectoryWire> for Trajectory {
    type Error = Error;

    fn try_from(w: TrajectoryWire) -> Result<Self> {
        let t = Trajectory::new(w.trace_id, w.series)?;
        if t.bin_count != w.bin_count {
            return Err(Error::invalid(format!(
                "bin_count {} does not match series length {}",
                w.bin_count, t.bin_count
            )));
        }
        Ok(t)
    }
}

impl Trajectory {
    pub fn new(trace_id: impl Into<String>, series: Vec<MetricSeries>) -> Result<Self> {
        let trace_id = trace_id.into();
        let first = series
            .first()
            .ok_or_else(|| Error::invalid(format!("trajectory `{trace_id}` has no series")))?;
        let bin_count = first.len();
        if bin_count == 0 {
            return Err(Error::invalid(format!("trajectory `{trace_id}` has no bins")));
        }
        for (i, s) in series.iter().enumerate() {
            if s.len() != bin_count || s.defined.len() != bin_count {
                return Err(Error::invalid(format!(
                    "series `{}` has {} bins, expected {bin_count}",
                    s.metric,
                    s.len()
                )));
            }
            if series[..i].iter().any(|o| o.metric == s.metric) {
                return Err(Error::invalid(format!("duplicate metric `{}`", s.metric)));
            }
        }
        Ok(Trajectory {
            trace_id,
            bin_count,
            series,
        })
    }

    pub fn get(&self, metric: &MetricId) -> Option<&MetricSeries> {
        self.series.iter().find(|s| &s.metric == metric)
    }

    pub fn metrics(&self) -> impl Iterator<Item = &MetricId> {
        self.series.iter().map(|s| &s.metric)
    }

    pub fn dims(&self) -> usize {
        self.series.len()
    }

    /// Long-format CSV: `bin,metric,value,was_filled`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin", "metric", "value", "was_filled"])?;
        for s in &self.series {
            for (bin, (v, def)) in s.values.iter().zip(&s.defined).enumerate() {
                w.write_record([
                    bin.to_string(),
                    s.metric.key().to_string(),
                    v.to_string(),
                    (!def).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut buf = serde_json::to_vec_pretty(self)?;
        buf.push(b'\n');
        Ok(buf)
    }

    pub fn from_json<R: Read>(src: R) -> Result<Self> {
        Ok(serde_json::from_reader(src)?)
    }
}

/// Inputs shared by the metric extractors.
pub struct MetricContext<'a> {
    pub provider: &'a dyn EmbeddingProvider,
    pub categories: &'a CategoryTable,
}

/// Raw per-bin values of one metric; `None` marks an undefined bin.
pub fn metric_values(
    trace: &BinnedTrace,
    metric: &MetricId,
    ctx: &MetricContext<'_>,
) -> Result<Vec<Option<f64>>> {
    trace
        .bins
        .iter()
        .enumerate()
        .map(|(idx, bin)| match metric {
            MetricId::Hierarchy => Ok(gini_word_counts(bin, &trace.speakers)),
            MetricId::Cohesion => Ok(lsm(bin, ctx.categories)),
            MetricId::Divergence => divergence(bin, ctx.provider).map_err(|e| Error::Provider {
                bin: idx,
                message: e.0,
            }),
            MetricId::Custom(k) => Err(Error::invalid(format!(
                "no built-in extractor for custom metric `{k}`"
            ))),
        })
        .collect()
}

/// Computes every requested metric over every bin and fills undefined bins.
pub fn extract_trajectory(
    trace: &BinnedTrace,
    metrics: &[MetricId],
    ctx: &MetricContext<'_>,
    fill: FillPolicy,
) -> Result<Trajectory> {
    if metrics.is_empty() {
        return Err(Error::invalid("no metrics requested"));
    }
    let series = metrics
        .iter()
        .map(|m| {
            let raw = metric_values(trace, m, ctx)?;
            MetricSeries::from_raw(m.clone(), &raw, fill)
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(trace.trace_id.clone(), series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::InteractionEvent;
    use proptest::prelude::*;

    #[test]
    fn linear_fill_interpolates_midpoint() {
        let out = FillPolicy::Linear.apply(&[Some(0.2), None, Some(0.4)]).unwrap();
        assert!((out[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn linear_fill_extends_edges() {
        let out = FillPolicy::Linear
            .apply(&[None, Some(0.5), None, None, Some(0.8), None])
            .unwrap();
        assert_eq!(out[0], 0.5);
        assert!((out[2] - 0.6).abs() < 1e-12);
        assert!((out[3] - 0.7).abs() < 1e-12);
        assert_eq!(out[5], 0.8);
    }

    #[test]
    fn hold_last_and_drop_bin() {
        let raw = [None, Some(0.5), None, Some(0.1), None];
        assert_eq!(
            FillPolicy::HoldLast.apply(&raw).unwrap(),
            vec![0.5, 0.5, 0.5, 0.1, 0.1]
        );
        let dropped = FillPolicy::DropBin.apply(&raw).unwrap();
        assert!(dropped[0].is_nan() && dropped[2].is_nan());
        let s = MetricSeries::from_raw(MetricId::Hierarchy, &raw, FillPolicy::DropBin).unwrap();
        assert_eq!(s.alignable(), vec![0.5, 0.1]);
    }

    #[test]
    fn all_undefined_is_an_error() {
        assert!(FillPolicy::Linear.apply(&[None, None]).is_none());
        let err = MetricSeries::from_raw(MetricId::Cohesion, &[None, None], FillPolicy::Linear);
        assert!(matches!(err, Err(Error::MetricUndefined { .. })));
    }

    #[test]
    fn metric_ids_round_trip_as_strings() {
        for m in MetricId::DEFAULTS {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<MetricId>(&json).unwrap(), m);
        }
        assert_eq!("LSM".parse::<MetricId>().unwrap(), MetricId::Cohesion);
        assert_eq!(
            "anxiety".parse::<MetricId>().unwrap(),
            MetricId::Custom("anxiety".into())
        );
        assert!("".parse::<MetricId>().is_err());
    }

    #[test]
    fn trajectory_rejects_mismatched_bins_and_duplicates() {
        let a = MetricSeries::dense(MetricId::Hierarchy, vec![0.1, 0.2]);
        let b = MetricSeries::dense(MetricId::Cohesion, vec![0.1]);
        assert!(Trajectory::new("t", vec![a.clone(), b]).is_err());
        assert!(Trajectory::new("t", vec![a.clone(), a]).is_err());
        assert!(Trajectory::new("t", vec![]).is_err());
    }

    #[test]
    fn trajectory_json_round_trip_and_csv_shape() {
        let t = Trajectory::new(
            "g1",
            vec![MetricSeries::from_raw(
                MetricId::Hierarchy,
                &[Some(0.1), None, Some(0.3)],
                FillPolicy::Linear,
            )
            .unwrap()],
        )
        .unwrap();
        let back = Trajectory::from_json(t.to_json().unwrap().as_slice()).unwrap();
        assert_eq!(back, t);

        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin,metric,value,was_filled");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with(",true"));
    }

    #[test]
    fn extracts_three_metrics() {
        let ev = |s: &str, t: f64, text: &str| InteractionEvent {
            speaker_id: s.into(),
            start_time: t,
            end_time: t + 1.0,
            text: text.into(),
            segment: "s".into(),
        };
        let binned = BinnedTrace {
            trace_id: "t".into(),
            bin_count: 3,
            speakers: vec!["A".into(), "B".into()],
            bins: vec![
                vec![ev("A", 0.0, "the plan is good"), ev("B", 1.0, "the plan is bad")],
                vec![],
                vec![ev("A", 70.0, "we could try it"), ev("B", 71.0, "maybe")],
            ],
        };
        let provider = hashed_embedding_provider(64, 1).unwrap();
        let categories = CategoryTable::builtin();
        let ctx = MetricContext {
            provider: &provider,
            categories: &categories,
        };
        let t = extract_trajectory(&binned, &MetricId::DEFAULTS, &ctx, FillPolicy::Linear).unwrap();
        assert_eq!(t.dims(), 3);
        assert_eq!(t.bin_count, 3);
        let h = t.get(&MetricId::Hierarchy).unwrap();
        assert_eq!(h.values[0], 0.0);
        assert_eq!(h.defined, vec![true, false, true]);
        for s in &t.series {
            assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(extract_trajectory(&binned, &[], &ctx, FillPolicy::Linear).is_err());
    }

    proptest! {
        #[test]
        fn fill_never_alters_defined_bins(
            raw in prop::collection::vec(prop::option::of(0.0f64..1.0), 1..40),
            policy in prop_oneof![Just(FillPolicy::Linear), Just(FillPolicy::HoldLast), Just(FillPolicy::DropBin)],
        ) {
            if let Some(out) = policy.apply(&raw) {
                prop_assert_eq!(out.len(), raw.len());
                for (o, r) in out.iter().zip(&raw) {
                    if let Some(r) = r {
                        prop_assert_eq!(o, r);
                    }
                }
            } else {
                prop_assert!(raw.iter().all(Option::is_none));
            }
        }
    }
}
