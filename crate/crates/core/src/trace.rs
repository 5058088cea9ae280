//! Interaction logs: ingestion, session concatenation, timeline normalization
//! and discretization into bins.
//!
//! The interchange format is JSON-Lines, one utterance per line:
//!
//! ```text
//! {"speaker_id": "A", "start_time": 0.0, "end_time": 2.5, "text": "so", "segment": "meeting-a"}
//! ```

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of bins the percent timeline is cut into.
pub const DEFAULT_BINS: usize = 100;
/// Default fraction trimmed from each end of a trimmed session.
pub const DEFAULT_TRIM_FRACTION: f64 = 0.05;

/// Upper end of the normalized timeline.
pub const TIMELINE_END: f64 = 100.0;

/// One utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub speaker_id: String,
    pub start_time: f64,
    pub end_time: f64,
    pub text: String,
    /// Label of the original session this utterance was recorded in.
    pub segment: String,
}

impl InteractionEvent {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_time + self.end_time)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.start_time.is_finite() || !self.end_time.is_finite() {
            return Err("times must be finite".into());
        }
        if self.start_time < 0.0 {
            return Err(format!("start_time {} is negative", self.start_time));
        }
        if self.end_time < self.start_time {
            return Err(format!(
                "end_time {} precedes start_time {}",
                self.end_time, self.start_time
            ));
        }
        Ok(())
    }
}

/// Time extent of one original session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub trace_id: String,
    events: Vec<InteractionEvent>,
    segments: Vec<Segment>,
}

impl Trace {
    /// Builds a trace from events in input order. Events are stably sorted by
    /// start time; segments are listed in order of first appearance in the input.
    pub fn new(trace_id: impl Into<String>, mut events: Vec<InteractionEvent>) -> Self {
        let mut segments: Vec<Segment> = Vec::new();
        for e in &events {
            match segments.iter_mut().find(|s| s.label == e.segment) {
                Some(s) => {
                    s.start = s.start.min(e.start_time);
                    s.end = s.end.max(e.end_time);
                }
                None => segments.push(Segment {
                    label: e.segment.clone(),
                    start: e.start_time,
                    end: e.end_time,
                }),
            }
        }
        events.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        Trace {
            trace_id: trace_id.into(),
            events,
            segments,
        }
    }

    fn with_segments(
        trace_id: String,
        events: Vec<InteractionEvent>,
        segments: Vec<Segment>,
    ) -> Self {
        let mut trace = Trace::new(trace_id, events);
        trace.segments = segments;
        trace
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Earliest start and latest end over all events.
    pub fn extent(&self) -> Option<(f64, f64)> {
        let first = self.events.first()?;
        let end = self
            .events
            .iter()
            .map(|e| e.end_time)
            .fold(first.end_time, f64::max);
        Some((first.start_time, end))
    }

    /// Splits the trace back into one trace per segment, in segment order.
    pub fn sessions(&self) -> Vec<Trace> {
        self.segments
            .iter()
            .map(|seg| {
                let events = self
                    .events
                    .iter()
                    .filter(|e| e.segment == seg.label)
                    .cloned()
                    .collect();
                Trace::with_segments(self.trace_id.clone(), events, vec![seg.clone()])
            })
            .collect()
    }

    /// Writes the trace in the JSON-Lines interchange format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses a JSON-Lines interaction log. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn parse_trace<R: BufRead>(trace_id: impl Into<String>, source: R) -> Result<Trace> {
    let mut events = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        event.validate().map_err(|message| Error::InvalidEvent {
            line: line_no,
            message,
        })?;
        events.push(event);
    }
    Ok(Trace::new(trace_id, events))
}

/// Which sessions lose their leading and trailing fraction during concatenation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimPolicy {
    /// Every session except the first.
    #[default]
    AllButFirst,
    All,
    None,
}

impl TrimPolicy {
    fn trims(self, session_index: usize) -> bool {
        match self {
            TrimPolicy::AllButFirst => session_index > 0,
            TrimPolicy::All => true,
            TrimPolicy::None => false,
        }
    }
}

/// Lays sessions end to end on one continuous clock, dropping events whose
/// midpoint falls in the first or last `trim_fraction` of a trimmed session.
///
/// The combined clock starts where the first session starts; each following
/// session begins where the previous one's extent ended.
pub fn concatenate_sessions(
    sessions: &[Trace],
    trim_fraction: f64,
    policy: TrimPolicy,
) -> Result<Trace> {
    if sessions.is_empty() {
        return Err(Error::invalid("no sessions to concatenate"));
    }
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::invalid(format!(
            "trim fraction {trim_fraction} outside [0, 0.5)"
        )));
    }

    let mut events = Vec::new();
    let mut segments = Vec::with_capacity(sessions.len());
    let mut offset = None;
    for (idx, session) in sessions.iter().enumerate() {
        let label = session
            .segments
            .first()
            .map(|s| s.label.clone())
            .unwrap_or_else(|| session.trace_id.clone());
        let (start, end) = session
            .extent()
            .ok_or_else(|| Error::invalid(format!("session `{label}` has no events")))?;
        let duration = end - start;
        if duration <= 0.0 {
            return Err(Error::invalid(format!("session `{label}` has zero duration")));
        }
        let base = *offset.get_or_insert(start);

        let (lo, hi) = if policy.trims(idx) {
            (trim_fraction * duration, (1.0 - trim_fraction) * duration)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        for e in &session.events {
            let local_mid = e.midpoint() - start;
            if local_mid < lo || local_mid > hi {
                continue;
            }
            let mut shifted = e.clone();
            shifted.start_time = e.start_time - start + base;
            shifted.end_time = e.end_time - start + base;
            shifted.segment = label.clone();
            events.push(shifted);
        }
        segments.push(Segment {
            label,
            start: base,
            end: base + duration,
        });
        offset = Some(base + duration);
    }

    Ok(Trace::with_segments(
        sessions[0].trace_id.clone(),
        events,
        segments,
    ))
}

/// A trace whose clock runs on the percent scale [0, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTrace {
    pub trace_id: String,
    pub events: Vec<InteractionEvent>,
}

/// Affinely rescales the trace so the earliest start maps to 0 and the latest
/// end to 100.
pub fn normalize_timeline(trace: &Trace) -> Result<NormalizedTrace> {
    let (lo, hi) = trace
        .extent()
        .ok_or_else(|| Error::invalid(format!("trace `{}` has no events", trace.trace_id)))?;
    let span = hi - lo;
    if span <= 0.0 {
        return Err(Error::invalid(format!(
            "trace `{}` has zero time span",
            trace.trace_id
        )));
    }
    let scale = |t: f64| ((t - lo) / span * TIMELINE_END).clamp(0.0, TIMELINE_END);
    let events = trace
        .events
        .iter()
        .map(|e| InteractionEvent {
            start_time: scale(e.start_time),
            end_time: scale(e.end_time),
            ..e.clone()
        })
        .collect();
    Ok(NormalizedTrace {
        trace_id: trace.trace_id.clone(),
        events,
    })
}

impl NormalizedTrace {
    /// Re-normalizing an already normalized trace.
    pub fn renormalize(&self) -> Result<NormalizedTrace> {
        normalize_timeline(&Trace::new(self.trace_id.clone(), self.events.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedTrace {
    pub trace_id: String,
    pub bin_count: usize,
    /// Every speaker seen anywhere in the trace, sorted.
    pub speakers: Vec<String>,
    pub bins: Vec<Vec<InteractionEvent>>,
}

/// Bin holding a point on the percent timeline; t = 100 lands in the last bin.
pub fn bin_index(t: f64, bins: usize) -> usize {
    let width = TIMELINE_END / bins as f64;
    let idx = (t / width).floor();
    if idx <= 0.0 {
        0
    } else {
        (idx as usize).min(bins - 1)
    }
}

/// Assigns every event to the bin containing its midpoint.
pub fn bin_trace(trace: &NormalizedTrace, bins: usize) -> Result<BinnedTrace> {
    if bins == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    let mut buckets = vec![Vec::new(); bins];
    let mut speakers = BTreeSet::new();
    for e in &trace.events {
        buckets[bin_index(e.midpoint(), bins)].push(e.clone());
        speakers.insert(e.speaker_id.clone());
    }
    Ok(BinnedTrace {
        trace_id: trace.trace_id.clone(),
        bin_count: bins,
        speakers: speakers.into_iter().collect(),
        bins: buckets,
    })
}

impl BinnedTrace {
    pub fn event_count(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(speaker: &str, start: f64, end: f64, segment: &str) -> InteractionEvent {
        InteractionEvent {
            speaker_id: speaker.into(),
            start_time: start,
            end_time: end,
            text: "word".into(),
            segment: segment.into(),
        }
    }

    #[test]
    fn parses_single_line() {
        let src = r#"{"speaker_id":"A","start_time":0.0,"end_time":2.0,"text":"hello","segment":"A"}"#;
        let trace = parse_trace("t", src.as_bytes()).unwrap();
        assert_eq!(trace.events().len(), 1);
        assert_eq!(trace.segments().len(), 1);
        assert_eq!(trace.segments()[0].label, "A");
    }

    #[test]
    fn parse_sorts_by_start_time() {
        let src = concat!(
            r#"{"speaker_id":"A","start_time":5.0,"end_time":6.0,"text":"b","segment":"s"}"#,
            "\n",
            r#"{"speaker_id":"B","start_time":1.0,"end_time":2.0,"text":"a","segment":"s"}"#,
            "\n"
        );
        let trace = parse_trace("t", src.as_bytes()).unwrap();
        let starts: Vec<f64> = trace.events().iter().map(|e| e.start_time).collect();
        assert_eq!(starts, vec![1.0, 5.0]);
    }

    #[test]
    fn parse_rejects_reversed_times_with_line_number() {
        let src = concat!(
            r#"{"speaker_id":"A","start_time":0.0,"end_time":1.0,"text":"","segment":"s"}"#,
            "\n",
            r#"{"speaker_id":"A","start_time":2.0,"end_time":1.0,"text":"x","segment":"s"}"#
        );
        match parse_trace("t", src.as_bytes()) {
            Err(Error::InvalidEvent { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_reports_malformed_line() {
        let src = "\n{\"speaker_id\": \"A\"\n";
        match parse_trace("t", src.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stable_sort_keeps_input_order_on_ties() {
        let trace = Trace::new(
            "t",
            vec![ev("B", 1.0, 2.0, "s"), ev("A", 1.0, 3.0, "s"), ev("C", 0.0, 1.0, "s")],
        );
        let ids: Vec<&str> = trace.events().iter().map(|e| e.speaker_id.as_str()).collect();
        assert_eq!(ids, ["C", "B", "A"]);
    }

    fn hundred_second_session(label: &str) -> Trace {
        // one-second utterances back to back, midpoints at 0.5, 1.5, ..., 99.5
        let events = (0..100)
            .map(|i| ev("A", i as f64, i as f64 + 1.0, label))
            .collect();
        Trace::new(label, events)
    }

    #[test]
    fn four_sessions_trim_later_ones() {
        let sessions: Vec<Trace> = ["A", "B", "C", "D"]
            .iter()
            .map(|l| hundred_second_session(l))
            .collect();
        let out = concatenate_sessions(&sessions, 0.05, TrimPolicy::AllButFirst).unwrap();
        // midpoints 0.5..4.5 and 95.5..99.5 go: 10 events per trimmed session
        assert_eq!(out.events().len(), 100 + 3 * 90);
        assert_eq!(out.segments().len(), 4);
        assert_eq!(out.segments()[3].end, 400.0);
        assert_eq!(out.segments()[1].start, 100.0);
        let first_b = out.events().iter().find(|e| e.segment == "B").unwrap();
        assert_eq!(first_b.start_time, 105.0);
    }

    #[test]
    fn zero_trim_is_plain_concatenation() {
        let sessions = vec![hundred_second_session("A"), hundred_second_session("B")];
        let out = concatenate_sessions(&sessions, 0.0, TrimPolicy::AllButFirst).unwrap();
        assert_eq!(out.events().len(), 200);
    }

    #[test]
    fn single_session_is_unchanged() {
        let session = Trace::new("t", vec![ev("A", 10.0, 20.0, "s"), ev("B", 15.0, 30.0, "s")]);
        let out = concatenate_sessions(std::slice::from_ref(&session), 0.05, TrimPolicy::AllButFirst).unwrap();
        assert_eq!(out.events(), session.events());
        assert_eq!(out.segments()[0].start, 10.0);
        assert_eq!(out.segments()[0].end, 30.0);
    }

    #[test]
    fn concatenation_errors() {
        assert!(concatenate_sessions(&[], 0.05, TrimPolicy::All).is_err());
        let flat = Trace::new("t", vec![ev("A", 3.0, 3.0, "s")]);
        assert!(concatenate_sessions(&[flat], 0.05, TrimPolicy::All).is_err());
        let ok = hundred_second_session("A");
        assert!(concatenate_sessions(&[ok], 0.5, TrimPolicy::All).is_err());
    }

    #[test]
    fn sessions_round_trip_through_split() {
        let trace = Trace::new(
            "t",
            vec![ev("A", 0.0, 1.0, "x"), ev("B", 0.5, 2.0, "y"), ev("A", 1.0, 3.0, "x")],
        );
        let parts = trace.sessions();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].events().len(), 2);
        assert_eq!(parts[1].segments()[0].label, "y");
    }

    #[test]
    fn normalization_is_affine() {
        let trace = Trace::new(
            "t",
            vec![ev("A", 10.0, 20.0, "s"), ev("B", 60.0, 60.0, "s"), ev("A", 100.0, 110.0, "s")],
        );
        let n = normalize_timeline(&trace).unwrap();
        assert_eq!(n.events[0].start_time, 0.0);
        assert_eq!(n.events[1].start_time, 50.0);
        assert_eq!(n.events[2].end_time, 100.0);
    }

    #[test]
    fn normalization_identity_on_percent_trace() {
        let trace = Trace::new("t", vec![ev("A", 0.0, 30.0, "s"), ev("B", 40.0, 100.0, "s")]);
        let n = normalize_timeline(&trace).unwrap();
        for (a, b) in n.events.iter().zip(trace.events()) {
            assert!((a.start_time - b.start_time).abs() < 1e-9);
            assert!((a.end_time - b.end_time).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_rejects_zero_span() {
        let trace = Trace::new("t", vec![ev("A", 4.0, 4.0, "s")]);
        assert!(normalize_timeline(&trace).is_err());
        assert!(normalize_timeline(&Trace::new("t", vec![])).is_err());
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_index(0.0, 100), 0);
        assert_eq!(bin_index(100.0, 100), 99);
        assert_eq!(bin_index(50.5, 100), 50);
        assert_eq!(bin_index(99.999, 100), 99);
        assert_eq!(bin_index(100.0, 1), 0);
        assert_eq!(bin_index(50.0, 4), 2);
    }

    #[test]
    fn bin_trace_rejects_zero_bins() {
        let n = NormalizedTrace {
            trace_id: "t".into(),
            events: vec![],
        };
        assert!(bin_trace(&n, 0).is_err());
    }

    #[test]
    fn binning_places_midpoints() {
        let n = NormalizedTrace {
            trace_id: "t".into(),
            events: vec![ev("A", 0.0, 0.0, "s"), ev("B", 50.0, 51.0, "s"), ev("A", 100.0, 100.0, "s")],
        };
        let b = bin_trace(&n, 100).unwrap();
        assert_eq!(b.bins[0].len(), 1);
        assert_eq!(b.bins[50].len(), 1);
        assert_eq!(b.bins[99].len(), 1);
        assert_eq!(b.speakers, vec!["A".to_string(), "B".to_string()]);
    }
}
