//! Waypoint gates: windowed value constraints a trajectory has to pass
//! through, and the pass/prune verdicts they produce.

use std::io::Read;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundtruth::GateBand;
use crate::metrics::{MetricId, Trajectory};
use crate::trace::{bin_index, TIMELINE_END};

/// A window on the percent timeline and the value range the metric must
/// occupy there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub metric: MetricId,
    pub t_min: f64,
    pub t_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Gate {
    pub fn new(
        name: impl Into<String>,
        metric: MetricId,
        window: (f64, f64),
        v_min: f64,
        v_max: f64,
    ) -> Result<Self> {
        let gate = Gate {
            name: name.into(),
            metric,
            t_min: window.0,
            t_max: window.1,
            v_min,
            v_max,
        };
        gate.validate()?;
        Ok(gate)
    }

    pub fn validate(&self) -> Result<()> {
        check_window(&self.name, self.t_min, self.t_max)?;
        if !(self.v_min <= self.v_max) {
            return Err(Error::invalid(format!(
                "gate `{}`: v_min {} exceeds v_max {}",
                self.name, self.v_min, self.v_max
            )));
        }
        Ok(())
    }

    pub fn admits(&self, observed: f64) -> bool {
        self.v_min <= observed && observed <= self.v_max
    }

    /// `name[metric]`, unique within a gate set built per metric.
    pub fn label(&self) -> String {
        format!("{}[{}]", self.name, self.metric)
    }
}

fn check_window(name: &str, t_min: f64, t_max: f64) -> Result<()> {
    if !(0.0 <= t_min && t_min <= t_max && t_max <= TIMELINE_END) {
        return Err(Error::invalid(format!(
            "window `{name}` [{t_min}, {t_max}] is not a non-empty interval inside [0, 100]"
        )));
    }
    Ok(())
}

/// Bins whose interior overlaps the closed window `[t_min, t_max]`. A
/// degenerate window selects the single bin containing it.
pub fn window_bins(t_min: f64, t_max: f64, bins: usize) -> RangeInclusive<usize> {
    let first = bin_index(t_min, bins);
    if t_max <= t_min {
        return first..=first;
    }
    let width = TIMELINE_END / bins as f64;
    let last = ((t_max / width).ceil() as usize).saturating_sub(1).min(bins - 1);
    first..=last.max(first)
}

/// Derives one gate per window: the widest band envelope over the bins the
/// window covers.
pub fn gates_from_band(band: &GateBand, windows: &[(String, (f64, f64))]) -> Result<Vec<Gate>> {
    windows
        .iter()
        .map(|(name, (t_min, t_max))| {
            check_window(name, *t_min, *t_max)?;
            let bins = window_bins(*t_min, *t_max, band.bin_count);
            if bins.is_empty() {
                return Err(Error::invalid(format!("window `{name}` covers no bins")));
            }
            let v_min = bins.clone().map(|b| band.lower(b)).fold(f64::INFINITY, f64::min);
            let v_max = bins.map(|b| band.upper(b)).fold(f64::NEG_INFINITY, f64::max);
            Gate::new(name.clone(), band.metric.clone(), (*t_min, *t_max), v_min, v_max)
        })
        .collect()
}

/// One published (or reconstructed) phase level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCenter {
    pub phase: &'static str,
    pub time: f64,
    pub metric: BuiltinMetric,
    pub value: f64,
    /// False for levels filled in by this crate where the case study gives none.
    pub published: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinMetric {
    Hierarchy,
    Divergence,
    Cohesion,
}

impl From<BuiltinMetric> for MetricId {
    fn from(m: BuiltinMetric) -> Self {
        match m {
            BuiltinMetric::Hierarchy => MetricId::Hierarchy,
            BuiltinMetric::Divergence => MetricId::Divergence,
            BuiltinMetric::Cohesion => MetricId::Cohesion,
        }
    }
}

/// Tuckman phases and their times on the percent timeline.
pub const TUCKMAN_PHASES: [(&str, f64); 4] = [
    ("Forming", 25.0),
    ("Storming", 45.0),
    ("Norming", 70.0),
    ("Performing", 98.0),
];

const fn center(
    phase: &'static str,
    time: f64,
    metric: BuiltinMetric,
    value: f64,
    published: bool,
) -> PhaseCenter {
    PhaseCenter {
        phase,
        time,
        metric,
        value,
        published,
    }
}

/// Gate centers of the small-group case study: eight published levels plus
/// four unpublished ones chosen to continue the same phase story.
pub const TUCKMAN_CENTERS: [PhaseCenter; 12] = {
    use BuiltinMetric::*;
    [
        center("Forming", 25.0, Hierarchy, 0.48, true),
        center("Forming", 25.0, Divergence, 0.30, true),
        center("Forming", 25.0, Cohesion, 0.30, false),
        center("Storming", 45.0, Hierarchy, 0.37, true),
        center("Storming", 45.0, Divergence, 0.36, false),
        center("Storming", 45.0, Cohesion, 0.40, true),
        center("Norming", 70.0, Hierarchy, 0.32, true),
        center("Norming", 70.0, Divergence, 0.30, false),
        center("Norming", 70.0, Cohesion, 0.50, true),
        center("Performing", 98.0, Hierarchy, 0.35, true),
        center("Performing", 98.0, Divergence, 0.28, false),
        center("Performing", 98.0, Cohesion, 0.42, true),
    ]
};

pub const DEFAULT_GATE_VALUE_HALF_WIDTH: f64 = 0.1;
pub const DEFAULT_GATE_WINDOW_HALF_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuckmanConfig {
    /// Gate spans center ± this in metric units.
    pub value_half_width: f64,
    /// Window spans phase time ± this in percent-timeline units.
    pub window_half_width: f64,
}

impl Default for TuckmanConfig {
    fn default() -> Self {
        TuckmanConfig {
            value_half_width: DEFAULT_GATE_VALUE_HALF_WIDTH,
            window_half_width: DEFAULT_GATE_WINDOW_HALF_WIDTH,
        }
    }
}

/// Phase windows clamped to the timeline.
pub fn tuckman_windows(half_width: f64) -> Vec<(String, (f64, f64))> {
    TUCKMAN_PHASES
        .iter()
        .map(|(name, t)| {
            let lo = (t - half_width).max(0.0);
            let hi = (t + half_width).min(TIMELINE_END);
            (name.to_string(), (lo, hi))
        })
        .collect()
}

pub fn tuckman_gates(cfg: &TuckmanConfig) -> Vec<Gate> {
    TUCKMAN_CENTERS
        .iter()
        .map(|c| {
            let lo = (c.time - cfg.window_half_width).max(0.0);
            let hi = (c.time + cfg.window_half_width).min(TIMELINE_END);
            Gate {
                name: c.phase.to_string(),
                metric: c.metric.into(),
                t_min: lo,
                t_max: hi,
                v_min: c.value - cfg.value_half_width,
                v_max: c.value + cfg.value_half_width,
            }
        })
        .collect()
}

pub fn default_tuckman_gates() -> Vec<Gate> {
    tuckman_gates(&TuckmanConfig::default())
}

/// How the in-window values of a trajectory are summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowStat {
    #[default]
    Mean,
    Min,
    Max,
}

impl WindowStat {
    fn summarize(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        match self {
            WindowStat::Mean => values.iter().sum::<f64>() / values.len() as f64,
            WindowStat::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            WindowStat::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub gate: Gate,
    pub observed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateEvaluation {
    pub verdicts: Vec<GateVerdict>,
    pub pruned: bool,
}

impl GateEvaluation {
    pub fn failed(&self) -> impl Iterator<Item = &GateVerdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }
}

/// Checks every gate, never stopping at the first failure. A trajectory is
/// pruned when any gate fails.
pub fn evaluate_gates(
    trajectory: &Trajectory,
    gates: &[Gate],
    stat: WindowStat,
) -> Result<GateEvaluation> {
    let mut verdicts = Vec::with_capacity(gates.len());
    for gate in gates {
        let series = trajectory.get(&gate.metric).ok_or_else(|| {
            Error::MetricMismatch(format!(
                "gate `{}` needs metric `{}`, absent from trajectory `{}`",
                gate.name, gate.metric, trajectory.trace_id
            ))
        })?;
        let window: Vec<f64> = window_bins(gate.t_min, gate.t_max, trajectory.bin_count)
            .map(|b| series.values[b])
            .filter(|v| v.is_finite())
            .collect();
        let observed = stat.summarize(&window);
        verdicts.push(GateVerdict {
            gate: gate.clone(),
            observed,
            passed: gate.admits(observed),
        });
    }
    let pruned = verdicts.iter().any(|v| !v.passed);
    Ok(GateEvaluation { verdicts, pruned })
}

pub fn gates_to_json(gates: &[Gate]) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(gates)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn gates_from_json<R: Read>(src: R) -> Result<Vec<Gate>> {
    let gates: Vec<Gate> = serde_json::from_reader(src)?;
    for g in &gates {
        g.validate()?;
    }
    Ok(gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricSeries;

    fn constant_band(mu: f64, sigma: f64) -> GateBand {
        GateBand {
            metric: MetricId::Hierarchy,
            bin_count: 100,
            multiplier: 2.0,
            sigma_floor: 0.01,
            mu: vec![mu; 100],
            sigma: vec![sigma; 100],
            n_traces: 15,
            provenance: None,
        }
    }

    fn traj(values: Vec<f64>) -> Trajectory {
        Trajectory::new("t", vec![MetricSeries::dense(MetricId::Hierarchy, values)]).unwrap()
    }

    #[test]
    fn window_bin_selection() {
        assert_eq!(window_bins(20.0, 30.0, 100), 20..=29);
        assert_eq!(window_bins(93.0, 100.0, 100), 93..=99);
        assert_eq!(window_bins(20.5, 20.5, 100), 20..=20);
        assert_eq!(window_bins(100.0, 100.0, 100), 99..=99);
        assert_eq!(window_bins(0.0, 100.0, 4), 0..=3);
        assert_eq!(window_bins(20.0, 30.5, 100), 20..=30);
    }

    #[test]
    fn constant_band_gate() {
        let band = constant_band(0.4, 0.05);
        let gates = gates_from_band(&band, &[("Mid".into(), (20.0, 30.0))]).unwrap();
        assert_eq!(gates.len(), 1);
        assert!((gates[0].v_min - 0.3).abs() < 1e-12);
        assert!((gates[0].v_max - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bad_window_is_rejected() {
        let band = constant_band(0.4, 0.05);
        assert!(gates_from_band(&band, &[("x".into(), (30.0, 20.0))]).is_err());
        assert!(gates_from_band(&band, &[("x".into(), (90.0, 101.0))]).is_err());
        assert!(gates_from_band(&band, &[("x".into(), (-1.0, 10.0))]).is_err());
    }

    #[test]
    fn tuckman_windows_give_twelve_gates_for_three_bands() {
        let windows = tuckman_windows(DEFAULT_GATE_WINDOW_HALF_WIDTH);
        let mut total = 0;
        for m in MetricId::DEFAULTS {
            let band = GateBand {
                metric: m,
                ..constant_band(0.4, 0.05)
            };
            total += gates_from_band(&band, &windows).unwrap().len();
        }
        assert_eq!(total, 12);
    }

    #[test]
    fn default_centers_match_case_study() {
        let find = |phase: &str, m: BuiltinMetric| {
            TUCKMAN_CENTERS
                .iter()
                .find(|c| c.phase == phase && c.metric == m)
                .unwrap()
                .value
        };
        assert_eq!(find("Forming", BuiltinMetric::Hierarchy), 0.48);
        assert_eq!(find("Norming", BuiltinMetric::Cohesion), 0.5);
        assert_eq!(find("Performing", BuiltinMetric::Hierarchy), 0.35);
        let gates = default_tuckman_gates();
        assert_eq!(gates.len(), 12);
        let performing = &gates[9];
        assert_eq!((performing.t_min, performing.t_max), (93.0, 100.0));
        assert!(((performing.v_min + performing.v_max) / 2.0 - 0.35).abs() < 1e-12);
        assert_eq!(TUCKMAN_CENTERS.iter().filter(|c| c.published).count(), 8);
    }

    #[test]
    fn center_trajectory_passes_band_gates() {
        let band = constant_band(0.4, 0.05);
        let gates = gates_from_band(&band, &tuckman_windows(5.0)).unwrap();
        let eval = evaluate_gates(&traj(band.mu.clone()), &gates, WindowStat::Mean).unwrap();
        assert!(!eval.pruned);
        assert_eq!(eval.verdicts.len(), 4);
    }

    #[test]
    fn three_sigma_excursion_is_pruned_without_short_circuit() {
        let band = constant_band(0.4, 0.05);
        let gates = gates_from_band(&band, &tuckman_windows(5.0)).unwrap();
        let mut values = band.mu.clone();
        for v in &mut values[20..30] {
            *v = 0.4 + 3.0 * 0.05;
        }
        let eval = evaluate_gates(&traj(values), &gates, WindowStat::Mean).unwrap();
        assert!(eval.pruned);
        assert_eq!(eval.verdicts.len(), 4);
        assert_eq!(eval.failed().count(), 1);
        assert_eq!(eval.failed().next().unwrap().gate.name, "Forming");
    }

    #[test]
    fn boundary_value_passes() {
        let gate = Gate::new("g", MetricId::Hierarchy, (0.0, 100.0), 0.2, 0.5).unwrap();
        let eval = evaluate_gates(&traj(vec![0.5; 10]), &[gate], WindowStat::Mean).unwrap();
        assert!(eval.verdicts[0].passed);
    }

    #[test]
    fn window_statistics() {
        let values: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let gate = Gate::new("g", MetricId::Hierarchy, (0.0, 100.0), 0.0, 1.0).unwrap();
        let t = traj(values);
        let mean = evaluate_gates(&t, std::slice::from_ref(&gate), WindowStat::Mean).unwrap();
        let min = evaluate_gates(&t, std::slice::from_ref(&gate), WindowStat::Min).unwrap();
        let max = evaluate_gates(&t, &[gate], WindowStat::Max).unwrap();
        assert!((mean.verdicts[0].observed - 0.45).abs() < 1e-12);
        assert_eq!(min.verdicts[0].observed, 0.0);
        assert_eq!(max.verdicts[0].observed, 0.9);
    }

    #[test]
    fn missing_metric_is_an_error() {
        let gate = Gate::new("g", MetricId::Cohesion, (0.0, 10.0), 0.0, 1.0).unwrap();
        assert!(evaluate_gates(&traj(vec![0.1; 10]), &[gate], WindowStat::Mean).is_err());
    }

    #[test]
    fn widening_never_flips_pass_to_fail() {
        let t = traj((0..100).map(|i| (i as f64 / 100.0).sin()).collect());
        for g in default_tuckman_gates() {
            let g = Gate { metric: MetricId::Hierarchy, ..g };
            let before = evaluate_gates(&t, std::slice::from_ref(&g), WindowStat::Mean).unwrap();
            let wider = Gate {
                v_min: g.v_min - 0.2,
                v_max: g.v_max + 0.2,
                ..g
            };
            let after = evaluate_gates(&t, &[wider], WindowStat::Mean).unwrap();
            assert!(!before.verdicts[0].passed || after.verdicts[0].passed);
        }
    }

    #[test]
    fn gate_file_round_trip() {
        let gates = default_tuckman_gates();
        let bytes = gates_to_json(&gates).unwrap();
        assert_eq!(gates_from_json(bytes.as_slice()).unwrap(), gates);
        let bad = br#"[{"name":"x","metric":"hierarchy","t_min":0,"t_max":10,"v_min":0.5,"v_max":0.1}]"#;
        assert!(gates_from_json(&bad[..]).is_err());
    }
}
