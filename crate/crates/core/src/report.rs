//! Validity reports, the cost table and plot-data export.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::alignment::ValidityScore;
use crate::error::Result;
use crate::gates::GateVerdict;
use crate::groundtruth::{GateBand, Provenance};
use crate::metrics::{MetricId, Trajectory};

/// Rounds to 3 decimals, ties to even.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round_ties_even() / 1000.0
}

/// Display form used in both the CSV table and the JSON report.
pub fn display3(x: f64) -> String {
    format!("{:.3}", round3(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRef {
    pub metric: MetricId,
    pub n_traces: usize,
    pub multiplier: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// One row of the cost table, already rounded for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TableRow {
    Scored {
        sim: String,
        cells: Vec<String>,
        total: String,
    },
    Pruned {
        sim: String,
        failed_gates: Vec<String>,
    },
}

impl TableRow {
    pub fn sim(&self) -> &str {
        match self {
            TableRow::Scored { sim, .. } | TableRow::Pruned { sim, .. } => sim,
        }
    }

    fn record(&self, width: usize) -> Vec<String> {
        match self {
            TableRow::Scored { sim, cells, total } => {
                let mut rec = vec![sim.clone()];
                rec.extend(cells.iter().cloned());
                rec.push(total.clone());
                rec
            }
            TableRow::Pruned { sim, failed_gates } => {
                let mut rec = vec![sim.clone(), format!("PRUNED({})", failed_gates.join(";"))];
                rec.resize(width, String::new());
                rec
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub trace_id: String,
    pub verdicts: Vec<GateVerdict>,
    pub pruned: bool,
    /// Absent when the trajectory was pruned before scoring.
    pub score: Option<ValidityScore>,
    pub row: TableRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlot {
    pub metric: MetricId,
    pub lower: Vec<f64>,
    pub mu: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BandPlot {
    pub fn from_band(band: &GateBand) -> Self {
        let bins = 0..band.bin_count;
        BandPlot {
            metric: band.metric.clone(),
            lower: bins.clone().map(|b| band.lower(b)).collect(),
            mu: band.mu.clone(),
            upper: bins.map(|b| band.upper(b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub bands: Vec<BandPlot>,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub config_hash: String,
    pub bands: Vec<BandRef>,
    /// Column headings of the cost table, `Sim` first and `Total` last.
    pub table_header: Vec<String>,
    pub traces: Vec<TraceReport>,
    pub plot: PlotData,
}

impl ValidityReport {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut buf = serde_json::to_vec_pretty(self)?;
        buf.push(b'\n');
        Ok(buf)
    }

    pub fn from_json<R: Read>(src: R) -> Result<Self> {
        Ok(serde_json::from_reader(src)?)
    }

    /// Cost table: `Sim,<metric...>,Total`; pruned rows carry
    /// `PRUNED(gate;...)` in the first metric column.
    pub fn table_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.table_header)?;
        for t in &self.traces {
            w.write_record(t.row.record(self.table_header.len()))?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    /// Per-metric plot data: `bin,band_lower,band_mu,band_upper,<sim...>`.
    pub fn plot_csvs(&self) -> Result<Vec<(MetricId, Vec<u8>)>> {
        self.plot
            .bands
            .iter()
            .map(|band| {
                let mut w = csv::Writer::from_writer(Vec::new());
                let mut header = vec![
                    "bin".to_string(),
                    "band_lower".into(),
                    "band_mu".into(),
                    "band_upper".into(),
                ];
                let sims: Vec<(&str, Option<&Vec<f64>>)> = self
                    .plot
                    .trajectories
                    .iter()
                    .map(|t| (t.trace_id.as_str(), t.get(&band.metric).map(|s| &s.values)))
                    .collect();
                header.extend(sims.iter().map(|(id, _)| id.to_string()));
                w.write_record(&header)?;
                for b in 0..band.mu.len() {
                    let mut rec = vec![
                        b.to_string(),
                        band.lower[b].to_string(),
                        band.mu[b].to_string(),
                        band.upper[b].to_string(),
                    ];
                    rec.extend(sims.iter().map(|(_, vals)| {
                        vals.and_then(|v| v.get(b))
                            .filter(|v| v.is_finite())
                            .map(f64::to_string)
                            .unwrap_or_default()
                    }));
                    w.write_record(&rec)?;
                }
                w.flush()?;
                Ok((band.metric.clone(), w.into_inner().map_err(|e| e.into_error())?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_even_at_three_places() {
        assert_eq!(round3(0.0485), 0.048);
        assert_eq!(display3(0.0965), "0.096");
        assert_eq!(display3(0.031 + 0.013 + 0.052), "0.096");
        assert_eq!(display3(0.2), "0.200");
        assert_eq!(display3(1.0 / 3.0), "0.333");
        // exact binary tie: 2.5 thousandths sits on a representable half
        assert_eq!(round3(0.0025), 0.002);
    }

    #[test]
    fn pruned_row_layout() {
        let row = TableRow::Pruned {
            sim: "C".into(),
            failed_gates: vec!["Norming[cohesion]".into(), "Performing[cohesion]".into()],
        };
        assert_eq!(
            row.record(5),
            vec!["C", "PRUNED(Norming[cohesion];Performing[cohesion])", "", "", ""]
        );
    }
}
