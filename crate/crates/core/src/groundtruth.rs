//! Per-bin mean and deviation bands aggregated over a ground-truth corpus.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricId, MetricSeries, Trajectory};

pub const DEFAULT_BAND_MULTIPLIER: f64 = 2.0;
/// Smallest per-bin deviation a band will carry.
pub const DEFAULT_SIGMA_FLOOR: f64 = 0.01;

/// Where a band artifact came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_hash: String,
    pub config_hash: String,
}

/// μ ± multiplier·σ envelope for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBand {
    pub metric: MetricId,
    #[serde(rename = "B")]
    pub bin_count: usize,
    pub multiplier: f64,
    pub sigma_floor: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub n_traces: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl GateBand {
    pub fn lower(&self, bin: usize) -> f64 {
        self.mu[bin] - self.multiplier * self.sigma[bin]
    }

    pub fn upper(&self, bin: usize) -> f64 {
        self.mu[bin] + self.multiplier * self.sigma[bin]
    }

    /// Closed-interval membership test.
    pub fn contains(&self, bin: usize, value: f64) -> Result<bool> {
        if bin >= self.bin_count {
            return Err(Error::invalid(format!(
                "bin {bin} out of range for band with {} bins",
                self.bin_count
            )));
        }
        Ok(self.lower(bin) <= value && value <= self.upper(bin))
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut buf = serde_json::to_vec_pretty(self)?;
        buf.push(b'\n');
        Ok(buf)
    }

    pub fn from_json<R: Read>(src: R) -> Result<Self> {
        let band: GateBand = serde_json::from_reader(src)?;
        if band.mu.len() != band.bin_count || band.sigma.len() != band.bin_count {
            return Err(Error::invalid(format!(
                "band `{}` declares {} bins but carries {} μ and {} σ values",
                band.metric,
                band.bin_count,
                band.mu.len(),
                band.sigma.len()
            )));
        }
        Ok(band)
    }

    /// The band's μ as a dense series, used as the alignment target.
    pub fn mu_series(&self) -> MetricSeries {
        MetricSeries::dense(self.metric.clone(), self.mu.clone())
    }
}

/// Free-function form of [`GateBand::contains`].
pub fn band_contains(band: &GateBand, bin: usize, value: f64) -> Result<bool> {
    band.contains(bin, value)
}

/// Per-bin mean and sample standard deviation (n − 1) of one metric across
/// trajectories, with σ floored at `sigma_floor`.
pub fn build_band(
    trajectories: &[Trajectory],
    metric: &MetricId,
    multiplier: f64,
    sigma_floor: f64,
) -> Result<GateBand> {
    if trajectories.len() < 2 {
        return Err(Error::invalid(format!(
            "a band needs at least 2 trajectories, got {}",
            trajectories.len()
        )));
    }
    if !(multiplier > 0.0) {
        return Err(Error::invalid(format!("band multiplier {multiplier} must be positive")));
    }
    if !(sigma_floor >= 0.0) {
        return Err(Error::invalid(format!("sigma floor {sigma_floor} must be non-negative")));
    }
    let bins = trajectories[0].bin_count;
    let mut columns = Vec::with_capacity(trajectories.len());
    for t in trajectories {
        if t.bin_count != bins {
            return Err(Error::invalid(format!(
                "trajectory `{}` has {} bins, expected {bins}",
                t.trace_id, t.bin_count
            )));
        }
        let series = t.get(metric).ok_or_else(|| {
            Error::MetricMismatch(format!("trajectory `{}` lacks metric `{metric}`", t.trace_id))
        })?;
        if series.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "trajectory `{}` has unfilled `{metric}` bins; bands need dense series",
                t.trace_id
            )));
        }
        columns.push(&series.values);
    }

    let n = columns.len() as f64;
    let mut mu = Vec::with_capacity(bins);
    let mut sigma = Vec::with_capacity(bins);
    for b in 0..bins {
        let mean = columns.iter().map(|c| c[b]).sum::<f64>() / n;
        let var = columns.iter().map(|c| (c[b] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        mu.push(mean);
        sigma.push(var.sqrt().max(sigma_floor));
    }
    Ok(GateBand {
        metric: metric.clone(),
        bin_count: bins,
        multiplier,
        sigma_floor,
        mu,
        sigma,
        n_traces: trajectories.len(),
        provenance: None,
    })
}

/// Assembles the μ series of several bands into one target trajectory.
pub fn target_trajectory(bands: &[GateBand]) -> Result<Trajectory> {
    Trajectory::new("ground-truth", bands.iter().map(GateBand::mu_series).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(id: &str, values: Vec<f64>) -> Trajectory {
        Trajectory::new(id, vec![MetricSeries::dense(MetricId::Hierarchy, values)]).unwrap()
    }

    #[test]
    fn two_point_band() {
        let band = build_band(
            &[traj("a", vec![0.3]), traj("b", vec![0.5])],
            &MetricId::Hierarchy,
            2.0,
            DEFAULT_SIGMA_FLOOR,
        )
        .unwrap();
        // sample stdev of {0.3, 0.5}: sqrt(((−0.1)² + 0.1²) / 1) = sqrt(0.02)
        let sd = 0.02f64.sqrt();
        assert!((band.mu[0] - 0.4).abs() < 1e-12);
        assert!((band.sigma[0] - sd).abs() < 1e-12);
        assert!((band.sigma[0] - 0.1414).abs() < 1e-4);
        assert!((band.lower(0) - 0.1172).abs() < 1e-4);
        assert!((band.upper(0) - 0.6828).abs() < 1e-4);
    }

    #[test]
    fn identical_traces_hit_the_floor() {
        let band = build_band(
            &[traj("a", vec![0.3, 0.7]), traj("b", vec![0.3, 0.7])],
            &MetricId::Hierarchy,
            2.0,
            DEFAULT_SIGMA_FLOOR,
        )
        .unwrap();
        assert_eq!(band.sigma, vec![DEFAULT_SIGMA_FLOOR; 2]);
        assert!(band.contains(0, 0.3).unwrap());
    }

    #[test]
    fn fifteen_traces_hundred_bins() {
        let ts: Vec<Trajectory> = (0..15)
            .map(|i| traj(&i.to_string(), (0..100).map(|b| (b + i) as f64 / 200.0).collect()))
            .collect();
        let band = build_band(&ts, &MetricId::Hierarchy, 2.0, DEFAULT_SIGMA_FLOOR).unwrap();
        assert_eq!(band.mu.len(), 100);
        assert_eq!(band.sigma.len(), 100);
        assert_eq!(band.n_traces, 15);
    }

    #[test]
    fn build_errors() {
        let one = [traj("a", vec![0.1])];
        assert!(build_band(&one, &MetricId::Hierarchy, 2.0, 0.01).is_err());
        let mismatched = [traj("a", vec![0.1]), traj("b", vec![0.1, 0.2])];
        assert!(build_band(&mismatched, &MetricId::Hierarchy, 2.0, 0.01).is_err());
        let ok = [traj("a", vec![0.1]), traj("b", vec![0.2])];
        assert!(build_band(&ok, &MetricId::Cohesion, 2.0, 0.01).is_err());
        assert!(build_band(&ok, &MetricId::Hierarchy, 0.0, 0.01).is_err());
    }

    #[test]
    fn membership_is_closed() {
        let band = build_band(
            &[traj("a", vec![0.3]), traj("b", vec![0.5])],
            &MetricId::Hierarchy,
            2.0,
            DEFAULT_SIGMA_FLOOR,
        )
        .unwrap();
        assert!(band_contains(&band, 0, 0.4).unwrap());
        assert!(band_contains(&band, 0, band.upper(0)).unwrap());
        assert!(band_contains(&band, 0, band.lower(0)).unwrap());
        assert!(!band_contains(&band, 0, 0.4 + 3.0 * band.sigma[0]).unwrap());
        assert!(band_contains(&band, 1, 0.4).is_err());
    }

    #[test]
    fn json_round_trip_keeps_provenance() {
        let band = build_band(
            &[traj("a", vec![0.3]), traj("b", vec![0.5])],
            &MetricId::Hierarchy,
            2.0,
            DEFAULT_SIGMA_FLOOR,
        )
        .unwrap()
        .with_provenance(Provenance {
            source_hash: "abc".into(),
            config_hash: "def".into(),
        });
        let text = String::from_utf8(band.to_json().unwrap()).unwrap();
        assert!(text.contains("\"B\": 1"));
        assert_eq!(GateBand::from_json(text.as_bytes()).unwrap(), band);
    }

    proptest! {
        #[test]
        fn translation_shifts_mu_only(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 2..8),
            c in -0.5f64..0.5,
        ) {
            let ts: Vec<Trajectory> = rows.iter().enumerate()
                .map(|(i, r)| traj(&i.to_string(), r.clone())).collect();
            let shifted: Vec<Trajectory> = rows.iter().enumerate()
                .map(|(i, r)| traj(&i.to_string(), r.iter().map(|v| v + c).collect())).collect();
            let a = build_band(&ts, &MetricId::Hierarchy, 2.0, 0.0).unwrap();
            let b = build_band(&shifted, &MetricId::Hierarchy, 2.0, 0.0).unwrap();
            for i in 0..5 {
                prop_assert!((b.mu[i] - a.mu[i] - c).abs() < 1e-9);
                prop_assert!((b.sigma[i] - a.sigma[i]).abs() < 1e-9);
                prop_assert!(a.lower(i) <= a.upper(i));
            }
        }
    }
}
