//! End-to-end orchestration: logs → trajectories → bands → gates → report.
//!
//! The `*_files` functions are what the CLI verbs call; they read inputs,
//! process independent traces on a worker pool and write outputs atomically.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::alignment::score_trajectory;
use crate::config::{sha256_hex, GateSource, PipelineConfig};
use crate::error::{Error, Result};
use crate::gates::{evaluate_gates, gates_from_band, gates_from_json, tuckman_gates, tuckman_windows, Gate};
use crate::groundtruth::{build_band, target_trajectory, GateBand, Provenance};
use crate::metrics::{extract_trajectory, CategoryTable, EmbeddingProvider, MetricContext, Trajectory};
use crate::report::{display3, BandPlot, BandRef, PlotData, TableRow, TraceReport, ValidityReport};
use crate::synth::{generate, ArchetypeKind, SynthArchetype};
use crate::trace::{bin_trace, concatenate_sessions, normalize_timeline, parse_trace, Trace};

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn worker_pool(cfg: &PipelineConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into())
}

/// Resources shared by every extraction under one config.
pub struct Extractor {
    cfg: PipelineConfig,
    provider: Box<dyn EmbeddingProvider>,
    categories: CategoryTable,
}

impl Extractor {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Extractor {
            cfg: cfg.clone(),
            provider: cfg.provider()?,
            categories: cfg.categories()?,
        })
    }

    /// Splits the trace into its sessions, concatenates them with trimming,
    /// normalizes, bins and computes the configured metrics.
    pub fn extract(&self, trace: &Trace) -> Result<Trajectory> {
        let sessions = trace.sessions();
        let joined = concatenate_sessions(&sessions, self.cfg.trim_fraction, self.cfg.trim_policy)?;
        let normalized = normalize_timeline(&joined)?;
        let binned = bin_trace(&normalized, self.cfg.bins)?;
        let ctx = MetricContext {
            provider: self.provider.as_ref(),
            categories: &self.categories,
        };
        extract_trajectory(&binned, &self.cfg.metrics, &ctx, self.cfg.fill)
    }
}

/// Parses one JSON-Lines log; the trace id is the file stem.
pub fn read_trace(path: &Path) -> Result<Trace> {
    let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_trace(file_stem(path), BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    Trajectory::from_json(BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn read_band(path: &Path) -> Result<GateBand> {
    let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    GateBand::from_json(BufReader::new(file)).map_err(|e| e.in_file(path))
}

/// Extracts one trajectory per log, writing `<stem>.trajectory.json` and
/// `<stem>.trajectory.csv` into `out_dir`. Returns the JSON paths in input
/// order.
pub fn extract_files(inputs: &[PathBuf], out_dir: &Path, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let extractor = Extractor::new(cfg)?;
    let trajectories: Vec<Trajectory> = worker_pool(cfg)?.install(|| {
        inputs
            .par_iter()
            .map(|path| {
                let trace = read_trace(path)?;
                extractor.extract(&trace).map_err(|e| e.in_file(path))
            })
            .collect::<Result<_>>()
    })?;

    let mut written = Vec::with_capacity(trajectories.len());
    for t in &trajectories {
        let json_path = out_dir.join(format!("{}.trajectory.json", t.trace_id));
        write_atomic(&json_path, &t.to_json()?)?;
        let mut csv = Vec::new();
        t.write_csv(&mut csv)?;
        write_atomic(&out_dir.join(format!("{}.trajectory.csv", t.trace_id)), &csv)?;
        written.push(json_path);
    }
    Ok(written)
}

/// One band per configured metric.
pub fn build_bands(trajectories: &[Trajectory], cfg: &PipelineConfig) -> Result<Vec<GateBand>> {
    cfg.metrics
        .iter()
        .map(|m| build_band(trajectories, m, cfg.multiplier, cfg.sigma_floor))
        .collect()
}

/// Builds bands from trajectory files and writes `band_<metric>.json`.
/// The source hash covers the input bytes in the order given.
pub fn groundtruth_files(inputs: &[PathBuf], out_dir: &Path, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if inputs.len() < 2 {
        return Err(Error::invalid(format!(
            "ground truth needs at least 2 trajectories, got {}",
            inputs.len()
        )));
    }
    let mut source = Vec::new();
    let mut trajectories = Vec::with_capacity(inputs.len());
    for path in inputs {
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        source.extend_from_slice(&sha256_hex(&bytes).into_bytes());
        trajectories.push(Trajectory::from_json(bytes.as_slice()).map_err(|e| e.in_file(path))?);
    }
    let provenance = Provenance {
        source_hash: sha256_hex(&source),
        config_hash: cfg.hash(),
    };

    let mut written = Vec::new();
    for band in build_bands(&trajectories, cfg)? {
        let band = band.with_provenance(provenance.clone());
        let path = out_dir.join(format!("band_{}.json", band.metric.key()));
        write_atomic(&path, &band.to_json()?)?;
        written.push(path);
    }
    Ok(written)
}

/// The gate set named by the config.
pub fn resolve_gates(cfg: &PipelineConfig, bands: &[GateBand]) -> Result<Vec<Gate>> {
    match cfg.gate_source {
        GateSource::Band => {
            let windows = tuckman_windows(cfg.gate_window_half_width);
            let mut gates = Vec::new();
            for band in bands {
                gates.extend(gates_from_band(band, &windows)?);
            }
            Ok(gates)
        }
        GateSource::Tuckman => Ok(tuckman_gates(&cfg.tuckman())
            .into_iter()
            .filter(|g| cfg.metrics.contains(&g.metric))
            .collect()),
        GateSource::File => {
            let path = cfg.gates_file.as_ref().expect("validated");
            let file = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
            gates_from_json(BufReader::new(file)).map_err(|e| e.in_file(path))
        }
    }
}

/// Gate-checks every simulated trajectory and scores the survivors against
/// the bands' μ series.
pub fn score(
    sims: &[Trajectory],
    bands: &[GateBand],
    gates: &[Gate],
    cfg: &PipelineConfig,
) -> Result<ValidityReport> {
    if bands.is_empty() {
        return Err(Error::invalid("no ground-truth bands given"));
    }
    // table columns follow the canonical metric order, not argument order
    let mut bands = bands.to_vec();
    bands.sort_by(|a, b| a.metric.cmp(&b.metric));
    let target = target_trajectory(&bands)?;
    let mut header = vec!["Sim".to_string()];
    header.extend(target.metrics().map(|m| m.display_name()));
    header.push("Total".into());

    let traces = worker_pool(cfg)?.install(|| {
        sims.par_iter()
            .map(|sim| -> Result<TraceReport> {
                let eval = evaluate_gates(sim, gates, cfg.window_stat)?;
                let score = if eval.pruned && cfg.prune_before_scoring {
                    None
                } else {
                    Some(score_trajectory(sim, &target, &cfg.weights, cfg.delta, cfg.dtw_window)?)
                };
                let row = match &score {
                    Some(s) if !eval.pruned || !cfg.prune_before_scoring => TableRow::Scored {
                        sim: sim.trace_id.clone(),
                        cells: s.per_dimension.iter().map(|r| display3(r.normalized_cost)).collect(),
                        total: display3(s.total),
                    },
                    _ => TableRow::Pruned {
                        sim: sim.trace_id.clone(),
                        failed_gates: eval.failed().map(|v| v.gate.label()).collect(),
                    },
                };
                Ok(TraceReport {
                    trace_id: sim.trace_id.clone(),
                    pruned: eval.pruned,
                    verdicts: eval.verdicts,
                    score,
                    row,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(ValidityReport {
        config_hash: cfg.hash(),
        bands: bands
            .iter()
            .map(|b| BandRef {
                metric: b.metric.clone(),
                n_traces: b.n_traces,
                multiplier: b.multiplier,
                provenance: b.provenance.clone(),
            })
            .collect(),
        table_header: header,
        traces,
        plot: PlotData {
            bands: bands.iter().map(BandPlot::from_band).collect(),
            trajectories: sims.to_vec(),
        },
    })
}

/// Reads sims and bands, scores, and writes `report.json` and `report.csv`.
pub fn score_files(
    sim_paths: &[PathBuf],
    band_paths: &[PathBuf],
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<ValidityReport> {
    cfg.validate()?;
    let bands = band_paths.iter().map(|p| read_band(p)).collect::<Result<Vec<_>>>()?;
    let sims = sim_paths
        .iter()
        .map(|p| read_trajectory(p))
        .collect::<Result<Vec<_>>>()?;
    let gates = resolve_gates(cfg, &bands)?;
    let report = score(&sims, &bands, &gates, cfg)?;
    write_atomic(&out_dir.join("report.json"), &report.to_json()?)?;
    write_atomic(&out_dir.join("report.csv"), &report.table_csv()?)?;
    Ok(report)
}

/// Writes `plot_<metric>.csv` for every band in the report.
pub fn report_files(report_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let file = fs::File::open(report_path).map_err(|e| Error::from(e).in_file(report_path))?;
    let report = ValidityReport::from_json(BufReader::new(file)).map_err(|e| e.in_file(report_path))?;
    let mut written = Vec::new();
    for (metric, bytes) in report.plot_csvs()? {
        let path = out_dir.join(format!("plot_{}.csv", metric.key()));
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `<trace_id>.jsonl` for each trace.
pub fn write_traces(traces: &[Trace], out_dir: &Path) -> Result<Vec<PathBuf>> {
    traces
        .iter()
        .map(|t| {
            let mut buf = Vec::new();
            t.write_jsonl(&mut buf)?;
            let path = out_dir.join(format!("{}.jsonl", t.trace_id));
            write_atomic(&path, &buf)?;
            Ok(path)
        })
        .collect()
}

/// Generates an archetype trajectory with the config's bins, noise and seed.
pub fn synth_archetype(kind: ArchetypeKind, cfg: &PipelineConfig) -> Result<Trajectory> {
    generate(&SynthArchetype::new(kind, cfg.noise_sigma, cfg.seed), cfg.bins)
}
