use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slalom_core::config::{GateSource, CONFIG_ENV};
use slalom_core::gates::{gates_to_json, WindowStat};
use slalom_core::pipeline::{
    extract_files, groundtruth_files, read_band, report_files, resolve_gates, score_files,
    synth_archetype, write_atomic, write_traces,
};
use slalom_core::synth::demo_corpus;
use slalom_core::trace::TrimPolicy;
use slalom_core::{ArchetypeKind, Delta, Error, FillPolicy, MetricId, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "slalom", version, about = "Validate simulated group interaction trajectories")]
struct Cli {
    /// Flat JSON config file; flags override its keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// One flag per config key.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    bins: Option<usize>,
    #[arg(long, global = true)]
    trim_fraction: Option<f64>,
    #[arg(long, global = true, value_parser = parse_json_enum::<TrimPolicy>)]
    trim_policy: Option<TrimPolicy>,
    #[arg(long, global = true)]
    multiplier: Option<f64>,
    #[arg(long, global = true)]
    sigma_floor: Option<f64>,
    /// Comma-separated metric keys.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_metric)]
    metrics: Option<Vec<MetricId>>,
    #[arg(long, global = true, value_parser = parse_json_enum::<FillPolicy>)]
    fill: Option<FillPolicy>,
    #[arg(long, global = true, value_parser = parse_json_enum::<GateSource>)]
    gate_source: Option<GateSource>,
    #[arg(long, global = true)]
    gates_file: Option<PathBuf>,
    #[arg(long, global = true)]
    gate_value_half_width: Option<f64>,
    #[arg(long, global = true)]
    gate_window_half_width: Option<f64>,
    #[arg(long, global = true, value_parser = parse_json_enum::<WindowStat>)]
    window_stat: Option<WindowStat>,
    /// Per-metric weight as `metric=w`; repeatable.
    #[arg(long = "weight", global = true, value_parser = parse_weight)]
    weights: Vec<(MetricId, f64)>,
    #[arg(long, global = true, value_parser = parse_json_enum::<Delta>)]
    delta: Option<Delta>,
    #[arg(long, global = true)]
    dtw_window: Option<usize>,
    #[arg(long, global = true)]
    prune_before_scoring: Option<bool>,
    #[arg(long, global = true)]
    embedding_dim: Option<usize>,
    #[arg(long, global = true)]
    embedding_seed: Option<u64>,
    #[arg(long, global = true)]
    categories_file: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Turn JSON-Lines interaction logs into metric trajectories.
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Build per-metric bands from ground-truth trajectories.
    Groundtruth {
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a gate set: the Tuckman defaults, or gates derived from bands.
    Gates {
        /// Band files to derive gates from; omit for the Tuckman defaults.
        #[arg(long = "band")]
        bands: Vec<PathBuf>,
        #[arg(short, long, default_value = "gates.json")]
        out: PathBuf,
    },
    /// Gate-check and score simulated trajectories against bands.
    Score {
        #[arg(long = "band", required = true)]
        bands: Vec<PathBuf>,
        sims: Vec<PathBuf>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate synthetic data.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
    /// Write per-metric plot CSVs from a report.
    Report {
        report: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the function-word category table.
    DumpCategories {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Archetype trajectories (A, B, C).
    Archetype {
        #[arg(required = true, value_parser = parse_archetype)]
        kinds: Vec<ArchetypeKind>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Event-level demo corpus as JSON-Lines logs.
    Demo {
        #[arg(long, default_value_t = 15)]
        groups: usize,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_json_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<MetricId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_weight(s: &str) -> std::result::Result<(MetricId, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected metric=weight")?;
    let w = v.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((parse_metric(k)?, w))
}

fn parse_archetype(s: &str) -> std::result::Result<ArchetypeKind, String> {
    ArchetypeKind::parse(s).map_err(|e| e.to_string())
}

impl Overrides {
    fn apply(self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        set!(
            bins, trim_fraction, trim_policy, multiplier, sigma_floor, metrics, fill, gate_source,
            gate_value_half_width, gate_window_half_width, window_stat, delta, prune_before_scoring,
            embedding_dim, embedding_seed, seed, noise_sigma, workers
        );
        if self.gates_file.is_some() {
            cfg.gates_file = self.gates_file;
        }
        if self.categories_file.is_some() {
            cfg.categories_file = self.categories_file;
        }
        if self.dtw_window.is_some() {
            cfg.dtw_window = self.dtw_window;
        }
        cfg.weights.extend(self.weights);
    }
}

fn load_config(path: Option<&Path>, overrides: Overrides) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref(), cli.overrides)?;
    match cli.command {
        Command::Extract { inputs, out } => {
            extract_files(&inputs, &out, &cfg)?;
        }
        Command::Groundtruth { inputs, out } => {
            groundtruth_files(&inputs, &out, &cfg)?;
        }
        Command::Gates { bands, out } => {
            let (source, bands) = if bands.is_empty() {
                (GateSource::Tuckman, Vec::new())
            } else {
                let bands = bands.iter().map(|p| read_band(p)).collect::<Result<Vec<_>>>()?;
                (GateSource::Band, bands)
            };
            let gates = resolve_gates(&PipelineConfig { gate_source: source, ..cfg }, &bands)?;
            write_atomic(&out, &gates_to_json(&gates)?)?;
        }
        Command::Score { bands, sims, out } => {
            score_files(&sims, &bands, &out, &cfg)?;
        }
        Command::Synth { what } => match what {
            SynthCommand::Archetype { kinds, out } => {
                for kind in kinds {
                    let t = synth_archetype(kind, &cfg)?;
                    let stem = format!("sim_{}", kind.name());
                    write_atomic(&out.join(format!("{stem}.trajectory.json")), &t.to_json()?)?;
                    let mut csv = Vec::new();
                    t.write_csv(&mut csv)?;
                    write_atomic(&out.join(format!("{stem}.trajectory.csv")), &csv)?;
                }
            }
            SynthCommand::Demo { groups, out } => {
                write_traces(&demo_corpus(groups, cfg.seed), &out)?;
            }
        },
        Command::Report { report, out } => {
            report_files(&report, &out)?;
        }
        Command::DumpCategories { out } => {
            let text = cfg.categories()?.to_tsv();
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slalom: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
