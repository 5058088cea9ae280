//! Trajectory validation for agent-based social simulations.
//!
//! Interaction logs become per-bin metric trajectories (speaker hierarchy,
//! semantic divergence, style-matching cohesion). A ground-truth corpus
//! yields μ ± kσ bands; windowed gates derived from them prune implausible
//! trajectories, and the survivors are scored by per-dimension DTW against
//! the band means.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod config;
pub mod error;
pub mod gates;
pub mod groundtruth;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod trace;

pub use alignment::{
    aggregate, dtw, dtw_oracle, dtw_windowed, score_trajectory, AlignmentResult, Delta,
    ValidityScore, WarpingPath, Weights,
};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use gates::{default_tuckman_gates, evaluate_gates, gates_from_band, Gate, GateVerdict, WindowStat};
pub use groundtruth::{band_contains, build_band, GateBand};
pub use metrics::{extract_trajectory, FillPolicy, MetricId, MetricSeries, Trajectory};
pub use report::ValidityReport;
pub use synth::{demo_corpus, generate, ArchetypeKind, SynthArchetype};
pub use trace::{bin_trace, concatenate_sessions, normalize_timeline, parse_trace, Trace};
