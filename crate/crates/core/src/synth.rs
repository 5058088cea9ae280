//! Seeded synthetic trajectories and interaction logs.
//!
//! Three archetypes mirror the diagnostic simulations of the small-group case
//! study: `A` follows the Tuckman phase levels, `B` stagnates on flat
//! profiles, `C` drifts into runaway dominance with collapsing cohesion. The
//! demo corpus turns archetype-A targets into event-level meeting logs so the
//! whole pipeline can run without a licensed corpus.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{gini, CategoryTable, MetricId, MetricSeries, Trajectory};
use crate::trace::{InteractionEvent, Trace, TIMELINE_END};

/// A control point `(t, value)` on the percent timeline.
pub type Anchor = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchetypeKind {
    /// Passes through every phase level.
    A,
    /// Flat hierarchy and divergence, muted cohesion.
    B,
    /// Runaway dominance, crashing cohesion, scattering divergence.
    C,
}

impl ArchetypeKind {
    pub const ALL: [ArchetypeKind; 3] = [ArchetypeKind::A, ArchetypeKind::B, ArchetypeKind::C];

    pub fn name(self) -> &'static str {
        match self {
            ArchetypeKind::A => "A",
            ArchetypeKind::B => "B",
            ArchetypeKind::C => "C",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ArchetypeKind::A),
            "B" => Ok(ArchetypeKind::B),
            "C" => Ok(ArchetypeKind::C),
            _ => Err(Error::invalid(format!("unknown archetype `{s}` (expected A, B or C)"))),
        }
    }

    pub fn anchors(self) -> Vec<(MetricId, Vec<Anchor>)> {
        match self {
            ArchetypeKind::A => vec![
                (
                    MetricId::Hierarchy,
                    vec![(0.0, 0.50), (25.0, 0.48), (45.0, 0.37), (70.0, 0.32), (98.0, 0.35), (100.0, 0.35)],
                ),
                (
                    MetricId::Divergence,
                    vec![(0.0, 0.28), (25.0, 0.30), (45.0, 0.36), (70.0, 0.30), (98.0, 0.28), (100.0, 0.28)],
                ),
                (
                    MetricId::Cohesion,
                    vec![(0.0, 0.25), (25.0, 0.30), (45.0, 0.40), (70.0, 0.50), (98.0, 0.42), (100.0, 0.42)],
                ),
            ],
            ArchetypeKind::B => vec![
                (MetricId::Hierarchy, vec![(0.0, 0.40), (100.0, 0.40)]),
                (MetricId::Divergence, vec![(0.0, 0.30), (100.0, 0.30)]),
                (MetricId::Cohesion, vec![(0.0, 0.30), (100.0, 0.36)]),
            ],
            ArchetypeKind::C => vec![
                (
                    MetricId::Hierarchy,
                    vec![(0.0, 0.50), (25.0, 0.55), (70.0, 0.68), (100.0, 0.70)],
                ),
                (
                    MetricId::Divergence,
                    vec![(0.0, 0.30), (25.0, 0.40), (70.0, 0.52), (100.0, 0.55)],
                ),
                (
                    MetricId::Cohesion,
                    vec![(0.0, 0.25), (45.0, 0.30), (70.0, 0.20), (100.0, 0.10)],
                ),
            ],
        }
    }
}

/// Generator specification: per-metric control points plus seeded noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthArchetype {
    pub name: String,
    pub anchors: Vec<(MetricId, Vec<Anchor>)>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthArchetype {
    pub fn new(kind: ArchetypeKind, noise_sigma: f64, seed: u64) -> Self {
        SynthArchetype {
            name: kind.name().to_string(),
            anchors: kind.anchors(),
            noise_sigma,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "noise sigma {} must be non-negative",
                self.noise_sigma
            )));
        }
        if self.anchors.is_empty() {
            return Err(Error::invalid(format!("archetype `{}` has no metrics", self.name)));
        }
        for (metric, pts) in &self.anchors {
            let ok = pts.len() >= 2
                && pts[0].0 == 0.0
                && pts[pts.len() - 1].0 == TIMELINE_END
                && pts.windows(2).all(|w| w[0].0 < w[1].0);
            if !ok {
                return Err(Error::invalid(format!(
                    "anchors for `{metric}` in `{}` must be strictly increasing in t and span [0, 100]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Piecewise-linear interpolation through sorted anchors.
pub fn interpolate(anchors: &[Anchor], t: f64) -> f64 {
    let idx = anchors.partition_point(|a| a.0 <= t);
    if idx == 0 {
        return anchors[0].1;
    }
    if idx == anchors.len() {
        return anchors[anchors.len() - 1].1;
    }
    let (t0, v0) = anchors[idx - 1];
    let (t1, v1) = anchors[idx];
    v0 + (t - t0) / (t1 - t0) * (v1 - v0)
}

fn bin_center(i: usize, bins: usize) -> f64 {
    (i as f64 + 0.5) * TIMELINE_END / bins as f64
}

/// Samples the archetype at bin centers, adds i.i.d. Gaussian noise and clips
/// to [0, 1].
pub fn generate(archetype: &SynthArchetype, bins: usize) -> Result<Trajectory> {
    if bins < 2 {
        return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
    }
    archetype.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(archetype.seed);
    let noise = Normal::new(0.0, archetype.noise_sigma)
        .map_err(|e| Error::invalid(format!("noise: {e}")))?;
    let series = archetype
        .anchors
        .iter()
        .map(|(metric, pts)| {
            let values = (0..bins)
                .map(|i| {
                    let v = interpolate(pts, bin_center(i, bins)) + noise.sample(&mut rng);
                    v.clamp(0.0, 1.0)
                })
                .collect();
            MetricSeries::dense(metric.clone(), values)
        })
        .collect();
    Trajectory::new(archetype.name.clone(), series)
}

/// Deviation of each group's phase levels around the archetype-A anchors.
pub const GROUP_LEVEL_SIGMA: f64 = 0.02;
/// Per-bin measurement noise of a ground-truth group.
pub const GROUP_BIN_SIGMA: f64 = 0.02;

fn jittered_anchors(rng: &mut ChaCha8Rng, sigma: f64) -> Vec<(MetricId, Vec<Anchor>)> {
    let level = Normal::new(0.0, sigma).expect("finite sigma");
    ArchetypeKind::A
        .anchors()
        .into_iter()
        .map(|(m, pts)| {
            let pts = pts
                .into_iter()
                .map(|(t, v)| (t, (v + level.sample(rng)).clamp(0.0, 1.0)))
                .collect();
            (m, pts)
        })
        .collect()
}

/// Trajectory-level stand-in for a ground-truth corpus: `n` groups, each an
/// archetype-A profile with group-level jitter of its phase levels plus
/// per-bin noise. Group `g` draws from `seed ^ g`.
pub fn reference_ensemble(n: usize, bins: usize, seed: u64) -> Result<Vec<Trajectory>> {
    (0..n)
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ g as u64);
            let arch = SynthArchetype {
                name: format!("group{:02}", g + 1),
                anchors: jittered_anchors(&mut rng, GROUP_LEVEL_SIGMA),
                noise_sigma: GROUP_BIN_SIGMA,
                seed: rng.gen(),
            };
            generate(&arch, bins)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Event-level demo corpus

pub const DEMO_SPEAKERS: [&str; 4] = ["A", "B", "C", "D"];
pub const DEMO_SESSIONS: [&str; 4] = ["a", "b", "c", "d"];
const SESSION_SECONDS: f64 = 1500.0;
const SECONDS_PER_WORD: f64 = 0.4;
const FUNCTION_WORD_RATE: f64 = 0.45;
const TRIM: f64 = 0.05;
const COHESION_FLOOR: f64 = 0.28;
const COHESION_SPAN: f64 = 0.3;
const DIVERGENCE_CEIL: f64 = 0.5;
const DIVERGENCE_SPAN: f64 = 0.25;
const TOPIC_WORDS: usize = 2;
const TURN_DECAY: f64 = 0.9;
const SPEAKER_JITTER: f64 = 4.0;

const CONTENT_WORDS: &[&str] = &[
    "remote", "control", "button", "buttons", "battery", "design", "case", "chip", "rubber",
    "plastic", "colour", "logo", "scroll", "wheel", "speech", "recognition", "market", "price",
    "budget", "trend", "fancy", "spongy", "fruit", "banana", "yellow", "screen", "display",
    "kinetic", "solar", "cell", "titanium", "curved", "flat", "double", "single", "user",
    "interface", "function", "menu", "volume", "channel", "power", "teletext", "evaluation",
    "prototype", "clay", "model", "shape", "shell", "material", "cost", "euro", "profit",
    "target", "group", "young", "elderly", "survey", "sample", "feature", "features",
    "infrared", "signal", "sensor", "light", "lamp", "bulb", "energy", "component", "circuit",
    "board", "print", "wood", "metal", "soft", "hard", "grip", "hand", "thumb", "finger",
    "television", "tv", "set", "standby", "mute", "number", "numbers", "digit", "keypad",
    "layout", "size", "small", "large", "weight", "heavy", "light-weight", "style", "modern",
    "classic", "corporate", "identity", "company", "brand", "slogan", "marketing", "sales",
    "customer", "consumer", "research", "report", "presentation", "slide", "drawing",
    "whiteboard", "pen", "sketch", "idea", "ideas", "concept", "conceptual", "detailed",
    "functional", "technical", "manager", "project", "meeting", "minutes", "agenda", "email",
    "deadline", "schedule", "decision", "criteria", "rating", "scale", "score", "point",
    "points", "option", "options", "choice", "alternative", "advantage", "problem", "solution",
    "lost", "find", "beep", "locator", "sound", "voice", "command", "learning", "programmable",
    "universal", "dvd", "video", "radio", "audio", "stereo", "device", "devices", "docking",
    "station", "charger", "cable", "wireless", "touch", "pad", "joystick", "lever", "slider",
    "dial", "rotate", "press", "push", "click", "hold", "zapping", "surf", "browse",
];

const GREETINGS: &[&str] = &[
    "hi everyone",
    "okay let's get started",
    "good morning",
    "is everybody here",
    "can you hear me",
    "right thanks everyone",
    "okay see you later",
    "bye bye",
    "let's wrap up here",
    "thanks for coming",
];

/// Speaker shares `∝ rᵏ` whose Gini hits `target` (clamped to what four
/// speakers can express).
pub fn shares_for_gini(target: f64, speakers: usize) -> Vec<f64> {
    let profile = |r: f64| -> Vec<f64> {
        let raw: Vec<f64> = (0..speakers).map(|k| r.powi(k as i32)).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / sum).collect()
    };
    let g_of = |r: f64| gini(&profile(r)).unwrap_or(0.0);
    let (mut lo, mut hi) = (1e-6, 1.0);
    if target <= 0.0 {
        return profile(1.0);
    }
    if target >= g_of(lo) {
        return profile(lo);
    }
    // Gini falls as r rises toward 1
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g_of(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    profile(0.5 * (lo + hi))
}

fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

struct GroupGenerator<'a> {
    rng: ChaCha8Rng,
    targets: Vec<(MetricId, Vec<Anchor>)>,
    categories: Vec<Vec<&'a str>>,
    /// Per-speaker idiosyncratic category preference.
    styles: Vec<Vec<f64>>,
    /// Category preference the group converges on as cohesion rises.
    group_style: Vec<f64>,
    /// Speaker order for share assignment; the dominant voice differs per group.
    rank: Vec<usize>,
    recent_words: Vec<f64>,
}

impl<'a> GroupGenerator<'a> {
    fn target(&self, metric: &MetricId, t: f64) -> f64 {
        let pts = &self
            .targets
            .iter()
            .find(|(m, _)| m == metric)
            .expect("archetype-A metric")
            .1;
        interpolate(pts, t)
    }

    /// Gives the turn to the speaker furthest below their target share of the
    /// recent (exponentially decayed) word volume, with a little jitter.
    fn pick_speaker(&mut self, pct: f64) -> usize {
        let shares = shares_for_gini(self.target(&MetricId::Hierarchy, pct), DEMO_SPEAKERS.len());
        let total: f64 = self.recent_words.iter().sum();
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, share) in shares.iter().enumerate() {
            let speaker = self.rank[k];
            let deficit = share * (total + 10.0) - self.recent_words[speaker];
            let score = deficit + self.rng.gen_range(0.0..SPEAKER_JITTER);
            if score > best.0 {
                best = (score, speaker);
            }
        }
        best.1
    }

    fn record_turn(&mut self, speaker: usize, words: usize) {
        for w in &mut self.recent_words {
            *w *= TURN_DECAY;
        }
        self.recent_words[speaker] += words as f64;
    }

    fn utterance(&mut self, speaker: usize, pct: f64, topic: &[&'a str]) -> String {
        // Calibrated so extracted cohesion and divergence land near the targets.
        let cohesion = self.target(&MetricId::Cohesion, pct);
        let shared_style = ((cohesion - COHESION_FLOOR) / COHESION_SPAN).clamp(0.0, 1.0);
        let divergence = self.target(&MetricId::Divergence, pct);
        let on_topic = ((DIVERGENCE_CEIL - divergence) / DIVERGENCE_SPAN).clamp(0.0, 1.0);

        let words = self.rng.gen_range(4..=16);
        let mut out: Vec<&str> = Vec::with_capacity(words);
        for _ in 0..words {
            if self.rng.gen::<f64>() < FUNCTION_WORD_RATE {
                let cat = if self.rng.gen::<f64>() < shared_style {
                    weighted_index(&mut self.rng, &self.group_style)
                } else {
                    weighted_index(&mut self.rng, &self.styles[speaker])
                };
                out.push(self.categories[cat].choose(&mut self.rng).expect("non-empty"));
            } else if self.rng.gen::<f64>() < on_topic {
                out.push(topic.choose(&mut self.rng).expect("non-empty"));
            } else {
                out.push(CONTENT_WORDS.choose(&mut self.rng).expect("non-empty"));
            }
        }
        out.join(" ")
    }
}

/// Event-level meeting logs for `n_groups` four-person groups over four
/// sessions each. Times are per-session clocks starting at zero; sessions
/// after the first open and close with greeting chatter that the default
/// trim removes. Group `g` draws from `seed ^ g`.
pub fn demo_corpus(n_groups: usize, seed: u64) -> Vec<Trace> {
    let table = CategoryTable::builtin();
    (0..n_groups)
        .into_par_iter()
        .map(|g| demo_group(g, seed ^ g as u64, &table))
        .collect()
}

fn demo_group(g: usize, seed: u64, table: &CategoryTable) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = jittered_anchors(&mut rng, GROUP_LEVEL_SIGMA);
    let categories: Vec<Vec<&str>> = table
        .names()
        .map(|c| table.words(c).expect("listed").iter().map(String::as_str).collect())
        .collect();
    let n_cat = categories.len();
    let style = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let favourites: Vec<usize> = (0..3).map(|_| rng.gen_range(0..n_cat)).collect();
        (0..n_cat)
            .map(|c| if favourites.contains(&c) { 1.0 } else { 0.02 })
            .collect()
    };
    // individual habits spread over every category in uneven proportions
    let habit = rand_distr::LogNormal::new(0.0, 1.5).expect("valid");
    let styles = (0..DEMO_SPEAKERS.len())
        .map(|_| (0..n_cat).map(|_| habit.sample(&mut rng)).collect())
        .collect();
    let group_style = style(&mut rng);
    let mut rank: Vec<usize> = (0..DEMO_SPEAKERS.len()).collect();
    rank.shuffle(&mut rng);
    let durations: Vec<f64> = (0..DEMO_SESSIONS.len())
        .map(|_| SESSION_SECONDS + rng.gen_range(-150.0..150.0))
        .collect();

    let mut gen = GroupGenerator {
        rng,
        targets,
        categories,
        styles,
        group_style,
        rank,
        recent_words: vec![0.0; DEMO_SPEAKERS.len()],
    };

    // Percent position on the trimmed, concatenated timeline.
    let offsets: Vec<f64> = durations
        .iter()
        .scan(0.0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let last = durations.len() - 1;
    let kept_end = offsets[last] + (1.0 - TRIM) * durations[last];

    let mut events = Vec::new();
    for (s, (&label, &duration)) in DEMO_SESSIONS.iter().zip(&durations).enumerate() {
        let mut clock = 0.0;
        let mut topic: Vec<&str> = Vec::new();
        let mut topic_until = -1.0;
        while clock < duration {
            let words_hint = gen.rng.gen_range(4..=16) as f64;
            let length = words_hint * SECONDS_PER_WORD + 0.3;
            let end = (clock + length).min(duration);
            let local_mid = 0.5 * (clock + end);
            let chatter =
                s > 0 && (local_mid < TRIM * duration || local_mid > (1.0 - TRIM) * duration);

            let (speaker, text) = if chatter {
                let speaker = gen.rng.gen_range(0..DEMO_SPEAKERS.len());
                (speaker, GREETINGS.choose(&mut gen.rng).expect("non-empty").to_string())
            } else {
                let pct = (100.0 * (offsets[s] + local_mid) / kept_end).clamp(0.0, TIMELINE_END);
                if clock >= topic_until {
                    topic = CONTENT_WORDS.choose_multiple(&mut gen.rng, TOPIC_WORDS).copied().collect();
                    topic_until = clock + gen.rng.gen_range(30.0..90.0);
                }
                let speaker = gen.pick_speaker(pct);
                let text = if gen.rng.gen::<f64>() < 0.01 {
                    String::new()
                } else {
                    gen.utterance(speaker, pct, &topic)
                };
                gen.record_turn(speaker, crate::metrics::text::word_count(&text));
                (speaker, text)
            };
            events.push(InteractionEvent {
                speaker_id: DEMO_SPEAKERS[speaker].to_string(),
                start_time: round_ms(clock),
                end_time: round_ms(end),
                text,
                segment: label.to_string(),
            });
            clock = end + gen.rng.gen_range(0.2..1.0);
        }
    }
    Trace::new(format!("group{:02}", g + 1), events)
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}
