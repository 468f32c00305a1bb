//! Seeded generator of machinery scenarios with full ground truth.
//!
//! Every non-constant channel is `mean + sigma * z` where `z` mixes a shared
//! or private latent signal with truncated-normal noise, both bounded, so
//! the nominal bounds written to the ground truth contain every normal
//! value and every injected outlier lies strictly outside them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{FrameError, SensorFrame, MISSING};
use crate::ingest::{write_event_log, write_sensor_frame, EventKind, EventLog, EventRecord, IngestError};
use crate::labeler::HealthState;
use crate::outlier::Bounds;
use crate::seed::derive_seed;
use crate::stats;

/// Noise and latents are confined to this many standard units.
const TRUNCATION: f64 = 4.0;
/// Extra room between the largest normal value and the nominal bound.
const BOUND_MARGIN: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("cluster {cluster}: correlation {target} cannot be reached")]
    InfeasibleCorrelation { cluster: usize, target: f64 },
    #[error("schedule ends at minute {end} but the scenario lasts {duration} minutes")]
    ScheduleOverflow { end: i64, duration: i64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Slow mean-reverting wander.
    Drift,
    /// Daily cycle with a little jitter.
    Periodic,
    /// Short-memory autoregressive signal.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub size: usize,
    pub kind: SignalKind,
    /// Target |Pearson r| between any two members.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingSpec {
    /// Extra independent channels whose cells go missing at `kill_rate`.
    pub killed_channels: usize,
    pub kill_rate: f64,
    /// Random missing-cell rate on the other measured channels.
    pub cell_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    /// Per-cell probability on cluster and independent channels.
    pub rate: f64,
    /// Typical distance beyond the nominal bound, in channel sigmas.
    pub magnitude: f64,
}

/// An event starting `gap_minutes` after the previous one ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub kind: EventKind,
    pub gap_minutes: i64,
    pub duration_minutes: i64,
    #[serde(default)]
    pub component: Option<String>,
    #[serde(default)]
    pub failure_mode: Option<String>,
}

/// Stretch inside operation where the motor idles (operation signal at 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleSpell {
    pub start_minute: i64,
    pub duration_minutes: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    /// Affected sensors per failure mode.
    pub sensors: BTreeMap<String, Vec<String>>,
    /// Degradation starts this long before the failure.
    pub window_minutes: i64,
    /// Final mean shift in channel sigmas.
    pub mean_shift: f64,
    /// Final noise scale factor.
    pub variance_inflation: f64,
    /// Share of the window over which the effect ramps up linearly.
    pub ramp_fraction: f64,
}

/// Labeling parameters the ground-truth labels are computed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthWindows {
    pub transition_minutes: i64,
    pub warmup_minutes: i64,
    pub cooldown_minutes: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Epoch seconds of the first sample.
    pub start_time: i64,
    pub duration_hours: i64,
    pub sampling_period: i64,
    pub clusters: Vec<ClusterSpec>,
    pub n_independent: usize,
    pub n_constant_channels: usize,
    pub n_unrelated_channels: usize,
    pub missing: MissingSpec,
    pub outlier: OutlierSpec,
    pub schedule: Vec<ScheduledEvent>,
    pub idle: Vec<IdleSpell>,
    pub degradation: DegradationSpec,
    pub truth: TruthWindows,
    /// Commissioning period dropped by the suggested time window.
    pub trim_minutes: i64,
    pub seed: u64,
}

pub const OPERATION_CHANNEL: &str = "motor_current";
const OPERATION_MEAN: f64 = 50.0;
const OPERATION_SIGMA: f64 = 8.0;

fn default_schedule() -> (Vec<ScheduledEvent>, Vec<IdleSpell>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    let modes = [("compressor", "bearing_wear"), ("valve", "seat_leak")];
    // Commissioning stop straddling the end of the first day.
    let mut events = vec![ScheduledEvent {
        kind: EventKind::NormalStop,
        gap_minutes: 23 * 60,
        duration_minutes: 120,
        component: None,
        failure_mode: None,
    }];
    let mut idle = Vec::new();
    let mut clock = 25 * 60;
    for i in 0..12 {
        let gap = rng.random_range(20..50) * 60;
        let (kind, dur) = match i % 4 {
            0 | 2 => (EventKind::NormalStop, rng.random_range(2..6) * 60),
            1 => (EventKind::Pause, rng.random_range(3..9) * 10),
            _ => (EventKind::External, rng.random_range(1..4) * 60),
        };
        idle.push(IdleSpell {
            start_minute: clock + gap / 2,
            duration_minutes: 30,
        });
        events.push(ScheduledEvent {
            kind,
            gap_minutes: gap,
            duration_minutes: dur,
            component: None,
            failure_mode: None,
        });
        clock += gap + dur;
        let gap = rng.random_range(60..100) * 60;
        let dur = rng.random_range(6..18) * 60;
        let (component, mode) = modes[i % 2];
        events.push(ScheduledEvent {
            kind: EventKind::Failure,
            gap_minutes: gap,
            duration_minutes: dur,
            component: Some(component.into()),
            failure_mode: Some(mode.into()),
        });
        clock += gap + dur;
    }
    (events, idle)
}

pub fn independent_name(i: usize) -> String {
    format!("ind_{i:02}")
}

impl Default for SynthConfig {
    fn default() -> Self {
        let (schedule, idle) = default_schedule();
        let mut sensors = BTreeMap::new();
        sensors.insert("bearing_wear".to_string(), (0..4).map(independent_name).collect());
        sensors.insert("seat_leak".to_string(), (4..8).map(independent_name).collect());
        let cluster = |size, kind, correlation| ClusterSpec {
            size,
            kind,
            correlation,
        };
        Self {
            start_time: 1_556_582_400,
            duration_hours: 2000,
            sampling_period: 60,
            clusters: vec![
                cluster(4, SignalKind::Drift, 0.98),
                cluster(4, SignalKind::Periodic, 0.99),
                cluster(3, SignalKind::Stationary, 0.97),
                cluster(3, SignalKind::Drift, 0.97),
                cluster(3, SignalKind::Periodic, 0.98),
                cluster(3, SignalKind::Stationary, 0.99),
            ],
            n_independent: 20,
            n_constant_channels: 3,
            n_unrelated_channels: 4,
            missing: MissingSpec {
                killed_channels: 2,
                kill_rate: 0.6,
                cell_rate: 0.0005,
            },
            outlier: OutlierSpec {
                rate: 0.0002,
                magnitude: 3.0,
            },
            schedule,
            idle,
            degradation: DegradationSpec {
                sensors,
                window_minutes: 120,
                mean_shift: 2.0,
                variance_inflation: 1.0,
                ramp_fraction: 0.05,
            },
            truth: TruthWindows {
                transition_minutes: 180,
                warmup_minutes: 30,
                cooldown_minutes: 30,
            },
            trim_minutes: 24 * 60,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ChannelRole {
    Operation,
    Cluster { cluster: usize },
    Independent,
    Constant,
    Sparse,
    Unrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTruth {
    pub name: String,
    #[serde(flatten)]
    pub role: ChannelRole,
    pub mean: f64,
    pub sigma: f64,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierCell {
    pub timestamp: i64,
    pub feature: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureTruth {
    pub time: i64,
    /// Start of the injected degradation, `time - window`.
    pub onset: i64,
    pub component: Option<String>,
    pub failure_mode: String,
    pub sensors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub members: Vec<String>,
    pub target: f64,
    /// Mean |r| over member pairs of the clean signals.
    pub measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub channels: Vec<ChannelTruth>,
    pub clusters: Vec<ClusterTruth>,
    pub constant_channels: Vec<String>,
    pub unrelated_channels: Vec<String>,
    pub killed_channels: Vec<String>,
    pub outliers: Vec<OutlierCell>,
    pub failures: Vec<FailureTruth>,
    /// Suggested time window start: end of commissioning.
    pub keep_from: i64,
    /// True state of every timestamp, as the labeler should see it with the
    /// configured windows and the operation signal.
    pub labels: Vec<HealthState>,
}

impl GroundTruth {
    pub fn nominal_bounds(&self) -> BTreeMap<String, Bounds> {
        self.channels.iter().map(|c| (c.name.clone(), c.bounds)).collect()
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelTruth> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn outlier_timestamps(&self) -> BTreeSet<i64> {
        self.outliers.iter().map(|o| o.timestamp).collect()
    }
}

impl SynthConfig {
    pub fn n_rows(&self) -> usize {
        (self.duration_hours * 3600 / self.sampling_period) as usize
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.sampling_period <= 0 || self.duration_hours <= 0 {
            return bad("duration and sampling period must be positive");
        }
        if (self.duration_hours * 3600) % self.sampling_period != 0 {
            return bad("sampling period must divide the duration");
        }
        for (name, r) in [
            ("missing.kill_rate", self.missing.kill_rate),
            ("missing.cell_rate", self.missing.cell_rate),
            ("outlier.rate", self.outlier.rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        let d = &self.degradation;
        if !(d.ramp_fraction > 0.0 && d.ramp_fraction <= 1.0) {
            return bad("degradation.ramp_fraction must lie in (0, 1]");
        }
        if d.variance_inflation < 1.0 || d.mean_shift < 0.0 || d.window_minutes < 0 {
            return bad("degradation effect must not shrink the signal");
        }
        if self.outlier.magnitude <= 0.0 {
            return bad("outlier.magnitude must be positive");
        }
        let period_min = self.sampling_period as f64 / 60.0;
        let minutes: Vec<i64> = self
            .schedule
            .iter()
            .flat_map(|e| [e.gap_minutes, e.duration_minutes])
            .chain(self.idle.iter().flat_map(|s| [s.start_minute, s.duration_minutes]))
            .chain([self.trim_minutes, d.window_minutes])
            .collect();
        if minutes.iter().any(|&m| m < 0 || (m * 60) % self.sampling_period != 0) {
            return bad(&format!(
                "event times must be non-negative multiples of the {period_min} min sampling period"
            ));
        }
        if self.schedule.iter().any(|e| e.duration_minutes == 0) {
            return bad("events must have positive duration");
        }
        for e in &self.schedule {
            if e.kind == EventKind::Failure && e.failure_mode.is_none() && e.component.is_none() {
                return bad("failures need a component or failure mode");
            }
        }
        let known: BTreeSet<String> = (0..self.n_independent).map(independent_name).collect();
        for s in d.sensors.values().flatten() {
            if !known.contains(s) {
                return bad(&format!("affected sensor `{s}` is not an independent channel"));
            }
        }
        for c in &self.clusters {
            if c.size < 2 {
                return bad("clusters need at least two channels");
            }
        }
        Ok(())
    }

    fn killed_names(&self) -> Vec<String> {
        (0..self.missing.killed_channels).map(|i| format!("sparse_{i:02}")).collect()
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = StandardNormal.sample(rng);
        if x.abs() <= TRUNCATION {
            return x;
        }
    }
}

/// Variance of a standard normal truncated to `[-4, 4]`.
fn truncated_variance() -> f64 {
    let a = TRUNCATION;
    let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    // Two-sided tail mass beyond 4 sigma.
    let mass = 1.0 - 6.334e-5;
    1.0 - 2.0 * a * phi / mass
}

fn latent(kind: SignalKind, n: usize, period: i64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    match kind {
        SignalKind::Drift | SignalKind::Stationary => {
            let phi: f64 = if kind == SignalKind::Drift { 0.999 } else { 0.9 };
            let s = (1.0 - phi * phi).sqrt();
            let mut x = truncated_normal(rng);
            for _ in 0..n {
                x = (phi * x + s * truncated_normal(rng)).clamp(-TRUNCATION, TRUNCATION);
                out.push(x);
            }
        }
        SignalKind::Periodic => {
            let day = 86_400.0 / period as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let mut jitter = 0.0;
            for i in 0..n {
                jitter = 0.95 * jitter + 0.05 * truncated_normal(rng);
                out.push((std::f64::consts::TAU * i as f64 / day + phase).sin() + jitter);
            }
        }
    }
    // Standardise so that the mixing weights mean what they say.
    let (m, s) = stats::mean_std(&out).unwrap_or((0.0, 1.0));
    let s = if s > 0.0 { s } else { 1.0 };
    out.iter_mut().for_each(|v| *v = (*v - m) / s);
    out
}

fn mean_abs_pairwise_r(series: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            total += stats::pearson(&series[i], &series[j]).unwrap_or(0.0).abs();
            pairs += 1;
        }
    }
    total / pairs.max(1) as f64
}

struct Channel {
    name: String,
    role: ChannelRole,
    mean: f64,
    sigma: f64,
    sign: f64,
}

struct Schedule {
    records: Vec<EventRecord>,
    idle: Vec<(i64, i64)>,
}

fn build_schedule(cfg: &SynthConfig) -> Result<Schedule, SynthError> {
    let duration = cfg.duration_hours * 60;
    let mut clock = 0;
    let mut records = Vec::with_capacity(cfg.schedule.len());
    for e in &cfg.schedule {
        let start = clock + e.gap_minutes;
        let end = start + e.duration_minutes;
        if end > duration {
            return Err(SynthError::ScheduleOverflow { end, duration });
        }
        records.push(EventRecord {
            start: cfg.start_time + start * 60,
            end: cfg.start_time + end * 60,
            kind: e.kind,
            component: e.component.clone(),
            failure_mode: e.failure_mode.clone(),
            note: String::new(),
        });
        clock = end;
    }
    let idle = cfg
        .idle
        .iter()
        .map(|s| {
            let a = cfg.start_time + s.start_minute * 60;
            (a, a + s.duration_minutes * 60)
        })
        .collect();
    Ok(Schedule { records, idle })
}

fn failure_mode_of(r: &EventRecord) -> String {
    crate::labeler::mode_id(&r.component, &r.failure_mode)
}

/// Per-timestamp truth: each row is judged on its own against the schedule.
fn truth_labels(cfg: &SynthConfig, ts: &[i64], sched: &Schedule) -> Vec<HealthState> {
    let w = cfg.degradation.window_minutes * 60;
    let tr = cfg.truth.transition_minutes * 60;
    let warm = cfg.truth.warmup_minutes * 60;
    let cool = cfg.truth.cooldown_minutes * 60;
    let data_end = ts.last().map_or(0, |t| t + 1);
    let first = ts.first().copied().unwrap_or(0);
    ts.iter()
        .map(|&t| {
            let stopped = sched.records.iter().any(|r| r.start <= t && t < r.end);
            let idle = sched.idle.iter().any(|&(a, b)| a <= t && t < b);
            if stopped || idle {
                return HealthState::Excluded;
            }
            let since = sched
                .records
                .iter()
                .filter(|r| r.end <= t)
                .map(|r| r.end)
                .max()
                .unwrap_or(first);
            let next = sched
                .records
                .iter()
                .filter(|r| r.start > t)
                .min_by_key(|r| (r.start, r.kind != EventKind::Failure));
            let until = next.map_or(data_end, |r| r.start);
            if t < since + warm || t >= until - cool {
                return HealthState::Excluded;
            }
            match next {
                Some(r) if r.kind == EventKind::Failure => {
                    if t >= r.start - w {
                        HealthState::Degraded {
                            component: r.component.clone(),
                            failure_mode: failure_mode_of(r),
                        }
                    } else if t >= r.start - w - tr {
                        HealthState::Transition
                    } else {
                        HealthState::Healthy
                    }
                }
                _ => HealthState::Healthy,
            }
        })
        .collect()
}

/// Generates the sensor frame, the event log and the ground truth.
pub fn generate_scenario(cfg: &SynthConfig) -> Result<(SensorFrame, EventLog, GroundTruth), SynthError> {
    cfg.validate()?;
    let n = cfg.n_rows();
    let ts: Vec<i64> = (0..n as i64).map(|i| cfg.start_time + i * cfg.sampling_period).collect();
    let sched = build_schedule(cfg)?;
    let seed = cfg.seed;
    let mut param_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth/channels"));

    let mut channels: Vec<Channel> = Vec::new();
    let mut push = |name: String, role: ChannelRole, rng: &mut ChaCha8Rng| {
        let mean: f64 = rng.random_range(20.0..200.0);
        let sigma = mean * rng.random_range(0.1..0.3);
        let sign = if rng.random_bool(0.25) { -1.0 } else { 1.0 };
        channels.push(Channel {
            name,
            role,
            mean,
            sigma,
            sign,
        });
    };
    push(OPERATION_CHANNEL.into(), ChannelRole::Operation, &mut param_rng);
    for (k, c) in cfg.clusters.iter().enumerate() {
        for i in 0..c.size {
            push(format!("cl{k}_{i}"), ChannelRole::Cluster { cluster: k }, &mut param_rng);
        }
    }
    let killed = cfg.killed_names();
    for i in 0..cfg.n_independent {
        push(independent_name(i), ChannelRole::Independent, &mut param_rng);
    }
    for name in &killed {
        push(name.clone(), ChannelRole::Sparse, &mut param_rng);
    }
    for i in 0..cfg.n_constant_channels {
        push(format!("const_{i:02}"), ChannelRole::Constant, &mut param_rng);
    }
    for i in 0..cfg.n_unrelated_channels {
        push(format!("ext_{i:02}"), ChannelRole::Unrelated, &mut param_rng);
    }

    // Shared latents, one per cluster.
    let latents: Vec<Vec<f64>> = cfg
        .clusters
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("synth/latent/{k}")));
            latent(c.kind, n, cfg.sampling_period, &mut rng)
        })
        .collect();
    let noise_scale = truncated_variance().sqrt();
    // Private noise per channel, fixed before any tuning.
    let noise: Vec<Vec<f64>> = channels
        .par_iter()
        .map(|ch| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("synth/noise/{}", ch.name)));
            (0..n).map(|_| truncated_normal(&mut rng) / noise_scale).collect()
        })
        .collect();

    // Mixing weight of the latent per cluster, tuned until the measured
    // correlation of the clean channels sits on the target.
    let mut weights = Vec::with_capacity(cfg.clusters.len());
    let mut cluster_truth = Vec::with_capacity(cfg.clusters.len());
    for (k, c) in cfg.clusters.iter().enumerate() {
        if !(c.correlation > 0.0 && c.correlation < 1.0) {
            return Err(SynthError::InfeasibleCorrelation {
                cluster: k,
                target: c.correlation,
            });
        }
        let members: Vec<usize> = channels
            .iter()
            .enumerate()
            .filter(|(_, ch)| ch.role == ChannelRole::Cluster { cluster: k })
            .map(|(i, _)| i)
            .collect();
        let mut r = c.correlation;
        let mut measured = 0.0;
        for _ in 0..8 {
            let (wl, wn) = (r.sqrt(), (1.0 - r).sqrt());
            let series: Vec<Vec<f64>> = members
                .iter()
                .map(|&i| latents[k].iter().zip(&noise[i]).map(|(l, e)| wl * l + wn * e).collect())
                .collect();
            measured = mean_abs_pairwise_r(&series);
            if (measured - c.correlation).abs() < 0.002 {
                break;
            }
            r = (r + c.correlation - measured).clamp(1e-6, 1.0 - 1e-9);
        }
        if (measured - c.correlation).abs() > 0.02 {
            return Err(SynthError::InfeasibleCorrelation {
                cluster: k,
                target: c.correlation,
            });
        }
        weights.push((r.sqrt(), (1.0 - r).sqrt()));
        cluster_truth.push(ClusterTruth {
            members: members.iter().map(|&i| channels[i].name.clone()).collect(),
            target: c.correlation,
            measured,
        });
    }

    // Degradation profile per row and affected channel.
    let deg = &cfg.degradation;
    let w_secs = deg.window_minutes * 60;
    let mut failures = Vec::new();
    let mut ramp: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in sched.records.iter().filter(|r| r.kind == EventKind::Failure) {
        let mode = failure_mode_of(r);
        let sensors = deg.sensors.get(&mode).cloned().unwrap_or_default();
        let onset = r.start - w_secs;
        for s in &sensors {
            let prof = ramp.entry(s.clone()).or_insert_with(|| vec![0.0; n]);
            for (i, &t) in ts.iter().enumerate() {
                if t >= onset && t < r.start {
                    let frac = ((t - onset) as f64 / (deg.ramp_fraction * w_secs as f64)).min(1.0);
                    prof[i] = prof[i].max(frac);
                }
            }
        }
        failures.push(FailureTruth {
            time: r.start,
            onset,
            component: r.component.clone(),
            failure_mode: mode,
            sensors,
        });
    }
    let affected: BTreeSet<&str> = deg.sensors.values().flatten().map(String::as_str).collect();

    let stopped: Vec<bool> = ts
        .iter()
        .map(|&t| {
            sched.records.iter().any(|r| r.start <= t && t < r.end)
                || sched.idle.iter().any(|&(a, b)| a <= t && t < b)
        })
        .collect();

    let outlier_capable = |role: ChannelRole| matches!(role, ChannelRole::Cluster { .. } | ChannelRole::Independent);

    // Column synthesis, one independent stream per channel.
    struct Column {
        values: Vec<f64>,
        bounds: Bounds,
        outliers: Vec<(usize, f64)>,
        mean: f64,
        sigma: f64,
    }
    let columns: Vec<Column> = channels
        .par_iter()
        .enumerate()
        .map(|(ci, ch)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("synth/cells/{}", ch.name)));
            let e = &noise[ci];
            let (mut values, half_width) = match ch.role {
                ChannelRole::Operation => {
                    let v = (0..n)
                        .map(|i| {
                            if stopped[i] {
                                0.0
                            } else {
                                OPERATION_MEAN + OPERATION_SIGMA * e[i] * noise_scale
                            }
                        })
                        .collect();
                    (v, 0.0)
                }
                ChannelRole::Constant => (vec![ch.mean.round(); n], 0.0),
                ChannelRole::Cluster { cluster } => {
                    let (wl, wn) = weights[cluster];
                    let l = &latents[cluster];
                    let lmax = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let v = (0..n)
                        .map(|i| ch.mean + ch.sign * ch.sigma * (wl * l[i] + wn * e[i]))
                        .collect();
                    (v, wl * lmax + wn * TRUNCATION / noise_scale)
                }
                ChannelRole::Independent | ChannelRole::Sparse | ChannelRole::Unrelated => {
                    let prof = ramp.get(&ch.name);
                    let v = (0..n)
                        .map(|i| {
                            let f = prof.map_or(0.0, |p| p[i]);
                            let z = e[i] * (1.0 + (deg.variance_inflation - 1.0) * f) + deg.mean_shift * f;
                            ch.mean + ch.sigma * z
                        })
                        .collect();
                    let mut hw = TRUNCATION / noise_scale;
                    if affected.contains(ch.name.as_str()) {
                        hw = hw * deg.variance_inflation + deg.mean_shift;
                    }
                    (v, hw)
                }
            };
            let (mean, sigma) = match ch.role {
                ChannelRole::Operation => (OPERATION_MEAN, OPERATION_SIGMA),
                ChannelRole::Constant => (ch.mean.round(), 0.0),
                _ => (ch.mean, ch.sigma),
            };
            let bounds = match ch.role {
                ChannelRole::Operation => Bounds::new(
                    Some(-OPERATION_SIGMA),
                    Some(OPERATION_MEAN + OPERATION_SIGMA * (TRUNCATION + BOUND_MARGIN)),
                ),
                ChannelRole::Constant => Bounds::new(Some(mean - 1.0), Some(mean + 1.0)),
                _ => {
                    let h = sigma * (half_width + BOUND_MARGIN);
                    Bounds::new(Some(mean - h), Some(mean + h))
                }
            };

            let rate = match ch.role {
                ChannelRole::Sparse => cfg.missing.kill_rate,
                ChannelRole::Cluster { .. } | ChannelRole::Independent | ChannelRole::Unrelated => {
                    cfg.missing.cell_rate
                }
                _ => 0.0,
            };
            let mut outliers = Vec::new();
            for (i, v) in values.iter_mut().enumerate() {
                if rate > 0.0 && rng.random_bool(rate) {
                    *v = MISSING;
                    continue;
                }
                if outlier_capable(ch.role) && cfg.outlier.rate > 0.0 && rng.random_bool(cfg.outlier.rate) {
                    let beyond = sigma * cfg.outlier.magnitude * rng.random_range(0.5..1.5);
                    *v = if rng.random_bool(0.5) {
                        bounds.upper.unwrap_or(mean) + beyond
                    } else {
                        bounds.lower.unwrap_or(mean) - beyond
                    };
                    outliers.push((i, *v));
                }
            }
            Column {
                values,
                bounds,
                outliers,
                mean,
                sigma,
            }
        })
        .collect();

    let d = channels.len();
    let mut values = vec![0.0; n * d];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.values.iter().enumerate() {
            values[i * d + j] = *v;
        }
    }
    let names: Vec<String> = channels.iter().map(|c| c.name.clone()).collect();
    let mut frame = SensorFrame::new(ts.clone(), names.clone(), values)?;
    frame.sampling_period_hint = Some(cfg.sampling_period);

    let mut outliers: Vec<OutlierCell> = columns
        .iter()
        .zip(&names)
        .flat_map(|(c, name)| {
            c.outliers.iter().map(|&(i, v)| OutlierCell {
                timestamp: ts[i],
                feature: name.clone(),
                value: v,
            })
        })
        .collect();
    outliers.sort_by(|a, b| (a.timestamp, &a.feature).cmp(&(b.timestamp, &b.feature)));

    let by_role = |f: fn(ChannelRole) -> bool| -> Vec<String> {
        channels.iter().filter(|c| f(c.role)).map(|c| c.name.clone()).collect()
    };
    let truth = GroundTruth {
        seed,
        channels: channels
            .iter()
            .zip(&columns)
            .map(|(ch, col)| ChannelTruth {
                name: ch.name.clone(),
                role: ch.role,
                mean: col.mean,
                sigma: col.sigma,
                bounds: col.bounds,
            })
            .collect(),
        clusters: cluster_truth,
        constant_channels: by_role(|r| r == ChannelRole::Constant),
        unrelated_channels: by_role(|r| r == ChannelRole::Unrelated),
        killed_channels: by_role(|r| r == ChannelRole::Sparse),
        outliers,
        failures,
        keep_from: cfg.start_time + cfg.trim_minutes * 60,
        labels: truth_labels(cfg, &ts, &sched),
    };
    let log = EventLog::new(sched.records)?;
    Ok((frame, log, truth))
}

pub const SENSOR_FILE: &str = "sensors.csv";
pub const EVENT_FILE: &str = "events.csv";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const TIME_COLUMN: &str = "timestamp";

/// Writes `sensors.csv`, `events.csv` and `ground_truth.json` into `dir`.
pub fn write_scenario(
    dir: &Path,
    frame: &SensorFrame,
    log: &EventLog,
    truth: &GroundTruth,
) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_sensor_frame(frame, &dir.join(SENSOR_FILE), TIME_COLUMN)?;
    write_event_log(log, &dir.join(EVENT_FILE))?;
    let path = dir.join(TRUTH_FILE);
    let s = serde_json::to_string(truth).map_err(|source| SynthError::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(&path, s).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth, SynthError> {
    let s = std::fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&s).map_err(|source| SynthError::Json {
        path: path.display().to_string(),
        source,
    })
}
