//! Health-state labels from the maintenance log.
//!
//! Operational intervals run from the end of one stoppage to the start of
//! the next. Inside an interval that ends in a failure at `t_f`:
//!
//! * `[t_f - degraded_window, t_f)` is degraded,
//! * the `transition_window` before that is transition,
//! * the rest is healthy,
//!
//! with windows clipped at the interval start. The first `warmup` and last
//! `cooldown` of every interval, stoppages, and rows where the operation
//! signal is not above its threshold are excluded. Precedence is
//! excluded > degraded > transition > healthy.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frame::{is_missing, SensorFrame};
use crate::ingest::{write_sensor_frame, EventKind, EventLog, IngestError};

pub const HOUR: i64 = 3600;
pub const MINUTE: i64 = 60;

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("frame has no rows")]
    EmptyFrame,
    #[error("operation signal `{0}` not in frame")]
    UnknownSignal(String),
    #[error("labels cover {labels} rows but the frame has {rows}")]
    LengthMismatch { labels: usize, rows: usize },
    #[error("negative duration `{0}`")]
    NegativeDuration(&'static str),
    #[error("component `{0}` declared twice")]
    DuplicateComponent(String),
    #[error("failure mode `{mode}` declared twice for component `{component}`")]
    DuplicateFailureMode { component: String, mode: String },
    #[error("sensor `{sensor}` of component `{component}` not in frame")]
    UnknownSensor { component: String, sensor: String },
    #[error("malformed label file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: String,
    #[serde(default)]
    pub sensors: Vec<String>,
    #[serde(default)]
    pub failure_modes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemModel {
    pub system: String,
    pub components: Vec<ComponentSpec>,
}

impl SystemModel {
    pub fn validate(&self, frame: Option<&SensorFrame>) -> Result<(), LabelError> {
        let mut ids = BTreeSet::new();
        for c in &self.components {
            if !ids.insert(c.id.as_str()) {
                return Err(LabelError::DuplicateComponent(c.id.clone()));
            }
            let mut modes = BTreeSet::new();
            for m in &c.failure_modes {
                if !modes.insert(m.as_str()) {
                    return Err(LabelError::DuplicateFailureMode {
                        component: c.id.clone(),
                        mode: m.clone(),
                    });
                }
            }
            if let Some(f) = frame {
                if let Some(s) = c.sensors.iter().find(|s| f.column_index(s).is_none()) {
                    return Err(LabelError::UnknownSensor {
                        component: c.id.clone(),
                        sensor: s.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The machine counts as operating when `feature > threshold`. Missing
/// readings count as not operating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSignal {
    pub feature: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOverride {
    #[serde(default)]
    pub degraded_window: Option<i64>,
    #[serde(default)]
    pub transition_window: Option<i64>,
}

/// Durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    pub degraded_window: i64,
    pub transition_window: i64,
    pub warmup: i64,
    pub cooldown: i64,
    pub operation_signal: Option<OperationSignal>,
    /// Window overrides keyed by failure mode.
    pub per_mode: BTreeMap<String, WindowOverride>,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self {
            degraded_window: 2 * HOUR,
            transition_window: 3 * HOUR,
            warmup: 30 * MINUTE,
            cooldown: 30 * MINUTE,
            operation_signal: None,
            per_mode: BTreeMap::new(),
        }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<(), LabelError> {
        let checks = [
            ("degraded_window", self.degraded_window),
            ("transition_window", self.transition_window),
            ("warmup", self.warmup),
            ("cooldown", self.cooldown),
        ];
        for (name, v) in checks {
            if v < 0 {
                return Err(LabelError::NegativeDuration(name));
            }
        }
        for o in self.per_mode.values() {
            if o.degraded_window.is_some_and(|v| v < 0) {
                return Err(LabelError::NegativeDuration("degraded_window"));
            }
            if o.transition_window.is_some_and(|v| v < 0) {
                return Err(LabelError::NegativeDuration("transition_window"));
            }
        }
        Ok(())
    }

    /// `(degraded_window, transition_window)` for a failure mode.
    pub fn windows_for(&self, mode: &str) -> (i64, i64) {
        let o = self.per_mode.get(mode).copied().unwrap_or_default();
        (
            o.degraded_window.unwrap_or(self.degraded_window),
            o.transition_window.unwrap_or(self.transition_window),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TerminatingCause {
    Event {
        index: usize,
        kind: EventKind,
        component: Option<String>,
        failure_mode: Option<String>,
    },
    EndOfData,
}

/// Half-open `[start, end)` stretch between stoppages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationalInterval {
    pub start: i64,
    pub end: i64,
    pub cause: TerminatingCause,
}

impl OperationalInterval {
    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn failure(&self) -> Option<(&Option<String>, &Option<String>)> {
        match &self.cause {
            TerminatingCause::Event {
                kind: EventKind::Failure,
                component,
                failure_mode,
                ..
            } => Some((component, failure_mode)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operation {
    pub intervals: Vec<OperationalInterval>,
    /// Per frame row: the operation signal says the machine is idle.
    pub non_operational: Vec<bool>,
}

/// Failure mode id used for labels; falls back to the component, then `unspecified`.
pub fn mode_id(component: &Option<String>, failure_mode: &Option<String>) -> String {
    failure_mode
        .clone()
        .or_else(|| component.clone())
        .unwrap_or_else(|| "unspecified".to_string())
}

pub fn extract_operational_intervals(
    log: &EventLog,
    frame: &SensorFrame,
    cfg: &LabelingConfig,
) -> Result<Operation, LabelError> {
    let (Some(&t0), Some(&t_last)) = (frame.timestamps().first(), frame.timestamps().last()) else {
        return Err(LabelError::EmptyFrame);
    };
    let data_end = t_last + 1;

    // Among events sharing a start, a failure terminates the interval.
    let mut order: Vec<usize> = (0..log.len()).collect();
    let recs = log.records();
    order.sort_by_key(|&i| (recs[i].start, recs[i].kind != EventKind::Failure, i));

    let mut intervals = Vec::new();
    let mut cursor = t0;
    let mut reached_end = false;
    for &i in &order {
        let e = &recs[i];
        if e.start > cursor {
            intervals.push(OperationalInterval {
                start: cursor,
                end: e.start,
                cause: TerminatingCause::Event {
                    index: i,
                    kind: e.kind,
                    component: e.component.clone(),
                    failure_mode: e.failure_mode.clone(),
                },
            });
        }
        cursor = cursor.max(e.end);
        if cursor >= data_end {
            reached_end = true;
            break;
        }
    }
    if !reached_end && cursor < data_end {
        intervals.push(OperationalInterval {
            start: cursor,
            end: data_end,
            cause: TerminatingCause::EndOfData,
        });
    }
    // Intervals that start after the last sample carry no rows.
    intervals.retain(|iv| iv.start < data_end);

    let non_operational = match &cfg.operation_signal {
        None => vec![false; frame.n_rows()],
        Some(sig) => {
            let j = frame
                .column_index(&sig.feature)
                .ok_or_else(|| LabelError::UnknownSignal(sig.feature.clone()))?;
            (0..frame.n_rows())
                .map(|i| {
                    let v = frame.get(i, j);
                    is_missing(v) || v <= sig.threshold
                })
                .collect()
        }
    };
    Ok(Operation {
        intervals,
        non_operational,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum HealthState {
    Healthy,
    Transition,
    Degraded {
        component: Option<String>,
        failure_mode: String,
    },
    Excluded,
}

impl HealthState {
    pub fn name(&self) -> &'static str {
        match self {
            HealthState::Healthy => "healthy",
            HealthState::Transition => "transition",
            HealthState::Degraded { .. } => "degraded",
            HealthState::Excluded => "excluded",
        }
    }
}

/// Which interval and terminating event produced a label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub interval: Option<usize>,
    pub event: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSequence {
    pub timestamps: Vec<i64>,
    pub states: Vec<HealthState>,
    pub provenance: Vec<Provenance>,
}

impl LabelSequence {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for s in &self.states {
            let key = match s {
                HealthState::Degraded { failure_mode, .. } => format!("degraded:{failure_mode}"),
                other => other.name().to_string(),
            };
            *out.entry(key).or_insert(0) += 1;
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), LabelError> {
        let file = std::fs::File::create(path).map_err(|source| IngestError::FileUnwritable {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let csv_err = |source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record(["timestamp", "state", "component", "failure_mode", "interval", "event"])
            .map_err(csv_err)?;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for ((t, s), p) in self.timestamps.iter().zip(&self.states).zip(&self.provenance) {
            let (component, mode) = match s {
                HealthState::Degraded {
                    component,
                    failure_mode,
                } => (component.clone().unwrap_or_default(), failure_mode.clone()),
                _ => (String::new(), String::new()),
            };
            w.write_record([
                t.to_string(),
                s.name().to_string(),
                component,
                mode,
                opt(p.interval),
                opt(p.event),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|source| IngestError::FileUnwritable {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }

    /// Reads a file written by [`LabelSequence::write_csv`].
    pub fn read_csv(path: &Path) -> Result<LabelSequence, LabelError> {
        let file = std::fs::File::open(path).map_err(|source| IngestError::FileUnreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
        let bad = |what: String| LabelError::Malformed(format!("{}: {what}", path.display()));
        let opt = |v: &str| -> Result<Option<usize>, LabelError> {
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(format!("bad index `{v}`")))
            }
        };
        let mut out = LabelSequence {
            timestamps: Vec::new(),
            states: Vec::new(),
            provenance: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec.map_err(|source| IngestError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            if rec.len() != 6 {
                return Err(bad(format!("expected 6 fields, got {}", rec.len())));
            }
            out.timestamps
                .push(rec[0].parse().map_err(|_| bad(format!("bad timestamp `{}`", &rec[0])))?);
            let state = match &rec[1] {
                "healthy" => HealthState::Healthy,
                "transition" => HealthState::Transition,
                "excluded" => HealthState::Excluded,
                "degraded" => HealthState::Degraded {
                    component: Some(rec[2].to_string()).filter(|c| !c.is_empty()),
                    failure_mode: rec[3].to_string(),
                },
                other => return Err(bad(format!("unknown state `{other}`"))),
            };
            out.states.push(state);
            out.provenance.push(Provenance {
                interval: opt(&rec[4])?,
                event: opt(&rec[5])?,
            });
        }
        Ok(out)
    }
}

pub fn generate_labels(
    operation: &Operation,
    cfg: &LabelingConfig,
    frame: &SensorFrame,
) -> Result<LabelSequence, LabelError> {
    cfg.validate()?;
    if operation.non_operational.len() != frame.n_rows() {
        return Err(LabelError::LengthMismatch {
            labels: operation.non_operational.len(),
            rows: frame.n_rows(),
        });
    }
    let ts = frame.timestamps();
    let mut states = Vec::with_capacity(ts.len());
    let mut provenance = Vec::with_capacity(ts.len());
    let mut k = 0;
    for (i, &t) in ts.iter().enumerate() {
        while k < operation.intervals.len() && operation.intervals[k].end <= t {
            k += 1;
        }
        let Some(iv) = operation.intervals.get(k).filter(|iv| iv.contains(t)) else {
            states.push(HealthState::Excluded);
            provenance.push(Provenance::default());
            continue;
        };
        let event = match iv.cause {
            TerminatingCause::Event { index, .. } => Some(index),
            TerminatingCause::EndOfData => None,
        };
        provenance.push(Provenance {
            interval: Some(k),
            event,
        });
        let state = if operation.non_operational[i]
            || t < iv.start + cfg.warmup
            || t >= iv.end - cfg.cooldown
        {
            HealthState::Excluded
        } else if let Some((component, mode)) = iv.failure() {
            let mode = mode_id(component, mode);
            let (dw, dtr) = cfg.windows_for(&mode);
            let degraded_start = iv.end - dw;
            if t >= degraded_start {
                HealthState::Degraded {
                    component: component.clone(),
                    failure_mode: mode,
                }
            } else if t >= degraded_start - dtr {
                HealthState::Transition
            } else {
                HealthState::Healthy
            }
        } else {
            HealthState::Healthy
        };
        states.push(state);
    }
    Ok(LabelSequence {
        timestamps: ts.to_vec(),
        states,
        provenance,
    })
}

/// Interval extraction followed by label generation.
pub fn label_frame(
    log: &EventLog,
    frame: &SensorFrame,
    cfg: &LabelingConfig,
) -> Result<LabelSequence, LabelError> {
    let op = extract_operational_intervals(log, frame, cfg)?;
    generate_labels(&op, cfg, frame)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partitions {
    pub healthy: SensorFrame,
    pub degraded: BTreeMap<String, SensorFrame>,
    pub transition: SensorFrame,
    pub excluded_rows: usize,
}

impl Partitions {
    pub fn degraded_rows(&self) -> usize {
        self.degraded.values().map(SensorFrame::n_rows).sum()
    }

    /// All degraded partitions merged back into time order.
    pub fn degraded_union(&self) -> Option<SensorFrame> {
        let mut frames = self.degraded.values();
        let first = frames.next()?;
        let mut rows: Vec<(i64, usize, usize)> = Vec::new();
        let all: Vec<&SensorFrame> = std::iter::once(first).chain(frames).collect();
        for (k, f) in all.iter().enumerate() {
            rows.extend(f.timestamps().iter().enumerate().map(|(i, &t)| (t, k, i)));
        }
        rows.sort_unstable();
        let mut values = Vec::with_capacity(rows.len() * first.n_cols());
        for &(_, k, i) in &rows {
            values.extend_from_slice(all[k].row(i));
        }
        let mut out = SensorFrame::new(
            rows.iter().map(|r| r.0).collect(),
            first.feature_names().to_vec(),
            values,
        )
        .ok()?;
        for c in first.categorical_columns() {
            out.mark_categorical(c.clone());
        }
        Some(out)
    }

    pub fn write(&self, dir: &Path, time_column: &str) -> Result<Vec<std::path::PathBuf>, LabelError> {
        let mut written = Vec::new();
        let mut put = |name: String, f: &SensorFrame| -> Result<(), LabelError> {
            let p = dir.join(name);
            write_sensor_frame(f, &p, time_column)?;
            written.push(p);
            Ok(())
        };
        put("healthy.csv".into(), &self.healthy)?;
        for (mode, f) in &self.degraded {
            put(format!("degraded_{}.csv", crate::outlier::file_stem(mode)), f)?;
        }
        put("transition.csv".into(), &self.transition)?;
        Ok(written)
    }
}

pub fn partition_by_state(
    frame: &SensorFrame,
    labels: &LabelSequence,
) -> Result<Partitions, LabelError> {
    if labels.len() != frame.n_rows() {
        return Err(LabelError::LengthMismatch {
            labels: labels.len(),
            rows: frame.n_rows(),
        });
    }
    let mut healthy = Vec::new();
    let mut transition = Vec::new();
    let mut degraded: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut excluded_rows = 0;
    for (i, s) in labels.states.iter().enumerate() {
        match s {
            HealthState::Healthy => healthy.push(i),
            HealthState::Transition => transition.push(i),
            HealthState::Degraded { failure_mode, .. } => {
                degraded.entry(failure_mode.clone()).or_default().push(i)
            }
            HealthState::Excluded => excluded_rows += 1,
        }
    }
    Ok(Partitions {
        healthy: frame.select_rows(&healthy),
        degraded: degraded
            .into_iter()
            .map(|(k, rows)| (k, frame.select_rows(&rows)))
            .collect(),
        transition: frame.select_rows(&transition),
        excluded_rows,
    })
}
