//! Reading sensor tables and maintenance logs, and categorical encoding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::frame::{is_missing, FrameError, SensorFrame, MISSING};

pub const DEFAULT_MISSING_TOKENS: [&str; 5] = ["", "NaN", "nan", "NA", "null"];

pub fn default_missing_tokens() -> BTreeSet<String> {
    DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    FileUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("time column `{0}` not found in header")]
    MissingTimeColumn(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(i64),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("unparseable timestamp `{value}` at data row {row}")]
    BadTimestamp { row: usize, value: String },
    #[error("unknown event kind `{0}`")]
    UnknownKind(String),
    #[error("event interval is inverted: start {start} >= end {end}")]
    InvertedInterval { start: i64, end: i64 },
    #[error("event at {start} has a failure mode but kind `{kind}`")]
    FailureModeOnNonFailure { start: i64, kind: EventKind },
    #[error("event at {start} has a failure mode but no component")]
    FailureModeWithoutComponent { start: i64 },
    #[error("column `{0}` not found")]
    ColumnNotFound(String),
    #[error("value `{value}` in column `{column}` has no code")]
    UnmappedCategory { column: String, value: String },
    #[error("encoding for `{0}` must map categories injectively onto 0..k")]
    InvalidEncoding(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Parses integer epoch seconds or an ISO-8601 date-time (offset or naive UTC).
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() && v.fract() == 0.0 {
            return Some(v as i64);
        }
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

enum Cell {
    Missing,
    Number(f64),
    Text,
}

fn parse_cell(raw: &str, missing: &BTreeSet<String>) -> Cell {
    let t = raw.trim();
    if missing.contains(t) || missing.contains(raw) {
        return Cell::Missing;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Number(v),
        Ok(_) => Cell::Missing,
        Err(_) => Cell::Text,
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IngestError + '_ {
    move |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a sensor CSV. Rows are sorted by timestamp; cells matching a missing
/// token or not parseable as finite numbers become missing. Columns holding
/// text keep their raw strings for later categorical encoding.
pub fn load_sensor_frame(
    path: &Path,
    time_column: &str,
    missing_tokens: &BTreeSet<String>,
) -> Result<SensorFrame, IngestError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let time_idx = headers
        .iter()
        .position(|h| h.trim() == time_column)
        .ok_or_else(|| IngestError::MissingTimeColumn(time_column.to_string()))?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != time_idx).collect();
    let names: Vec<String> = feature_cols
        .iter()
        .map(|&j| headers[j].trim().to_string())
        .collect();

    let mut stamps = Vec::new();
    let mut values = Vec::new();
    let mut text_cols = BTreeSet::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_err(path))? {
        let row = stamps.len();
        let raw_ts = record.get(time_idx).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| IngestError::BadTimestamp {
            row,
            value: raw_ts.to_string(),
        })?;
        stamps.push(ts);
        for (k, &j) in feature_cols.iter().enumerate() {
            match parse_cell(record.get(j).unwrap_or(""), missing_tokens) {
                Cell::Missing => values.push(MISSING),
                Cell::Number(v) => values.push(v),
                Cell::Text => {
                    text_cols.insert(k);
                    values.push(MISSING);
                }
            }
        }
    }
    if stamps.is_empty() {
        return Err(IngestError::EmptyTable);
    }

    let mut text: BTreeMap<String, Vec<Option<String>>> = BTreeMap::new();
    if !text_cols.is_empty() {
        let mut rdr = open_csv(path)?;
        let mut cols: Vec<(usize, usize, Vec<Option<String>>)> = text_cols
            .iter()
            .map(|&k| (k, feature_cols[k], Vec::with_capacity(stamps.len())))
            .collect();
        while rdr.read_record(&mut record).map_err(csv_err(path))? {
            for (_, j, out) in cols.iter_mut() {
                let raw = record.get(*j).unwrap_or("");
                let t = raw.trim();
                if missing_tokens.contains(t) || missing_tokens.contains(raw) {
                    out.push(None);
                } else {
                    out.push(Some(t.to_string()));
                }
            }
        }
        for (k, _, col) in cols {
            text.insert(names[k].clone(), col);
        }
    }

    let ncols = names.len();
    let mut order: Vec<usize> = (0..stamps.len()).collect();
    order.sort_by_key(|&i| stamps[i]);
    if let Some(w) = order.windows(2).find(|w| stamps[w[0]] == stamps[w[1]]) {
        return Err(IngestError::DuplicateTimestamp(stamps[w[0]]));
    }
    let sorted_values: Vec<f64> = if order.iter().enumerate().all(|(a, &b)| a == b) {
        values
    } else {
        let mut v = Vec::with_capacity(values.len());
        for &i in &order {
            v.extend_from_slice(&values[i * ncols..(i + 1) * ncols]);
        }
        for col in text.values_mut() {
            *col = order.iter().map(|&i| col[i].clone()).collect();
        }
        v
    };
    let sorted_stamps: Vec<i64> = order.iter().map(|&i| stamps[i]).collect();
    let hint = median_step(&sorted_stamps);
    let mut frame = SensorFrame::new(sorted_stamps, names, sorted_values)?.with_text(text);
    frame.sampling_period_hint = hint;
    Ok(frame)
}

fn median_step(ts: &[i64]) -> Option<i64> {
    if ts.len() < 2 {
        return None;
    }
    let mut d: Vec<i64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_unstable();
    Some(d[d.len() / 2])
}

/// Writes a frame in the sensor CSV layout: time column first, missing cells
/// as `NaN`, raw text kept for text columns.
pub fn write_sensor_frame(
    frame: &SensorFrame,
    path: &Path,
    time_column: &str,
) -> Result<(), IngestError> {
    let file = std::fs::File::create(path).map_err(|source| IngestError::FileUnwritable {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec![time_column.to_string()];
    header.extend(frame.feature_names().iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    let text: Vec<Option<&[Option<String>]>> = frame
        .feature_names()
        .iter()
        .map(|n| frame.text_column(n))
        .collect();
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for (i, ts) in frame.timestamps().iter().enumerate() {
        rec.clear();
        rec.push(ts.to_string());
        for (j, v) in frame.row(i).iter().enumerate() {
            if is_missing(*v) {
                match text[j].and_then(|col| col[i].as_deref()) {
                    Some(s) => rec.push(s.to_string()),
                    None => rec.push("NaN".to_string()),
                }
            } else {
                rec.push(v.to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IngestError::FileUnwritable {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NormalStop,
    Pause,
    External,
    Failure,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::NormalStop => "normal_stop",
            EventKind::Pause => "pause",
            EventKind::External => "external",
            EventKind::Failure => "failure",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "normal_stop" => Ok(EventKind::NormalStop),
            "pause" => Ok(EventKind::Pause),
            "external" => Ok(EventKind::External),
            "failure" => Ok(EventKind::Failure),
            other => Err(IngestError::UnknownKind(other.to_string())),
        }
    }
}

/// One stoppage in the maintenance log: the machine is down over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub start: i64,
    pub end: i64,
    pub kind: EventKind,
    pub component: Option<String>,
    pub failure_mode: Option<String>,
    #[serde(default)]
    pub note: String,
}

impl EventRecord {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.start >= self.end {
            return Err(IngestError::InvertedInterval {
                start: self.start,
                end: self.end,
            });
        }
        if self.failure_mode.is_some() {
            if self.kind != EventKind::Failure {
                return Err(IngestError::FailureModeOnNonFailure {
                    start: self.start,
                    kind: self.kind,
                });
            }
            if self.component.is_none() {
                return Err(IngestError::FailureModeWithoutComponent { start: self.start });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    /// Validates each record and sorts by start (stable).
    pub fn new(mut records: Vec<EventRecord>) -> Result<Self, IngestError> {
        for r in &records {
            r.validate()?;
        }
        records.sort_by_key(|r| r.start);
        Ok(Self { records })
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn failures(&self) -> impl Iterator<Item = &EventRecord> {
        self.records.iter().filter(|r| r.kind == EventKind::Failure)
    }
}

fn opt_field(s: Option<&str>) -> Option<String> {
    s.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

pub fn load_event_log(path: &Path) -> Result<EventLog, IngestError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let col = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.to_string()));
    let (c_start, c_end, c_kind) = (col("start")?, col("end")?, col("kind")?);
    let (c_comp, c_mode, c_note) = (find("component"), find("failure_mode"), find("note"));

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let ts = |c: usize| {
            let raw = rec.get(c).unwrap_or("");
            parse_timestamp(raw).ok_or_else(|| IngestError::BadTimestamp {
                row,
                value: raw.to_string(),
            })
        };
        let record = EventRecord {
            start: ts(c_start)?,
            end: ts(c_end)?,
            kind: rec.get(c_kind).unwrap_or("").parse()?,
            component: opt_field(c_comp.and_then(|c| rec.get(c))),
            failure_mode: opt_field(c_mode.and_then(|c| rec.get(c))),
            note: c_note
                .and_then(|c| rec.get(c))
                .unwrap_or("")
                .to_string(),
        };
        records.push(record);
    }
    EventLog::new(records)
}

pub fn write_event_log(log: &EventLog, path: &Path) -> Result<(), IngestError> {
    let file = std::fs::File::create(path).map_err(|source| IngestError::FileUnwritable {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["start", "end", "kind", "component", "failure_mode", "note"])
        .map_err(csv_err(path))?;
    for r in log.records() {
        w.write_record([
            r.start.to_string().as_str(),
            r.end.to_string().as_str(),
            r.kind.as_str(),
            r.component.as_deref().unwrap_or(""),
            r.failure_mode.as_deref().unwrap_or(""),
            r.note.as_str(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IngestError::FileUnwritable {
        path: path.to_path_buf(),
        source,
    })
}

/// Category-to-code mapping for one text column, either kept as a single
/// ordinal column or expanded into one indicator column per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub column: String,
    pub mapping: BTreeMap<String, u32>,
    #[serde(default)]
    pub one_hot: bool,
}

impl CategoricalEncoding {
    /// Codes assigned in the order the categories are given.
    pub fn from_categories(column: &str, categories: &[&str], one_hot: bool) -> Self {
        Self {
            column: column.to_string(),
            mapping: categories
                .iter()
                .enumerate()
                .map(|(i, c)| (c.to_string(), i as u32))
                .collect(),
            one_hot,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let codes: BTreeSet<u32> = self.mapping.values().copied().collect();
        let contiguous = codes.iter().copied().eq(0..self.mapping.len() as u32);
        if codes.len() != self.mapping.len() || !contiguous {
            return Err(IngestError::InvalidEncoding(self.column.clone()));
        }
        Ok(())
    }

    fn categories_by_code(&self) -> Vec<&str> {
        let mut cats: Vec<(&str, u32)> =
            self.mapping.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        cats.sort_by_key(|&(_, v)| v);
        cats.into_iter().map(|(k, _)| k).collect()
    }
}

pub fn encode_categorical(
    frame: &SensorFrame,
    spec: &CategoricalEncoding,
) -> Result<SensorFrame, IngestError> {
    spec.validate()?;
    let col = frame
        .column_index(&spec.column)
        .ok_or_else(|| IngestError::ColumnNotFound(spec.column.clone()))?;
    let n = frame.n_rows();
    let raw: Vec<Option<String>> = match frame.text_column(&spec.column) {
        Some(text) => text.to_vec(),
        None => (0..n)
            .map(|i| {
                let v = frame.get(i, col);
                (!is_missing(v)).then(|| v.to_string())
            })
            .collect(),
    };
    let mut codes: Vec<Option<u32>> = Vec::with_capacity(n);
    for value in raw {
        match value {
            None => codes.push(None),
            Some(v) => match spec.mapping.get(&v) {
                Some(&c) => codes.push(Some(c)),
                None => {
                    return Err(IngestError::UnmappedCategory {
                        column: spec.column.clone(),
                        value: v,
                    })
                }
            },
        }
    }

    let new_columns: Vec<(String, Vec<f64>)> = if spec.one_hot {
        spec.categories_by_code()
            .into_iter()
            .enumerate()
            .map(|(k, cat)| {
                let cells = codes
                    .iter()
                    .map(|c| match c {
                        None => MISSING,
                        Some(c) if *c as usize == k => 1.0,
                        Some(_) => 0.0,
                    })
                    .collect();
                (format!("{}={}", spec.column, cat), cells)
            })
            .collect()
    } else {
        let cells = codes
            .iter()
            .map(|c| c.map_or(MISSING, |c| c as f64))
            .collect();
        vec![(spec.column.clone(), cells)]
    };
    let names: Vec<String> = new_columns.iter().map(|(n, _)| n.clone()).collect();
    let mut out = frame.splice_column(col, new_columns)?;
    for name in names {
        out.mark_categorical(name);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn parses_three_row_table_with_missing_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "s.csv", "t,a,b\n0,1,2\n15,NaN,4\n30,5,6\n");
        let f = load_sensor_frame(&p, "t", &default_missing_tokens()).unwrap();
        assert_eq!((f.n_rows(), f.n_cols()), (3, 2));
        assert!(is_missing(f.get(1, 0)));
        assert_eq!(f.get(1, 1), 4.0);
        assert_eq!(f.sampling_period_hint, Some(15));
    }

    #[test]
    fn sorts_rows_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "s.csv", "t,a\n30,3\n0,1\n15,2\n");
        let f = load_sensor_frame(&p, "t", &default_missing_tokens()).unwrap();
        assert_eq!(f.timestamps(), &[0, 15, 30]);
        assert_eq!(f.column(0), vec![1.0, 2.0, 3.0]);

        let p = write_tmp(&dir, "d.csv", "t,a\n0,1\n0,2\n");
        assert!(matches!(
            load_sensor_frame(&p, "t", &default_missing_tokens()),
            Err(IngestError::DuplicateTimestamp(0))
        ));
    }

    #[test]
    fn header_and_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "s.csv", "time,a\n0,1\n");
        assert!(matches!(
            load_sensor_frame(&p, "t", &default_missing_tokens()),
            Err(IngestError::MissingTimeColumn(_))
        ));
        let p = write_tmp(&dir, "e.csv", "t,a\n");
        assert!(matches!(
            load_sensor_frame(&p, "t", &default_missing_tokens()),
            Err(IngestError::EmptyTable)
        ));
        assert!(matches!(
            load_sensor_frame(&dir.path().join("nope.csv"), "t", &default_missing_tokens()),
            Err(IngestError::FileUnreadable { .. })
        ));
    }

    #[test]
    fn iso_timestamps_and_infinities() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "s.csv",
            "t,a\n2019-05-01T00:00:00Z,inf\n2019-05-01 00:00:15,1e3\n",
        );
        let f = load_sensor_frame(&p, "t", &default_missing_tokens()).unwrap();
        assert_eq!(f.timestamps(), &[1_556_668_800, 1_556_668_815]);
        assert!(is_missing(f.get(0, 0)));
        assert_eq!(f.get(1, 0), 1000.0);
    }

    #[test]
    fn event_log_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "ev.csv",
            "start,end,kind,component,failure_mode,note\n100,102,failure,scrubber,mechanical,\n",
        );
        let log = load_event_log(&p).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.records()[0].failure_mode.as_deref(), Some("mechanical"));

        let p = write_tmp(&dir, "inv.csv", "start,end,kind,component,failure_mode,note\n60,50,pause,,,\n");
        assert!(matches!(
            load_event_log(&p),
            Err(IngestError::InvertedInterval { start: 60, end: 50 })
        ));
        let p = write_tmp(&dir, "k.csv", "start,end,kind,component,failure_mode,note\n1,2,vacation,,,\n");
        assert!(matches!(load_event_log(&p), Err(IngestError::UnknownKind(k)) if k == "vacation"));
        let p = write_tmp(&dir, "m.csv", "start,end,kind,component,failure_mode,note\n1,2,pause,x,fm,\n");
        assert!(matches!(
            load_event_log(&p),
            Err(IngestError::FailureModeOnNonFailure { .. })
        ));
    }

    fn valve_frame(dir: &tempfile::TempDir) -> SensorFrame {
        let p = write_tmp(dir, "v.csv", "t,p,valve\n0,1,open\n1,2,closed\n2,3,\n3,4,open\n");
        load_sensor_frame(&p, "t", &default_missing_tokens()).unwrap()
    }

    #[test]
    fn ordinal_encoding() {
        let dir = tempfile::tempdir().unwrap();
        let f = valve_frame(&dir);
        let mut enc = CategoricalEncoding::from_categories("valve", &["closed", "open"], false);
        let g = encode_categorical(&f, &enc).unwrap();
        let col = g.column(1);
        assert_eq!(col[0], 1.0);
        assert_eq!(col[1], 0.0);
        assert!(is_missing(col[2]));
        assert!(g.is_categorical("valve"));
        assert!(g.text_column("valve").is_none());

        enc.mapping.remove("closed");
        enc.mapping.insert("open".into(), 0);
        assert!(matches!(
            encode_categorical(&f, &enc),
            Err(IngestError::UnmappedCategory { value, .. }) if value == "closed"
        ));
    }

    #[test]
    fn one_hot_rows_sum_to_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "v.csv", "t,valve\n0,open\n1,closed\n2,ajar\n3,\n");
        let f = load_sensor_frame(&p, "t", &default_missing_tokens()).unwrap();
        let enc = CategoricalEncoding::from_categories("valve", &["open", "closed", "ajar"], true);
        let g = encode_categorical(&f, &enc).unwrap();
        assert_eq!(g.feature_names(), &["valve=open", "valve=closed", "valve=ajar"]);
        for i in 0..3 {
            assert_eq!(g.row(i).iter().sum::<f64>(), 1.0);
        }
        assert!(g.row(3).iter().all(|v| is_missing(*v)));

        let short = CategoricalEncoding::from_categories("valve", &["open", "closed"], true);
        assert!(matches!(
            encode_categorical(&f, &short),
            Err(IngestError::UnmappedCategory { .. })
        ));
        let ghost = CategoricalEncoding::from_categories("ghost", &["x"], false);
        assert!(matches!(
            encode_categorical(&f, &ghost),
            Err(IngestError::ColumnNotFound(_))
        ));
    }
}
