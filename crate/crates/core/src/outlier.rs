//! Per-sensor descriptive statistics, diagnostic exports, and cutoff-based
//! outlier row removal.
//!
//! Cutoffs are chosen by a person looking at the exported series and boxplot
//! summaries; nothing here decides bounds automatically.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::{is_missing, SensorFrame};
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum OutlierError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("bounds for `{feature}` are inverted: {lower} >= {upper}")]
    InvertedBounds { feature: String, lower: f64, upper: f64 },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Summary of one feature's non-missing cells. Undefined statistics of an
/// all-missing feature are NaN; `degenerate` marks fewer than two cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr_low_whisker: f64,
    pub iqr_high_whisker: f64,
    pub p2_5: f64,
    pub p97_5: f64,
    pub missing_ratio: f64,
    pub cv: Option<f64>,
    pub degenerate: bool,
}

impl FeatureStats {
    pub fn from_cells(name: &str, cells: &[f64]) -> Self {
        let mut present: Vec<f64> = cells.iter().copied().filter(|v| !is_missing(*v)).collect();
        present.sort_by(f64::total_cmp);
        let missing_ratio = if cells.is_empty() {
            0.0
        } else {
            1.0 - present.len() as f64 / cells.len() as f64
        };
        let q = |p| stats::quantile_sorted(&present, p).unwrap_or(f64::NAN);
        let mean = stats::mean(&present).unwrap_or(f64::NAN);
        let degenerate = present.len() < 2;
        let std = if degenerate {
            0.0
        } else {
            stats::std_pop(&present).unwrap_or(0.0)
        };
        let (q1, q3) = (q(0.25), q(0.75));
        let iqr = q3 - q1;
        let cv = (!present.is_empty() && mean != 0.0).then(|| std / mean);
        Self {
            name: name.to_string(),
            count: present.len(),
            mean,
            std,
            min: present.first().copied().unwrap_or(f64::NAN),
            max: present.last().copied().unwrap_or(f64::NAN),
            q1,
            median: q(0.5),
            q3,
            iqr_low_whisker: q1 - 1.5 * iqr,
            iqr_high_whisker: q3 + 1.5 * iqr,
            p2_5: q(0.025),
            p97_5: q(0.975),
            missing_ratio,
            cv,
            degenerate,
        }
    }
}

pub fn compute_feature_stats(frame: &SensorFrame) -> Vec<FeatureStats> {
    (0..frame.n_cols())
        .into_par_iter()
        .map(|j| FeatureStats::from_cells(&frame.feature_names()[j], &frame.column(j)))
        .collect()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> OutlierError + '_ {
    move |source| OutlierError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// File-system safe version of a feature name.
pub fn file_stem(feature: &str) -> String {
    feature
        .chars()
        .map(|c| match c {
            '/' | '\\' | ':' | '*' | '?' | '"' | '<' | '>' | '|' => '_',
            c => c,
        })
        .collect()
}

fn fmt_stat(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        v.to_string()
    }
}

/// Writes `<feature>.series.csv` for every feature and one
/// `boxplot_summary.csv` with a record per feature. Returns the paths written.
pub fn emit_diagnostics(frame: &SensorFrame, out_dir: &Path) -> Result<Vec<PathBuf>, OutlierError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let stats = compute_feature_stats(frame);
    let mut written: Vec<PathBuf> = (0..frame.n_cols())
        .into_par_iter()
        .map(|j| {
            let path = out_dir.join(format!("{}.series.csv", file_stem(&frame.feature_names()[j])));
            let file = std::fs::File::create(&path).map_err(io_err(&path))?;
            let mut w = std::io::BufWriter::new(file);
            writeln!(w, "timestamp,value").map_err(io_err(&path))?;
            for (i, ts) in frame.timestamps().iter().enumerate() {
                let v = frame.get(i, j);
                if !is_missing(v) {
                    writeln!(w, "{ts},{v}").map_err(io_err(&path))?;
                }
            }
            w.flush().map_err(io_err(&path))?;
            Ok(path)
        })
        .collect::<Result<_, OutlierError>>()?;

    let path = out_dir.join("boxplot_summary.csv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        "feature,min,q1,median,q3,max,low_whisker,high_whisker,p2_5,p97_5,missing_ratio,degenerate"
    )
    .map_err(io_err(&path))?;
    for s in &stats {
        let cells = [
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max,
            s.iqr_low_whisker,
            s.iqr_high_whisker,
            s.p2_5,
            s.p97_5,
            s.missing_ratio,
        ]
        .map(fmt_stat)
        .join(",");
        writeln!(w, "{},{},{}", csv_field(&s.name), cells, s.degenerate).map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Bounds {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper }
    }

    fn below(&self, v: f64) -> bool {
        self.lower.is_some_and(|l| v < l)
    }

    fn above(&self, v: f64) -> bool {
        self.upper.is_some_and(|u| v > u)
    }
}

/// Per-feature bounds in sensor units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CutoffSpec(pub BTreeMap<String, Bounds>);

impl CutoffSpec {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<(), OutlierError> {
        for (name, b) in &self.0 {
            if let (Some(lower), Some(upper)) = (b.lower, b.upper) {
                if lower >= upper {
                    return Err(OutlierError::InvertedBounds {
                        feature: name.clone(),
                        lower,
                        upper,
                    });
                }
            }
        }
        Ok(())
    }

    /// Bounds restricted to features present in `frame`.
    pub fn restricted_to(&self, frame: &SensorFrame) -> CutoffSpec {
        CutoffSpec(
            self.0
                .iter()
                .filter(|(k, _)| frame.column_index(k).is_some())
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCounts {
    pub feature: String,
    pub below_lower: usize,
    pub above_upper: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub feature: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub counts: Vec<CutoffCounts>,
    pub rows_removed: usize,
    pub before: Vec<MeanStd>,
    pub after: Vec<MeanStd>,
}

fn mean_std_all(frame: &SensorFrame) -> Vec<MeanStd> {
    compute_feature_stats(frame)
        .into_iter()
        .map(|s| MeanStd {
            feature: s.name,
            mean: s.mean,
            std: s.std,
        })
        .collect()
}

/// Removes every row with a non-missing cell strictly outside its feature's
/// bounds. Missing cells never cause removal.
pub fn apply_cutoffs(
    frame: &SensorFrame,
    cutoffs: &CutoffSpec,
) -> Result<(SensorFrame, OutlierReport), OutlierError> {
    cutoffs.validate()?;
    let bounded: Vec<(usize, &String, Bounds)> = cutoffs
        .0
        .iter()
        .map(|(name, b)| {
            frame
                .column_index(name)
                .map(|j| (j, name, *b))
                .ok_or_else(|| OutlierError::UnknownFeature(name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut counts: Vec<CutoffCounts> = bounded
        .iter()
        .map(|(_, name, _)| CutoffCounts {
            feature: (*name).clone(),
            below_lower: 0,
            above_upper: 0,
        })
        .collect();
    let mut keep = Vec::with_capacity(frame.n_rows());
    for i in 0..frame.n_rows() {
        let row = frame.row(i);
        let mut ok = true;
        for (k, (j, _, b)) in bounded.iter().enumerate() {
            let v = row[*j];
            if is_missing(v) {
                continue;
            }
            if b.below(v) {
                counts[k].below_lower += 1;
                ok = false;
            } else if b.above(v) {
                counts[k].above_upper += 1;
                ok = false;
            }
        }
        if ok {
            keep.push(i);
        }
    }
    let out = if keep.len() == frame.n_rows() {
        frame.clone()
    } else {
        frame.select_rows(&keep)
    };
    let report = OutlierReport {
        counts,
        rows_removed: frame.n_rows() - out.n_rows(),
        before: mean_std_all(frame),
        after: mean_std_all(&out),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::MISSING;
    use approx::assert_abs_diff_eq;

    fn single(vals: Vec<f64>) -> SensorFrame {
        let n = vals.len() as i64;
        SensorFrame::new((0..n).collect(), vec!["p".into()], vals).unwrap()
    }

    #[test]
    fn stats_of_one_to_five() {
        let s = &compute_feature_stats(&single(vec![1.0, 2.0, 3.0, 4.0, 5.0]))[0];
        assert_eq!(s.mean, 3.0);
        assert_abs_diff_eq!(s.std, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!((s.iqr_low_whisker, s.iqr_high_whisker), (-1.0, 7.0));
        assert!(!s.degenerate);
    }

    #[test]
    fn constant_and_missing() {
        let s = &compute_feature_stats(&single(vec![7.0, 7.0, 7.0]))[0];
        assert_eq!((s.std, s.cv), (0.0, Some(0.0)));
        let s = &compute_feature_stats(&single(vec![1.0, MISSING, 3.0]))[0];
        assert_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.missing_ratio, 1.0 / 3.0);
        let s = &compute_feature_stats(&single(vec![MISSING, 4.0]))[0];
        assert!(s.degenerate);
        assert_eq!(s.std, 0.0);
        let s = &compute_feature_stats(&single(vec![-1.0, 1.0]))[0];
        assert_eq!(s.cv, None);
    }

    #[test]
    fn cutoffs_remove_rows() {
        let f = single(vec![50.0, 150.0, 200.0, 90.0, 300.0, MISSING]);
        let spec = CutoffSpec([("p".to_string(), Bounds::new(Some(100.0), Some(250.0)))].into());
        let (g, rep) = apply_cutoffs(&f, &spec).unwrap();
        assert_eq!(g.timestamps(), &[1, 2, 5]);
        assert_eq!(rep.rows_removed, 3);
        assert_eq!(rep.counts[0].below_lower, 2);
        assert_eq!(rep.counts[0].above_upper, 1);
        assert_eq!(rep.after[0].mean, 175.0);
    }

    #[test]
    fn lower_only_bound() {
        let f = single(vec![20.0, 120.0, 99.9, 400.0]);
        let spec = CutoffSpec([("p".to_string(), Bounds::new(Some(100.0), None))].into());
        let (g, _) = apply_cutoffs(&f, &spec).unwrap();
        assert_eq!(g.column(0), vec![120.0, 400.0]);
    }

    #[test]
    fn cutoff_errors_and_identity() {
        let f = single(vec![1.0, 2.0]);
        let (g, rep) = apply_cutoffs(&f, &CutoffSpec::default()).unwrap();
        assert_eq!(g, f);
        assert_eq!(rep.rows_removed, 0);
        let ghost = CutoffSpec([("q".to_string(), Bounds::new(Some(0.0), None))].into());
        assert!(matches!(apply_cutoffs(&f, &ghost), Err(OutlierError::UnknownFeature(_))));
        let inv = CutoffSpec([("p".to_string(), Bounds::new(Some(5.0), Some(1.0)))].into());
        assert!(matches!(apply_cutoffs(&f, &inv), Err(OutlierError::InvertedBounds { .. })));
    }

    #[test]
    fn diagnostics_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let f = SensorFrame::new(
            vec![0, 1, 2],
            vec!["a".into(), "b/c".into()],
            vec![1.0, MISSING, 2.0, MISSING, 3.0, MISSING],
        )
        .unwrap();
        let files = emit_diagnostics(&f, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let series_b = std::fs::read_to_string(dir.path().join("b_c.series.csv")).unwrap();
        assert_eq!(series_b, "timestamp,value\n");
        let summary = std::fs::read_to_string(dir.path().join("boxplot_summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("b/c,NaN") && lines[2].ends_with(",true"));

        let empty = SensorFrame::new(vec![0], vec![], vec![]).unwrap();
        let d2 = dir.path().join("empty");
        let files = emit_diagnostics(&empty, &d2).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap().lines().count(), 1);
    }
}
