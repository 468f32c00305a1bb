//! Expert exclusions, time trimming, and missing-ratio filtering.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::frame::{is_missing, SensorFrame};

pub const DEFAULT_COLUMN_THRESHOLD: f64 = 0.5;
pub const DEFAULT_ROW_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("every column was dropped by the missing-ratio filter")]
    AllColumnsDropped,
}

/// Half-open `[start, end)` time range; an absent side is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl TimeWindow {
    pub fn contains(&self, t: i64) -> bool {
        self.start.is_none_or(|s| t >= s) && self.end.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub excluded_by_expert: Vec<String>,
    pub dropped_columns: Vec<(String, f64)>,
    pub dropped_row_count: usize,
    pub remaining_shape: (usize, usize),
}

pub fn apply_exclusions(
    frame: &SensorFrame,
    exclude: &BTreeSet<String>,
    keep_window: Option<TimeWindow>,
) -> Result<SensorFrame, SelectError> {
    if let Some(name) = exclude.iter().find(|n| frame.column_index(n).is_none()) {
        return Err(SelectError::UnknownFeature(name.clone()));
    }
    let cols: Vec<usize> = frame
        .feature_names()
        .iter()
        .enumerate()
        .filter(|(_, n)| !exclude.contains(*n))
        .map(|(j, _)| j)
        .collect();
    let mut out = if cols.len() == frame.n_cols() {
        frame.clone()
    } else {
        frame.select_columns(&cols)
    };
    if let Some(w) = keep_window {
        let ts = out.timestamps().to_vec();
        out = out.filter_rows(|i| w.contains(ts[i]));
    }
    Ok(out)
}

/// Drops columns whose missing ratio is at least `col_threshold`, then rows
/// whose missing ratio over the surviving columns exceeds `row_threshold`.
/// `row_threshold = None` disables the row pass.
pub fn missing_ratio_filter(
    frame: &SensorFrame,
    col_threshold: f64,
    row_threshold: Option<f64>,
) -> Result<(SensorFrame, SelectionReport), SelectError> {
    for t in std::iter::once(col_threshold).chain(row_threshold) {
        if !(0.0..=1.0).contains(&t) {
            return Err(SelectError::InvalidThreshold(t));
        }
    }
    let ratios = frame.column_missing_ratios();
    let mut report = SelectionReport::default();
    let mut keep = Vec::new();
    for (j, &r) in ratios.iter().enumerate() {
        if r >= col_threshold {
            report
                .dropped_columns
                .push((frame.feature_names()[j].clone(), r));
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(SelectError::AllColumnsDropped);
    }
    let cols = if keep.len() == frame.n_cols() {
        frame.clone()
    } else {
        frame.select_columns(&keep)
    };
    let out = match row_threshold {
        None => cols,
        Some(t) => {
            let c = cols.n_cols() as f64;
            let rows: Vec<usize> = (0..cols.n_rows())
                .filter(|&i| {
                    let missing = cols.row(i).iter().filter(|v| is_missing(**v)).count();
                    missing as f64 / c <= t
                })
                .collect();
            report.dropped_row_count = cols.n_rows() - rows.len();
            if rows.len() == cols.n_rows() {
                cols
            } else {
                cols.select_rows(&rows)
            }
        }
    };
    report.remaining_shape = (out.n_rows(), out.n_cols());
    Ok((out, report))
}

/// Removes every row holding at least one missing cell. Returns the count removed.
pub fn drop_incomplete_rows(frame: &SensorFrame) -> (SensorFrame, usize) {
    let out = frame.filter_rows(|i| !frame.row_has_missing(i));
    let removed = frame.n_rows() - out.n_rows();
    (out, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::MISSING;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn exclusions_remove_columns_and_trim_time() {
        let f = SensorFrame::new(vec![0, 10, 20, 30], names(3), (0..12).map(f64::from).collect())
            .unwrap();
        let ex: BTreeSet<String> = ["f1".to_string()].into();
        let w = TimeWindow {
            start: Some(10),
            end: Some(30),
        };
        let g = apply_exclusions(&f, &ex, Some(w)).unwrap();
        assert_eq!(g.feature_names(), &["f0", "f2"]);
        assert_eq!(g.timestamps(), &[10, 20]);
        assert_eq!(g.row(0), &[3.0, 5.0]);

        let same = apply_exclusions(&f, &BTreeSet::new(), Some(TimeWindow::default())).unwrap();
        assert_eq!(same, f);

        let ghost: BTreeSet<String> = ["ghost".to_string()].into();
        assert_eq!(
            apply_exclusions(&f, &ghost, None),
            Err(SelectError::UnknownFeature("ghost".into()))
        );
    }

    #[test]
    fn expert_exclusion_of_34_from_189() {
        let f = SensorFrame::new(vec![0], names(189), vec![1.0; 189]).unwrap();
        let ex: BTreeSet<String> = (0..34).map(|j| format!("f{j}")).collect();
        assert_eq!(apply_exclusions(&f, &ex, None).unwrap().n_cols(), 155);
    }

    #[test]
    fn all_missing_column_dropped() {
        let m = MISSING;
        let f = SensorFrame::new(
            vec![0, 1, 2, 3],
            names(3),
            vec![1.0, 2.0, m, 1.0, 2.0, m, 1.0, 2.0, m, 1.0, 2.0, m],
        )
        .unwrap();
        let (g, rep) = missing_ratio_filter(&f, 0.5, Some(0.2)).unwrap();
        assert_eq!(rep.dropped_columns, vec![("f2".to_string(), 1.0)]);
        assert_eq!(rep.dropped_row_count, 0);
        assert_eq!(rep.remaining_shape, (4, 2));
        assert_eq!(g.feature_names(), &["f0", "f1"]);
    }

    #[test]
    fn complete_frame_is_untouched() {
        let f = SensorFrame::new(vec![0, 1], names(2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (g, rep) = missing_ratio_filter(&f, 0.5, Some(0.2)).unwrap();
        assert_eq!(g, f);
        assert!(rep.dropped_columns.is_empty());
        assert_eq!(rep.dropped_row_count, 0);
    }

    #[test]
    fn rejects_bad_thresholds_and_total_loss() {
        let f = SensorFrame::new(vec![0], names(1), vec![MISSING]).unwrap();
        assert_eq!(
            missing_ratio_filter(&f, 1.5, None).unwrap_err(),
            SelectError::InvalidThreshold(1.5)
        );
        assert_eq!(
            missing_ratio_filter(&f, 0.5, None).unwrap_err(),
            SelectError::AllColumnsDropped
        );
    }

    #[test]
    fn drop_incomplete() {
        let f = SensorFrame::new(vec![0, 1], names(2), vec![1.0, MISSING, 3.0, 4.0]).unwrap();
        let (g, n) = drop_incomplete_rows(&f);
        assert_eq!(n, 1);
        assert_eq!(g.timestamps(), &[1]);
    }
}
