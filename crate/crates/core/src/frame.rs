//! Time-indexed sensor tables and a small dense matrix type.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Marker stored in a cell when the historian produced no usable number.
pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

/// Rows are timestamps (integer epoch seconds, strictly increasing), columns
/// are sensor features. Missing cells hold [`MISSING`].
///
/// Columns that arrived as text keep their raw strings in `text` so they can
/// later be encoded; their numeric cells stay missing until then. Columns
/// produced by categorical encoding are listed in `categorical` and are never
/// scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    timestamps: Vec<i64>,
    feature_names: Vec<String>,
    values: Vec<f64>,
    pub sampling_period_hint: Option<i64>,
    text: BTreeMap<String, Vec<Option<String>>>,
    categorical: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("timestamps must be strictly increasing (row {row})")]
    NonMonotoneTimestamps { row: usize },
    #[error("expected {expected} cells, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("feature name at column {0} is empty")]
    EmptyFeatureName(usize),
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("infinite value in column `{column}` at row {row}")]
    NonFinite { row: usize, column: String },
}

impl SensorFrame {
    pub fn new(
        timestamps: Vec<i64>,
        feature_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, FrameError> {
        let expected = timestamps.len() * feature_names.len();
        if values.len() != expected {
            return Err(FrameError::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(row) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FrameError::NonMonotoneTimestamps { row: row + 1 });
        }
        let mut seen = BTreeSet::new();
        for (j, name) in feature_names.iter().enumerate() {
            if name.is_empty() {
                return Err(FrameError::EmptyFeatureName(j));
            }
            if !seen.insert(name.as_str()) {
                return Err(FrameError::DuplicateFeature(name.clone()));
            }
        }
        let ncols = feature_names.len();
        if let Some(pos) = values.iter().position(|v| v.is_infinite()) {
            return Err(FrameError::NonFinite {
                row: pos / ncols,
                column: feature_names[pos % ncols].clone(),
            });
        }
        Ok(Self {
            timestamps,
            feature_names,
            values,
            sampling_period_hint: None,
            text: BTreeMap::new(),
            categorical: BTreeSet::new(),
        })
    }

    pub(crate) fn with_text(mut self, text: BTreeMap<String, Vec<Option<String>>>) -> Self {
        self.text = text;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, col)).collect()
    }

    /// Non-missing cells of a column, in row order.
    pub fn present(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| self.get(i, col))
            .filter(|v| !is_missing(*v))
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Option<&[Option<String>]> {
        self.text.get(name).map(Vec::as_slice)
    }

    pub fn text_columns(&self) -> impl Iterator<Item = (&String, &Vec<Option<String>>)> {
        self.text.iter()
    }

    pub fn categorical_columns(&self) -> &BTreeSet<String> {
        &self.categorical
    }

    pub fn is_categorical(&self, name: &str) -> bool {
        self.categorical.contains(name)
    }

    pub fn mark_categorical(&mut self, name: impl Into<String>) {
        self.categorical.insert(name.into());
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SensorFrame {
        let c = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        let text = self
            .text
            .iter()
            .map(|(k, col)| (k.clone(), rows.iter().map(|&r| col[r].clone()).collect()))
            .collect();
        SensorFrame {
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
            feature_names: self.feature_names.clone(),
            values,
            sampling_period_hint: self.sampling_period_hint,
            text,
            categorical: self.categorical.clone(),
        }
    }

    /// Keeps rows whose predicate holds, preserving order.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> SensorFrame {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&i| keep(i)).collect();
        self.select_rows(&rows)
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> SensorFrame {
        let n = self.n_rows();
        let mut values = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        let names: Vec<String> = cols.iter().map(|&j| self.feature_names[j].clone()).collect();
        let text = self
            .text
            .iter()
            .filter(|(k, _)| names.contains(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let categorical = self
            .categorical
            .iter()
            .filter(|k| names.contains(k))
            .cloned()
            .collect();
        SensorFrame {
            timestamps: self.timestamps.clone(),
            feature_names: names,
            values,
            sampling_period_hint: self.sampling_period_hint,
            text,
            categorical,
        }
    }

    /// Keeps columns by name; unknown names are skipped.
    pub fn select_named(&self, names: &[String]) -> SensorFrame {
        let cols: Vec<usize> = names.iter().filter_map(|n| self.column_index(n)).collect();
        self.select_columns(&cols)
    }

    /// Replaces column `col` with `new_columns` (name, cells) at the same position.
    pub(crate) fn splice_column(
        &self,
        col: usize,
        new_columns: Vec<(String, Vec<f64>)>,
    ) -> Result<SensorFrame, FrameError> {
        let n = self.n_rows();
        let removed = &self.feature_names[col];
        let mut names = Vec::with_capacity(self.n_cols() - 1 + new_columns.len());
        names.extend_from_slice(&self.feature_names[..col]);
        names.extend(new_columns.iter().map(|(name, _)| name.clone()));
        names.extend_from_slice(&self.feature_names[col + 1..]);
        let mut values = Vec::with_capacity(n * names.len());
        for i in 0..n {
            let row = self.row(i);
            values.extend_from_slice(&row[..col]);
            values.extend(new_columns.iter().map(|(_, cells)| cells[i]));
            values.extend_from_slice(&row[col + 1..]);
        }
        let mut out = SensorFrame::new(self.timestamps.clone(), names, values)?;
        out.sampling_period_hint = self.sampling_period_hint;
        out.text = self.text.clone();
        out.text.remove(removed);
        out.categorical = self.categorical.clone();
        out.categorical.remove(removed);
        Ok(out)
    }

    /// Fraction of missing cells per column.
    pub fn column_missing_ratios(&self) -> Vec<f64> {
        let n = self.n_rows();
        if n == 0 {
            return vec![0.0; self.n_cols()];
        }
        let mut counts = vec![0usize; self.n_cols()];
        for i in 0..n {
            for (j, v) in self.row(i).iter().enumerate() {
                if is_missing(*v) {
                    counts[j] += 1;
                }
            }
        }
        counts.into_iter().map(|c| c as f64 / n as f64).collect()
    }

    pub fn row_has_missing(&self, i: usize) -> bool {
        self.row(i).iter().any(|v| is_missing(*v))
    }

    /// Dense copy of the frame without timestamps. Missing cells remain NaN.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n_rows(), self.n_cols(), self.values.clone())
    }
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Matrix with `rows` rows and no columns, or an empty one.
    pub fn empty(cols: usize) -> Self {
        Self::zeros(0, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(idx.len(), self.cols, data)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "vstack column count");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix::from_vec(self.rows + other.rows, self.cols, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SensorFrame {
        SensorFrame::new(
            vec![0, 15, 30],
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, MISSING, 4.0, 5.0, 6.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_unsorted_and_duplicate_names() {
        assert_eq!(
            SensorFrame::new(vec![0, 0], vec!["a".into()], vec![1.0, 2.0]),
            Err(FrameError::NonMonotoneTimestamps { row: 1 })
        );
        assert!(matches!(
            SensorFrame::new(vec![0], vec!["a".into(), "a".into()], vec![1.0, 2.0]),
            Err(FrameError::DuplicateFeature(_))
        ));
        assert!(matches!(
            SensorFrame::new(vec![0], vec!["a".into()], vec![f64::INFINITY]),
            Err(FrameError::NonFinite { .. })
        ));
    }

    #[test]
    fn column_and_row_selection() {
        let f = small();
        let g = f.select_columns(&[1]);
        assert_eq!(g.column(0), vec![2.0, 4.0, 6.0]);
        let h = f.filter_rows(|i| i != 1);
        assert_eq!(h.timestamps(), &[0, 30]);
        assert_eq!(f.column_missing_ratios(), vec![1.0 / 3.0, 0.0]);
        assert_eq!(f.present(0), vec![1.0, 5.0]);
    }

    #[test]
    fn splice_replaces_column_in_place() {
        let f = small();
        let g = f
            .splice_column(0, vec![("x".into(), vec![0.0; 3]), ("y".into(), vec![1.0; 3])])
            .unwrap();
        assert_eq!(g.feature_names(), &["x", "y", "b"]);
        assert_eq!(g.row(2), &[0.0, 1.0, 6.0]);
    }
}
