//! Statistical feature reduction: low coefficient of variation and
//! redundant (highly correlated) sensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frame::{is_missing, SensorFrame};
use crate::stats;

pub const DEFAULT_CV_THRESHOLD: f64 = 0.05;
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReduceError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("threshold {0} out of range")]
    InvalidThreshold(f64),
}

/// `σ / μ` with population σ; `Ok(None)` when the mean is zero.
pub fn coefficient_of_variation(values: &[f64]) -> Result<Option<f64>, ReduceError> {
    let (m, s) = stats::mean_std(values).ok_or(ReduceError::EmptyInput)?;
    if m == 0.0 {
        return Ok(None);
    }
    Ok(Some(s / m))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LowVariability {
    pub dropped: Vec<(String, f64)>,
    /// Kept because the mean is zero or the column has no values.
    pub undefined: Vec<String>,
}

/// Drops features whose `|cv|` is below `threshold`. Categorical columns are
/// left alone.
pub fn low_variability_filter(
    frame: &SensorFrame,
    threshold: f64,
) -> Result<(SensorFrame, LowVariability), ReduceError> {
    if threshold <= 0.0 || !threshold.is_finite() {
        return Err(ReduceError::InvalidThreshold(threshold));
    }
    let cvs: Vec<Option<f64>> = (0..frame.n_cols())
        .into_par_iter()
        .map(|j| coefficient_of_variation(&frame.present(j)).ok().flatten())
        .collect();
    let mut report = LowVariability::default();
    let mut keep = Vec::new();
    for (j, cv) in cvs.into_iter().enumerate() {
        let name = &frame.feature_names()[j];
        if frame.is_categorical(name) {
            keep.push(j);
            continue;
        }
        match cv {
            Some(cv) if cv.abs() < threshold => report.dropped.push((name.clone(), cv)),
            Some(_) => keep.push(j),
            None => {
                report.undefined.push(name.clone());
                keep.push(j);
            }
        }
    }
    Ok((frame.select_columns(&keep), report))
}

/// Symmetric matrix of Pearson coefficients. Pairs where either side has no
/// variance over the shared rows carry `r = 0` and a degeneracy mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub feature_names: Vec<String>,
    pub r: Vec<Vec<f64>>,
    pub degenerate: Vec<Vec<bool>>,
}

impl CorrelationMatrix {
    pub fn len(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature_names.is_empty()
    }
}

fn pairwise_r(a: &[f64], b: &[f64]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !is_missing(**x) && !is_missing(**y))
        .map(|(x, y)| (*x, *y))
        .unzip();
    stats::pearson(&xs, &ys)
}

/// Pearson correlation for every feature pair over the rows where both are
/// present.
pub fn pearson_matrix(frame: &SensorFrame) -> Result<CorrelationMatrix, ReduceError> {
    if frame.n_rows() < 2 {
        return Err(ReduceError::TooFewRows(frame.n_rows()));
    }
    let d = frame.n_cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| frame.column(j)).collect();
    let upper: Vec<Vec<Option<f64>>> = (0..d)
        .into_par_iter()
        .map(|i| (i..d).map(|j| pairwise_r(&cols[i], &cols[j])).collect())
        .collect();
    let mut r = vec![vec![0.0; d]; d];
    let mut degenerate = vec![vec![false; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = upper[i][j - i];
            let (val, deg) = match v {
                Some(_) if i == j => (1.0, false),
                Some(v) => (v, false),
                None => (0.0, true),
            };
            r[i][j] = val;
            r[j][i] = val;
            degenerate[i][j] = deg;
            degenerate[j][i] = deg;
        }
    }
    Ok(CorrelationMatrix {
        feature_names: frame.feature_names().to_vec(),
        r,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGroup {
    pub kept: String,
    pub dropped: Vec<String>,
    /// Coefficient between `kept` and each entry of `dropped`, same order.
    pub r_with_kept: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub dropped_low_cv: Vec<(String, f64)>,
    pub undefined_cv: Vec<String>,
    pub correlation_groups: Vec<CorrelationGroup>,
    pub final_features: Vec<String>,
}

impl ReductionReport {
    pub fn dropped_for_correlation(&self) -> impl Iterator<Item = &String> {
        self.correlation_groups.iter().flat_map(|g| g.dropped.iter())
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups features connected through `|r| > threshold` and keeps one member
/// of each group, chosen uniformly by a generator seeded with `seed`.
/// Groups are visited in order of their first feature.
pub fn correlation_dedup(
    matrix: &CorrelationMatrix,
    threshold: f64,
    seed: u64,
) -> Result<ReductionReport, ReduceError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ReduceError::InvalidThreshold(threshold));
    }
    let d = matrix.len();
    let mut parent: Vec<usize> = (0..d).collect();
    for i in 0..d {
        for j in i + 1..d {
            if !matrix.degenerate[i][j] && matrix.r[i][j].abs() > threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = components.len();
            components.push(Vec::new());
        }
        components[slot[root]].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; d];
    let mut groups = Vec::new();
    for comp in components.iter().filter(|c| c.len() > 1) {
        let chosen = comp[rng.random_range(0..comp.len())];
        let dropped: Vec<usize> = comp.iter().copied().filter(|&k| k != chosen).collect();
        for &k in &dropped {
            keep[k] = false;
        }
        groups.push(CorrelationGroup {
            kept: matrix.feature_names[chosen].clone(),
            r_with_kept: dropped.iter().map(|&k| matrix.r[chosen][k]).collect(),
            dropped: dropped
                .iter()
                .map(|&k| matrix.feature_names[k].clone())
                .collect(),
        });
    }
    Ok(ReductionReport {
        correlation_groups: groups,
        final_features: (0..d)
            .filter(|&k| keep[k])
            .map(|k| matrix.feature_names[k].clone())
            .collect(),
        ..Default::default()
    })
}

/// Runs the cv filter then correlation dedup on `stats_frame` and returns
/// the combined report. Categorical columns are never grouped.
pub fn reduce_features(
    stats_frame: &SensorFrame,
    cv_threshold: f64,
    correlation_threshold: f64,
    seed: u64,
) -> Result<ReductionReport, ReduceError> {
    let (low, lv) = low_variability_filter(stats_frame, cv_threshold)?;
    let numeric: Vec<usize> = (0..low.n_cols())
        .filter(|&j| !low.is_categorical(&low.feature_names()[j]))
        .collect();
    let matrix = pearson_matrix(&low.select_columns(&numeric))?;
    let dedup = correlation_dedup(&matrix, correlation_threshold, seed)?;
    let final_features = low
        .feature_names()
        .iter()
        .filter(|n| low.is_categorical(n) || dedup.final_features.contains(n))
        .cloned()
        .collect();
    Ok(ReductionReport {
        dropped_low_cv: lv.dropped,
        undefined_cv: lv.undefined,
        correlation_groups: dedup.correlation_groups,
        final_features,
    })
}
