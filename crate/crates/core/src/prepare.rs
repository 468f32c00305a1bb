//! Class balancing, train/validation/test splitting and feature scaling.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::{is_missing, Matrix, SensorFrame};
use crate::ingest::IngestError;
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum PrepareError {
    #[error("no degraded rows to split")]
    DegradedEmpty,
    #[error("{healthy} healthy rows cannot balance {degraded} degraded rows")]
    HealthySmallerThanDegraded { healthy: usize, degraded: usize },
    #[error("fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("feature columns differ between inputs")]
    FeatureMismatch,
    #[error("{0} missing cells in split input")]
    MissingValues(usize),
    #[error("empty training matrix")]
    EmptyInput,
    #[error("feature `{0}` is constant on the training set")]
    DegenerateFeature(String),
    #[error("malformed split file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] IngestError),
}

/// How the healthy class is downsampled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// Healthy downsampled to the degraded count; train and test balanced.
    #[default]
    Both,
    /// Test balanced; every remaining healthy row goes to train.
    TestOnly,
    /// Healthy split by the same fractions as degraded, no downsampling.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub balance: BalanceMode,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.15,
            validation_fraction: 0.10,
            balance: BalanceMode::Both,
            seed: 0,
        }
    }
}

/// Feature rows with binary labels (1 = degraded) and source timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
    pub timestamps: Vec<i64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            timestamps: idx.iter().map(|&i| self.timestamps[i]).collect(),
        }
    }

    pub fn with_features(&self, features: Matrix) -> Dataset {
        assert_eq!(features.rows(), self.len());
        Dataset {
            features,
            labels: self.labels.clone(),
            timestamps: self.timestamps.clone(),
        }
    }

    /// Writes `timestamp,<features...>,label`.
    pub fn write_csv(&self, path: &Path, feature_names: &[String]) -> Result<(), PrepareError> {
        let io = |source| {
            PrepareError::Io(IngestError::FileUnwritable {
                path: path.to_path_buf(),
                source,
            })
        };
        let csv_err = |source| {
            PrepareError::Io(IngestError::Csv {
                path: path.to_path_buf(),
                source,
            })
        };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["timestamp".to_string()];
        header.extend(feature_names.iter().cloned());
        header.push("label".into());
        w.write_record(&header).map_err(csv_err)?;
        let mut rec = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            rec.clear();
            rec.push(self.timestamps[i].to_string());
            rec.extend(self.features.row(i).iter().map(f64::to_string));
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a file written by [`Dataset::write_csv`]; returns feature names too.
    pub fn read_csv(path: &Path) -> Result<(Vec<String>, Dataset), PrepareError> {
        let file = std::fs::File::open(path).map_err(|source| {
            PrepareError::Io(IngestError::FileUnreadable {
                path: path.to_path_buf(),
                source,
            })
        })?;
        let csv_err = |source| {
            PrepareError::Io(IngestError::Csv {
                path: path.to_path_buf(),
                source,
            })
        };
        let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 2 || &header[0] != "timestamp" || &header[header.len() - 1] != "label" {
            return Err(PrepareError::Malformed(path.display().to_string()));
        }
        let names: Vec<String> = header.iter().skip(1).take(header.len() - 2).map(String::from).collect();
        let d = names.len();
        let (mut data, mut labels, mut ts) = (Vec::new(), Vec::new(), Vec::new());
        let bad = |what: &str| PrepareError::Malformed(format!("{}: {what}", path.display()));
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            ts.push(rec[0].parse::<i64>().map_err(|_| bad("timestamp"))?);
            for j in 0..d {
                data.push(rec[j + 1].parse::<f64>().map_err(|_| bad("feature"))?);
            }
            labels.push(rec[d + 1].parse::<u8>().map_err(|_| bad("label"))?);
        }
        let n = labels.len();
        Ok((
            names,
            Dataset {
                features: Matrix::from_vec(n, d, data),
                labels,
                timestamps: ts,
            },
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSplits {
    pub feature_names: Vec<String>,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

fn round_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

fn check_fraction(f: f64) -> Result<(), PrepareError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(PrepareError::InvalidFraction(f))
    }
}

fn missing_cells(f: &SensorFrame) -> usize {
    f.values().iter().filter(|v| is_missing(**v)).count()
}

/// Splits degraded rows `1 - test_fraction` / `test_fraction` by sampling
/// without replacement and draws healthy rows per `spec.balance`; then takes
/// `validation_fraction` of each class of the remaining rows as validation.
///
/// Healthy test rows are drawn first, so for a fixed seed the test set is
/// the same whichever balance mode is used.
pub fn balance_and_split(
    healthy: &SensorFrame,
    degraded: &SensorFrame,
    spec: &SplitSpec,
) -> Result<DataSplits, PrepareError> {
    check_fraction(spec.test_fraction)?;
    check_fraction(spec.validation_fraction)?;
    if degraded.is_empty() {
        return Err(PrepareError::DegradedEmpty);
    }
    if healthy.feature_names() != degraded.feature_names() {
        return Err(PrepareError::FeatureMismatch);
    }
    let missing = missing_cells(healthy) + missing_cells(degraded);
    if missing > 0 {
        return Err(PrepareError::MissingValues(missing));
    }
    let (n_h, n_d) = (healthy.n_rows(), degraded.n_rows());
    if spec.balance != BalanceMode::None && n_h < n_d {
        return Err(PrepareError::HealthySmallerThanDegraded {
            healthy: n_h,
            degraded: n_d,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut deg_idx: Vec<usize> = (0..n_d).collect();
    deg_idx.shuffle(&mut rng);
    let n_test_d = round_count(spec.test_fraction, n_d);
    let (test_d, train_d) = deg_idx.split_at(n_test_d);

    let mut h_idx: Vec<usize> = (0..n_h).collect();
    h_idx.shuffle(&mut rng);
    let (test_h, train_h): (&[usize], &[usize]) = match spec.balance {
        BalanceMode::Both => (&h_idx[..n_test_d], &h_idx[n_test_d..n_d]),
        BalanceMode::TestOnly => (&h_idx[..n_test_d], &h_idx[n_test_d..]),
        BalanceMode::None => h_idx.split_at(round_count(spec.test_fraction, n_h)),
    };

    let build = |deg: &[usize], hea: &[usize]| -> Dataset {
        let d = healthy.n_cols();
        let mut data = Vec::with_capacity((deg.len() + hea.len()) * d);
        let mut labels = Vec::with_capacity(deg.len() + hea.len());
        let mut ts = Vec::with_capacity(deg.len() + hea.len());
        for &i in deg {
            data.extend_from_slice(degraded.row(i));
            labels.push(1);
            ts.push(degraded.timestamps()[i]);
        }
        for &i in hea {
            data.extend_from_slice(healthy.row(i));
            labels.push(0);
            ts.push(healthy.timestamps()[i]);
        }
        Dataset {
            features: Matrix::from_vec(labels.len(), d, data),
            labels,
            timestamps: ts,
        }
    };

    let test_all = build(test_d, test_h);
    let mut order: Vec<usize> = (0..test_all.len()).collect();
    order.shuffle(&mut rng);
    let test = test_all.select(&order);

    // Validation is stratified, so balanced training pools stay balanced.
    let (val_d, fit_d) = train_d.split_at(round_count(spec.validation_fraction, train_d.len()));
    let (val_h, fit_h) = train_h.split_at(round_count(spec.validation_fraction, train_h.len()));
    let mut shuffled = |deg: &[usize], hea: &[usize]| {
        let set = build(deg, hea);
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut rng);
        set.select(&order)
    };
    let validation = shuffled(val_d, val_h);
    let train = shuffled(fit_d, fit_h);

    Ok(DataSplits {
        feature_names: healthy.feature_names().to_vec(),
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    MinMax,
    #[default]
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureScale {
    MinMax { min: f64, max: f64 },
    Standard { mean: f64, std: f64 },
    /// Categorical columns pass through unscaled.
    Passthrough,
}

impl FeatureScale {
    fn forward(&self, x: f64) -> f64 {
        match *self {
            FeatureScale::MinMax { min, max } => (x - min) / (max - min),
            FeatureScale::Standard { mean, std } => (x - mean) / std,
            FeatureScale::Passthrough => x,
        }
    }

    fn inverse(&self, y: f64) -> f64 {
        match *self {
            FeatureScale::MinMax { min, max } => y * (max - min) + min,
            FeatureScale::Standard { mean, std } => y * std + mean,
            FeatureScale::Passthrough => y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub feature_names: Vec<String>,
    pub scales: Vec<FeatureScale>,
}

/// Fits per-feature scaling on the training rows only.
pub fn fit_scaler(
    train: &Matrix,
    feature_names: &[String],
    kind: ScalerKind,
    exempt: &BTreeSet<String>,
) -> Result<ScalerParams, PrepareError> {
    if train.is_empty() {
        return Err(PrepareError::EmptyInput);
    }
    if feature_names.len() != train.cols() {
        return Err(PrepareError::FeatureMismatch);
    }
    let mut scales = Vec::with_capacity(train.cols());
    for (j, name) in feature_names.iter().enumerate() {
        if exempt.contains(name) {
            scales.push(FeatureScale::Passthrough);
            continue;
        }
        let col = train.column(j);
        let scale = match kind {
            ScalerKind::MinMax => {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(max > min) {
                    return Err(PrepareError::DegenerateFeature(name.clone()));
                }
                FeatureScale::MinMax { min, max }
            }
            ScalerKind::Standard => {
                let (mean, std) = stats::mean_std(&col).ok_or(PrepareError::EmptyInput)?;
                if !(std > 0.0) {
                    return Err(PrepareError::DegenerateFeature(name.clone()));
                }
                FeatureScale::Standard { mean, std }
            }
        };
        scales.push(scale);
    }
    Ok(ScalerParams {
        kind,
        feature_names: feature_names.to_vec(),
        scales,
    })
}

fn apply(
    m: &Matrix,
    feature_names: &[String],
    params: &ScalerParams,
    inverse: bool,
) -> Result<Matrix, PrepareError> {
    if feature_names != params.feature_names.as_slice() || m.cols() != params.scales.len() {
        return Err(PrepareError::FeatureMismatch);
    }
    let mut out = m.clone();
    for i in 0..out.rows() {
        for (v, s) in out.row_mut(i).iter_mut().zip(&params.scales) {
            *v = if inverse { s.inverse(*v) } else { s.forward(*v) };
        }
    }
    Ok(out)
}

/// Min-max or standard scaling; values outside the training range are not clipped.
pub fn transform(m: &Matrix, feature_names: &[String], params: &ScalerParams) -> Result<Matrix, PrepareError> {
    apply(m, feature_names, params, false)
}

pub fn inverse_transform(
    m: &Matrix,
    feature_names: &[String],
    params: &ScalerParams,
) -> Result<Matrix, PrepareError> {
    apply(m, feature_names, params, true)
}

impl DataSplits {
    /// Fits on train and transforms all three sets.
    pub fn scaled(
        &self,
        kind: ScalerKind,
        exempt: &BTreeSet<String>,
    ) -> Result<(DataSplits, ScalerParams), PrepareError> {
        let params = fit_scaler(&self.train.features, &self.feature_names, kind, exempt)?;
        let t = |d: &Dataset| -> Result<Dataset, PrepareError> {
            Ok(d.with_features(transform(&d.features, &self.feature_names, &params)?))
        };
        Ok((
            DataSplits {
                feature_names: self.feature_names.clone(),
                train: t(&self.train)?,
                validation: t(&self.validation)?,
                test: t(&self.test)?,
            },
            params,
        ))
    }
}
