//! Comparison baselines: PCA with an explained-variance rule, and a
//! single-hidden-layer autoencoder used as a reconstruction-error detector.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{is_missing, Matrix};
use crate::models::metrics::{Confusion, EvalReport};
use crate::models::network::{shuffled, Activation, Loss, Network};
use crate::models::MlpParams;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("input holds missing cells")]
    MissingValues,
    #[error("input holds non-finite cells")]
    NonFinite,
    #[error("input is empty")]
    EmptyInput,
    #[error("k = {k} exceeds the {d} available components")]
    KTooLarge { k: usize, d: usize },
    #[error("threshold {0} must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("latent dimension {latent} must be in 1..{inputs}")]
    InvalidLatent { latent: usize, inputs: usize },
    #[error("reconstruction loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("labels hold a single class")]
    SingleClass,
    #[error("{errors} errors for {labels} labels")]
    LengthMismatch { errors: usize, labels: usize },
    #[error("expected {expected} features, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_cells(m: &Matrix) -> Result<(), BaselineError> {
    if m.data().iter().any(|&v| is_missing(v)) {
        return Err(BaselineError::MissingValues);
    }
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d × d`, one principal direction per row, by descending eigenvalue.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Column-centred covariance normalised by `n`.
pub fn covariance(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (m.rows(), m.cols());
    let mut mean = vec![0.0; d];
    for row in m.iter_rows() {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let mut cov = vec![0.0; d * d];
    let mut c = vec![0.0; d];
    for row in m.iter_rows() {
        for j in 0..d {
            c[j] = row[j] - mean[j];
        }
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / n as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    (mean, cov)
}

pub fn fit_pca(m: &Matrix) -> Result<PcaModel, BaselineError> {
    check_cells(m)?;
    if m.rows() == 0 || m.cols() == 0 {
        return Err(BaselineError::EmptyInput);
    }
    let d = m.cols();
    let (mean, cov) = covariance(m);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &cov));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Matrix::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (r, &c) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[c].max(0.0));
        let col = eig.eigenvectors.column(c);
        // Fix the sign so the largest-magnitude loading is positive.
        let mut pivot = 0;
        for j in 1..d {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components.set(r, j, sign * col[j]);
        }
    }
    let trace: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio = if trace > 0.0 {
        eigenvalues.iter().map(|e| e / trace).collect()
    } else {
        // Constant data: every direction explains an equal share of nothing.
        vec![1.0 / d as f64; d]
    };
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        explained_variance_ratio,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .explained_variance_ratio
            .iter()
            .map(|r| {
                acc += r;
                acc.min(1.0)
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    pub fn write_explained_variance(&self, path: &Path) -> Result<(), BaselineError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "component,ratio,cumulative")?;
        for (i, (r, c)) in self.explained_variance_ratio.iter().zip(self.cumulative()).enumerate() {
            writeln!(w, "{},{},{}", i + 1, r, c)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Smallest `k` whose cumulative explained-variance ratio reaches `threshold`.
/// Sums within 1e-12 below the threshold count as reaching it, so that
/// ratios such as 0.6 + 0.3 meet 0.9.
pub fn select_components(model: &PcaModel, threshold: f64) -> Result<usize, BaselineError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(BaselineError::InvalidThreshold(threshold));
    }
    let cum = model.cumulative();
    Ok(cum.iter().position(|&c| c >= threshold - 1e-12).map_or(cum.len(), |i| i + 1))
}

/// Centred data times the first `k` directions.
pub fn project(model: &PcaModel, k: usize, m: &Matrix) -> Result<Matrix, BaselineError> {
    let d = model.dim();
    if k > d {
        return Err(BaselineError::KTooLarge { k, d });
    }
    if m.rows() > 0 && m.cols() != d {
        return Err(BaselineError::FeatureMismatch {
            expected: d,
            got: m.cols(),
        });
    }
    let mut out = Matrix::zeros(m.rows(), k);
    let mut c = vec![0.0; d];
    for (i, row) in m.iter_rows().enumerate() {
        for j in 0..d {
            c[j] = row[j] - model.mean[j];
        }
        for p in 0..k {
            let dir = model.components.row(p);
            out.set(i, p, dir.iter().zip(&c).map(|(a, b)| a * b).sum());
        }
    }
    Ok(out)
}

/// Maps `k` projected coordinates back to the input space.
pub fn reconstruct(model: &PcaModel, projected: &Matrix) -> Matrix {
    let d = model.dim();
    let k = projected.cols();
    let mut out = Matrix::zeros(projected.rows(), d);
    for (i, z) in projected.iter_rows().enumerate() {
        let row = out.row_mut(i);
        row.copy_from_slice(&model.mean);
        for p in 0..k {
            for (o, w) in row.iter_mut().zip(model.components.row(p)) {
                *o += z[p] * w;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeEpoch {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    /// `d → latent → d`; the decoder is linear.
    pub network: Network,
    pub latent_dim: usize,
    /// Rows whose reconstruction error exceeds this are degraded.
    pub threshold: f64,
    pub curves: Vec<AeEpoch>,
}

pub fn train_autoencoder(
    m: &Matrix,
    latent_dim: usize,
    params: &MlpParams,
    latent_activation: Activation,
) -> Result<AeModel, BaselineError> {
    check_cells(m)?;
    if m.rows() == 0 {
        return Err(BaselineError::EmptyInput);
    }
    let d = m.cols();
    if latent_dim == 0 || latent_dim > d {
        return Err(BaselineError::InvalidLatent {
            latent: latent_dim,
            inputs: d,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut net = Network::new(&[d, latent_dim, d], latent_activation, Activation::Identity, &mut rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let batch = params.batch_size.max(1);
    let mut curves = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let order = shuffled(m.rows(), &mut shuffle_rng);
        let mut sum = 0.0;
        for rows in order.chunks(batch) {
            let (l, g) = net.loss_and_gradient(m, m, rows, Loss::MeanSquared);
            if !l.is_finite() {
                return Err(BaselineError::NonFiniteLoss { epoch });
            }
            sum += l * rows.len() as f64;
            net.step(&g, params.learning_rate);
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(BaselineError::NonFiniteLoss { epoch });
        }
        curves.push(AeEpoch {
            epoch: epoch + 1,
            loss: sum / m.rows() as f64,
        });
    }
    Ok(AeModel {
        network: net,
        latent_dim,
        threshold: 0.0,
        curves,
    })
}

impl AeModel {
    fn check(&self, m: &Matrix) -> Result<(), BaselineError> {
        let d = self.network.input_dim();
        if m.rows() > 0 && m.cols() != d {
            return Err(BaselineError::FeatureMismatch {
                expected: d,
                got: m.cols(),
            });
        }
        Ok(())
    }

    /// Mean squared reconstruction error per row.
    pub fn reconstruction_errors(&self, m: &Matrix) -> Result<Vec<f64>, BaselineError> {
        self.check(m)?;
        Ok(m.iter_rows()
            .map(|x| {
                let y = self.network.forward(x);
                x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
            })
            .collect())
    }

    /// Latent-layer activations, used as classifier features.
    pub fn encode(&self, m: &Matrix) -> Result<Matrix, BaselineError> {
        self.check(m)?;
        let rows: Vec<Vec<f64>> = m.iter_rows().map(|x| self.network.activations_at(x, 0)).collect();
        if rows.is_empty() {
            return Ok(Matrix::empty(self.latent_dim));
        }
        Ok(Matrix::from_rows(&rows))
    }

    pub fn predict(&self, m: &Matrix) -> Result<Vec<u8>, BaselineError> {
        Ok(self
            .reconstruction_errors(m)?
            .into_iter()
            .map(|e| u8::from(e > self.threshold))
            .collect())
    }
}

pub fn write_reconstruction_errors(
    path: &Path,
    timestamps: &[i64],
    errors: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<(), BaselineError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "timestamp,error,label,predicted,threshold")?;
    for ((t, e), l) in timestamps.iter().zip(errors).zip(labels) {
        writeln!(w, "{t},{e},{l},{},{threshold}", u8::from(*e > threshold))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMetric {
    #[default]
    Accuracy,
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub score: f64,
}

fn score(c: Confusion, metric: ThresholdMetric) -> f64 {
    let r = EvalReport::from_confusion(c);
    match metric {
        ThresholdMetric::Accuracy => r.accuracy.value,
        ThresholdMetric::F1 => r.f1.value,
    }
}

/// Scans the midpoints of the sorted unique errors and keeps the one with the
/// best training score; ties go to the smallest threshold.
pub fn choose_error_threshold(
    errors: &[f64],
    labels: &[u8],
    metric: ThresholdMetric,
) -> Result<ThresholdChoice, BaselineError> {
    if errors.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            errors: errors.len(),
            labels: labels.len(),
        });
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l != 0).count() as u64;
    let n = labels.len() as u64;
    if pos == 0 || pos == n {
        return Err(BaselineError::SingleClass);
    }
    let mut pairs: Vec<(f64, bool)> = errors.iter().zip(labels).map(|(&e, &l)| (e, l != 0)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Walk groups of equal error; after a group, everything so far is at or
    // below the candidate threshold and predicted healthy.
    let mut below_pos = 0u64;
    let mut below = 0u64;
    let mut best: Option<ThresholdChoice> = None;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            below += 1;
            below_pos += u64::from(pairs[i].1);
            i += 1;
        }
        if i == pairs.len() {
            break;
        }
        let threshold = v + (pairs[i].0 - v) / 2.0;
        let c = Confusion {
            tp: pos - below_pos,
            fn_: below_pos,
            tn: below - below_pos,
            fp: (n - below) - (pos - below_pos),
        };
        let s = score(c, metric);
        if best.is_none_or(|b| s > b.score) {
            best = Some(ThresholdChoice { threshold, score: s });
        }
    }
    Ok(best.unwrap_or_else(|| {
        // A single distinct error: nothing separates the rows.
        let c = Confusion {
            tp: 0,
            fn_: pos,
            tn: n - pos,
            fp: 0,
        };
        ThresholdChoice {
            threshold: pairs[0].0,
            score: score(c, metric),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn line_has_one_dominant_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let rows: Vec<[f64; 2]> = (0..500)
            .map(|_| {
                let t: f64 = rng.random_range(-1.0..1.0);
                [t + noise.sample(&mut rng), t + noise.sample(&mut rng)]
            })
            .collect();
        let pca = fit_pca(&Matrix::from_rows(&rows)).unwrap();
        assert!(pca.explained_variance_ratio[0] > 0.99);
    }

    #[test]
    fn select_components_rule() {
        let pca = PcaModel {
            mean: vec![0.0; 3],
            components: Matrix::zeros(3, 3),
            eigenvalues: vec![6.0, 3.0, 1.0],
            explained_variance_ratio: vec![0.6, 0.3, 0.1],
        };
        assert_eq!(select_components(&pca, 0.9).unwrap(), 2);
        assert_eq!(select_components(&pca, 1.0).unwrap(), 3);
        assert_eq!(select_components(&pca, 0.5).unwrap(), 1);
        assert!(select_components(&pca, 0.0).is_err());
    }

    #[test]
    fn project_edges() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 1.0], [0.0, 0.5]]);
        let pca = fit_pca(&m).unwrap();
        assert_eq!(project(&pca, 0, &m).unwrap().cols(), 0);
        assert!(matches!(project(&pca, 3, &m), Err(BaselineError::KTooLarge { .. })));
        let back = reconstruct(&pca, &project(&pca, 2, &m).unwrap());
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_rejected() {
        let m = Matrix::from_rows(&[[1.0, f64::NAN]]);
        assert!(matches!(fit_pca(&m), Err(BaselineError::MissingValues)));
    }

    #[test]
    fn separated_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut errors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let l = (i % 2) as u8;
            let c = if l == 1 { 0.9 } else { 0.1 };
            errors.push(c + rng.random_range(-0.01..0.01));
            labels.push(l);
        }
        let t = choose_error_threshold(&errors, &labels, ThresholdMetric::Accuracy).unwrap();
        assert!(t.threshold > 0.12 && t.threshold < 0.88);
        assert_eq!(t.score, 1.0);
    }

    #[test]
    fn single_class_threshold() {
        assert!(matches!(
            choose_error_threshold(&[0.1, 0.2], &[0, 0], ThresholdMetric::Accuracy),
            Err(BaselineError::SingleClass)
        ));
    }
}
