//! Binary MLP classifier: rectifier hidden layers, one sigmoid output,
//! cross-entropy loss, plain mini-batch gradient descent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{shuffled, Activation, Loss, Network};
use super::ModelError;
use crate::frame::Matrix;
use crate::prepare::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_layer_sizes: vec![32, 16],
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 30,
            seed: 0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_layer_sizes.contains(&0) || self.batch_size == 0 {
            return Err(ModelError::InvalidParams("layer and batch sizes must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidParams("learning rate must be > 0".into()));
        }
        Ok(())
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

pub fn write_curves(path: &std::path::Path, curves: &[EpochRecord]) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,train_loss,val_loss,train_acc,val_acc")?;
    for c in curves {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.epoch, c.train_loss, c.val_loss, c.train_acc, c.val_acc
        )?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub network: Network,
    pub curves: Vec<EpochRecord>,
}

pub(crate) fn label_targets(labels: &[u8]) -> Matrix {
    Matrix::from_vec(labels.len(), 1, labels.iter().map(|&l| f64::from(l)).collect())
}

fn accuracy(net: &Network, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .features
        .iter_rows()
        .zip(&data.labels)
        .filter(|(x, &y)| u8::from(net.forward(x)[0] >= 0.5) == y)
        .count();
    hits as f64 / data.len() as f64
}

/// Builds the initial network for `params` and `n_features` inputs.
pub fn init_mlp(n_features: usize, params: &MlpParams) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut sizes = vec![n_features];
    sizes.extend_from_slice(&params.hidden_layer_sizes);
    sizes.push(1);
    Network::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut rng)
}

pub fn train_mlp(train: &Dataset, validation: &Dataset, params: &MlpParams) -> Result<MlpModel, ModelError> {
    params.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if validation.is_empty() {
        return Err(ModelError::EmptyValidation);
    }
    let d = train.features.cols();
    if validation.features.cols() != d {
        return Err(ModelError::FeatureMismatch {
            expected: d,
            got: validation.features.cols(),
        });
    }
    let max_abs = train.features.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs > 1e3 {
        log::warn!("MLP inputs reach {max_abs:.3e}; features look unscaled");
    }

    let mut net = init_mlp(d, params);
    // Initialisation and shuffling use separate streams so that the epoch
    // count never changes the starting weights.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let targets = label_targets(&train.labels);
    let val_targets = label_targets(&validation.labels);
    let all_val: Vec<usize> = (0..validation.len()).collect();
    let mut curves = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let order = shuffled(train.len(), &mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(params.batch_size) {
            let (l, g) = net.loss_and_gradient(&train.features, &targets, batch, Loss::BinaryCrossEntropy);
            if !l.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            sum += l * batch.len() as f64;
            net.step(&g, params.learning_rate);
        }
        let val_loss = net.loss(&validation.features, &val_targets, &all_val, Loss::BinaryCrossEntropy);
        if !val_loss.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        curves.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: sum / train.len() as f64,
            val_loss,
            train_acc: accuracy(&net, train),
            val_acc: accuracy(&net, validation),
        });
    }
    Ok(MlpModel {
        params: params.clone(),
        network: net,
        curves,
    })
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.network.input_dim()
    }

    pub fn predict_proba(&self, m: &Matrix) -> Result<Vec<f64>, ModelError> {
        if m.rows() > 0 && m.cols() != self.n_features() {
            return Err(ModelError::FeatureMismatch {
                expected: self.n_features(),
                got: m.cols(),
            });
        }
        Ok(m.iter_rows().map(|x| self.network.forward(x)[0]).collect())
    }

    pub fn predict(&self, m: &Matrix) -> Result<Vec<u8>, ModelError> {
        Ok(self
            .predict_proba(m)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor(copies: usize) -> Dataset {
        let pts = [([0.0, 0.0], 0u8), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..copies {
            for (x, y) in pts {
                rows.push(x);
                labels.push(y);
            }
        }
        let n = labels.len();
        Dataset {
            features: Matrix::from_rows(&rows),
            labels,
            timestamps: (0..n as i64).collect(),
        }
    }

    #[test]
    fn learns_xor() {
        let data = xor(100);
        let params = MlpParams {
            hidden_layer_sizes: vec![8],
            learning_rate: 0.1,
            batch_size: 16,
            epochs: 200,
            seed: 3,
        };
        let model = train_mlp(&data, &xor(1), &params).unwrap();
        let pred = model.predict(&data.features).unwrap();
        let acc = pred.iter().zip(&data.labels).filter(|(a, b)| a == b).count() as f64 / data.len() as f64;
        assert!(acc >= 0.99, "xor accuracy {acc}");
        assert_eq!(model.curves.len(), 200);
    }

    #[test]
    fn zero_epochs_is_initialisation() {
        let data = xor(10);
        let params = MlpParams {
            epochs: 0,
            seed: 9,
            ..Default::default()
        };
        let model = train_mlp(&data, &xor(1), &params).unwrap();
        assert_eq!(model.network, init_mlp(2, &params));
        assert!(model.curves.is_empty());
    }

    #[test]
    fn divergence_reported() {
        let mut data = xor(10);
        data.features = data.features.map(|v| v * 1e6);
        let params = MlpParams {
            learning_rate: 1e300,
            epochs: 50,
            ..Default::default()
        };
        assert!(matches!(
            train_mlp(&data, &xor(1).with_features(Matrix::from_rows(&[[1e6, 0.0]; 4])), &params),
            Err(ModelError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn predict_edge_cases() {
        let model = train_mlp(&xor(5), &xor(1), &MlpParams { epochs: 1, ..Default::default() }).unwrap();
        assert!(model.predict(&Matrix::empty(2)).unwrap().is_empty());
        assert!(matches!(
            model.predict(&Matrix::from_rows(&[[1.0, 2.0, 3.0]])),
            Err(ModelError::FeatureMismatch { .. })
        ));
        let p = Matrix::from_rows(&[[0.3, 0.7]]);
        assert_eq!(model.predict_proba(&p).unwrap(), model.predict_proba(&p).unwrap());
    }
}
