//! k-fold grid search for forests and seeded random search for MLPs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::{train_forest, ForestParams};
use super::metrics::evaluate;
use super::mlp::{train_mlp, MlpParams};
use super::ModelError;
use crate::frame::Matrix;
use crate::prepare::Dataset;

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ModelError> {
    if k < 2 || n < k {
        return Err(ModelError::TooFewRows { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (i, r) in idx.into_iter().enumerate() {
        folds[i % k].push(r);
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub params: ForestParams,
    pub mean_accuracy: f64,
}

/// Returns the grid point with the best mean validation accuracy over `k`
/// folds. Ties go to the earlier grid point.
pub fn cross_validate(
    x: &Matrix,
    y: &[u8],
    grid: &[ForestParams],
    k: usize,
    seed: u64,
) -> Result<(ForestParams, Vec<GridResult>), ModelError> {
    if grid.is_empty() {
        return Err(ModelError::GridEmpty);
    }
    let folds = kfold_indices(y.len(), k, seed)?;
    let mut results = Vec::with_capacity(grid.len());
    for params in grid {
        let mut total = 0.0;
        for (f, held) in folds.iter().enumerate() {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let model = train_forest(&x.select_rows(&train), &ty, params)?;
            let hy: Vec<u8> = held.iter().map(|&i| y[i]).collect();
            let pred = model.predict(&x.select_rows(held))?;
            total += evaluate(&pred, &hy)?.accuracy.value;
        }
        results.push(GridResult {
            params: params.clone(),
            mean_accuracy: total / k as f64,
        });
    }
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.mean_accuracy > results[best].mean_accuracy {
            best = i;
        }
    }
    Ok((results[best].params.clone(), results))
}

/// Discrete search space; each draw picks one entry per list uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpace {
    pub hidden_layer_sizes: Vec<Vec<usize>>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl MlpSpace {
    fn is_empty(&self) -> bool {
        self.hidden_layer_sizes.is_empty()
            || self.learning_rates.is_empty()
            || self.batch_sizes.is_empty()
            || self.epochs.is_empty()
    }

    pub fn draws(&self, n_draws: usize, seed: u64) -> Result<Vec<MlpParams>, ModelError> {
        if self.is_empty() {
            return Err(ModelError::SpaceEmpty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n_draws)
            .map(|_| MlpParams {
                hidden_layer_sizes: self.hidden_layer_sizes[rng.random_range(0..self.hidden_layer_sizes.len())].clone(),
                learning_rate: self.learning_rates[rng.random_range(0..self.learning_rates.len())],
                batch_size: self.batch_sizes[rng.random_range(0..self.batch_sizes.len())],
                epochs: self.epochs[rng.random_range(0..self.epochs.len())],
                seed,
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawResult {
    pub params: MlpParams,
    pub validation_accuracy: f64,
}

/// Trains one MLP per seeded draw and keeps the best on validation accuracy.
/// Draws that diverge score zero.
pub fn random_search(
    train: &Dataset,
    validation: &Dataset,
    space: &MlpSpace,
    n_draws: usize,
    seed: u64,
) -> Result<(MlpParams, Vec<DrawResult>), ModelError> {
    if n_draws == 0 {
        return Err(ModelError::InvalidParams("n_draws must be >= 1".into()));
    }
    let draws = space.draws(n_draws, seed)?;
    let mut results = Vec::with_capacity(n_draws);
    for params in draws {
        let acc = match train_mlp(train, validation, &params) {
            Ok(m) => evaluate(&m.predict(&validation.features)?, &validation.labels)?
                .accuracy
                .value,
            Err(ModelError::NonFiniteLoss { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        results.push(DrawResult {
            params,
            validation_accuracy: acc,
        });
    }
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.validation_accuracy > results[best].validation_accuracy {
            best = i;
        }
    }
    Ok((results[best].params.clone(), results))
}
