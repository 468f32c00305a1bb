//! Random forest of CART trees with Gini splits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::frame::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// `None` means ceil(sqrt(d)).
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 12,
            min_samples_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(ModelError::InvalidParams(
                "n_trees, max_depth and min_samples_leaf must be >= 1".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(ModelError::InvalidParams("features_per_split must be >= 1".into()));
        }
        Ok(())
    }

    fn mtry(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes stored flat; index 0 is the root. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

// Ties between the classes resolve to degraded.
fn majority(pos: usize, n: usize) -> u8 {
    u8::from(2 * pos >= n)
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    scratch: Vec<(f64, u8)>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn best_split_on(&mut self, rows: &[usize], feature: usize, pos: usize) -> Option<Best> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        self.scratch.clear();
        self.scratch
            .extend(rows.iter().map(|&r| (self.x.get(r, feature), self.y[r])));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        if self.scratch[0].0 == self.scratch[n - 1].0 {
            return None;
        }
        let parent = gini(pos, n);
        let mut best: Option<Best> = None;
        let mut left_pos = 0;
        for i in 1..n {
            left_pos += usize::from(self.scratch[i - 1].1);
            let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
            if lo == hi || i < min_leaf || n - i < min_leaf {
                continue;
            }
            let child = (i as f64 * gini(left_pos, i) + (n - i) as f64 * gini(pos - left_pos, n - i)) / n as f64;
            let gain = parent - child;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mid = lo + (hi - lo) / 2.0;
                // Guard against the midpoint rounding onto the upper value.
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Best {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
        best
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        self.nodes.push(Node::Leaf {
            class: majority(pos, n),
        });
        if pos == 0 || pos == n || depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf {
            return id;
        }

        let d = self.x.cols();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<Best> = None;
        for (tried, &f) in order.iter().enumerate() {
            // Keep drawing past mtry only while every drawn feature was constant here.
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(b) = self.best_split_on(rows, f, pos) {
                if best.as_ref().is_none_or(|cur| b.gain > cur.gain) {
                    best = Some(b);
                }
            }
        }
        let Some(best) = best else {
            return id;
        };

        let mut split = 0;
        for i in 0..n {
            if self.x.get(rows[i], best.feature) <= best.threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

pub fn train_forest(x: &Matrix, y: &[u8], params: &ForestParams) -> Result<ForestModel, ModelError> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch {
            predicted: x.rows(),
            truth: y.len(),
        });
    }
    if y.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos < 2 || y.len() - pos < 2 {
        return Err(ModelError::SingleClassInput);
    }
    let n = y.len();
    let mtry = params.mtry(x.cols());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder {
                x,
                y,
                params,
                mtry,
                nodes: Vec::new(),
                rng,
                scratch: Vec::with_capacity(n),
            };
            b.build(&mut rows, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        params: params.clone(),
        n_features: x.cols(),
        trees,
    })
}

impl ForestModel {
    /// Fraction of trees voting degraded.
    pub fn vote_fraction(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict_row(x) == 1).count();
        votes as f64 / self.trees.len() as f64
    }

    pub fn predict(&self, m: &Matrix) -> Result<Vec<u8>, ModelError> {
        if m.rows() > 0 && m.cols() != self.n_features {
            return Err(ModelError::FeatureMismatch {
                expected: self.n_features,
                got: m.cols(),
            });
        }
        let rows: Vec<&[f64]> = m.iter_rows().collect();
        Ok(rows
            .par_iter()
            .map(|x| {
                let votes = self.trees.iter().filter(|t| t.predict_row(x) == 1).count();
                majority(votes, self.trees.len())
            })
            .collect())
    }
}
