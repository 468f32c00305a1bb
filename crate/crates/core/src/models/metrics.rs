//! Binary diagnostic metrics with degraded as the positive class.
//!
//! Rates keep their integer numerator and denominator so that
//! `accuracy + false_healthy + false_degraded == 1` can be checked exactly.

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// An unreduced fraction; a zero denominator reads as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
    pub value: f64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Self {
        let value = if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self { num, den, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub accuracy: Rate,
    pub false_healthy: Rate,
    pub false_degraded: Rate,
    pub precision: Rate,
    pub recall: Rate,
    pub f1: Rate,
}

impl EvalReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let n = c.total();
        Self {
            confusion: c,
            accuracy: Rate::new(c.tp + c.tn, n),
            false_healthy: Rate::new(c.fn_, n),
            false_degraded: Rate::new(c.fp, n),
            precision: Rate::new(c.tp, c.tp + c.fp),
            recall: Rate::new(c.tp, c.tp + c.fn_),
            f1: Rate::new(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        }
    }

    /// Exact check of accuracy + false_healthy + false_degraded = 1.
    pub fn rates_sum_to_one(&self) -> bool {
        let n = self.confusion.total();
        self.accuracy.den == n
            && self.false_healthy.den == n
            && self.false_degraded.den == n
            && self.accuracy.num + self.false_healthy.num + self.false_degraded.num == n
    }
}

pub fn confusion(predicted: &[u8], truth: &[u8]) -> Result<Confusion, ModelError> {
    if predicted.len() != truth.len() {
        return Err(ModelError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let mut c = Confusion::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn evaluate(predicted: &[u8], truth: &[u8]) -> Result<EvalReport, ModelError> {
    Ok(EvalReport::from_confusion(confusion(predicted, truth)?))
}
