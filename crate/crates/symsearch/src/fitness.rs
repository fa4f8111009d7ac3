//! Scoring of candidate expressions on a labeled split.
//!
//! The loss is the balanced error `1 - (TPR + TNR) / 2`, which keeps fitness
//! threshold-free and robust to class priors. For a boolean predictor the
//! AUROC reduces exactly to `(TPR + TNR) / 2`; `auroc_binary` computes the
//! Mann-Whitney statistic with ties at 0.5, which coincides with it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{evaluate, Expr};
use crate::features::{FeatureSchema, FeatureVector};

/// Weighting of the complexity penalty in the fitness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessConfig {
    /// Penalty per expression node; fitness = (1 - loss) - lambda * complexity.
    pub lambda: f64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig { lambda: 0.005 }
    }
}

/// A candidate's measured quality. Higher fitness is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub fitness: f64,
    pub loss: f64,
    pub auroc: f64,
    pub complexity: usize,
}

/// Feature rows plus labels for one side of the split.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<u8>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&1) && self.labels.contains(&0)
    }
}

/// Evaluate an expression over every row of a split.
pub fn predictions(expr: &Expr, split: &FeatureSet, schema: &FeatureSchema) -> Result<Vec<bool>> {
    split
        .rows
        .iter()
        .map(|row| evaluate(expr, row, schema))
        .collect()
}

/// Score an expression on a labeled split. Deterministic; errors if the
/// split holds a single class.
pub fn score(
    expr: &Expr,
    split: &FeatureSet,
    schema: &FeatureSchema,
    config: &FitnessConfig,
) -> Result<Score> {
    if !split.has_both_classes() {
        return Err(Error::SingleClassSplit);
    }
    let preds = predictions(expr, split, schema)?;
    let (mut tp, mut tn, mut fp, mut fne) = (0usize, 0usize, 0usize, 0usize);
    for (&label, &pred) in split.labels.iter().zip(&preds) {
        match (label, pred) {
            (1, true) => tp += 1,
            (1, false) => fne += 1,
            (_, true) => fp += 1,
            (_, false) => tn += 1,
        }
    }
    let tpr = tp as f64 / (tp + fne) as f64;
    let tnr = tn as f64 / (tn + fp) as f64;
    let balanced_accuracy = (tpr + tnr) / 2.0;
    let loss = 1.0 - balanced_accuracy;
    let complexity = expr.complexity();
    Ok(Score {
        fitness: (1.0 - loss) - config.lambda * complexity as f64,
        loss,
        auroc: balanced_accuracy,
        complexity,
    })
}

/// AUROC of hard binary predictions: the Mann-Whitney pairwise statistic
/// with ties counted 0.5.
pub fn auroc_binary(predictions: &[bool], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let (mut pos_true, mut pos_false, mut neg_true, mut neg_false) = (0u64, 0u64, 0u64, 0u64);
    for (&pred, &label) in predictions.iter().zip(labels) {
        match (label, pred) {
            (1, true) => pos_true += 1,
            (1, false) => pos_false += 1,
            (_, true) => neg_true += 1,
            (_, false) => neg_false += 1,
        }
    }
    let n_pos = pos_true + pos_false;
    let n_neg = neg_true + neg_false;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassSplit);
    }
    // Pairs (positive, negative): a win when the positive is ranked above
    // the negative, half credit on ties.
    let wins = (pos_true * neg_false) as f64;
    let ties = (pos_true * neg_true + pos_false * neg_false) as f64;
    Ok((wins + 0.5 * ties) / (n_pos as f64 * n_neg as f64))
}

/// Total order used for ranking: fitness descending, then complexity
/// ascending, then printed form ascending.
pub fn rank_order(a: (&Score, &str), b: (&Score, &str)) -> Ordering {
    b.0.fitness
        .total_cmp(&a.0.fitness)
        .then_with(|| a.0.complexity.cmp(&b.0.complexity))
        .then_with(|| a.1.cmp(b.1))
}
