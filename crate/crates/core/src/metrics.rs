//! Clustering, completion and subspace errors.

use nalgebra::DMatrix;
use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::linalg::{orthonormality_defect, spectral_norm};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub clustering_error: f64,
    pub completion_error: Option<f64>,
    pub subspace_errors: Vec<f64>,
    pub subspace_error_max: Option<f64>,
    pub subspace_error_mean: Option<f64>,
    /// `alignment[k]` is the true label matched to predicted label `k + 1`.
    pub alignment: Vec<usize>,
}

/// Best matching of predicted to true labels, both 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlignment {
    pub mismatches: usize,
    /// Entry `k` is the true label assigned to predicted label `k + 1`.
    pub predicted_to_true: Vec<usize>,
}

pub fn align_labels(predicted: &[usize], truth: &[usize]) -> Result<LabelAlignment> {
    if predicted.len() != truth.len() {
        return param(format!(
            "label lengths differ: {} vs {}",
            predicted.len(),
            truth.len()
        ));
    }
    if predicted.iter().chain(truth).any(|&l| l == 0) {
        return param("labels are 1-based");
    }
    let k = predicted.iter().chain(truth).copied().max().unwrap_or(1);
    // padded square confusion matrix, rows predicted, columns true
    let mut confusion = Matrix::new(k, k, 0i64);
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[(p - 1, t - 1)] += 1;
    }
    let (matched, assignment) = kuhn_munkres(&confusion);
    Ok(LabelAlignment {
        mismatches: predicted.len() - matched as usize,
        predicted_to_true: assignment.into_iter().map(|t| t + 1).collect(),
    })
}

/// Fraction of points misclassified under the best label permutation.
pub fn clustering_error(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.is_empty() {
        return param("no labels");
    }
    Ok(align_labels(predicted, truth)?.mismatches as f64 / predicted.len() as f64)
}

/// `||recovered - truth||_F / ||truth||_F`.
pub fn completion_error(recovered: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if recovered.shape() != truth.shape() {
        return param(format!(
            "shape mismatch {:?} vs {:?}",
            recovered.shape(),
            truth.shape()
        ));
    }
    let t = truth.norm();
    if t == 0.0 {
        return param("truth matrix is zero");
    }
    Ok((recovered - truth).norm() / t)
}

/// Largest principal angle, `arcsin ||B - A A^T B||_2`.
pub fn subspace_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return param(format!(
            "ambient dimensions differ: {} vs {}",
            a.nrows(),
            b.nrows()
        ));
    }
    for (name, m) in [("A", a), ("B", b)] {
        let defect = orthonormality_defect(m);
        if defect > 1e-8 {
            return param(format!("{name} is not orthonormal (defect {defect:e})"));
        }
    }
    let resid = b - a * a.tr_mul(b);
    Ok(spectral_norm(&resid).clamp(0.0, 1.0).asin())
}
