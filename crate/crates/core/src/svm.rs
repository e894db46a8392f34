//! L2-regularized, L1-hinge linear SVM trained by dual coordinate descent.
//!
//! The bias is learned as the weight of a constant feature with value 1, so
//! the problem solved is
//!
//! ```text
//! min  ½(‖w‖² + b²) + Σᵢ Cᵢ · max(0, 1 − yᵢ(w·xᵢ + b)),   Cᵢ = C · class_weight(yᵢ)
//! ```
//!
//! whose dual is the box-constrained QP
//! `min ½ αᵀQα − Σα, 0 ≤ αᵢ ≤ Cᵢ` with `Qᵢⱼ = yᵢyⱼ(xᵢ·xⱼ + 1)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Relevance;
use crate::features::{FeatureMatrix, SparseVec};

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("dimension mismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("class counts must both be at least 1 (got {relevant} relevant, {irrelevant} irrelevant)")]
    ZeroCount { relevant: usize, irrelevant: usize },
    #[error("class weights and C must be finite and strictly positive")]
    InvalidWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stopping tolerance on the projected-gradient spread.
    pub tolerance: f64,
    /// Largest accepted duality gap, relative to the primal objective.
    pub gap_tolerance: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tolerance: 1e-3,
            gap_tolerance: 1e-4,
            max_epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub relevant: f64,
    pub irrelevant: f64,
}

impl ClassWeights {
    pub fn uniform() -> Self {
        ClassWeights {
            relevant: 1.0,
            irrelevant: 1.0,
        }
    }

    pub fn of(&self, class: Relevance) -> f64 {
        match class {
            Relevance::Relevant => self.relevant,
            Relevance::Irrelevant => self.irrelevant,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        ClassWeights {
            relevant: self.relevant * k,
            irrelevant: self.irrelevant * k,
        }
    }
}

/// Inverse-frequency weights `n / (2 · n_class)`, so that each class carries
/// half of the total weight.
pub fn balanced_weights(n_relevant: usize, n_irrelevant: usize) -> Result<ClassWeights, SvmError> {
    if n_relevant == 0 || n_irrelevant == 0 {
        return Err(SvmError::ZeroCount {
            relevant: n_relevant,
            irrelevant: n_irrelevant,
        });
    }
    let half = (n_relevant + n_irrelevant) as f64 / 2.0;
    Ok(ClassWeights {
        relevant: half / n_relevant as f64,
        irrelevant: half / n_irrelevant as f64,
    })
}

fn sign(class: Relevance) -> f64 {
    match class {
        Relevance::Relevant => 1.0,
        Relevance::Irrelevant => -1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel { weights, bias }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Signed distance proxy; positive means the relevant side.
    pub fn score(&self, x: &SparseVec) -> Result<f64, SvmError> {
        if let Some(&max) = x.indices.last() {
            if max as usize >= self.dim() {
                return Err(SvmError::DimensionMismatch {
                    expected: self.dim(),
                    found: max as usize + 1,
                });
            }
        }
        Ok(self.score_unchecked(x))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, x: &SparseVec) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn score_dense(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    /// Scores for every row of `matrix`, in row order.
    pub fn decision(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, SvmError> {
        self.check_dim(matrix)?;
        Ok(matrix.rows.iter().map(|r| self.score_unchecked(r)).collect())
    }

    /// Scores for the given rows of `matrix`, in the order of `ids`.
    pub fn decision_for(&self, matrix: &FeatureMatrix, ids: &[usize]) -> Result<Vec<f64>, SvmError> {
        self.check_dim(matrix)?;
        Ok(ids.iter().map(|&i| self.score_unchecked(&matrix.rows[i])).collect())
    }

    fn check_dim(&self, matrix: &FeatureMatrix) -> Result<(), SvmError> {
        if matrix.dim != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: matrix.dim,
            });
        }
        Ok(())
    }

    /// Weights and bias rounded to 1e-9, for reproducibility comparisons.
    pub fn summary(&self) -> Vec<i64> {
        self.weights
            .iter()
            .chain(std::iter::once(&self.bias))
            .map(|v| (v * 1e9).round() as i64)
            .collect()
    }
}

/// Per-epoch objective values recorded by [`SvmTrainer::train_traced`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub primal: Vec<f64>,
    /// Dual objective in minimization form, `½‖w̃‖² − Σα`.
    pub dual: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SvmTrainer {
    pub params: SvmParams,
}

impl SvmTrainer {
    pub fn new(params: SvmParams) -> Self {
        SvmTrainer { params }
    }

    pub fn train(
        &self,
        rows: &[&SparseVec],
        labels: &[Relevance],
        dim: usize,
        weights: Option<ClassWeights>,
        seed: u64,
    ) -> Result<LinearModel, SvmError> {
        self.solve(rows, labels, dim, weights, seed, None)
    }

    pub fn train_traced(
        &self,
        rows: &[&SparseVec],
        labels: &[Relevance],
        dim: usize,
        weights: Option<ClassWeights>,
        seed: u64,
    ) -> Result<(LinearModel, TrainingTrace), SvmError> {
        let mut trace = TrainingTrace::default();
        let model = self.solve(rows, labels, dim, weights, seed, Some(&mut trace))?;
        Ok((model, trace))
    }

    /// Convenience wrapper selecting `ids` out of a feature matrix.
    pub fn train_on(
        &self,
        matrix: &FeatureMatrix,
        ids: &[usize],
        labels: &[Relevance],
        weights: Option<ClassWeights>,
        seed: u64,
    ) -> Result<LinearModel, SvmError> {
        let rows: Vec<&SparseVec> = ids.iter().map(|&i| &matrix.rows[i]).collect();
        self.train(&rows, labels, matrix.dim, weights, seed)
    }

    fn solve(
        &self,
        rows: &[&SparseVec],
        labels: &[Relevance],
        dim: usize,
        weights: Option<ClassWeights>,
        seed: u64,
        mut trace: Option<&mut TrainingTrace>,
    ) -> Result<LinearModel, SvmError> {
        if rows.len() != labels.len() {
            return Err(SvmError::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        let has_pos = labels.iter().any(|l| l.is_relevant());
        let has_neg = labels.iter().any(|l| !l.is_relevant());
        if !(has_pos && has_neg) {
            return Err(SvmError::SingleClass);
        }
        let cw = weights.unwrap_or_else(ClassWeights::uniform);
        let p = self.params;
        let valid = |v: f64| v.is_finite() && v > 0.0;
        if !(valid(cw.relevant) && valid(cw.irrelevant) && valid(p.c)) {
            return Err(SvmError::InvalidWeights);
        }
        for r in rows {
            if let Some(&max) = r.indices.last() {
                if max as usize >= dim {
                    return Err(SvmError::DimensionMismatch {
                        expected: dim,
                        found: max as usize + 1,
                    });
                }
            }
        }

        let n = rows.len();
        let y: Vec<f64> = labels.iter().map(|&l| sign(l)).collect();
        let upper: Vec<f64> = labels.iter().map(|&l| p.c * cw.of(l)).collect();
        let qd: Vec<f64> = rows.iter().map(|r| r.squared_norm() + 1.0).collect();

        let mut alpha = vec![0.0; n];
        let mut w = vec![0.0; dim];
        let mut b = 0.0;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut index: Vec<usize> = (0..n).collect();
        let mut active = n;
        let mut pg_max_old = f64::INFINITY;
        let mut pg_min_old = f64::NEG_INFINITY;
        let mut epoch = 0;
        let mut converged = false;

        while epoch < p.max_epochs {
            let mut pg_max_new = f64::NEG_INFINITY;
            let mut pg_min_new = f64::INFINITY;
            index[..active].shuffle(&mut rng);

            let mut s = 0;
            while s < active {
                let i = index[s];
                let x = rows[i];
                let g = y[i] * (x.dot_dense(&w) + b) - 1.0;

                let mut pg = 0.0;
                if alpha[i] == 0.0 {
                    if g > pg_max_old {
                        active -= 1;
                        index.swap(s, active);
                        continue;
                    } else if g < 0.0 {
                        pg = g;
                    }
                } else if alpha[i] == upper[i] {
                    if g < pg_min_old {
                        active -= 1;
                        index.swap(s, active);
                        continue;
                    } else if g > 0.0 {
                        pg = g;
                    }
                } else {
                    pg = g;
                }
                pg_max_new = pg_max_new.max(pg);
                pg_min_new = pg_min_new.min(pg);

                if pg.abs() > 1e-12 {
                    let old = alpha[i];
                    alpha[i] = (old - g / qd[i]).clamp(0.0, upper[i]);
                    let d = (alpha[i] - old) * y[i];
                    for (j, v) in x.iter() {
                        w[j] += d * v;
                    }
                    b += d;
                }
                s += 1;
            }
            epoch += 1;

            if let Some(t) = trace.as_deref_mut() {
                t.primal.push(primal_objective(rows, &y, &upper, &w, b));
                t.dual.push(dual_objective(&alpha, &w, b));
            }

            if pg_max_new - pg_min_new <= p.tolerance {
                if active == n {
                    let primal = primal_objective(rows, &y, &upper, &w, b);
                    let gap = primal + dual_objective(&alpha, &w, b);
                    if gap <= p.gap_tolerance * primal.abs().max(1e-12) {
                        converged = true;
                        break;
                    }
                    pg_max_old = f64::INFINITY;
                    pg_min_old = f64::NEG_INFINITY;
                    continue;
                }
                active = n;
                pg_max_old = f64::INFINITY;
                pg_min_old = f64::NEG_INFINITY;
                continue;
            }
            pg_max_old = if pg_max_new <= 0.0 { f64::INFINITY } else { pg_max_new };
            pg_min_old = if pg_min_new >= 0.0 { f64::NEG_INFINITY } else { pg_min_new };
        }

        if !converged {
            tracing::debug!(epochs = epoch, "svm reached max epochs before tolerance");
        }
        if let Some(t) = trace {
            t.epochs = epoch;
            t.converged = converged;
        }
        Ok(LinearModel { weights: w, bias: b })
    }
}

fn primal_objective(rows: &[&SparseVec], y: &[f64], upper: &[f64], w: &[f64], b: f64) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let loss: f64 = rows
        .iter()
        .zip(y)
        .zip(upper)
        .map(|((x, &yi), &ci)| ci * (1.0 - yi * (x.dot_dense(w) + b)).max(0.0))
        .sum();
    reg + loss
}

fn dual_objective(alpha: &[f64], w: &[f64], b: f64) -> f64 {
    0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b) - alpha.iter().sum::<f64>()
}

/// Objective value of `model` on a training set, in the form minimized by
/// [`SvmTrainer`].
pub fn objective(
    model: &LinearModel,
    rows: &[&SparseVec],
    labels: &[Relevance],
    weights: Option<ClassWeights>,
    c: f64,
) -> f64 {
    let cw = weights.unwrap_or_else(ClassWeights::uniform);
    let y: Vec<f64> = labels.iter().map(|&l| sign(l)).collect();
    let upper: Vec<f64> = labels.iter().map(|&l| c * cw.of(l)).collect();
    primal_objective(rows, &y, &upper, &model.weights, model.bias)
}
