//! L2-regularized logistic regression trained by deterministic full-batch
//! gradient descent with backtracking line search, plus macro-averaged F1.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, SchemaId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// L2 penalty on the weights (the bias is not penalized).
    pub lambda: f64,
    /// Convergence threshold on the gradient max-norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Recorded for provenance; training itself is deterministic.
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lambda: 1.0,
            tolerance: 1e-6,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub iterations: usize,
    pub final_loss: f64,
    /// `true` when the gradient tolerance was met before `max_iterations`.
    pub converged: bool,
    pub seed: u64,
    /// Objective after each accepted step, starting with the initial value.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub schema_id: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub training_record: TrainingRecord,
}

/// Nonzero entries of each row.
struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
    dim: usize,
}

impl SparseRows {
    fn new(features: &[Vec<f64>]) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(features.len());
        for (i, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Learn(format!("row {i} has {} features, expected {dim}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Learn(format!("row {i} contains a non-finite feature value")));
            }
            rows.push(row.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect());
        }
        Ok(SparseRows { rows, dim })
    }

    fn margin(&self, i: usize, weights: &[f64], bias: f64) -> f64 {
        self.rows[i].iter().fold(bias, |acc, &(j, v)| acc + weights[j] * v)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn objective_value(x: &SparseRows, y: &[bool], weights: &[f64], bias: f64, lambda: f64) -> f64 {
    let nll: f64 = (0..x.rows.len())
        .map(|i| {
            let z = x.margin(i, weights, bias);
            softplus(z) - if y[i] { z } else { 0.0 }
        })
        .sum();
    nll + 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Returns the objective and its gradient; the last gradient entry is the bias.
fn objective_and_gradient(x: &SparseRows, y: &[bool], weights: &[f64], bias: f64, lambda: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; x.dim + 1];
    let mut nll = 0.0;
    for (i, row) in x.rows.iter().enumerate() {
        let z = x.margin(i, weights, bias);
        let target = if y[i] { 1.0 } else { 0.0 };
        nll += softplus(z) - target * z;
        let r = logistic(z) - target;
        for &(j, v) in row {
            grad[j] += r * v;
        }
        grad[x.dim] += r;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += lambda * w;
    }
    (nll + 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>(), grad)
}

/// Objective `sum_i [softplus(z_i) - y_i z_i] + lambda/2 ||w||^2` and its
/// gradient at `params = [w.., b]`.
pub fn objective(features: &[Vec<f64>], labels: &[bool], params: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    let x = SparseRows::new(features)?;
    if params.len() != x.dim + 1 || labels.len() != features.len() {
        return Err(Error::Learn("parameter or label length mismatch".into()));
    }
    let (w, b) = params.split_at(x.dim);
    Ok(objective_and_gradient(&x, labels, w, b[0], lambda))
}

pub fn fit(features: &[Vec<f64>], labels: &[bool], schema: &SchemaId, config: &LogRegConfig) -> Result<LogRegModel> {
    if features.len() != labels.len() {
        return Err(Error::Learn(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::Learn("need at least two training examples".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::Learn("training labels contain a single class".into()));
    }
    let x = SparseRows::new(features)?;
    let dim = x.dim;
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;

    // Start from the inverse of a Lipschitz bound on the gradient.
    let row_energy: f64 = x.rows.iter().map(|r| 1.0 + r.iter().map(|(_, v)| v * v).sum::<f64>()).sum();
    let mut step = 1.0 / (0.25 * row_energy + config.lambda);

    let (mut loss, mut grad) = objective_and_gradient(&x, labels, &weights, bias, config.lambda);
    let mut history = vec![loss];
    let mut iterations = 0;
    let mut converged = false;
    let mut trial_w = vec![0.0; dim];
    while iterations < config.max_iterations {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax <= config.tolerance {
            converged = true;
            break;
        }
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..dim {
                trial_w[j] = weights[j] - step * grad[j];
            }
            let trial_b = bias - step * grad[dim];
            let trial_loss = objective_value(&x, labels, &trial_w, trial_b, config.lambda);
            if trial_loss <= loss - 1e-4 * step * gnorm2 {
                std::mem::swap(&mut weights, &mut trial_w);
                bias = trial_b;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No step decreases the objective at machine precision.
            converged = gmax <= config.tolerance.max(1e-8 * (1.0 + loss.abs()));
            break;
        }
        iterations += 1;
        let (l, g) = objective_and_gradient(&x, labels, &weights, bias, config.lambda);
        loss = l;
        grad = g;
        history.push(loss);
    }
    if !converged && iterations >= config.max_iterations {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        converged = gmax <= config.tolerance;
    }
    Ok(LogRegModel {
        schema_id: schema.0.clone(),
        weights,
        bias,
        lambda: config.lambda,
        training_record: TrainingRecord {
            iterations,
            final_loss: loss,
            converged,
            seed: config.seed,
            loss_history: history,
        },
    })
}

impl LogRegModel {
    fn check(&self, v: &FeatureVector) -> Result<()> {
        if v.schema.0 != self.schema_id {
            return Err(Error::Learn(format!(
                "model expects schema {} but got {}",
                self.schema_id, v.schema
            )));
        }
        if v.values.len() != self.weights.len() {
            return Err(Error::Learn(format!(
                "model expects {} features but got {}",
                self.weights.len(),
                v.values.len()
            )));
        }
        Ok(())
    }

    pub fn decision(&self, v: &FeatureVector) -> Result<f64> {
        self.check(v)?;
        Ok(self.weights.iter().zip(&v.values).fold(self.bias, |acc, (w, x)| acc + w * x))
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64> {
        Ok(logistic(self.decision(v)?))
    }

    pub fn predict(&self, v: &FeatureVector) -> Result<bool> {
        Ok(self.predict_proba(v)? >= 0.5)
    }

    /// Predict every row of a matrix that shares `schema`.
    pub fn predict_rows(&self, rows: &[Vec<f64>], schema: &SchemaId) -> Result<Vec<bool>> {
        rows.iter()
            .map(|r| {
                self.predict(&FeatureVector {
                    values: r.clone(),
                    schema: schema.clone(),
                })
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Learn(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

/// Unweighted mean of per-class F1 over the classes present in `truth`.
pub fn f1_macro<T: Ord + Copy>(truth: &[T], predicted: &[T]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::Learn(format!(
            "label vectors differ in length ({} vs {})",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Learn("no labels to score".into()));
    }
    let classes: BTreeSet<T> = truth.iter().copied().collect();
    let mut total = 0.0;
    for &c in &classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fneg = 0usize;
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fneg += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fneg;
        if denom > 0 {
            total += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(total / classes.len() as f64)
}
