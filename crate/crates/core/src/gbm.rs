//! Gradient-boosted regression trees with squared-error loss.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSchema};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "refactor-effort-gbm/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmHyperparams {
    pub n_trees: usize,
    /// Zero fits a single leaf per round.
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
    pub early_stopping_rounds: Option<usize>,
}

impl Default for GbmHyperparams {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 4,
            learning_rate: 0.05,
            min_samples_leaf: 5,
            subsample: 0.8,
            seed: 42,
            early_stopping_rounds: None,
        }
    }
}

impl GbmHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::config(format!(
                "subsample must be in (0, 1], got {}",
                self.subsample
            )));
        }
        if self.early_stopping_rounds == Some(0) {
            return Err(Error::config("early_stopping_rounds must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Node 0 is the root. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::ModelFormat("tree without nodes".into()));
        }
        // children always follow their parent, which rules out cycles
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::ModelFormat(format!("non-finite leaf at node {i}")));
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features
                        || !threshold.is_finite()
                        || left <= i
                        || right <= i
                        || left >= self.nodes.len()
                        || right >= self.nodes.len()
                    {
                        return Err(Error::ModelFormat(format!("invalid split at node {i}")));
                    }
                }
                Node::Leaf { .. } => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub base_prediction: f64,
    pub trees: Vec<RegressionTree>,
    pub schema: FeatureSchema,
    pub hyperparams: GbmHyperparams,
}

impl GbmModel {
    /// Unclamped `base + rate × Σ leaf values`.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.schema.len() {
            return Err(Error::contract(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.schema.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.base_prediction + self.hyperparams.learning_rate * sum)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(x)?.max(0.0))
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.schema.ensure_matches(&ds.schema)?;
        ds.rows.iter().map(|r| self.predict(&r.features.values)).collect()
    }
}

/// Per-round diagnostics of a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitHistory {
    /// Train RMSE of the unclamped ensemble after each round.
    pub train_rmse: Vec<f64>,
    pub valid_rmse: Vec<f64>,
    /// Rounds kept after early stopping.
    pub best_rounds: usize,
}

pub fn fit(train: &Dataset, valid: Option<&Dataset>, hp: &GbmHyperparams) -> Result<GbmModel> {
    fit_with_history(train, valid, hp).map(|(m, _)| m)
}

pub fn fit_with_history(
    train: &Dataset,
    valid: Option<&Dataset>,
    hp: &GbmHyperparams,
) -> Result<(GbmModel, FitHistory)> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if let Some(v) = valid {
        train.schema.ensure_matches(&v.schema)?;
    }
    let n_features = train.schema.len();
    for (i, row) in train.rows.iter().enumerate() {
        if row.features.len() != n_features {
            return Err(Error::contract(format!(
                "training row {i} has {} features, schema has {n_features}",
                row.features.len()
            )));
        }
    }

    let targets = train.targets();
    let n = targets.len();
    let base = if targets.iter().all(|&t| t == targets[0]) {
        targets[0]
    } else {
        targets.iter().sum::<f64>() / n as f64
    };
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|f| train.rows.iter().map(|r| r.features.values[f]).collect())
        .collect();

    let mut pred = vec![base; n];
    let mut valid_pred = valid.map(|v| vec![base; v.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let sample_size = ((n as f64 * hp.subsample).round() as usize).clamp(1, n);

    let mut trees = Vec::with_capacity(hp.n_trees);
    let mut history = FitHistory::default();
    let mut best = (f64::INFINITY, 0usize);

    for round in 0..hp.n_trees {
        let residuals: Vec<f64> = targets.iter().zip(&pred).map(|(t, p)| t - p).collect();
        let mut rows: Vec<usize> = if sample_size < n {
            rand::seq::index::sample(&mut rng, n, sample_size).into_vec()
        } else {
            (0..n).collect()
        };
        rows.sort_unstable();

        let mut builder = TreeBuilder {
            columns: &columns,
            residuals: &residuals,
            hp,
            nodes: Vec::new(),
        };
        builder.build(rows, 0);
        let tree = RegressionTree {
            nodes: builder.nodes,
        };

        for (i, p) in pred.iter_mut().enumerate() {
            let x: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            *p += hp.learning_rate * tree.predict(&x);
        }
        history.train_rmse.push(rmse(&pred, &targets));

        if let (Some(v), Some(vp)) = (valid, valid_pred.as_mut()) {
            for (p, row) in vp.iter_mut().zip(&v.rows) {
                *p += hp.learning_rate * tree.predict(&row.features.values);
            }
            let clamped: Vec<f64> = vp.iter().map(|p| p.max(0.0)).collect();
            let score = rmse(&clamped, &v.targets());
            history.valid_rmse.push(score);
            if score < best.0 {
                best = (score, round + 1);
            }
        }
        trees.push(tree);

        if let (Some(patience), true) = (hp.early_stopping_rounds, valid.is_some()) {
            if round + 1 - best.1 >= patience {
                log::info!("early stopping after {} rounds, keeping {}", round + 1, best.1);
                break;
            }
        }
    }

    if valid.is_some() && hp.early_stopping_rounds.is_some() {
        trees.truncate(best.1.max(1));
    }
    history.best_rounds = trees.len();

    Ok((
        GbmModel {
            base_prediction: base,
            trees,
            schema: train.schema.clone(),
            hyperparams: hp.clone(),
        },
        history,
    ))
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    residuals: &'a [f64],
    hp: &'a GbmHyperparams,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let sum: f64 = rows.iter().map(|&i| self.residuals[i]).sum();
        self.nodes.push(Node::Leaf {
            value: sum / rows.len() as f64,
        });
        if depth >= self.hp.max_depth || rows.len() < 2 * self.hp.min_samples_leaf {
            return at;
        }
        let Some(best) = self.best_split(&rows, sum) else {
            return at;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.columns[best.feature][i] <= best.threshold);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    /// Highest variance reduction; ties resolved towards the lowest feature
    /// index, then the lowest threshold.
    fn best_split(&self, rows: &[usize], total: f64) -> Option<Candidate> {
        let n = rows.len();
        let min_leaf = self.hp.min_samples_leaf;
        let parent_score = total * total / n as f64;

        let per_feature: Vec<Option<Candidate>> = (0..self.columns.len())
            .into_par_iter()
            .map(|feature| {
                let col = &self.columns[feature];
                let mut sorted: Vec<(f64, f64)> =
                    rows.iter().map(|&i| (col[i], self.residuals[i])).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut best: Option<Candidate> = None;
                let mut left_sum = 0.0;
                for k in 1..n {
                    left_sum += sorted[k - 1].1;
                    if k < min_leaf || n - k < min_leaf || sorted[k - 1].0 == sorted[k].0 {
                        continue;
                    }
                    let right_sum = total - left_sum;
                    let gain = left_sum * left_sum / k as f64
                        + right_sum * right_sum / (n - k) as f64
                        - parent_score;
                    if best.map_or(true, |b| gain > b.gain) {
                        best = Some(Candidate {
                            gain,
                            feature,
                            threshold: midpoint(sorted[k - 1].0, sorted[k].0),
                        });
                    }
                }
                best
            })
            .collect();

        let mut best: Option<Candidate> = None;
        for cand in per_feature.into_iter().flatten() {
            if best.map_or(true, |b| cand.gain > b.gain) {
                best = Some(cand);
            }
        }
        // rounding noise on already-fitted residuals is not a split
        let tolerance = 1e-12 * (1.0 + parent_score.abs());
        best.filter(|b| b.gain > tolerance)
    }
}

/// Midpoint that still separates `lo` from `hi` under `x <= t`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

fn rmse(pred: &[f64], targets: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    (sse / pred.len().max(1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `f64::NEG_INFINITY` when the targets are constant and the fit is not exact.
    pub r2: f64,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
}

impl EvalReport {
    pub fn r2_defined(&self) -> bool {
        self.r2.is_finite()
    }

    pub fn r2_display(&self) -> String {
        if self.r2_defined() {
            format!("{:.3}", self.r2)
        } else {
            "undefined".into()
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} MAE={:.3} RMSE={:.3} R2={}",
            self.n,
            self.mae,
            self.rmse,
            self.r2_display()
        )
    }
}

pub fn evaluate(predictions: &[f64], targets: &[f64]) -> Result<EvalReport> {
    if predictions.len() != targets.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let n = targets.len() as f64;
    let mae = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    let rmse = (sse / n).sqrt();
    let mean = targets.iter().sum::<f64>() / n;
    let sst: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(EvalReport {
        r2,
        rmse,
        mae,
        n: targets.len(),
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    model: GbmModel,
}

pub fn model_to_string(model: &GbmModel) -> Result<String> {
    serde_json::to_string_pretty(&ModelFile {
        format: MODEL_FORMAT.into(),
        model: model.clone(),
    })
    .map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<GbmModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let found = value
        .get("format")
        .and_then(|f| f.as_str())
        .ok_or_else(|| Error::ModelFormat("missing format tag".into()))?;
    if found != MODEL_FORMAT {
        return Err(Error::ModelVersion {
            expected: MODEL_FORMAT.into(),
            found: found.into(),
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let model = file.model;
    if !model.base_prediction.is_finite() {
        return Err(Error::ModelFormat("non-finite base prediction".into()));
    }
    model.hyperparams.validate()?;
    for tree in &model.trees {
        tree.validate(model.schema.len())?;
    }
    Ok(model)
}

pub fn save_model(model: &GbmModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<GbmModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read model {}: {e}", path.display())))?;
    model_from_str(&text)
}
