//! Gradient-boosted trees for binary satisfaction prediction.
//!
//! Logistic loss, Newton leaf values with an L2 penalty, exact greedy split
//! search. Hyper-parameters are tuned with leave-one-participant-out
//! validation on participant-averaged AUC.

mod dataset;
mod tree;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

pub use dataset::{LabeledFeatureSet, LabeledRow};
pub use tree::{Node, RegressionTree, LAMBDA};

use crate::error::{domain, parse_err, Result};
use tree::{grow_tree, ColumnData};

const P_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_leaf_nodes: usize,
    pub max_depth: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            n_estimators: 100,
            max_leaf_nodes: 8,
            max_depth: 3,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(domain(format!("learning rate {} outside (0, 1]", self.learning_rate)));
        }
        if self.max_depth < 1 {
            return Err(domain("max_depth must be at least 1"));
        }
        if self.max_leaf_nodes < 2 {
            return Err(domain("max_leaf_nodes must be at least 2"));
        }
        Ok(())
    }

    /// lr ∈ {0.05, 0.1} × trees ∈ {50, 100, 200} × depth ∈ {3, 5} × leaves ∈ {8, 31}.
    pub fn default_grid() -> Vec<GbdtParams> {
        let mut grid = Vec::new();
        for learning_rate in [0.05, 0.1] {
            for n_estimators in [50, 100, 200] {
                for max_depth in [3, 5] {
                    for max_leaf_nodes in [8, 31] {
                        grid.push(GbdtParams {
                            learning_rate,
                            n_estimators,
                            max_leaf_nodes,
                            max_depth,
                        });
                    }
                }
            }
        }
        grid
    }

    /// Grid file: one `learning_rate n_estimators max_leaf_nodes max_depth`
    /// per line; `#` starts a comment.
    pub fn parse_grid(text: &str) -> Result<Vec<GbdtParams>> {
        let mut grid = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(i + 1, "expected: learning_rate n_estimators max_leaf_nodes max_depth"));
            }
            let bad = |what: &str| parse_err(i + 1, format!("bad {what}"));
            let params = GbdtParams {
                learning_rate: f[0].parse().map_err(|_| bad("learning_rate"))?,
                n_estimators: f[1].parse().map_err(|_| bad("n_estimators"))?,
                max_leaf_nodes: f[2].parse().map_err(|_| bad("max_leaf_nodes"))?,
                max_depth: f[3].parse().map_err(|_| bad("max_depth"))?,
            };
            params.validate()?;
            grid.push(params);
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionModel {
    pub params: GbdtParams,
    pub n_features: usize,
    /// Log-odds prior.
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    /// Recorded for provenance; exact greedy training draws no randomness.
    pub seed: u64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SatisfactionModel {
    /// Model with no trees: predicts `sigmoid(base_score)` everywhere.
    pub fn constant(n_features: usize, base_score: f64) -> Self {
        Self {
            params: GbdtParams {
                n_estimators: 0,
                ..Default::default()
            },
            n_features,
            base_score,
            trees: Vec::new(),
            seed: 0,
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.params.learning_rate * sum
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(domain(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(sigmoid(self.raw(x)))
    }

    /// Text form: header, params, base score, then each tree as a preorder
    /// node list (`S feature threshold` / `L value`).
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::from("bmsi-gbdt 1\n");
        let _ = writeln!(
            out,
            "params learning_rate={} n_estimators={} max_leaf_nodes={} max_depth={} seed={}",
            p.learning_rate, p.n_estimators, p.max_leaf_nodes, p.max_depth, self.seed
        );
        let _ = writeln!(out, "n_features {}", self.n_features);
        let _ = writeln!(out, "base_score {}", self.base_score);
        for (i, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} {}", tree.nodes.len());
            for node in &tree.nodes {
                match node {
                    Node::Split { feature, threshold, .. } => {
                        let _ = writeln!(out, "S {feature} {threshold}");
                    }
                    Node::Leaf { value } => {
                        let _ = writeln!(out, "L {value}");
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| parse_err(0, format!("unexpected end of model, wanted {what}")))
        };
        let (n, header) = next("header")?;
        if header != "bmsi-gbdt 1" {
            return Err(parse_err(n, format!("unsupported model header {header:?}")));
        }
        let (n, params_line) = next("params")?;
        let mut params = GbdtParams::default();
        let mut seed = 0;
        let fields = params_line
            .strip_prefix("params ")
            .ok_or_else(|| parse_err(n, "expected params line"))?;
        for kv in fields.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(n, format!("bad field {kv:?}")))?;
            let bad = || parse_err(n, format!("bad value for {k}"));
            match k {
                "learning_rate" => params.learning_rate = v.parse().map_err(|_| bad())?,
                "n_estimators" => params.n_estimators = v.parse().map_err(|_| bad())?,
                "max_leaf_nodes" => params.max_leaf_nodes = v.parse().map_err(|_| bad())?,
                "max_depth" => params.max_depth = v.parse().map_err(|_| bad())?,
                "seed" => seed = v.parse().map_err(|_| bad())?,
                _ => return Err(parse_err(n, format!("unknown param {k}"))),
            }
        }
        let mut scalar = |key: &str| -> Result<(usize, String)> {
            let (n, line) = next(key)?;
            let v = line
                .strip_prefix(key)
                .map(str::trim)
                .ok_or_else(|| parse_err(n, format!("expected {key}")))?;
            Ok((n, v.to_string()))
        };
        let (n, v) = scalar("n_features")?;
        let n_features: usize = v.parse().map_err(|_| parse_err(n, "bad n_features"))?;
        let (n, v) = scalar("base_score")?;
        let base_score: f64 = v.parse().map_err(|_| parse_err(n, "bad base_score"))?;

        let mut trees = Vec::new();
        while let Some((n, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let count: usize = line
                .strip_prefix("tree ")
                .and_then(|rest| rest.split_whitespace().nth(1))
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| parse_err(n, "expected `tree <i> <n_nodes>`"))?;
            let mut flat = Vec::with_capacity(count);
            for _ in 0..count {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(n, "truncated tree"))?;
                let f: Vec<&str> = line.split_whitespace().collect();
                let node = match f.as_slice() {
                    ["S", feat, thr] => (
                        Some(feat.parse::<usize>().map_err(|_| parse_err(n, "bad feature"))?),
                        thr.parse::<f64>().map_err(|_| parse_err(n, "bad threshold"))?,
                    ),
                    ["L", v] => (None, v.parse::<f64>().map_err(|_| parse_err(n, "bad leaf"))?),
                    _ => return Err(parse_err(n, format!("bad node {line:?}"))),
                };
                if let Some(feat) = node.0 {
                    if feat >= n_features {
                        return Err(parse_err(n, format!("feature {feat} ≥ n_features")));
                    }
                }
                flat.push(node);
            }
            trees.push(rebuild_preorder(&flat).ok_or_else(|| parse_err(n, "malformed preorder tree"))?);
        }
        if trees.len() != params.n_estimators {
            return Err(parse_err(0, format!("{} trees for n_estimators={}", trees.len(), params.n_estimators)));
        }
        Ok(Self {
            params,
            n_features,
            base_score,
            trees,
            seed,
        })
    }
}

fn rebuild_preorder(flat: &[(Option<usize>, f64)]) -> Option<RegressionTree> {
    fn build(flat: &[(Option<usize>, f64)], pos: &mut usize, out: &mut Vec<Node>) -> Option<usize> {
        let (feature, v) = *flat.get(*pos)?;
        *pos += 1;
        let id = out.len();
        match feature {
            None => out.push(Node::Leaf { value: v }),
            Some(feature) => {
                out.push(Node::Leaf { value: 0.0 });
                let left = build(flat, pos, out)?;
                let right = build(flat, pos, out)?;
                out[id] = Node::Split {
                    feature,
                    threshold: v,
                    left,
                    right,
                };
            }
        }
        Some(id)
    }
    let mut pos = 0;
    let mut nodes = Vec::with_capacity(flat.len());
    build(flat, &mut pos, &mut nodes)?;
    (pos == flat.len()).then_some(RegressionTree { nodes })
}

pub fn log_loss(probs: &[f64], labels: &[u8]) -> f64 {
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            let p = p.clamp(1e-15, 1.0 - 1e-15);
            if *y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Trained model plus training log-loss before round 1 and after each round.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SatisfactionModel,
    pub loss_history: Vec<f64>,
}

pub fn train(data: &LabeledFeatureSet, params: &GbdtParams, seed: u64) -> Result<SatisfactionModel> {
    Ok(train_with_history(data, params, seed)?.model)
}

pub fn train_with_history(data: &LabeledFeatureSet, params: &GbdtParams, seed: u64) -> Result<TrainOutcome> {
    params.validate()?;
    data.validate()?;
    if !data.has_both_labels() {
        return Err(domain("training data needs both labels"));
    }
    let n_features = data.dim().unwrap_or(0);
    let labels: Vec<u8> = data.rows.iter().map(|r| r.label).collect();
    let n = labels.len() as f64;
    let prior = (labels.iter().filter(|y| **y == 1).count() as f64 / n).clamp(P_CLAMP, 1.0 - P_CLAMP);
    let base_score = (prior / (1.0 - prior)).ln();

    let row_refs: Vec<&[f64]> = data.rows.iter().map(|r| r.values.as_slice()).collect();
    let columns = ColumnData::new(&row_refs);
    let mut raw = vec![base_score; labels.len()];
    let mut g = vec![0.0; labels.len()];
    let mut h = vec![0.0; labels.len()];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let probs = |raw: &[f64]| raw.iter().map(|z| sigmoid(*z)).collect::<Vec<_>>();
    let mut loss_history = vec![log_loss(&probs(&raw), &labels)];

    for _ in 0..params.n_estimators {
        for i in 0..labels.len() {
            let p = sigmoid(raw[i]);
            g[i] = p - labels[i] as f64;
            h[i] = p * (1.0 - p);
        }
        let tree = grow_tree(&columns, &g, &h, params.max_depth, params.max_leaf_nodes);
        for (z, row) in raw.iter_mut().zip(&row_refs) {
            *z += params.learning_rate * tree.predict(row);
        }
        loss_history.push(log_loss(&probs(&raw), &labels));
        trees.push(tree);
    }
    Ok(TrainOutcome {
        model: SatisfactionModel {
            params: *params,
            n_features,
            base_score,
            trees,
            seed,
        },
        loss_history,
    })
}

/// Mann-Whitney AUC; tied scores count one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(domain("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(domain("NaN score"));
    }
    let n_pos = labels.iter().filter(|y| **y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(domain("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group i..=j
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|k| labels[**k] == 1).count() as f64 * avg_rank;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone)]
pub struct LopoReport {
    pub best_params: GbdtParams,
    pub mean_auc: f64,
    /// Participant-averaged validation AUC for every grid entry.
    pub grid_scores: Vec<(GbdtParams, f64)>,
    /// Participants whose fold was skipped (single class).
    pub skipped: Vec<String>,
    /// Final model trained on all rows with `best_params`.
    pub model: SatisfactionModel,
}

/// Mean validation AUC over leave-one-participant-out folds.
pub fn lopo_auc(data: &LabeledFeatureSet, params: &GbdtParams, seed: u64) -> Result<(f64, Vec<String>)> {
    let participants = data.participants();
    if participants.len() < 2 {
        return Err(domain("leave-one-participant-out needs at least two participants"));
    }
    let folds: Vec<(String, Option<Result<f64>>)> = participants
        .par_iter()
        .map(|p| {
            let (train_set, test_set) = data.split_by_participant(p);
            if !test_set.has_both_labels() {
                return (p.clone(), None);
            }
            let fold = (|| {
                let model = train(&train_set, params, seed)?;
                let scores = test_set
                    .rows
                    .iter()
                    .map(|r| model.predict(&r.values))
                    .collect::<Result<Vec<_>>>()?;
                let labels: Vec<u8> = test_set.rows.iter().map(|r| r.label).collect();
                auc(&scores, &labels)
            })();
            (p.clone(), Some(fold))
        })
        .collect();
    let mut aucs = Vec::new();
    let mut skipped = Vec::new();
    for (p, fold) in folds {
        match fold {
            Some(result) => aucs.push(result?),
            None => {
                warn!(participant = %p, "skipping LOPO fold: held-out participant has a single class");
                skipped.push(p);
            }
        }
    }
    if aucs.is_empty() {
        return Err(domain("no participant has both labels"));
    }
    Ok((aucs.iter().sum::<f64>() / aucs.len() as f64, skipped))
}

/// Picks the grid entry with the best participant-averaged AUC (first wins
/// ties) and retrains it on all data.
pub fn lopo_tune(data: &LabeledFeatureSet, grid: &[GbdtParams], seed: u64) -> Result<LopoReport> {
    if grid.is_empty() {
        return Err(domain("empty tuning grid"));
    }
    let mut grid_scores = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for params in grid {
        let (score, s) = lopo_auc(data, params, seed)?;
        skipped = s;
        grid_scores.push((*params, score));
    }
    let (best_params, mean_auc) = grid_scores
        .iter()
        .copied()
        .fold(None, |best: Option<(GbdtParams, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        })
        .expect("grid is non-empty");
    let model = train(data, &best_params, seed)?;
    Ok(LopoReport {
        best_params,
        mean_auc,
        grid_scores,
        skipped,
        model,
    })
}
