//! Regression trees grown best-first on second-order gradient statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// L2 penalty on leaf values.
pub const LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Feature-major training matrix with every column presorted once.
pub(crate) struct ColumnData {
    pub columns: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<u32>>,
    pub n_rows: usize,
}

impl ColumnData {
    pub fn new(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let dim = rows.first().map_or(0, |r| r.len());
        let columns: Vec<Vec<f64>> = (0..dim)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let sorted = columns
            .par_iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..n_rows as u32).collect();
                order.sort_by(|a, b| col[*a as usize].total_cmp(&col[*b as usize]).then(a.cmp(b)));
                order
            })
            .collect();
        Self {
            columns,
            sorted,
            n_rows,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenLeaf {
    node: usize,
    depth: usize,
    /// Per feature, this leaf's rows in ascending feature order.
    sorted: Vec<Vec<u32>>,
    best: Option<SplitCandidate>,
}

fn leaf_value(grad: f64, hess: f64) -> f64 {
    -grad / (hess + LAMBDA)
}

fn score(grad: f64, hess: f64) -> f64 {
    grad * grad / (hess + LAMBDA)
}

/// Threshold strictly between two sorted neighbours.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

fn best_split(data: &ColumnData, sorted: &[Vec<u32>], g: &[f64], h: &[f64], grad: f64, hess: f64) -> Option<SplitCandidate> {
    let parent = score(grad, hess);
    let per_feature: Vec<Option<SplitCandidate>> = sorted
        .par_iter()
        .enumerate()
        .map(|(feature, order)| {
            let col = &data.columns[feature];
            let mut best: Option<SplitCandidate> = None;
            let (mut gl, mut hl) = (0.0, 0.0);
            for pair in order.windows(2) {
                let (i, next) = (pair[0] as usize, pair[1] as usize);
                gl += g[i];
                hl += h[i];
                let (v, v_next) = (col[i], col[next]);
                if v_next <= v {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl) + score(grad - gl, hess - hl) - parent);
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        gain,
                        feature,
                        threshold: midpoint(v, v_next),
                    });
                }
            }
            best
        })
        .collect();
    // sequential reduction keeps ties on the lowest feature index
    let mut best: Option<SplitCandidate> = None;
    for cand in per_feature.into_iter().flatten() {
        if cand.gain > 0.0 && best.is_none_or(|b| cand.gain > b.gain) {
            best = Some(cand);
        }
    }
    best
}

/// Fits one tree to gradients `g` and Hessians `h` over all rows.
pub(crate) fn grow_tree(data: &ColumnData, g: &[f64], h: &[f64], max_depth: usize, max_leaf_nodes: usize) -> RegressionTree {
    let grad: f64 = g.iter().sum();
    let hess: f64 = h.iter().sum();
    let mut nodes = vec![Node::Leaf {
        value: leaf_value(grad, hess),
    }];
    let mut open = vec![OpenLeaf {
        node: 0,
        depth: 0,
        sorted: data.sorted.clone(),
        best: None,
    }];
    if max_depth > 0 && data.n_rows > 1 {
        open[0].best = best_split(data, &open[0].sorted, g, h, grad, hess);
    }
    let mut n_leaves = 1;
    let mut go_left = vec![false; data.n_rows];

    while n_leaves < max_leaf_nodes {
        // highest gain first; ties to the earliest-created leaf
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, leaf)| leaf.best.map(|b| (i, b.gain, leaf.node)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(i, _, _)| i);
        let Some(pick) = pick else { break };
        let leaf = open.swap_remove(pick);
        let split = leaf.best.expect("picked leaf has a split");

        let col = &data.columns[split.feature];
        for &r in &leaf.sorted[split.feature] {
            go_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let (mut left_sorted, mut right_sorted) = (Vec::with_capacity(leaf.sorted.len()), Vec::with_capacity(leaf.sorted.len()));
        for order in &leaf.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = order.iter().partition(|&&r| go_left[r as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let stats = |rows: &[u32]| {
            rows.iter()
                .fold((0.0, 0.0), |(a, b), &r| (a + g[r as usize], b + h[r as usize]))
        };
        let (gl, hl) = stats(&left_sorted[0]);
        let (gr, hr) = stats(&right_sorted[0]);

        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes.push(Node::Leaf {
            value: leaf_value(gl, hl),
        });
        nodes.push(Node::Leaf {
            value: leaf_value(gr, hr),
        });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_id,
            right: right_id,
        };
        n_leaves += 1;

        let depth = leaf.depth + 1;
        for (node, sorted, grad, hess) in [(left_id, left_sorted, gl, hl), (right_id, right_sorted, gr, hr)] {
            let best = if depth < max_depth && sorted[0].len() > 1 {
                best_split(data, &sorted, g, h, grad, hess)
            } else {
                None
            };
            open.push(OpenLeaf {
                node,
                depth,
                sorted,
                best,
            });
        }
    }
    compact(nodes)
}

/// Renumbers nodes into preorder so equal trees compare equal.
fn compact(nodes: Vec<Node>) -> RegressionTree {
    fn visit(nodes: &[Node], idx: usize, out: &mut Vec<Node>) -> usize {
        let id = out.len();
        match nodes[idx] {
            Node::Leaf { value } => out.push(Node::Leaf { value }),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(Node::Leaf { value: 0.0 });
                let l = visit(nodes, left, out);
                let r = visit(nodes, right, out);
                out[id] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        id
    }
    let mut out = Vec::with_capacity(nodes.len());
    visit(&nodes, 0, &mut out);
    RegressionTree { nodes: out }
}
