//! Gradient-boosted regression trees for binary classification.
//!
//! Logistic loss, second-order (Newton) leaf values, exact greedy splits on
//! pre-sorted features, depth-limited trees grown level by level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boosting hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub max_depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum Hessian mass in each child.
    pub min_child_weight: f64,
    /// Minimum loss reduction for a split.
    pub min_split_gain: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self { max_depth: 3, rounds: 100, learning_rate: 0.1, lambda: 1.0, min_child_weight: 10.0, min_split_gain: 10.0 }
    }
}

/// A tree node; children are indices into the tree's node list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Boosted ensemble producing `P(label = 1 | x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Gbdt {
    /// Fits on rows `x` with labels in {0, 1}.
    pub fn fit(x: &[Vec<f64>], labels: &[bool], params: &GbdtParams) -> Result<Self> {
        let n = x.len();
        if n == 0 || labels.len() != n {
            return Err(Error::input("classifier needs aligned, nonempty features and labels"));
        }
        let d = x[0].len();
        let rate = labels.iter().filter(|l| **l).count() as f64 / n as f64;
        let clipped = rate.clamp(1e-6, 1.0 - 1e-6);
        let base_score = (clipped / (1.0 - clipped)).ln();
        let order: Vec<Vec<usize>> = (0..d)
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|a, b| x[*a][f].total_cmp(&x[*b][f]));
                idx
            })
            .collect();
        let mut score = vec![base_score; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            for i in 0..n {
                let p = sigmoid(score[i]);
                grad[i] = p - if labels[i] { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(1e-12);
            }
            let tree = grow(x, &order, &grad, &hess, params);
            for i in 0..n {
                score[i] += params.learning_rate * tree.predict(&x[i]);
            }
            trees.push(tree);
        }
        Ok(Self { base_score, learning_rate: params.learning_rate, trees })
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn grow(x: &[Vec<f64>], order: &[Vec<usize>], grad: &[f64], hess: &[f64], params: &GbdtParams) -> Tree {
    let n = x.len();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // Node index of each row among the current frontier; usize::MAX once settled.
    let mut owner = vec![0usize; n];
    let mut frontier = vec![0usize];
    let mut sums = vec![(grad.iter().sum::<f64>(), hess.iter().sum::<f64>())];
    for depth in 0..=params.max_depth {
        let m = frontier.len();
        let mut best: Vec<Option<Candidate>> = (0..m).map(|_| None).collect();
        if depth < params.max_depth {
            for (f, idx) in order.iter().enumerate() {
                let mut gl = vec![0.0; m];
                let mut hl = vec![0.0; m];
                let mut last: Vec<Option<f64>> = vec![None; m];
                for &i in idx {
                    let slot = owner[i];
                    if slot == usize::MAX {
                        continue;
                    }
                    let v = x[i][f];
                    if let Some(prev) = last[slot] {
                        if v > prev {
                            let (g, h) = sums[slot];
                            let (gr, hr) = (g - gl[slot], h - hl[slot]);
                            if hl[slot] >= params.min_child_weight && hr >= params.min_child_weight {
                                let gain = 0.5 * (score(gl[slot], hl[slot], params.lambda) + score(gr, hr, params.lambda) - score(g, h, params.lambda))
                                    - params.min_split_gain;
                                if gain > 0.0 && best[slot].as_ref().is_none_or(|b| gain > b.gain) {
                                    best[slot] = Some(Candidate { gain, feature: f, threshold: 0.5 * (prev + v) });
                                }
                            }
                        }
                    }
                    gl[slot] += grad[i];
                    hl[slot] += hess[i];
                    last[slot] = Some(v);
                }
            }
        }
        let mut next_frontier = Vec::new();
        let mut next_sums = Vec::new();
        let mut remap = vec![usize::MAX; 2 * m];
        for (slot, cand) in best.iter().enumerate() {
            let node = frontier[slot];
            match cand {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node] = Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                    remap[2 * slot] = next_frontier.len();
                    next_frontier.push(left);
                    next_sums.push((0.0, 0.0));
                    remap[2 * slot + 1] = next_frontier.len();
                    next_frontier.push(left + 1);
                    next_sums.push((0.0, 0.0));
                }
                None => {
                    let (g, h) = sums[slot];
                    nodes[node] = Node::Leaf { value: leaf_value(g, h, params.lambda) };
                }
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        for i in 0..n {
            let slot = owner[i];
            if slot == usize::MAX {
                continue;
            }
            owner[i] = match &best[slot] {
                Some(c) => {
                    let side = if x[i][c.feature] <= c.threshold { 0 } else { 1 };
                    let s = remap[2 * slot + side];
                    next_sums[s].0 += grad[i];
                    next_sums[s].1 += hess[i];
                    s
                }
                None => usize::MAX,
            };
        }
        frontier = next_frontier;
        sums = next_sums;
    }
    Tree { nodes }
}
