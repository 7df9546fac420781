//! CART classification trees with the Gini criterion.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
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
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features drawn per split; `None` tries every allowed feature.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            mtry: None,
        }
    }
}

/// Index of the largest count; ties go to the lowest class index.
pub(crate) fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Weighted Gini impurity of a binary split, up to a constant factor.
fn split_score(total: &[usize], left: &[usize], n_left: usize, n: usize) -> f64 {
    let (mut sq_l, mut sq_r) = (0.0, 0.0);
    for (&t, &l) in total.iter().zip(left) {
        let r = (t - l) as f64;
        sq_l += (l as f64) * (l as f64);
        sq_r += r * r;
    }
    let (nl, nr) = (n_left as f64, (n - n_left) as f64);
    (nl - sq_l / nl) + (nr - sq_r / nr)
}

struct Builder<'a, R> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    features: &'a [usize],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in idx.iter() {
            counts[self.labels[i]] += 1;
        }
        let majority = argmax_first(&counts);
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let min_leaf = self.params.min_leaf.max(1);
        if pure || depth_capped || idx.len() < 2 * min_leaf {
            return node_id;
        }

        let candidates: Vec<usize> = match self.params.mtry {
            Some(m) if m < self.features.len() => {
                let mut picked: Vec<usize> = sample(self.rng, self.features.len(), m.max(1)).into_iter().collect();
                picked.sort_unstable();
                picked.into_iter().map(|j| self.features[j]).collect()
            }
            _ => self.features.to_vec(),
        };

        let mut best: Option<(f64, usize, f64)> = None;
        let mut left_counts = vec![0usize; self.n_classes];
        for &f in &candidates {
            idx.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            left_counts.iter_mut().for_each(|c| *c = 0);
            let n = idx.len();
            for pos in 0..n - 1 {
                left_counts[self.labels[idx[pos]]] += 1;
                let n_left = pos + 1;
                let (a, b) = (self.rows[idx[pos]][f], self.rows[idx[pos + 1]][f]);
                if a == b || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let score = split_score(&counts, &left_counts, n_left, n);
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut thr = 0.5 * (a + b);
                    if !(thr >= a && thr < b) {
                        thr = a;
                    }
                    best = Some((score, f, thr));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return node_id;
        };
        let split = partition(idx, |i| self.rows[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[node_id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        node_id
    }
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

/// Fits a tree on the rows listed in `sample_idx` (repeats allowed), splitting
/// only on `features`.
pub fn fit_tree<R: Rng>(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    sample_idx: &[usize],
    features: &[usize],
    params: TreeParams,
    rng: &mut R,
) -> Tree {
    let mut idx = sample_idx.to_vec();
    let mut b = Builder {
        rows,
        labels,
        n_classes,
        features,
        params,
        rng,
        nodes: Vec::new(),
    };
    b.grow(&mut idx, 0);
    Tree { nodes: b.nodes }
}
