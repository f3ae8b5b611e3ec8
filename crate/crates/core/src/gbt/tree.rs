use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GbtHyperParams, Growth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    /// Indented text dump, one node per line.
    pub fn dump(&self, names: &[String]) -> String {
        fn walk(t: &RegressionTree, names: &[String], at: usize, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match &t.nodes[at] {
                Node::Leaf { value } => out.push_str(&format!("{pad}[{at}] leaf = {value:.6}\n")),
                Node::Split { feature, threshold, left, right } => {
                    let name = names.get(*feature).map_or_else(|| format!("f{feature}"), Clone::clone);
                    out.push_str(&format!("{pad}[{at}] {name} <= {threshold:.6} ? [{left}] : [{right}]\n"));
                    walk(t, names, *left, depth + 1, out);
                    walk(t, names, *right, depth + 1, out);
                }
            }
        }
        let mut out = String::new();
        walk(self, names, 0, 0, &mut out);
        out
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    g.signum() * (g.abs() - alpha).max(0.0)
}

/// Regularized leaf score: the SSE reduction a leaf of `n` rows with
/// residual sum `sum` achieves when λ = α = 0.
fn score(sum: f64, n: usize, p: &GbtHyperParams) -> f64 {
    soft_threshold(sum, p.l1).powi(2) / (n as f64 + p.l2)
}

fn leaf_value(sum: f64, n: usize, p: &GbtHyperParams) -> f64 {
    if n == 0 {
        return 0.0;
    }
    soft_threshold(sum, p.l1) / (n as f64 + p.l2)
}

/// Row indices of every feature column, sorted by value (ties by index).
pub(crate) struct Presorted {
    pub(crate) order: Vec<Vec<usize>>,
}

impl Presorted {
    pub(crate) fn new(columns: &[Vec<f64>]) -> Self {
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..col.len()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenLeaf {
    node: usize,
    depth: usize,
    best: Option<SplitChoice>,
}

const OUT_OF_BAG: usize = usize::MAX;

/// Everything needed to grow trees over one fixed training set.
pub(crate) struct Grower<'a> {
    pub(crate) columns: &'a [Vec<f64>],
    pub(crate) presorted: &'a Presorted,
    pub(crate) params: &'a GbtHyperParams,
}

impl Grower<'_> {
    fn best_split(&self, leaf: usize, node_of: &[usize], residuals: &[f64], features: &[usize], sum: f64, n: usize) -> Option<SplitChoice> {
        let p = self.params;
        if n < 2 * p.min_samples_leaf {
            return None;
        }
        let parent = score(sum, n, p);
        let mut best: Option<SplitChoice> = None;
        for &f in features {
            let col = &self.columns[f];
            let (mut left_sum, mut left_n) = (0.0, 0usize);
            let mut prev: Option<f64> = None;
            for &i in &self.presorted.order[f] {
                if node_of[i] != leaf {
                    continue;
                }
                let v = col[i];
                if let Some(pv) = prev {
                    if v > pv && left_n >= p.min_samples_leaf && n - left_n >= p.min_samples_leaf {
                        let gain = score(left_sum, left_n, p) + score(sum - left_sum, n - left_n, p) - parent - p.min_split_gain;
                        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                            let mid = 0.5 * (pv + v);
                            let threshold = if mid < v { mid } else { pv };
                            best = Some(SplitChoice { gain, feature: f, threshold });
                        }
                    }
                }
                left_sum += residuals[i];
                left_n += 1;
                prev = Some(v);
            }
        }
        best
    }

    /// Grows one tree on the rows whose `in_bag` flag is set.
    pub(crate) fn grow(&self, residuals: &[f64], in_bag: &[bool], features: &[usize]) -> RegressionTree {
        let p = self.params;
        let mut node_of: Vec<usize> = in_bag.iter().map(|&b| if b { 0 } else { OUT_OF_BAG }).collect();
        let (sum, n) = node_of
            .iter()
            .zip(residuals)
            .filter(|(k, _)| **k == 0)
            .fold((0.0, 0usize), |(s, c), (_, r)| (s + r, c + 1));
        let mut nodes = vec![Node::Leaf { value: leaf_value(sum, n, p) }];
        let can_split = |depth: usize| depth < p.max_depth && p.num_leaves > 1;
        let root_best = if can_split(0) { self.best_split(0, &node_of, residuals, features, sum, n) } else { None };
        let mut open = std::collections::VecDeque::from([OpenLeaf { node: 0, depth: 0, best: root_best }]);
        let mut leaves = 1;

        while leaves < p.num_leaves {
            let pick = match p.growth {
                Growth::LeafWise => {
                    let mut pick: Option<usize> = None;
                    for (k, leaf) in open.iter().enumerate() {
                        if let Some(b) = leaf.best {
                            if pick.is_none_or(|j| b.gain > open[j].best.expect("candidate").gain) {
                                pick = Some(k);
                            }
                        }
                    }
                    pick
                }
                Growth::DepthWise => open.iter().position(|l| l.best.is_some()),
            };
            let Some(k) = pick else { break };
            let leaf = open.remove(k).expect("index in range");
            let split = leaf.best.expect("picked leaves have a split");
            let (left, right) = (nodes.len(), nodes.len() + 1);
            let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
            for i in 0..node_of.len() {
                if node_of[i] != leaf.node {
                    continue;
                }
                if self.columns[split.feature][i] <= split.threshold {
                    node_of[i] = left;
                    ls += residuals[i];
                    ln += 1;
                } else {
                    node_of[i] = right;
                    rs += residuals[i];
                    rn += 1;
                }
            }
            nodes[leaf.node] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
            nodes.push(Node::Leaf { value: leaf_value(ls, ln, p) });
            nodes.push(Node::Leaf { value: leaf_value(rs, rn, p) });
            leaves += 1;
            let depth = leaf.depth + 1;
            for (node, s, c) in [(left, ls, ln), (right, rs, rn)] {
                let best = if can_split(depth) { self.best_split(node, &node_of, residuals, features, s, c) } else { None };
                open.push_back(OpenLeaf { node, depth, best });
            }
        }
        RegressionTree { nodes }
    }
}

/// Features offered to one tree: all of them, or a sorted random subset of
/// `round(feature_fraction · p)` (at least one).
pub(crate) fn sample_features(p: usize, fraction: f64, rng: &mut impl Rng) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..p).collect();
    }
    let k = ((p as f64 * fraction).round() as usize).clamp(1, p);
    let mut f = index::sample(rng, p, k).into_vec();
    f.sort_unstable();
    f
}

/// Grows a single tree fitting `residuals` from column-major features `x`,
/// using every row. `rng` drives feature subsampling.
pub fn grow_tree(x: &[Vec<f64>], residuals: &[f64], params: &GbtHyperParams, rng: &mut impl Rng) -> RegressionTree {
    if residuals.is_empty() {
        return RegressionTree::leaf(0.0);
    }
    let presorted = Presorted::new(x);
    let features = sample_features(x.len(), params.feature_fraction, rng);
    Grower { columns: x, presorted: &presorted, params }.grow(residuals, &vec![true; residuals.len()], &features)
}
