//! Axis-aligned binary decision tree grown by greedy Gini minimization.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const NUM_FEATURES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    /// Routes `x` to a leaf; `<= threshold` goes left.
    pub fn predict(&self, x: &[f64; NUM_FEATURES]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class } => return *class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

pub struct GrowParams {
    pub num_classes: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn (without replacement) per split.
    pub features_per_split: usize,
}

/// Grows a tree over the samples selected by `idx` (duplicates allowed,
/// which is how bootstrap resampling enters).
pub fn grow(
    data: &[[f64; NUM_FEATURES]],
    labels: &[usize],
    idx: Vec<usize>,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = Vec::new();
    build(&mut nodes, data, labels, idx, 0, params, rng);
    Tree { nodes }
}

fn build(
    nodes: &mut Vec<Node>,
    data: &[[f64; NUM_FEATURES]],
    labels: &[usize],
    idx: Vec<usize>,
    depth: usize,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> usize {
    let counts = class_counts(labels, &idx, params.num_classes);
    let majority = argmax_first(&counts);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || idx.len() < 2 * params.min_leaf {
        nodes.push(Node::Leaf { class: majority });
        return nodes.len() - 1;
    }
    let Some((feature, threshold)) = best_split(data, labels, &idx, params, rng) else {
        nodes.push(Node::Leaf { class: majority });
        return nodes.len() - 1;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        idx.into_iter().partition(|&i| data[i][feature] <= threshold);
    let this = nodes.len();
    nodes.push(Node::Leaf { class: majority });
    let left = build(nodes, data, labels, left_idx, depth + 1, params, rng);
    let right = build(nodes, data, labels, right_idx, depth + 1, params, rng);
    nodes[this] = Node::Split { feature, threshold, left, right };
    this
}

/// Lowest Gini-weighted split over a random feature subset; thresholds sit
/// between distinct consecutive values. `None` when nothing separates the
/// samples while respecting the leaf minimum.
fn best_split(
    data: &[[f64; NUM_FEATURES]],
    labels: &[usize],
    idx: &[usize],
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, f64)> {
    let k = params.features_per_split.clamp(1, NUM_FEATURES);
    // Shuffled feature order; the search runs past the first k draws only
    // while no valid cut has been found, so constant features never force
    // a premature leaf.
    let order = rand::seq::index::sample(rng, NUM_FEATURES, NUM_FEATURES);
    let n = idx.len();
    let total = class_counts(labels, idx, params.num_classes);
    let parent = gini(&total, n);

    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (seen, feature) in order.into_iter().enumerate() {
        if seen >= k && best.is_some() {
            break;
        }
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (data[i][feature], labels[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = vec![0usize; params.num_classes];
        for split_at in 1..n {
            left[sorted[split_at - 1].1] += 1;
            if sorted[split_at].0 == sorted[split_at - 1].0 {
                continue;
            }
            if split_at < params.min_leaf || n - split_at < params.min_leaf {
                continue;
            }
            let score = weighted_gini(&left, &total, split_at, n);
            // A cut must strictly lower impurity; anything else grows the
            // tree without separating classes.
            if score < parent && best.map_or(true, |(s, _, _)| score < s) {
                let threshold = 0.5 * (sorted[split_at - 1].0 + sorted[split_at].0);
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn gini(counts: &[usize], n: usize) -> f64 {
    let mut g = 1.0;
    for &c in counts {
        g -= (c as f64 / n as f64).powi(2);
    }
    g
}

fn weighted_gini(left: &[usize], total: &[usize], nl: usize, n: usize) -> f64 {
    let nr = n - nl;
    let mut gl = 1.0;
    let mut gr = 1.0;
    for (&l, &t) in left.iter().zip(total) {
        let r = t - l;
        gl -= (l as f64 / nl as f64).powi(2);
        gr -= (r as f64 / nr as f64).powi(2);
    }
    (nl as f64 * gl + nr as f64 * gr) / n as f64
}

fn class_counts(labels: &[usize], idx: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &i in idx {
        counts[labels[i]] += 1;
    }
    counts
}

/// First maximum wins, so class ties resolve to the lowest id.
pub(crate) fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn params(num_classes: usize) -> GrowParams {
        GrowParams { num_classes, max_depth: 16, min_leaf: 1, features_per_split: NUM_FEATURES }
    }

    fn sample(v: f64) -> [f64; NUM_FEATURES] {
        let mut x = [0.0; NUM_FEATURES];
        x[7] = v;
        x
    }

    #[test]
    fn pure_input_yields_single_leaf() {
        let data = vec![sample(1.0), sample(2.0), sample(3.0)];
        let labels = vec![4, 4, 4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = grow(&data, &labels, vec![0, 1, 2], &params(5), &mut rng);
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&sample(-7.0)), 4);
    }

    #[test]
    fn single_threshold_separates_two_classes() {
        let data: Vec<_> = [0.1, 0.2, 0.3, 5.0, 6.0, 7.0].iter().map(|&v| sample(v)).collect();
        let labels = vec![0, 0, 0, 1, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = grow(&data, &labels, (0..6).collect(), &params(2), &mut rng);
        assert_eq!(tree.predict(&sample(0.15)), 0);
        assert_eq!(tree.predict(&sample(6.5)), 1);
        // Split lives between the class clusters.
        let Node::Split { feature, threshold, .. } = tree.nodes[0] else {
            panic!("expected a root split");
        };
        assert_eq!(feature, 7);
        assert!(threshold > 0.3 && threshold < 5.0);
    }

    #[test]
    fn min_leaf_blocks_degenerate_splits() {
        let data: Vec<_> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| sample(v)).collect();
        let labels = vec![0, 1, 1, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GrowParams { num_classes: 2, max_depth: 16, min_leaf: 2, features_per_split: 16 };
        let tree = grow(&data, &labels, (0..4).collect(), &p, &mut rng);
        // Cuts that improve impurity would isolate one sample and violate
        // min_leaf; the one legal cut does not improve. Majority leaf, tie
        // resolved to the lowest class.
        assert_eq!(tree.node_count(), 1);
        for v in [0.5, 2.5, 9.0] {
            assert_eq!(tree.predict(&sample(v)), 0);
        }
    }

    #[test]
    fn identical_features_cannot_split() {
        let data = vec![sample(3.0); 8];
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = grow(&data, &labels, (0..8).collect(), &params(2), &mut rng);
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&sample(3.0)), 0);
    }
}
