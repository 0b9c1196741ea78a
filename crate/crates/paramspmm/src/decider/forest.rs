//! Random forest over the feature vectors: bootstrapped trees, a random
//! feature subset per split, majority vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decider::tree::{argmax_first, grow, GrowParams, Tree, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub(crate) trees: Vec<Tree>,
    pub(crate) num_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` means `sqrt` of the feature count.
    pub feature_subsample: Option<usize>,
    /// Draw each tree's samples with replacement. Turning this off makes a
    /// deep single tree memorize its training set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            feature_subsample: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl RandomForest {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Majority vote; ties resolve to the lowest class id.
    pub fn predict(&self, x: &[f64; NUM_FEATURES]) -> usize {
        let mut votes = vec![0usize; self.num_classes];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1;
        }
        argmax_first(&votes)
    }
}

/// Trains the ensemble. Trees grow in parallel but each from its own
/// seed-derived stream, so the result is identical at any thread count.
pub fn train_forest(
    data: &[[f64; NUM_FEATURES]],
    labels: &[usize],
    num_classes: usize,
    params: &ForestParams,
) -> RandomForest {
    assert_eq!(data.len(), labels.len());
    assert!(!data.is_empty(), "training set must be non-empty");
    let n = data.len();
    let features_per_split = params
        .feature_subsample
        .unwrap_or_else(|| (NUM_FEATURES as f64).sqrt().round() as usize)
        .clamp(1, NUM_FEATURES);
    let grow_params = GrowParams {
        num_classes,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf.max(1),
        features_per_split,
    };
    let trees: Vec<Tree> = (0..params.num_trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(params.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(data, labels, idx, &grow_params, &mut rng)
        })
        .collect();
    RandomForest { trees, num_classes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(a: f64, b: f64) -> [f64; NUM_FEATURES] {
        let mut x = [0.0; NUM_FEATURES];
        x[0] = a;
        x[11] = b;
        x
    }

    fn two_cluster_data() -> (Vec<[f64; NUM_FEATURES]>, Vec<usize>) {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let t = i as f64;
            data.push(sample(t, 0.1 * t));
            labels.push(usize::from(i >= 20));
        }
        (data, labels)
    }

    #[test]
    fn learns_a_separable_problem() {
        let (data, labels) = two_cluster_data();
        let forest = train_forest(&data, &labels, 2, &ForestParams::default());
        assert_eq!(forest.num_trees(), 100);
        assert_eq!(forest.predict(&sample(3.0, 0.3)), 0);
        assert_eq!(forest.predict(&sample(33.0, 3.3)), 1);
    }

    #[test]
    fn training_is_thread_count_independent() {
        let (data, labels) = two_cluster_data();
        let params = ForestParams { num_trees: 12, ..ForestParams::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let f1 = one.install(|| train_forest(&data, &labels, 2, &params));
        let f4 = four.install(|| train_forest(&data, &labels, 2, &params));
        assert_eq!(f1, f4);
    }

    #[test]
    fn unbootstrapped_single_tree_memorizes() {
        let (data, labels) = two_cluster_data();
        let params = ForestParams {
            num_trees: 1,
            max_depth: 64,
            min_leaf: 1,
            feature_subsample: Some(NUM_FEATURES),
            bootstrap: false,
            seed: 5,
        };
        let forest = train_forest(&data, &labels, 2, &params);
        for (x, &y) in data.iter().zip(&labels) {
            assert_eq!(forest.predict(x), y);
        }
    }

    #[test]
    fn tie_goes_to_the_lowest_class() {
        // Two trees voting for different classes.
        use crate::decider::tree::Node;
        let forest = RandomForest {
            trees: vec![
                Tree { nodes: vec![Node::Leaf { class: 3 }] },
                Tree { nodes: vec![Node::Leaf { class: 1 }] },
            ],
            num_classes: 4,
        };
        assert_eq!(forest.predict(&[0.0; NUM_FEATURES]), 1);
    }
}
