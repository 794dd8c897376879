use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, LabelDictionary, MlError};
use crate::gep::MarginalCostSeries;
use crate::seed::{derive_seed, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: 20, seed: 0 }
    }
}

/// CART node; rows with `value <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf { class: usize, samples: usize },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Smallest training-sample count over all leaves.
    pub fn min_leaf_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { samples, .. } => *samples,
            TreeNode::Split { left, right, .. } => left.min_leaf_samples().min(right.min_leaf_samples()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Seed of the bootstrap resample.
    pub seed: u64,
    pub root: TreeNode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub feature_names: Vec<String>,
    pub max_depth: usize,
    pub trees: Vec<Tree>,
    pub dictionary: LabelDictionary,
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

fn gini(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
}

impl Grower<'_> {
    fn grow(&self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let mut counts = vec![0usize; self.n_classes];
        for &i in &idx {
            counts[self.y[i]] += 1;
        }
        let leaf = TreeNode::Leaf { class: majority(&counts), samples: idx.len() };
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || idx.len() < 2 {
            return leaf;
        }

        let n = idx.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.clone();
        let mut left = vec![0usize; self.n_classes];
        for f in 0..self.x[idx[0]].len() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            left.iter_mut().for_each(|c| *c = 0);
            for k in 0..n - 1 {
                left[self.y[order[k]]] += 1;
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let right: Vec<usize> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
                let w = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.is_none_or(|(_, _, bw)| w < bw) {
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some((f, threshold, w));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return leaf;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }
}

/// Bagged CART classifier: each tree sees a bootstrap resample of full size
/// and splits on Gini impurity over all features at midpoint thresholds.
pub fn train_forest(
    features: &FeatureMatrix,
    labels: &[usize],
    dictionary: &LabelDictionary,
    config: &ForestConfig,
) -> Result<RandomForest, MlError> {
    let n = features.num_rows();
    if n == 0 {
        return Err(MlError::EmptyInput("no training samples".into()));
    }
    if config.n_trees == 0 {
        return Err(MlError::EmptyInput("forest needs at least one tree".into()));
    }
    if labels.len() != n {
        return Err(MlError::SchemaMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= dictionary.len()) {
        return Err(MlError::SchemaMismatch(format!("label {c} outside the dictionary")));
    }
    let grower = Grower { x: &features.rows, y: labels, n_classes: dictionary.len(), max_depth: config.max_depth };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i as u64);
            let mut r = rng(seed);
            let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            Tree { seed, root: grower.grow(idx, 0) }
        })
        .collect();
    Ok(RandomForest {
        feature_names: features.names.clone(),
        max_depth: config.max_depth,
        trees,
        dictionary: dictionary.clone(),
    })
}

impl RandomForest {
    /// Majority vote; ties go to the lowest class id.
    pub fn predict_class(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.dictionary.len()];
        for t in &self.trees {
            votes[t.root.predict(row)] += 1;
        }
        majority(&votes)
    }

    pub fn predict_classes(&self, features: &FeatureMatrix) -> Result<Vec<usize>, MlError> {
        if features.names != self.feature_names {
            return Err(MlError::SchemaMismatch(format!(
                "columns {:?}, forest trained on {:?}",
                features.names, self.feature_names
            )));
        }
        Ok(features.rows.par_iter().map(|r| self.predict_class(r)).collect())
    }
}

/// Representative marginal cost of the voted class at every step.
pub fn predict_marginal_costs(forest: &RandomForest, features: &FeatureMatrix) -> Result<MarginalCostSeries, MlError> {
    let classes = forest.predict_classes(features)?;
    Ok(MarginalCostSeries { values: classes.into_iter().map(|c| forest.dictionary.value(c)).collect() })
}
