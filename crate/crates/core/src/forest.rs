//! Random-forest regression built from scratch: bootstrap-sampled trees
//! grown by exhaustive RSS-decrease split search over random feature
//! subsets, impurity-decrease feature importance, and a CV-error sweep that
//! picks how many top-ranked features to keep.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ols::make_folds;

/// Tree growth limits. `features_per_split = None` uses `ceil(sqrt(d))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Depth cap; unlimited by default (trees grow until pure).
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 2, features_per_split: None }
    }
}

impl TreeParams {
    fn validate(&self, d: usize) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if let Some(fps) = self.features_per_split {
            if fps == 0 || fps > d {
                return Err(Error::InvalidConfig(format!(
                    "features_per_split must be in [1, {d}], got {fps}"
                )));
            }
        }
        Ok(())
    }

    fn resolved_fps(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .min(d)
    }
}

/// A regression tree node: internal nodes carry a split, leaves the mean
/// target of their training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn predict(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// One fitted tree plus its out-of-bag row indices (diagnostic only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: TreeNode,
    pub oob_rows: Vec<usize>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.root.predict(row)
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// An ensemble of regression trees with accumulated per-feature
/// importance scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    /// Mean over trees of the summed RSS decrease attributed to splits on
    /// each feature.
    pub importance: Vec<f64>,
    pub feature_names: Vec<String>,
    pub n_trees: usize,
    pub seed: u64,
    pub params: TreeParams,
}

impl ForestModel {
    /// Ensemble prediction: the arithmetic mean of per-tree outputs.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::Shape(format!(
                "row has {} features, forest expects {}",
                row.len(),
                self.feature_names.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Feature indices sorted by descending importance, ties by index.
    pub fn importance_ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.importance.len()).collect();
        order.sort_by(|&a, &b| {
            self.importance[b]
                .partial_cmp(&self.importance[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numeric(format!("forest serialization failed: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

/// Draws `n` rows uniformly with replacement; deterministic per seed.
pub fn bootstrap_sample(dataset: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix> {
    let n = dataset.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    dataset.take_rows(&rows)
}

/// Column-major view used by the tree builder.
struct ColumnData {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    names: Vec<String>,
}

impl ColumnData {
    fn from_matrix(m: &FeatureMatrix) -> Result<Self> {
        let (names, x, y) = m.design_and_target()?;
        let d = names.len();
        let n = y.len();
        let mut cols = vec![Vec::with_capacity(n); d];
        for i in 0..n {
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(x[i * d + j]);
            }
        }
        Ok(Self { cols, y, names })
    }
}

struct TreeBuilder<'a> {
    data: &'a ColumnData,
    params: TreeParams,
    fps: usize,
    rng: ChaCha8Rng,
    importance: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> TreeNode {
        let n = idx.len();
        let (sum, sum2) = idx.iter().fold((0.0, 0.0), |(s, s2), &i| {
            let v = self.data.y[i];
            (s + v, s2 + v * v)
        });
        let mean = sum / n as f64;
        let rss_parent = (sum2 - sum * sum / n as f64).max(0.0);
        let leaf = TreeNode::Leaf { value: mean, n_samples: n };
        if n < 2 * self.params.min_samples_leaf
            || rss_parent <= 1e-12
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return leaf;
        }

        let d = self.data.cols.len();
        let mut candidates = rand::seq::index::sample(&mut self.rng, d, self.fps).into_vec();
        candidates.sort_unstable();

        // Best (gain, feature, threshold); strict improvement keeps the
        // lowest feature index and threshold on ties.
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for &f in &candidates {
            let col = &self.data.cols[f];
            sorted.sort_unstable_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
            let mut left_sum = 0.0;
            let mut left_sum2 = 0.0;
            for (pos, &i) in sorted.iter().enumerate().take(n - 1) {
                let v = self.data.y[i];
                left_sum += v;
                left_sum2 += v * v;
                let left_n = pos + 1;
                let right_n = n - left_n;
                if col[sorted[pos + 1]] <= col[i] {
                    continue; // no boundary between equal values
                }
                if left_n < self.params.min_samples_leaf || right_n < self.params.min_samples_leaf
                {
                    continue;
                }
                let rss_l = (left_sum2 - left_sum * left_sum / left_n as f64).max(0.0);
                let right_sum = sum - left_sum;
                let right_sum2 = sum2 - left_sum2;
                let rss_r = (right_sum2 - right_sum * right_sum / right_n as f64).max(0.0);
                let gain = rss_parent - rss_l - rss_r;
                if gain > best.map_or(0.0, |(g, _, _)| g) {
                    let threshold = col[i] + (col[sorted[pos + 1]] - col[i]) / 2.0;
                    best = Some((gain, f, threshold));
                }
            }
        }

        let Some((gain, feature, threshold)) = best else {
            return leaf;
        };
        self.importance[feature] += gain;

        let col = &self.data.cols[feature];
        idx.sort_unstable_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
        let split_at = idx.partition_point(|&i| col[i] <= threshold);
        let (left_idx, right_idx) = idx.split_at_mut(split_at);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn fit_tree_on(
    data: &ColumnData,
    rows: &[usize],
    params: TreeParams,
    seed: u64,
) -> Result<(RegressionTree, Vec<f64>)> {
    let d = data.cols.len();
    params.validate(d)?;
    let mut builder = TreeBuilder {
        data,
        params,
        fps: params.resolved_fps(d),
        rng: ChaCha8Rng::seed_from_u64(seed),
        importance: vec![0.0; d],
    };
    let mut idx = rows.to_vec();
    let root = builder.build(&mut idx, 0);
    let in_bag: std::collections::HashSet<usize> = rows.iter().copied().collect();
    let oob_rows: Vec<usize> = (0..data.y.len()).filter(|i| !in_bag.contains(i)).collect();
    Ok((RegressionTree { root, oob_rows }, builder.importance))
}

/// Grows one regression tree on the full sample (no bootstrap). Splits
/// maximize the RSS decrease over `features_per_split` random candidate
/// features; leaves store their rows' mean target.
pub fn fit_tree(sample: &FeatureMatrix, params: TreeParams, seed: u64) -> Result<RegressionTree> {
    let data = ColumnData::from_matrix(sample)?;
    let rows: Vec<usize> = (0..data.y.len()).collect();
    Ok(fit_tree_on(&data, &rows, params, seed)?.0)
}

/// Fits `n_trees` trees, each on an independent bootstrap sample, and
/// aggregates per-feature importance as the mean over trees of the summed
/// RSS decrease from splits on that feature.
pub fn fit_forest(
    dataset: &FeatureMatrix,
    n_trees: usize,
    params: TreeParams,
    seed: u64,
) -> Result<ForestModel> {
    if n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    let data = ColumnData::from_matrix(dataset)?;
    params.validate(data.cols.len())?;
    let n = data.y.len();

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..n_trees).map(|_| master.gen()).collect();

    // Trees are independent given their seeds; results are collected in
    // index order so the model is deterministic regardless of scheduling.
    let fitted: Result<Vec<(RegressionTree, Vec<f64>)>> = tree_seeds
        .par_iter()
        .map(|&tree_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            fit_tree_on(&data, &rows, params, rng.gen())
        })
        .collect();
    let fitted = fitted?;

    let d = data.cols.len();
    let mut importance = vec![0.0; d];
    let mut trees = Vec::with_capacity(n_trees);
    for (tree, tree_importance) in fitted {
        for (acc, v) in importance.iter_mut().zip(&tree_importance) {
            *acc += v;
        }
        trees.push(tree);
    }
    for v in importance.iter_mut() {
        *v /= n_trees as f64;
    }

    Ok(ForestModel {
        trees,
        importance,
        feature_names: data.names,
        n_trees,
        seed,
        params,
    })
}

/// K-fold CV error of a forest with the given size on a dataset.
fn forest_cv(
    dataset: &FeatureMatrix,
    n_trees: usize,
    params: TreeParams,
    k_folds: usize,
    seed: u64,
) -> Result<f64> {
    let n = dataset.n_rows();
    let folds = make_folds(n, k_folds, seed)?;
    let target = dataset
        .target_name()
        .ok_or_else(|| Error::MissingColumn("no target column designated".into()))?
        .to_string();
    let t_idx = dataset.col_index(&target)?;
    let mut total = 0.0;
    for (f, fold) in folds.iter().enumerate() {
        let held: std::collections::HashSet<usize> = fold.iter().copied().collect();
        let train_rows: Vec<usize> = (0..n).filter(|i| !held.contains(i)).collect();
        let train = dataset.take_rows(&train_rows)?;
        let forest = fit_forest(&train, n_trees, params, seed.wrapping_add(f as u64 + 1))?;
        let mut mse = 0.0;
        for &i in fold {
            let row = dataset.row(i);
            let features: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != t_idx)
                .map(|(_, &v)| v)
                .collect();
            let e = row[t_idx] - forest.predict(&features)?;
            mse += e * e;
        }
        total += mse / fold.len() as f64;
    }
    Ok(total / k_folds as f64)
}

/// Settings for the top-k sweep.
#[derive(Debug, Clone, Copy)]
pub struct SelectOptions {
    /// Trees per CV forest.
    pub n_trees: usize,
    pub params: TreeParams,
    /// Relative slack over the minimum CV error that still counts as
    /// "nearly the same error" when picking the smallest k.
    pub tolerance: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { n_trees: 100, params: TreeParams::default(), tolerance: 0.05 }
    }
}

/// Outcome of [`select_top_k`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopKSelection {
    pub best_k: usize,
    /// The top `best_k` features by importance.
    pub features: Vec<String>,
    /// `(k, cv_error)` for each candidate k, in grid order.
    pub curve: Vec<(usize, f64)>,
}

/// For each k in the grid, retrains a forest on the k most important
/// features and records its K-fold CV error; returns the smallest k whose
/// error is within tolerance of the global minimum.
pub fn select_top_k(
    dataset: &FeatureMatrix,
    importance: &[f64],
    k_grid: &[usize],
    cv_folds: usize,
    seed: u64,
    opts: &SelectOptions,
) -> Result<TopKSelection> {
    if k_grid.is_empty() {
        return Err(Error::InvalidConfig("k_grid must be non-empty".into()));
    }
    let feat_names = dataset.feature_names();
    let d = feat_names.len();
    if importance.len() != d {
        return Err(Error::Shape(format!(
            "importance has {} entries, dataset has {} features",
            importance.len(),
            d
        )));
    }
    for &k in k_grid {
        if k == 0 || k > d {
            return Err(Error::InvalidConfig(format!("k must be in [1, {d}], got {k}")));
        }
    }
    let target = dataset
        .target_name()
        .ok_or_else(|| Error::MissingColumn("no target column designated".into()))?
        .to_string();

    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| {
        importance[b]
            .partial_cmp(&importance[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut curve = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        // Keep the top-k set in original column order so feature indices
        // (and the RNG-to-feature mapping) are stable; with k = d this is
        // exactly the full dataset.
        let chosen: std::collections::HashSet<usize> = ranking[..k].iter().copied().collect();
        let mut keep: Vec<String> = (0..d)
            .filter(|j| chosen.contains(j))
            .map(|j| feat_names[j].clone())
            .collect();
        keep.push(target.clone());
        let sub = dataset.select_columns(&keep)?;
        let cv = forest_cv(&sub, opts.n_trees, opts.params, cv_folds, seed)?;
        curve.push((k, cv));
    }

    let min_cv = curve.iter().map(|&(_, e)| e).fold(f64::INFINITY, f64::min);
    let mut sorted_grid = curve.clone();
    sorted_grid.sort_by_key(|&(k, _)| k);
    let best_k = sorted_grid
        .iter()
        .find(|&&(_, e)| e <= min_cv * (1.0 + opts.tolerance))
        .map(|&(k, _)| k)
        .expect("at least one k attains the minimum");

    Ok(TopKSelection {
        best_k,
        features: ranking[..best_k].iter().map(|&j| feat_names[j].clone()).collect(),
        curve,
    })
}
