//! Supervised classifiers: k-nearest-neighbor, one-vs-rest linear SVM
//! trained by stochastic subgradient descent, and a random forest of
//! Gini-split CART trees. All training is deterministic in its seed
//! and all ties break toward the smallest class id.

use std::collections::BTreeMap;

use crate::datamodel::FeatureSet;
use crate::error::{Error, Result};
use crate::rng::{derive_stream, CounterRng};

/// Hyperparameter bundle for one model family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hyperparams {
    Knn { k: usize },
    Svm { cost: f64, epochs: usize },
    Forest { trees: usize, max_depth: Option<usize> },
}

#[derive(Debug, Clone)]
enum ModelKind {
    Knn {
        k: usize,
        rows: Vec<f64>,
        labels: Vec<u16>,
    },
    LinearSvm {
        mean: Vec<f64>,
        scale: Vec<f64>,
        /// One weight vector and bias per entry of `TrainedModel::classes`.
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
    Forest {
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(u16),
    Split {
        dim: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    kind: ModelKind,
    /// Distinct class ids seen in training, ascending.
    classes: Vec<u16>,
    dim: usize,
}

impl TrainedModel {
    pub fn classes(&self) -> &[u16] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Predicted class id per feature row.
    pub fn predict(&self, features: &FeatureSet) -> Result<Vec<u16>> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} feature dimensions, got {}",
                self.dim,
                features.dim()
            )));
        }
        let out = match &self.kind {
            ModelKind::Knn { k, rows, labels } => (0..features.count())
                .map(|i| knn_vote(features.row(i), rows, labels, self.dim, *k))
                .collect(),
            ModelKind::LinearSvm {
                mean,
                scale,
                weights,
                biases,
            } => (0..features.count())
                .map(|i| {
                    let row = features.row(i);
                    let mut best = 0usize;
                    let mut best_score = f64::NEG_INFINITY;
                    for (c, (w, b)) in weights.iter().zip(biases).enumerate() {
                        let mut s = *b;
                        for d in 0..self.dim {
                            s += w[d] * (row[d] - mean[d]) / scale[d];
                        }
                        if s > best_score {
                            best_score = s;
                            best = c;
                        }
                    }
                    self.classes[best]
                })
                .collect(),
            ModelKind::Forest { trees } => (0..features.count())
                .map(|i| {
                    let row = features.row(i);
                    let mut votes: BTreeMap<u16, usize> = BTreeMap::new();
                    for tree in trees {
                        *votes.entry(tree.route(row)).or_insert(0) += 1;
                    }
                    majority(&votes)
                })
                .collect(),
        };
        Ok(out)
    }
}

fn check_training_input(features: &FeatureSet, labels: &[u16]) -> Result<Vec<u16>> {
    if features.count() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows but {} labels",
            features.count(),
            labels.len()
        )));
    }
    if labels.contains(&0) {
        return Err(Error::InvalidData("training label 0 (unlabeled)".into()));
    }
    let mut classes: Vec<u16> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    Ok(classes)
}

/// Majority key; ties go to the smallest class id (BTreeMap iterates
/// ascending, and only a strictly larger count replaces the leader).
fn majority(votes: &BTreeMap<u16, usize>) -> u16 {
    let mut best = 0u16;
    let mut best_n = 0usize;
    for (&c, &n) in votes {
        if n > best_n {
            best_n = n;
            best = c;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

pub fn knn_train(features: &FeatureSet, labels: &[u16], k: usize) -> Result<TrainedModel> {
    let classes = check_training_input(features, labels)?;
    if k == 0 || k > features.count() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} outside 1..={}",
            features.count()
        )));
    }
    Ok(TrainedModel {
        dim: features.dim(),
        classes,
        kind: ModelKind::Knn {
            k,
            rows: features.vectors().to_vec(),
            labels: labels.to_vec(),
        },
    })
}

fn knn_vote(query: &[f64], rows: &[f64], labels: &[u16], dim: usize, k: usize) -> u16 {
    let n = labels.len();
    let mut dists: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let row = &rows[i * dim..(i + 1) * dim];
            let d2: f64 = row
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut votes: BTreeMap<u16, usize> = BTreeMap::new();
    for &(_, i) in dists.iter().take(k) {
        *votes.entry(labels[i]).or_insert(0) += 1;
    }
    majority(&votes)
}

pub fn knn_predict(model: &TrainedModel, features: &FeatureSet) -> Result<Vec<u16>> {
    model.predict(features)
}

// ---------------------------------------------------------------------------
// Linear SVM (one-vs-rest, stochastic subgradient on the hinge loss)
// ---------------------------------------------------------------------------

/// One-vs-rest linear SVM. Each binary problem minimizes
/// (lambda/2)|w|^2 + mean hinge loss with lambda = 1/(cost * n), by
/// stochastic subgradient descent with step 1/(lambda * t) and an
/// unregularized bias. The returned weights are the average of all
/// iterates, which damps the oscillation of the final iterate.
/// Features are standardized internally with training-set mean/std.
pub fn svm_train(
    features: &FeatureSet,
    labels: &[u16],
    cost: f64,
    epochs: usize,
    seed: u64,
) -> Result<TrainedModel> {
    let classes = check_training_input(features, labels)?;
    if classes.len() < 2 {
        return Err(Error::InvalidData(
            "svm needs at least 2 classes in training data".into(),
        ));
    }
    if cost <= 0.0 || !cost.is_finite() {
        return Err(Error::InvalidConfig(format!("cost {cost} must be > 0")));
    }
    if epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be >= 1".into()));
    }
    let n = features.count();
    let dim = features.dim();
    let (mean, scale) = standardization(features);
    // pre-standardized copy of the training matrix
    let mut x = features.vectors().to_vec();
    for row in x.chunks_mut(dim) {
        for d in 0..dim {
            row[d] = (row[d] - mean[d]) / scale[d];
        }
    }
    let lambda = 1.0 / (cost * n as f64);
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for (ci, &class) in classes.iter().enumerate() {
        let mut rng = CounterRng::new(derive_stream(seed, ci as u64));
        let mut w = vec![0.0f64; dim];
        let mut b = 0.0f64;
        let mut w_sum = vec![0.0f64; dim];
        let mut b_sum = 0.0f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        for _ in 0..epochs {
            rng.shuffle(&mut order);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                let row = &x[i * dim..(i + 1) * dim];
                let margin = y * (dot(&w, row) + b);
                let shrink = 1.0 - eta * lambda;
                if margin < 1.0 {
                    for d in 0..dim {
                        w[d] = shrink * w[d] + eta * y * row[d];
                    }
                    b += eta * y;
                } else {
                    for wd in &mut w {
                        *wd *= shrink;
                    }
                }
                for d in 0..dim {
                    w_sum[d] += w[d];
                }
                b_sum += b;
            }
        }
        let steps = t as f64;
        weights.push(w_sum.iter().map(|v| v / steps).collect());
        biases.push(b_sum / steps);
    }
    Ok(TrainedModel {
        dim,
        classes,
        kind: ModelKind::LinearSvm {
            mean,
            scale,
            weights,
            biases,
        },
    })
}

pub fn svm_predict(model: &TrainedModel, features: &FeatureSet) -> Result<Vec<u16>> {
    model.predict(features)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-dimension mean and standard deviation over the training rows;
/// zero-variance dimensions get scale 1 so they standardize to 0.
fn standardization(features: &FeatureSet) -> (Vec<f64>, Vec<f64>) {
    let (n, dim) = (features.count(), features.dim());
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; dim];
    for i in 0..n {
        for (s, (v, m)) in var.iter_mut().zip(features.row(i).iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .iter()
        .map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

/// Bagged CART trees: each tree trains on a bootstrap resample of the
/// rows, considers ceil(sqrt(D)) candidate dimensions per node, and
/// splits by minimum weighted Gini impurity. Per-tree RNG streams are
/// derived from (seed, tree index).
pub fn rf_train(
    features: &FeatureSet,
    labels: &[u16],
    trees: usize,
    max_depth: Option<usize>,
    seed: u64,
) -> Result<TrainedModel> {
    let classes = check_training_input(features, labels)?;
    if trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least 1 tree".into()));
    }
    let n = features.count();
    let mtry = (features.dim() as f64).sqrt().ceil() as usize;
    let built = (0..trees)
        .map(|t| {
            let mut rng = CounterRng::new(derive_stream(seed, t as u64));
            let sample: Vec<usize> = (0..n).map(|_| rng.next_below(n)).collect();
            let mut tree = Tree { nodes: Vec::new() };
            grow_node(
                &mut tree, features, labels, sample, mtry, max_depth, 0, &mut rng,
            );
            tree
        })
        .collect();
    Ok(TrainedModel {
        dim: features.dim(),
        classes,
        kind: ModelKind::Forest { trees: built },
    })
}

pub fn rf_predict(model: &TrainedModel, features: &FeatureSet) -> Result<Vec<u16>> {
    model.predict(features)
}

impl Tree {
    fn route(&self, row: &[f64]) -> u16 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf(c) => return *c,
                Node::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => at = if row[*dim] <= *threshold { *left } else { *right },
            }
        }
    }
}

fn gini(counts: &BTreeMap<u16, usize>, total: usize) -> f64 {
    let mut g = 1.0;
    for &n in counts.values() {
        let p = n as f64 / total as f64;
        g -= p * p;
    }
    g
}

/// Appends the subtree for `rows` and returns its root node index.
#[allow(clippy::too_many_arguments)]
fn grow_node(
    tree: &mut Tree,
    features: &FeatureSet,
    labels: &[u16],
    rows: Vec<usize>,
    mtry: usize,
    max_depth: Option<usize>,
    depth: usize,
    rng: &mut CounterRng,
) -> usize {
    let mut counts: BTreeMap<u16, usize> = BTreeMap::new();
    for &i in &rows {
        *counts.entry(labels[i]).or_insert(0) += 1;
    }
    let leaf = |tree: &mut Tree| {
        tree.nodes.push(Node::Leaf(majority(&counts)));
        tree.nodes.len() - 1
    };
    if counts.len() == 1 || max_depth.is_some_and(|d| depth >= d) {
        return leaf(tree);
    }
    let parent_gini = gini(&counts, rows.len());
    let candidates = rng.sample_indices(features.dim(), mtry.min(features.dim()));
    let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, dim, threshold)
    for &dim in &candidates {
        let mut vals: Vec<f64> = rows.iter().map(|&i| features.row(i)[dim]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for pair in vals.windows(2) {
            let thr = (pair[0] + pair[1]) / 2.0;
            let mut lc: BTreeMap<u16, usize> = BTreeMap::new();
            let mut rc: BTreeMap<u16, usize> = BTreeMap::new();
            for &i in &rows {
                if features.row(i)[dim] <= thr {
                    *lc.entry(labels[i]).or_insert(0) += 1;
                } else {
                    *rc.entry(labels[i]).or_insert(0) += 1;
                }
            }
            let (ln, rn) = (lc.values().sum::<usize>(), rc.values().sum::<usize>());
            let score =
                (ln as f64 * gini(&lc, ln) + rn as f64 * gini(&rc, rn)) / rows.len() as f64;
            if best.is_none_or(|(b, _, _)| score < b) {
                best = Some((score, dim, thr));
            }
        }
    }
    match best {
        // all candidate dimensions constant on these rows, or no split
        // improves impurity: majority leaf
        Some((score, dim, thr)) if score < parent_gini - 1e-12 => {
            let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
            for &i in &rows {
                if features.row(i)[dim] <= thr {
                    lrows.push(i);
                } else {
                    rrows.push(i);
                }
            }
            let at = tree.nodes.len();
            tree.nodes.push(Node::Leaf(0)); // placeholder
            let left = grow_node(tree, features, labels, lrows, mtry, max_depth, depth + 1, rng);
            let right = grow_node(tree, features, labels, rrows, mtry, max_depth, depth + 1, rng);
            tree.nodes[at] = Node::Split {
                dim,
                threshold: thr,
                left,
                right,
            };
            at
        }
        _ => leaf(tree),
    }
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CvGrid {
    pub folds: usize,
    pub candidates: Vec<Hyperparams>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub best: Hyperparams,
    pub best_index: usize,
    /// `fold_scores[candidate][fold]` = overall accuracy on that fold.
    pub fold_scores: Vec<Vec<f64>>,
}

/// Trains one model with the given hyperparameters.
pub fn train_with(
    features: &FeatureSet,
    labels: &[u16],
    params: Hyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    match params {
        Hyperparams::Knn { k } => knn_train(features, labels, k),
        Hyperparams::Svm { cost, epochs } => svm_train(features, labels, cost, epochs, seed),
        Hyperparams::Forest { trees, max_depth } => {
            rf_train(features, labels, trees, max_depth, seed)
        }
    }
}

/// Stratified k-fold cross-validation; returns the candidate with the
/// best mean fold accuracy, ties broken by grid order.
pub fn cross_validate(
    features: &FeatureSet,
    labels: &[u16],
    grid: &CvGrid,
    seed: u64,
) -> Result<CvResult> {
    let classes = check_training_input(features, labels)?;
    if grid.folds < 2 {
        return Err(Error::InvalidConfig("folds must be >= 2".into()));
    }
    if grid.candidates.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    // stratified fold assignment: shuffle each class's rows with its
    // own stream, then deal them round-robin
    let mut fold_of = vec![0usize; labels.len()];
    for (ci, &class) in classes.iter().enumerate() {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < grid.folds {
            return Err(Error::InvalidData(format!(
                "class {class} has {} rows, fewer than {} folds",
                rows.len(),
                grid.folds
            )));
        }
        let mut rng = CounterRng::new(derive_stream(seed, ci as u64));
        rng.shuffle(&mut rows);
        for (j, &i) in rows.iter().enumerate() {
            fold_of[i] = j % grid.folds;
        }
    }
    let mut fold_scores = Vec::with_capacity(grid.candidates.len());
    for &params in &grid.candidates {
        let mut scores = Vec::with_capacity(grid.folds);
        for fold in 0..grid.folds {
            let train_rows: Vec<usize> =
                (0..labels.len()).filter(|&i| fold_of[i] != fold).collect();
            let test_rows: Vec<usize> =
                (0..labels.len()).filter(|&i| fold_of[i] == fold).collect();
            let sub = |rows: &[usize]| -> Result<(FeatureSet, Vec<u16>)> {
                let mut v = Vec::with_capacity(rows.len() * features.dim());
                let mut l = Vec::with_capacity(rows.len());
                let mut coords = Vec::with_capacity(rows.len());
                for &i in rows {
                    v.extend_from_slice(features.row(i));
                    l.push(labels[i]);
                    coords.push(features.coords()[i]);
                }
                Ok((FeatureSet::new(features.dim(), v, coords)?, l))
            };
            let (ftr, ltr) = sub(&train_rows)?;
            let (fte, lte) = sub(&test_rows)?;
            let model = train_with(&ftr, &ltr, params, derive_stream(seed, 1000 + fold as u64))?;
            let pred = model.predict(&fte)?;
            let hits = pred.iter().zip(&lte).filter(|(p, t)| p == t).count();
            scores.push(hits as f64 / lte.len() as f64);
        }
        fold_scores.push(scores);
    }
    let mut best_index = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    for (i, scores) in fold_scores.iter().enumerate() {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        if mean > best_mean {
            best_mean = mean;
            best_index = i;
        }
    }
    Ok(CvResult {
        best: grid.candidates[best_index],
        best_index,
        fold_scores,
    })
}
