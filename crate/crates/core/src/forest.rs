//! Bagged classification trees producing per-observation good-time
//! probabilities, trained leave-one-orbit-out.
//!
//! Trees are exact greedy CART: at each node a fresh random subset of
//! `mtry` features is scanned, candidate thresholds are the midpoints of
//! consecutive distinct in-bag values, and the split minimizing the
//! weighted child Gini impurity wins. Ties break toward the lowest feature
//! index, then the lowest threshold, so independent implementations agree
//! bit-for-bit. Bootstrap multiplicity enters every count, so a row drawn
//! twice weighs twice.
//!
//! Training keeps one globally presorted index array per feature and
//! partitions all 28 arrays in lockstep at each split, which avoids
//! re-sorting at every node while producing exactly the same tree as the
//! naive sort-per-node formulation.
//!
//! Each tree owns an rng stream derived from `(seed, tree index)`, so
//! fitting in parallel or serially yields identical forests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{CellKey, FeatureMatrix, FEATURE_NAMES, N_FEATURES};
use crate::model::{Label, OrbitArcId};
use crate::rng::Stream;

/// Stream tag for training-set sampling.
const TAG_SAMPLE: u64 = 0x53414d50; // "SAMP"
/// Stream tag for per-tree streams.
const TAG_TREE: u64 = 0x54524545; // "TREE"

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub sample_size: usize,
    pub seed: u64,
    pub threshold: f64,
    /// When set, a tree votes 0/1 by its leaf majority instead of
    /// contributing the leaf's good fraction.
    pub hard_vote: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 500,
            mtry: 5, // floor(sqrt(28))
            min_leaf: 5,
            max_depth: None,
            sample_size: 250_000,
            seed: 0,
            threshold: 0.40,
            hard_vote: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be >= 1"));
        }
        if self.mtry == 0 || self.mtry > N_FEATURES {
            return Err(Error::config(format!("mtry must be in 1..={N_FEATURES}")));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("min_leaf must be >= 1"));
        }
        if self.sample_size == 0 {
            return Err(Error::config("sample_size must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config("threshold must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Gini impurity 2p(1-p) of a binary node, in [0, 0.5].
pub fn gini_impurity(n_good: u64, n_bad: u64) -> Result<f64> {
    let total = n_good + n_bad;
    if total == 0 {
        return Err(Error::contract("gini impurity of an empty node"));
    }
    let p = n_good as f64 / total as f64;
    Ok(2.0 * p * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u16,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        good_fraction: f64,
        n_samples: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Leaf good-fraction reached by a feature row. Rows go left when the
    /// split feature's value is strictly below the threshold.
    pub fn predict(&self, row: &[f64; N_FEATURES]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { good_fraction, .. } => return *good_fraction,
            }
        }
    }
}

/// Rows sampled for training: features plus binary labels (true = good).
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub features: FeatureMatrix,
    pub labels: Vec<bool>,
}

impl TrainingSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// FNV-1a 64 fingerprint of the feature layout; persisted with the forest
/// so a loaded model refuses rows with a different schema.
pub fn schema_fingerprint() -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in FEATURE_NAMES.join(",").bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub config: TrainConfig,
    pub fingerprint: String,
}

impl Forest {
    pub fn check_schema(&self) -> Result<()> {
        let current = schema_fingerprint();
        if self.fingerprint != current {
            return Err(Error::contract(format!(
                "forest schema fingerprint {} does not match feature layout {current}",
                self.fingerprint
            )));
        }
        Ok(())
    }

    /// Probability that a row is a good time: mean over trees of the
    /// reached leaf's good fraction (or of 0/1 majority votes in
    /// hard-vote mode). Always in [0, 1].
    pub fn predict_proba(&self, row: &[f64; N_FEATURES]) -> f64 {
        let mut sum = 0.0;
        for tree in &self.trees {
            let f = tree.predict(row);
            sum += if self.config.hard_vote {
                if f >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            } else {
                f
            };
        }
        sum / self.trees.len() as f64
    }

    /// Predict every row of a feature matrix (parallel when enabled).
    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema()?;
        let n = matrix.len();
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            Ok((0..n)
                .into_par_iter()
                .map(|i| self.predict_proba(&matrix.row(i)))
                .collect())
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok((0..n).map(|i| self.predict_proba(&matrix.row(i))).collect())
        }
    }

    /// Sequential twin of [`Forest::predict_matrix`] for the bench suite.
    #[doc(hidden)]
    pub fn predict_matrix_seq(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema()?;
        Ok((0..matrix.len())
            .map(|i| self.predict_proba(&matrix.row(i)))
            .collect())
    }
}

/// Uniform sample without replacement of up to `sample_size` labeled rows,
/// excluding every arc of the held-out orbit.
///
/// Rows are first put in canonical key order (arc, esa, angle, time), so
/// the draw — and therefore the fitted forest — does not depend on the
/// pool's row order. Deterministic given `config.seed` and the held-out
/// orbit.
pub fn sample_training_set(
    pool: &FeatureMatrix,
    held_out: OrbitArcId,
    config: &TrainConfig,
) -> Result<TrainingSample> {
    config.validate()?;
    let mut eligible: Vec<usize> = (0..pool.len())
        .filter(|&i| pool.sme_labels[i].is_some() && pool.keys[i].arc.orbit != held_out.orbit)
        .collect();
    eligible.sort_by_key(|&i| pool.keys[i]);
    if eligible.is_empty() {
        return Err(Error::TrainingData(format!(
            "no labeled rows outside orbit {}",
            held_out.orbit
        )));
    }
    let k = config.sample_size.min(eligible.len());
    let mut stream = Stream::derive(config.seed, &[TAG_SAMPLE, held_out.orbit as u64]);
    let mut picks = stream.sample_distinct(eligible.len(), k);
    picks.sort_unstable();
    let rows: Vec<usize> = picks.into_iter().map(|p| eligible[p]).collect();
    debug_assert!(rows
        .iter()
        .all(|&r| pool.keys[r].arc.orbit != held_out.orbit));
    let features = pool.subset(&rows);
    let labels = features
        .sme_labels
        .iter()
        .map(|l| matches!(l, Some(Label::Good)))
        .collect();
    Ok(TrainingSample { features, labels })
}

/// Per-feature row indices sorted by (value, index).
fn presort_columns(features: &FeatureMatrix) -> Vec<Vec<u32>> {
    let n = features.len();
    let sort_one = |f: usize| {
        let col = features.column(f);
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_unstable_by(|&a, &b| {
            col[a as usize]
                .total_cmp(&col[b as usize])
                .then(a.cmp(&b))
        });
        idx
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..N_FEATURES).into_par_iter().map(sort_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..N_FEATURES).map(sort_one).collect()
    }
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
    left_good: u64,
    left_bad: u64,
    left_unique: usize,
}

struct NodeTask {
    lo: usize,
    hi: usize,
    good: u64,
    bad: u64,
    depth: usize,
    slot: usize,
}

/// Candidate feature subset for one node, ascending. Consumes exactly
/// `mtry` stream draws, or none at all when every feature is in play.
fn choose_features(stream: &mut Stream, mtry: usize) -> Vec<usize> {
    if mtry >= N_FEATURES {
        (0..N_FEATURES).collect()
    } else {
        let mut picks = stream.sample_distinct(N_FEATURES, mtry);
        picks.sort_unstable();
        picks
    }
}

/// Fit a single tree on `sample` with per-row bootstrap multiplicities
/// (`None` = every row once, i.e. bootstrap equal to the sample).
///
/// `stream` supplies the per-node feature subsets.
pub fn fit_tree(
    sample: &TrainingSample,
    weights: Option<&[u32]>,
    config: &TrainConfig,
    stream: &mut Stream,
) -> Result<Tree> {
    config.validate()?;
    if sample.is_empty() {
        return Err(Error::contract("cannot fit a tree on an empty sample"));
    }
    if let Some(w) = weights {
        if w.len() != sample.len() {
            return Err(Error::contract("weights length must match sample length"));
        }
        if w.iter().all(|&x| x == 0) {
            return Err(Error::contract("bootstrap weights are all zero"));
        }
    }
    let presort = presort_columns(&sample.features);
    Ok(fit_tree_presorted(sample, &presort, weights, config, stream))
}

fn fit_tree_presorted(
    sample: &TrainingSample,
    presort: &[Vec<u32>],
    weights: Option<&[u32]>,
    config: &TrainConfig,
    stream: &mut Stream,
) -> Tree {
    let n = sample.len();
    let ones;
    let w: &[u32] = match weights {
        Some(w) => w,
        None => {
            ones = vec![1u32; n];
            &ones
        }
    };
    let labels = &sample.labels;
    let min_leaf = config.min_leaf as u64;

    // In-bag index arrays, one per feature, each in that feature's value
    // order. Lockstep partitioning keeps every node a contiguous range in
    // all of them simultaneously.
    let mut arrs: Vec<Vec<u32>> = presort
        .iter()
        .map(|ord| ord.iter().copied().filter(|&i| w[i as usize] > 0).collect())
        .collect();
    let m = arrs[0].len();

    let (mut root_good, mut root_bad) = (0u64, 0u64);
    for &i in &arrs[0] {
        let wi = w[i as usize] as u64;
        if labels[i as usize] {
            root_good += wi;
        } else {
            root_bad += wi;
        }
    }

    let mut nodes: Vec<Node> = vec![Node::Leaf {
        good_fraction: 0.0,
        n_samples: 0,
    }];
    let mut stack = vec![NodeTask {
        lo: 0,
        hi: m,
        good: root_good,
        bad: root_bad,
        depth: 0,
        slot: 0,
    }];
    let mut scratch_left: Vec<u32> = Vec::with_capacity(m);
    let mut scratch_right: Vec<u32> = Vec::with_capacity(m);
    let mut goes_left = vec![false; n];

    while let Some(task) = stack.pop() {
        let total = task.good + task.bad;
        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes[task.slot] = Node::Leaf {
                good_fraction: task.good as f64 / total as f64,
                n_samples: total as u32,
            };
        };
        let depth_limited = config.max_depth.is_some_and(|d| task.depth >= d);
        if task.good == 0 || task.bad == 0 || total < 2 * min_leaf || depth_limited {
            make_leaf(&mut nodes);
            continue;
        }

        let mut best: Option<BestSplit> = None;
        for f in choose_features(stream, config.mtry) {
            let col = sample.features.column(f);
            let arr = &arrs[f][task.lo..task.hi];
            let (mut left_good, mut left_bad) = (0u64, 0u64);
            let mut prev_val = col[arr[0] as usize];
            for (k, &iu) in arr.iter().enumerate() {
                let i = iu as usize;
                let v = col[i];
                if v != prev_val {
                    let lt = left_good + left_bad;
                    let rt = total - lt;
                    if lt >= min_leaf && rt >= min_leaf {
                        let right_good = task.good - left_good;
                        let right_bad = task.bad - left_bad;
                        // Weighted child Gini up to a factor of 2/total:
                        // comparing this quantity is comparing the impurity
                        // decrease. Integer products are exact in f64 up to
                        // 2^53, so every implementation agrees on ties.
                        let score = (left_good * left_bad) as f64 / lt as f64
                            + (right_good * right_bad) as f64 / rt as f64;
                        if best.as_ref().is_none_or(|b| score < b.score) {
                            let mut threshold = 0.5 * (prev_val + v);
                            if threshold <= prev_val {
                                // Midpoint rounded down to prev_val: bump to v
                                // so `x < threshold` still sends prev_val left.
                                threshold = v;
                            }
                            best = Some(BestSplit {
                                score,
                                feature: f,
                                threshold,
                                left_good,
                                left_bad,
                                left_unique: k,
                            });
                        }
                    }
                    prev_val = v;
                }
                let wi = w[i] as u64;
                if labels[i] {
                    left_good += wi;
                } else {
                    left_bad += wi;
                }
            }
        }

        let Some(best) = best else {
            make_leaf(&mut nodes);
            continue;
        };

        let mid = task.lo + best.left_unique;
        for &i in &arrs[best.feature][task.lo..mid] {
            goes_left[i as usize] = true;
        }
        for arr in arrs.iter_mut() {
            let seg = &mut arr[task.lo..task.hi];
            scratch_left.clear();
            scratch_right.clear();
            for &i in seg.iter() {
                if goes_left[i as usize] {
                    scratch_left.push(i);
                } else {
                    scratch_right.push(i);
                }
            }
            seg[..scratch_left.len()].copy_from_slice(&scratch_left);
            seg[scratch_left.len()..].copy_from_slice(&scratch_right);
        }
        for &i in &arrs[best.feature][task.lo..mid] {
            goes_left[i as usize] = false;
        }

        let left_slot = nodes.len();
        nodes.push(Node::Leaf {
            good_fraction: 0.0,
            n_samples: 0,
        });
        let right_slot = nodes.len();
        nodes.push(Node::Leaf {
            good_fraction: 0.0,
            n_samples: 0,
        });
        nodes[task.slot] = Node::Split {
            feature: best.feature as u16,
            threshold: best.threshold,
            left: left_slot as u32,
            right: right_slot as u32,
        };
        stack.push(NodeTask {
            lo: mid,
            hi: task.hi,
            good: task.good - best.left_good,
            bad: task.bad - best.left_bad,
            depth: task.depth + 1,
            slot: right_slot,
        });
        stack.push(NodeTask {
            lo: task.lo,
            hi: mid,
            good: best.left_good,
            bad: best.left_bad,
            depth: task.depth + 1,
            slot: left_slot,
        });
    }

    Tree { nodes }
}

fn fit_one(
    sample: &TrainingSample,
    presort: &[Vec<u32>],
    config: &TrainConfig,
    tree_index: usize,
) -> Tree {
    let n = sample.len();
    let mut stream = Stream::derive(config.seed, &[TAG_TREE, tree_index as u64]);
    // Bootstrap with replacement, size = sample size, counted as multiplicities.
    let mut mult = vec![0u32; n];
    for _ in 0..n {
        mult[stream.next_below(n as u64) as usize] += 1;
    }
    fit_tree_presorted(sample, presort, Some(&mult), config, &mut stream)
}

/// Fit the full ensemble. Deterministic given `config.seed`; parallel and
/// serial runs produce bit-identical forests.
pub fn fit_forest(sample: &TrainingSample, config: &TrainConfig) -> Result<Forest> {
    config.validate()?;
    if sample.is_empty() {
        return Err(Error::contract("cannot fit a forest on an empty sample"));
    }
    let presort = presort_columns(&sample.features);
    #[cfg(feature = "parallel")]
    let trees: Vec<Tree> = {
        use rayon::prelude::*;
        (0..config.n_trees)
            .into_par_iter()
            .map(|t| fit_one(sample, &presort, config, t))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trees: Vec<Tree> = (0..config.n_trees)
        .map(|t| fit_one(sample, &presort, config, t))
        .collect();
    Ok(Forest {
        trees,
        config: config.clone(),
        fingerprint: schema_fingerprint(),
    })
}

/// Sequential twin of [`fit_forest`] for the bench suite.
#[doc(hidden)]
pub fn fit_forest_seq(sample: &TrainingSample, config: &TrainConfig) -> Result<Forest> {
    config.validate()?;
    if sample.is_empty() {
        return Err(Error::contract("cannot fit a forest on an empty sample"));
    }
    let presort = presort_columns(&sample.features);
    let trees = (0..config.n_trees)
        .map(|t| fit_one(sample, &presort, config, t))
        .collect();
    Ok(Forest {
        trees,
        config: config.clone(),
        fingerprint: schema_fingerprint(),
    })
}

// ---------------------------------------------------------------------------
// Persistence: versioned JSON with flattened node arrays, portable across
// implementations (feature index -1 marks a leaf).
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FlatTree {
    feature: Vec<i32>,
    threshold: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    good_fraction: Vec<f64>,
    n_samples: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct ForestFile {
    version: u32,
    fingerprint: String,
    feature_names: Vec<String>,
    config: TrainConfig,
    trees: Vec<FlatTree>,
}

const FOREST_FORMAT_VERSION: u32 = 1;

pub fn save_forest(path: &Path, forest: &Forest) -> Result<()> {
    let trees = forest
        .trees
        .iter()
        .map(|tree| {
            let mut flat = FlatTree {
                feature: Vec::with_capacity(tree.nodes.len()),
                threshold: Vec::with_capacity(tree.nodes.len()),
                left: Vec::with_capacity(tree.nodes.len()),
                right: Vec::with_capacity(tree.nodes.len()),
                good_fraction: Vec::with_capacity(tree.nodes.len()),
                n_samples: Vec::with_capacity(tree.nodes.len()),
            };
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        flat.feature.push(*feature as i32);
                        flat.threshold.push(*threshold);
                        flat.left.push(*left);
                        flat.right.push(*right);
                        flat.good_fraction.push(0.0);
                        flat.n_samples.push(0);
                    }
                    Node::Leaf {
                        good_fraction,
                        n_samples,
                    } => {
                        flat.feature.push(-1);
                        flat.threshold.push(0.0);
                        flat.left.push(0);
                        flat.right.push(0);
                        flat.good_fraction.push(*good_fraction);
                        flat.n_samples.push(*n_samples);
                    }
                }
            }
            flat
        })
        .collect();
    let file = ForestFile {
        version: FOREST_FORMAT_VERSION,
        fingerprint: forest.fingerprint.clone(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        config: forest.config.clone(),
        trees,
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &file)
        .map_err(|e| Error::contract(format!("forest serialization failed: {e}")))?;
    use std::io::Write;
    w.flush()?;
    Ok(())
}

pub fn load_forest(path: &Path) -> Result<Forest> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let file: ForestFile = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("malformed forest file: {e}"),
    })?;
    if file.version != FOREST_FORMAT_VERSION {
        return Err(Error::contract(format!(
            "unsupported forest format version {}",
            file.version
        )));
    }
    let trees = file
        .trees
        .into_iter()
        .map(|flat| {
            let n = flat.feature.len();
            let mut nodes = Vec::with_capacity(n);
            for i in 0..n {
                if flat.feature[i] < 0 {
                    nodes.push(Node::Leaf {
                        good_fraction: flat.good_fraction[i],
                        n_samples: flat.n_samples[i],
                    });
                } else {
                    let (left, right) = (flat.left[i], flat.right[i]);
                    if left as usize >= n || right as usize >= n {
                        return Err(Error::contract(format!(
                            "tree node {i} links outside the node array"
                        )));
                    }
                    nodes.push(Node::Split {
                        feature: flat.feature[i] as u16,
                        threshold: flat.threshold[i],
                        left,
                        right,
                    });
                }
            }
            Ok(Tree { nodes })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        config: file.config,
        fingerprint: file.fingerprint,
    })
}

/// Reusable helper: keys of a matrix paired with labels as booleans,
/// dropping unlabeled rows.
pub fn labeled_rows(matrix: &FeatureMatrix) -> Vec<(CellKey, bool)> {
    matrix
        .keys
        .iter()
        .zip(&matrix.sme_labels)
        .filter_map(|(k, l)| l.map(|l| (*k, l == Label::Good)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArcLetter, EsaStep};

    /// Tiny matrix with one meaningful feature (column `f`), everything
    /// else zero. Labels: good iff value > cut.
    fn toy_sample(values: &[f64], cut: f64, f: usize) -> TrainingSample {
        let mut m = FeatureMatrix::new();
        for (i, &v) in values.iter().enumerate() {
            let mut row = [0.0; N_FEATURES];
            row[f] = v;
            let key = CellKey {
                arc: OrbitArcId::new(1, ArcLetter::A),
                esa: EsaStep::new(6).unwrap(),
                angle: 0,
                time: i as u32,
            };
            let label = if v > cut { Label::Good } else { Label::Bad };
            m.push_row(key, row, Some(label), None);
        }
        let labels = m
            .sme_labels
            .iter()
            .map(|l| matches!(l, Some(Label::Good)))
            .collect();
        TrainingSample {
            features: m,
            labels,
        }
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            n_trees: 1,
            mtry: N_FEATURES,
            min_leaf: 1,
            sample_size: 1000,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini_impurity(10, 0).unwrap(), 0.0);
        assert_eq!(gini_impurity(5, 5).unwrap(), 0.5);
        assert_eq!(gini_impurity(3, 1).unwrap(), 0.375);
        assert!(gini_impurity(0, 0).is_err());
    }

    #[test]
    fn pure_sample_is_single_leaf() {
        let sample = toy_sample(&[20.0, 30.0, 40.0], 10.0, 4);
        let mut stream = Stream::new(0);
        let tree = fit_tree(&sample, None, &small_config(), &mut stream).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        match &tree.nodes[0] {
            Node::Leaf {
                good_fraction,
                n_samples,
            } => {
                assert_eq!(*good_fraction, 1.0);
                assert_eq!(*n_samples, 3);
            }
            other => panic!("expected leaf, got {other:?}"),
        }
    }

    #[test]
    fn one_dimensional_split_at_midpoint() {
        // Feature values 5 and 15, good iff > 10: split threshold 10.
        let sample = toy_sample(&[5.0, 15.0], 10.0, 4);
        let mut stream = Stream::new(0);
        let tree = fit_tree(&sample, None, &small_config(), &mut stream).unwrap();
        assert_eq!(tree.nodes.len(), 3);
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 4);
                assert_eq!(*threshold, 10.0);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.predict(&{
            let mut r = [0.0; N_FEATURES];
            r[4] = 5.0;
            r
        }), 0.0);
        assert_eq!(tree.predict(&{
            let mut r = [0.0; N_FEATURES];
            r[4] = 15.0;
            r
        }), 1.0);
    }

    #[test]
    fn forest_is_deterministic() {
        let values: Vec<f64> = (0..80).map(|i| (i * 37 % 101) as f64).collect();
        let sample = toy_sample(&values, 50.0, 7);
        let cfg = TrainConfig {
            n_trees: 12,
            mtry: 5,
            min_leaf: 2,
            sample_size: 80,
            seed: 99,
            ..TrainConfig::default()
        };
        let a = fit_forest(&sample, &cfg).unwrap();
        let b = fit_forest(&sample, &cfg).unwrap();
        assert_eq!(a.trees, b.trees);
        let seq = fit_forest_seq(&sample, &cfg).unwrap();
        assert_eq!(a.trees, seq.trees);
    }

    #[test]
    fn singleton_forest_equals_its_tree() {
        let values: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let sample = toy_sample(&values, 19.5, 4);
        let cfg = TrainConfig {
            n_trees: 1,
            mtry: 5,
            min_leaf: 2,
            sample_size: 40,
            seed: 3,
            ..TrainConfig::default()
        };
        let forest = fit_forest(&sample, &cfg).unwrap();
        let mut row = [0.0; N_FEATURES];
        row[4] = 33.0;
        assert_eq!(forest.predict_proba(&row), forest.trees[0].predict(&row));
    }

    #[test]
    fn probability_is_mean_of_tree_outputs() {
        let values: Vec<f64> = (0..60).map(|i| ((i * 13) % 59) as f64).collect();
        let sample = toy_sample(&values, 29.0, 10);
        let cfg = TrainConfig {
            n_trees: 9,
            mtry: 4,
            min_leaf: 3,
            sample_size: 60,
            seed: 5,
            ..TrainConfig::default()
        };
        let forest = fit_forest(&sample, &cfg).unwrap();
        let mut row = [0.0; N_FEATURES];
        row[10] = 31.0;
        let mean: f64 = forest.trees.iter().map(|t| t.predict(&row)).sum::<f64>()
            / forest.trees.len() as f64;
        assert_eq!(forest.predict_proba(&row), mean);
    }

    #[test]
    fn persistence_round_trip() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64).sin() * 10.0).collect();
        let sample = toy_sample(&values, 0.0, 16);
        let cfg = TrainConfig {
            n_trees: 5,
            mtry: 6,
            min_leaf: 2,
            sample_size: 50,
            seed: 21,
            ..TrainConfig::default()
        };
        let forest = fit_forest(&sample, &cfg).unwrap();
        let dir = std::env::temp_dir().join("enacull-forest-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("forest.json");
        save_forest(&path, &forest).unwrap();
        let loaded = load_forest(&path).unwrap();
        assert_eq!(forest.trees, loaded.trees);
        assert_eq!(forest.fingerprint, loaded.fingerprint);
        loaded.check_schema().unwrap();
        for i in 0..sample.len() {
            let row = sample.features.row(i);
            assert_eq!(forest.predict_proba(&row), loaded.predict_proba(&row));
        }
    }

    #[test]
    fn sampling_clamps_to_available() {
        let values: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let sample_all = toy_sample(&values, 15.0, 4);
        let cfg = TrainConfig {
            sample_size: 250_000,
            seed: 1,
            ..TrainConfig::default()
        };
        let held_out = OrbitArcId::new(999, ArcLetter::A);
        let drawn = sample_training_set(&sample_all.features, held_out, &cfg).unwrap();
        assert_eq!(drawn.len(), 30);
    }

    #[test]
    fn sampling_never_reads_held_out_orbit() {
        let mut m = FeatureMatrix::new();
        for orbit in 1..=4u32 {
            for i in 0..50 {
                let key = CellKey {
                    arc: OrbitArcId::new(orbit, ArcLetter::A),
                    esa: EsaStep::new(6).unwrap(),
                    angle: 0,
                    time: i,
                };
                m.push_row(key, [0.0; N_FEATURES], Some(Label::Good), None);
            }
        }
        for seed in 0..100 {
            let cfg = TrainConfig {
                sample_size: 60,
                seed,
                ..TrainConfig::default()
            };
            let sample =
                sample_training_set(&m, OrbitArcId::new(2, ArcLetter::B), &cfg).unwrap();
            assert!(sample.features.keys.iter().all(|k| k.arc.orbit != 2));
            assert_eq!(sample.len(), 60);
        }
    }

    #[test]
    fn sampling_has_no_duplicate_keys() {
        let mut m = FeatureMatrix::new();
        for orbit in 1..=3u32 {
            for i in 0..400 {
                let key = CellKey {
                    arc: OrbitArcId::new(orbit, ArcLetter::A),
                    esa: EsaStep::new(6).unwrap(),
                    angle: (i % 60) as u16,
                    time: i / 60,
                };
                let label = if i % 3 == 0 { Label::Bad } else { Label::Good };
                m.push_row(key, [0.0; N_FEATURES], Some(label), None);
            }
        }
        let cfg = TrainConfig {
            sample_size: 500,
            seed: 8,
            ..TrainConfig::default()
        };
        let sample = sample_training_set(&m, OrbitArcId::new(9, ArcLetter::A), &cfg).unwrap();
        let mut keys = sample.features.keys.clone();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), sample.len());
    }

    #[test]
    fn sampling_is_invariant_to_pool_row_order() {
        let mut m = FeatureMatrix::new();
        for orbit in 1..=3u32 {
            for i in 0..100 {
                let key = CellKey {
                    arc: OrbitArcId::new(orbit, ArcLetter::A),
                    esa: EsaStep::new(6).unwrap(),
                    angle: (i % 60) as u16,
                    time: i,
                };
                let mut row = [0.0; N_FEATURES];
                row[4] = (orbit * 100 + i) as f64;
                let label = if i % 2 == 0 { Label::Good } else { Label::Bad };
                m.push_row(key, row, Some(label), None);
            }
        }
        // Reversed pool
        let rows_rev: Vec<usize> = (0..m.len()).rev().collect();
        let m_rev = m.subset(&rows_rev);
        let cfg = TrainConfig {
            n_trees: 4,
            sample_size: 120,
            seed: 17,
            min_leaf: 2,
            ..TrainConfig::default()
        };
        let held = OrbitArcId::new(3, ArcLetter::A);
        let a = sample_training_set(&m, held, &cfg).unwrap();
        let b = sample_training_set(&m_rev, held, &cfg).unwrap();
        assert_eq!(a.features.keys, b.features.keys);
        assert_eq!(a.labels, b.labels);
        let fa = fit_forest(&a, &cfg).unwrap();
        let fb = fit_forest(&b, &cfg).unwrap();
        assert_eq!(fa.trees, fb.trees);
    }

    #[test]
    fn no_labeled_rows_is_training_error() {
        let mut m = FeatureMatrix::new();
        m.push_row(
            CellKey {
                arc: OrbitArcId::new(1, ArcLetter::A),
                esa: EsaStep::new(6).unwrap(),
                angle: 0,
                time: 0,
            },
            [0.0; N_FEATURES],
            None,
            None,
        );
        let cfg = TrainConfig::default();
        let err = sample_training_set(&m, OrbitArcId::new(2, ArcLetter::A), &cfg).unwrap_err();
        assert!(matches!(err, Error::TrainingData(_)));
    }

    #[test]
    fn separable_data_classifies_perfectly() {
        let values: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let sample = toy_sample(&values, 99.5, 12);
        let cfg = TrainConfig {
            n_trees: 25,
            mtry: 5,
            min_leaf: 1,
            sample_size: 200,
            seed: 4,
            ..TrainConfig::default()
        };
        let forest = fit_forest(&sample, &cfg).unwrap();
        for (i, &v) in values.iter().enumerate() {
            let mut row = [0.0; N_FEATURES];
            row[12] = v;
            let p = forest.predict_proba(&row);
            assert_eq!(p >= 0.5, sample.labels[i], "value {v} -> {p}");
        }
    }
}
