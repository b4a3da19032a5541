//! Binary regression trees with exhaustive split search.
//!
//! A single tree grower serves both ensemble styles: variance reduction
//! scores splits for bagging, and the regularized Newton gain (second-order,
//! with L1/L2 penalties on leaf weights) scores them for boosting.
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! feature values; routing sends `x[feature] <= threshold` to the left
//! child; ties in gain resolve to the lowest feature index, then the lowest
//! threshold, so fitted trees are deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How many features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    All,
    /// Ceil of the square root of the feature count, sampled without
    /// replacement per node.
    Sqrt,
    /// Ceil of this fraction of the feature count, sampled per node.
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Minimum split gain in variance mode (Newton mode uses
    /// `gamma_complexity` instead).
    pub min_gain: f64,
    pub feature_subsample: FeatureSubsample,
    pub lambda_l2: f64,
    pub alpha_l1: f64,
    pub gamma_complexity: f64,
}

impl Default for TreeParams {
    fn default() -> TreeParams {
        TreeParams {
            max_depth: 6,
            min_samples_leaf: 1,
            min_gain: 0.0,
            feature_subsample: FeatureSubsample::All,
            lambda_l2: 0.0,
            alpha_l1: 0.0,
            gamma_complexity: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidInput("max_depth must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidInput("min_samples_leaf must be positive".into()));
        }
        for (name, v) in [
            ("min_gain", self.min_gain),
            ("lambda_l2", self.lambda_l2),
            ("alpha_l1", self.alpha_l1),
            ("gamma_complexity", self.gamma_complexity),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be finite and >= 0")));
            }
        }
        if let FeatureSubsample::Fraction(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidInput("feature fraction must be in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// What the split search optimizes.
#[derive(Debug, Clone, Copy)]
pub enum SplitObjective<'a> {
    /// Decrease in sum of squared errors; leaves predict the target mean.
    VarianceReduction { targets: &'a [f64] },
    /// Regularized second-order gain; leaves hold the soft-thresholded
    /// Newton weight `-sign(G) * max(|G| - alpha, 0) / (H + lambda)`.
    NewtonGain { gradients: &'a [f64], hessians: &'a [f64] },
}

impl SplitObjective<'_> {
    pub fn len(&self) -> usize {
        match self {
            SplitObjective::VarianceReduction { targets } => targets.len(),
            SplitObjective::NewtonGain { gradients, .. } => gradients.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature_index: usize,
        threshold: f64,
        /// Realized split gain (after the complexity penalty in Newton mode).
        split_gain: f64,
        /// Rows in variance mode, hessian mass in Newton mode.
        cover: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    root: Node,
    n_features: usize,
    params: TreeParams,
}

impl RegressionTree {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    /// Visits every split node as `(feature_index, split_gain, cover)`.
    pub fn for_each_split<F: FnMut(usize, f64, f64)>(&self, mut f: F) {
        fn walk<F: FnMut(usize, f64, f64)>(node: &Node, f: &mut F) {
            if let Node::Split { feature_index, split_gain, cover, left, right, .. } = node {
                f(*feature_index, *split_gain, *cover);
                walk(left, f);
                walk(right, f);
            }
        }
        walk(&self.root, &mut f);
    }

    pub fn n_splits(&self) -> usize {
        let mut n = 0;
        self.for_each_split(|_, _, _| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        fn depth_of(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + depth_of(left).max(depth_of(right)),
            }
        }
        depth_of(&self.root)
    }
}

/// Soft-thresholded Newton leaf weight.
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, lambda_l2: f64, alpha_l1: f64) -> f64 {
    let shrunk = (grad_sum.abs() - alpha_l1).max(0.0);
    if shrunk == 0.0 {
        return 0.0;
    }
    -grad_sum.signum() * shrunk / (hess_sum + lambda_l2)
}

fn structure_score(grad_sum: f64, hess_sum: f64, lambda_l2: f64) -> f64 {
    grad_sum * grad_sum / (hess_sum + lambda_l2)
}

/// Regularized structure-score gain of a candidate split, minus the
/// complexity penalty.
pub fn newton_gain(
    grad_left: f64,
    hess_left: f64,
    grad_right: f64,
    hess_right: f64,
    lambda_l2: f64,
    gamma_complexity: f64,
) -> f64 {
    0.5 * (structure_score(grad_left, hess_left, lambda_l2)
        + structure_score(grad_right, hess_right, lambda_l2)
        - structure_score(grad_left + grad_right, hess_left + hess_right, lambda_l2))
        - gamma_complexity
}

/// Per-row statistics the grower accumulates, generic over the two modes.
#[derive(Clone, Copy, Default)]
struct Stats {
    /// Target sum (variance) or gradient sum (Newton).
    a: f64,
    /// Squared-target sum (variance) or hessian sum (Newton).
    b: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, a: f64, b: f64) {
        self.a += a;
        self.b += b;
        self.count += 1;
    }
}

enum Mode<'a> {
    Variance { targets: &'a [f64] },
    Newton { gradients: &'a [f64], hessians: &'a [f64], lambda: f64, alpha: f64 },
}

impl Mode<'_> {
    fn row_values(&self, i: usize) -> (f64, f64) {
        match self {
            Mode::Variance { targets } => (targets[i], targets[i] * targets[i]),
            Mode::Newton { gradients, hessians, .. } => (gradients[i], hessians[i]),
        }
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        match self {
            Mode::Variance { .. } => s.a / s.count as f64,
            Mode::Newton { lambda, alpha, .. } => leaf_weight(s.a, s.b, *lambda, *alpha),
        }
    }

    fn cover(&self, s: &Stats) -> f64 {
        match self {
            Mode::Variance { .. } => s.count as f64,
            Mode::Newton { .. } => s.b,
        }
    }

    /// Raw quality of a (left, right) partition relative to the unsplit node.
    fn gain(&self, left: &Stats, right: &Stats) -> f64 {
        match self {
            Mode::Variance { .. } => {
                // SSE decrease, via SSE = sum(y^2) - (sum y)^2 / n per side.
                let sse = |s: &Stats| s.b - s.a * s.a / s.count as f64;
                let parent = Stats {
                    a: left.a + right.a,
                    b: left.b + right.b,
                    count: left.count + right.count,
                };
                sse(&parent) - sse(left) - sse(right)
            }
            Mode::Newton { lambda, .. } => {
                0.5 * (structure_score(left.a, left.b, *lambda)
                    + structure_score(right.a, right.b, *lambda)
                    - structure_score(left.a + right.a, left.b + right.b, *lambda))
            }
        }
    }

    /// Raw gain a split must strictly exceed.
    fn gain_floor(&self, params: &TreeParams) -> f64 {
        match self {
            Mode::Variance { .. } => params.min_gain,
            Mode::Newton { .. } => params.gamma_complexity,
        }
    }

    /// Gain recorded on the node: Newton mode nets out the penalty.
    fn recorded_gain(&self, raw: f64, params: &TreeParams) -> f64 {
        match self {
            Mode::Variance { .. } => raw,
            Mode::Newton { .. } => raw - params.gamma_complexity,
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    raw_gain: f64,
}

struct Grower<'a> {
    x: &'a Matrix,
    mode: Mode<'a>,
    params: &'a TreeParams,
    rng: ChaCha8Rng,
}

impl Grower<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.n_cols();
        let count = match self.params.feature_subsample {
            FeatureSubsample::All => return (0..d).collect(),
            FeatureSubsample::Sqrt => (d as f64).sqrt().ceil() as usize,
            FeatureSubsample::Fraction(f) => (f * d as f64).ceil() as usize,
        };
        let count = count.clamp(1, d);
        // Partial Fisher-Yates draw without replacement.
        let mut pool: Vec<usize> = (0..d).collect();
        for i in 0..count {
            let j = self.rng.gen_range(i..d);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool.sort_unstable();
        pool
    }

    fn node_stats(&self, rows: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &i in rows {
            let (a, b) = self.mode.row_values(i);
            s.add(a, b);
        }
        s
    }

    fn best_split(&self, rows: &[usize], candidates: &[usize], total: &Stats) -> Option<BestSplit> {
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for &feature in candidates {
            pairs.clear();
            for &i in rows {
                let (a, b) = self.mode.row_values(i);
                pairs.push((self.x.get(i, feature), a, b));
            }
            pairs.sort_unstable_by(|p, q| p.0.partial_cmp(&q.0).expect("finite values"));

            let mut left = Stats::default();
            for w in 0..pairs.len() - 1 {
                left.add(pairs[w].1, pairs[w].2);
                if pairs[w].0 == pairs[w + 1].0 {
                    continue; // no threshold between equal values
                }
                let right = Stats {
                    a: total.a - left.a,
                    b: total.b - left.b,
                    count: total.count - left.count,
                };
                if left.count < min_leaf || right.count < min_leaf {
                    continue;
                }
                let raw_gain = self.mode.gain(&left, &right);
                // Strict improvement keeps the first candidate on ties, which
                // realizes the lowest-feature-then-lowest-threshold rule.
                if best.as_ref().is_none_or(|b| raw_gain > b.raw_gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold: (pairs[w].0 + pairs[w + 1].0) / 2.0,
                        raw_gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> Node {
        let stats = self.node_stats(&rows);
        let leaf = |mode: &Mode| Node::Leaf {
            value: mode.leaf_value(&stats),
            cover: mode.cover(&stats),
        };
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf {
            return leaf(&self.mode);
        }
        let candidates = self.candidate_features();
        let Some(split) = self.best_split(&rows, &candidates, &stats) else {
            return leaf(&self.mode); // all candidate features constant
        };
        if split.raw_gain <= self.mode.gain_floor(self.params) {
            return leaf(&self.mode);
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        Node::Split {
            feature_index: split.feature,
            threshold: split.threshold,
            split_gain: self.mode.recorded_gain(split.raw_gain, self.params),
            cover: self.mode.cover(&stats),
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Fits a tree by recursive greedy search over all midpoint thresholds of
/// the per-node candidate features. `rng_seed` drives feature subsampling
/// (and nothing else), so trees are reproducible bit for bit.
pub fn fit_tree(
    x: &Matrix,
    objective: SplitObjective,
    params: &TreeParams,
    rng_seed: u64,
) -> Result<RegressionTree> {
    params.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput("tree fit needs at least one row".into()));
    }
    if objective.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "objective has {} values for {n} rows",
            objective.len()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("predictor matrix".into()));
    }
    let mode = match objective {
        SplitObjective::VarianceReduction { targets } => {
            if targets.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("targets".into()));
            }
            Mode::Variance { targets }
        }
        SplitObjective::NewtonGain { gradients, hessians } => {
            if gradients.len() != hessians.len() {
                return Err(Error::DimensionMismatch(
                    "gradient and hessian vectors differ in length".into(),
                ));
            }
            if gradients.iter().chain(hessians).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("gradients/hessians".into()));
            }
            if hessians.iter().any(|&h| h <= 0.0) {
                return Err(Error::InvalidInput("hessians must be strictly positive".into()));
            }
            Mode::Newton {
                gradients,
                hessians,
                lambda: params.lambda_l2,
                alpha: params.alpha_l1,
            }
        }
    };
    let mut grower = Grower { x, mode, params, rng: ChaCha8Rng::seed_from_u64(rng_seed) };
    let root = grower.grow((0..n).collect(), 0);
    Ok(RegressionTree { root, n_features: x.n_cols(), params: params.clone() })
}

/// Routes a feature vector to its leaf: `x[feature] <= threshold` goes left.
pub fn predict_tree(tree: &RegressionTree, x: &[f64]) -> Result<f64> {
    if x.len() != tree.n_features {
        return Err(Error::DimensionMismatch(format!(
            "input has {} features, tree expects {}",
            x.len(),
            tree.n_features
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction input".into()));
    }
    let mut node = &tree.root;
    loop {
        match node {
            Node::Leaf { value, .. } => return Ok(*value),
            Node::Split { feature_index, threshold, left, right, .. } => {
                node = if x[*feature_index] <= *threshold { left } else { right };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn variance_params(max_depth: usize) -> TreeParams {
        TreeParams { max_depth, ..TreeParams::default() }
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = [7.0; 4];
        let tree = fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(8),
            0,
        )
        .unwrap();
        assert!(tree.root().is_leaf());
        assert_eq!(predict_tree(&tree, &[99.0]).unwrap(), 7.0);
    }

    #[test]
    fn step_function_stump() {
        // Exhaustive check: thresholds 0.5, 1.5, 2.5 give SSE 50, 0, 50,
        // so the stump must split at 1.5 with pure leaves.
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let tree = fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(1),
            0,
        )
        .unwrap();
        match tree.root() {
            Node::Split { feature_index, threshold, split_gain, cover, left, right } => {
                assert_eq!(*feature_index, 0);
                assert_eq!(*threshold, 1.5);
                assert_eq!(*cover, 4.0);
                // parent SSE 100, children 0: gain is the full 100.
                assert!((split_gain - 100.0).abs() < 1e-12);
                assert_eq!(left.cover() + right.cover(), *cover);
            }
            Node::Leaf { .. } => panic!("expected a split"),
        }
        assert_eq!(predict_tree(&tree, &[0.5]).unwrap(), 0.0);
        assert_eq!(predict_tree(&tree, &[2.5]).unwrap(), 10.0);
        // Exactly at the threshold goes left.
        assert_eq!(predict_tree(&tree, &[1.5]).unwrap(), 0.0);
    }

    #[test]
    fn newton_single_leaf_weight() {
        // G = -10, H = 2, lambda 2, alpha 0: w* = 10 / 4 = 2.5.
        let x = col(&[1.0, 1.0]);
        let g = [-5.0, -5.0];
        let h = [1.0, 1.0];
        let params = TreeParams { lambda_l2: 2.0, ..variance_params(3) };
        let tree =
            fit_tree(&x, SplitObjective::NewtonGain { gradients: &g, hessians: &h }, &params, 0)
                .unwrap();
        assert!(tree.root().is_leaf());
        assert!((predict_tree(&tree, &[1.0]).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn newton_gain_hand_cases() {
        // Both children empty of gradient: only the penalty remains.
        assert_eq!(newton_gain(0.0, 1.0, 0.0, 1.0, 0.0, 3.0), -3.0);
        // G_L=-2,H_L=1,G_R=2,H_R=1, lambda 0, gamma 0: 0.5*(4+4-0) = 4.
        assert!((newton_gain(-2.0, 1.0, 2.0, 1.0, 0.0, 0.0) - 4.0).abs() < 1e-12);
        // Symmetric in left/right.
        assert_eq!(
            newton_gain(-2.0, 1.0, 2.0, 1.0, 0.5, 0.1),
            newton_gain(2.0, 1.0, -2.0, 1.0, 0.5, 0.1)
        );
    }

    #[test]
    fn leaf_weight_soft_threshold() {
        assert_eq!(leaf_weight(-10.0, 2.0, 2.0, 0.0), 2.5);
        assert_eq!(leaf_weight(10.0, 2.0, 2.0, 0.0), -2.5);
        // |G| below alpha collapses to zero.
        assert_eq!(leaf_weight(1.5, 2.0, 0.0, 2.0), 0.0);
        assert_eq!(leaf_weight(-5.0, 3.0, 1.0, 2.0), 0.75);
    }

    #[test]
    fn depth_zero_behaviour_and_dimension_errors() {
        let x = col(&[0.0, 1.0]);
        let y = [1.0, 3.0];
        let tree = fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(4),
            0,
        )
        .unwrap();
        assert!(predict_tree(&tree, &[0.0, 1.0]).is_err());
        assert!(predict_tree(&tree, &[f64::NAN]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = col(&[0.0, 1.0]);
        let bad_y = [f64::NAN, 1.0];
        assert!(fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &bad_y },
            &variance_params(2),
            0
        )
        .is_err());
        let g = [1.0, 1.0];
        let h = [1.0, 0.0];
        assert!(fit_tree(
            &x,
            SplitObjective::NewtonGain { gradients: &g, hessians: &h },
            &variance_params(2),
            0
        )
        .is_err());
        let y = [0.0];
        assert!(fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(2),
            0
        )
        .is_err());
    }

    #[test]
    fn tie_break_prefers_lowest_feature_then_threshold() {
        // Feature 1 duplicates feature 0, so every split gain ties; the
        // chosen split must be on feature 0.
        let rows: Vec<Vec<f64>> =
            [0.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v, v]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [0.0, 0.0, 10.0, 10.0];
        let tree = fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(1),
            0,
        )
        .unwrap();
        match tree.root() {
            Node::Split { feature_index, threshold, .. } => {
                assert_eq!(*feature_index, 0);
                assert_eq!(*threshold, 1.5);
            }
            _ => panic!("expected split"),
        }

        // Symmetric targets make thresholds 0.5 and 2.5 tie; lowest wins.
        let x2 = col(&[0.0, 1.0, 2.0, 3.0]);
        let y2 = [10.0, 0.0, 0.0, 10.0];
        let tree2 = fit_tree(
            &x2,
            SplitObjective::VarianceReduction { targets: &y2 },
            &variance_params(1),
            0,
        )
        .unwrap();
        match tree2.root() {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 0.5),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 0.0, 0.0, 9.0, 9.0, 9.0];
        let params = TreeParams { min_samples_leaf: 3, ..variance_params(5) };
        let tree =
            fit_tree(&x, SplitObjective::VarianceReduction { targets: &y }, &params, 0).unwrap();
        let mut min_cover = f64::INFINITY;
        fn walk(node: &Node, min_cover: &mut f64) {
            match node {
                Node::Leaf { cover, .. } => *min_cover = min_cover.min(*cover),
                Node::Split { left, right, .. } => {
                    walk(left, min_cover);
                    walk(right, min_cover);
                }
            }
        }
        walk(tree.root(), &mut min_cover);
        assert!(min_cover >= 3.0);
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn training_sse(tree: &RegressionTree, x: &Matrix, y: &[f64]) -> f64 {
        x.rows()
            .zip(y)
            .map(|(row, &t)| {
                let p = predict_tree(tree, row).unwrap();
                (p - t) * (p - t)
            })
            .sum()
    }

    #[test]
    fn sse_non_increasing_with_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (x, y) = random_dataset(&mut rng, 30, 3);
            let mut prev = f64::INFINITY;
            for depth in 1..=6 {
                let tree = fit_tree(
                    &x,
                    SplitObjective::VarianceReduction { targets: &y },
                    &variance_params(depth),
                    0,
                )
                .unwrap();
                let sse = training_sse(&tree, &x, &y);
                assert!(sse <= prev + 1e-9, "depth {depth}: {sse} > {prev}");
                prev = sse;
            }
        }
    }

    #[test]
    fn prediction_is_piecewise_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y) = random_dataset(&mut rng, 40, 2);
        let tree = fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(4),
            0,
        )
        .unwrap();
        let mut thresholds: Vec<(usize, f64)> = Vec::new();
        fn collect(node: &Node, out: &mut Vec<(usize, f64)>) {
            if let Node::Split { feature_index, threshold, left, right, .. } = node {
                out.push((*feature_index, *threshold));
                collect(left, out);
                collect(right, out);
            }
        }
        collect(tree.root(), &mut thresholds);
        for _ in 0..50 {
            let point = vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            // Perturbation smaller than the distance to any threshold.
            let mut margin: f64 = 1e-3;
            for &(f, t) in &thresholds {
                let dist = (point[f] - t).abs();
                if dist > 0.0 {
                    margin = margin.min(dist / 2.0);
                }
            }
            let base = predict_tree(&tree, &point).unwrap();
            for delta in [margin / 2.0, -margin / 2.0] {
                let moved: Vec<f64> = point.iter().map(|v| v + delta).collect();
                // Only valid when no coordinate crossed a threshold.
                let crossed = thresholds
                    .iter()
                    .any(|&(f, t)| (point[f] <= t) != (moved[f] <= t));
                if !crossed {
                    assert_eq!(predict_tree(&tree, &moved).unwrap(), base);
                }
            }
        }
    }

    #[test]
    fn identical_seed_gives_identical_serialized_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y) = random_dataset(&mut rng, 25, 4);
        let params = TreeParams {
            feature_subsample: FeatureSubsample::Sqrt,
            ..variance_params(5)
        };
        let a = fit_tree(&x, SplitObjective::VarianceReduction { targets: &y }, &params, 77)
            .unwrap();
        let b = fit_tree(&x, SplitObjective::VarianceReduction { targets: &y }, &params, 77)
            .unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn tree_json_roundtrip() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let tree = fit_tree(
            &x,
            SplitObjective::VarianceReduction { targets: &y },
            &variance_params(2),
            0,
        )
        .unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: RegressionTree = serde_json::from_str(&json).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn parent_cover_equals_children_sum_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (x, y) = random_dataset(&mut rng, 50, 3);
        let g: Vec<f64> = y.iter().map(|v| v - 1.0).collect();
        let h = vec![1.0; y.len()];
        for objective in [
            SplitObjective::VarianceReduction { targets: &y },
            SplitObjective::NewtonGain { gradients: &g, hessians: &h },
        ] {
            let tree = fit_tree(&x, objective, &variance_params(5), 0).unwrap();
            fn check(node: &Node) {
                if let Node::Split { cover, left, right, .. } = node {
                    assert!((cover - (left.cover() + right.cover())).abs() < 1e-9);
                    check(left);
                    check(right);
                }
            }
            check(tree.root());
        }
    }
}
