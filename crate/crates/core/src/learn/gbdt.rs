//! Gradient-boosted regression trees on the logistic loss.
//!
//! Each stage fits a depth-bounded tree to the residuals `y − p` with exact
//! greedy variance-reduction splits, then sets every leaf to one Newton
//! step `Σ r / Σ p(1 − p)` scaled by the learning rate. Trees are grown
//! level by level over presorted feature columns, so one level costs a
//! single pass per feature.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_binary_inputs, log_loss, sigmoid};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::persist::Persist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must lie in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub initial_log_odds: f64,
    /// Leaf values already include the learning rate.
    pub trees: Vec<Tree>,
    pub n_features: usize,
    /// Mean log loss on the training set after each stage.
    pub train_loss: Vec<f64>,
    /// Set when the training labels had a single class; the model is then
    /// the clamped prior alone.
    pub single_class: bool,
}

impl Persist for GbdtModel {
    const KIND: &'static str = "gbdt";
}

const PRIOR_CLAMP: f64 = 1e-6;

pub fn gbdt_fit(x: &FeatureMatrix, y: &[bool], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    check_binary_inputs(x, y)?;
    let n = y.len();
    let targets: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let base_rate = targets.iter().sum::<f64>() / n as f64;
    let prior = base_rate.clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP);
    let initial_log_odds = (prior / (1.0 - prior)).ln();

    if base_rate == 0.0 || base_rate == 1.0 {
        log::warn!("gbdt_fit: single-class labels, returning a constant model");
        return Ok(GbdtModel {
            initial_log_odds,
            trees: Vec::new(),
            n_features: x.n_cols(),
            train_loss: Vec::new(),
            single_class: true,
        });
    }

    let d = x.n_cols();
    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_sample = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut scores = vec![initial_log_odds; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut train_loss = Vec::with_capacity(params.n_trees);
    let mut residual = vec![0.0; n];
    let mut hessian = vec![0.0; n];

    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            residual[i] = targets[i] - p;
            hessian[i] = p * (1.0 - p);
        }
        let in_sample: Vec<bool> = if n_sample < n {
            let mut mask = vec![false; n];
            for i in index::sample(&mut rng, n, n_sample) {
                mask[i] = true;
            }
            mask
        } else {
            vec![true; n]
        };
        let tree = grow_tree(x, &sorted, &residual, &hessian, &in_sample, params);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += tree.predict_row(x.row(i));
        }
        trees.push(tree);
        train_loss.push(log_loss(&targets, &scores));
    }

    Ok(GbdtModel {
        initial_log_odds,
        trees,
        n_features: d,
        train_loss,
        single_class: false,
    })
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const NO_NODE: usize = usize::MAX;

fn grow_tree(
    x: &FeatureMatrix,
    sorted: &[Vec<usize>],
    residual: &[f64],
    hessian: &[f64],
    in_sample: &[bool],
    params: &GbdtParams,
) -> Tree {
    let n = residual.len();
    let msl = params.min_samples_leaf;
    // Node currently holding each row, or NO_NODE for rows outside the
    // subsample or already in a finished leaf.
    let mut node_of: Vec<usize> = (0..n).map(|i| if in_sample[i] { 0 } else { NO_NODE }).collect();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut frontier: Vec<usize> = vec![0];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let n_nodes = nodes.len();
        let mut count = vec![0usize; n_nodes];
        let mut sum = vec![0.0f64; n_nodes];
        for i in 0..n {
            if node_of[i] != NO_NODE {
                count[node_of[i]] += 1;
                sum[node_of[i]] += residual[i];
            }
        }
        let mut best: Vec<Option<Candidate>> = vec![None; n_nodes];
        let mut left_n = vec![0usize; n_nodes];
        let mut left_s = vec![0.0f64; n_nodes];
        let mut last: Vec<f64> = vec![f64::NAN; n_nodes];

        for (feature, order) in sorted.iter().enumerate() {
            for &node in &frontier {
                left_n[node] = 0;
                left_s[node] = 0.0;
                last[node] = f64::NAN;
            }
            for &i in order {
                let node = node_of[i];
                if node == NO_NODE {
                    continue;
                }
                let v = x.get(i, feature);
                let ln = left_n[node];
                if ln >= msl && count[node] - ln >= msl && v > last[node] {
                    let ls = left_s[node];
                    let (rn, rs) = (count[node] - ln, sum[node] - ls);
                    let gain = ls * ls / ln as f64 + rs * rs / rn as f64 - sum[node] * sum[node] / count[node] as f64;
                    let better = match best[node] {
                        None => gain > 1e-12,
                        Some(c) => gain > c.gain,
                    };
                    if better {
                        let prev = last[node];
                        let mut threshold = 0.5 * (prev + v);
                        if threshold >= v {
                            threshold = prev;
                        }
                        best[node] = Some(Candidate {
                            gain,
                            feature,
                            threshold,
                        });
                    }
                }
                left_n[node] += 1;
                left_s[node] += residual[i];
                last[node] = v;
            }
        }

        let mut next = Vec::new();
        let mut child_of = vec![(NO_NODE, NO_NODE); n_nodes];
        for &node in &frontier {
            if let Some(c) = best[node] {
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[node] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                };
                child_of[node] = (left, left + 1);
                next.push(left);
                next.push(left + 1);
            }
        }
        for i in 0..n {
            let node = node_of[i];
            if node == NO_NODE {
                continue;
            }
            node_of[i] = match nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } if child_of[node].0 != NO_NODE => {
                    if x.get(i, feature) <= threshold {
                        left
                    } else {
                        right
                    }
                }
                // Finished leaf.
                _ => NO_NODE,
            };
        }
        frontier = next;
    }

    // Newton leaf values from the sampled rows that reached each leaf.
    let mut num = vec![0.0; nodes.len()];
    let mut den = vec![0.0; nodes.len()];
    for i in 0..n {
        if in_sample[i] {
            let leaf = leaf_index(&nodes, x.row(i));
            num[leaf] += residual[i];
            den[leaf] += hessian[i];
        }
    }
    for (k, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            *value = if den[k] > 1e-150 { params.learning_rate * num[k] / den[k] } else { 0.0 };
        }
    }
    Tree { nodes }
}

fn leaf_index(nodes: &[Node], row: &[f64]) -> usize {
    let mut at = 0;
    while let Node::Split {
        feature,
        threshold,
        left,
        right,
    } = nodes[at]
    {
        at = if row[feature] <= threshold { left } else { right };
    }
    at
}

impl GbdtModel {
    pub fn decision_function(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.n_cols(),
            });
        }
        Ok(x
            .rows()
            .map(|row| self.initial_log_odds + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>())
            .collect())
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.decision_function(x)?.into_iter().map(sigmoid).collect())
    }
}

pub fn gbdt_predict_proba(model: &GbdtModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::roc_auc;

    fn column(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(values.len(), values.to_vec(), vec!["x".into()]).unwrap()
    }

    #[test]
    fn single_class_is_prior_only() {
        let x = column(&[1.0, 2.0, 3.0]);
        let m = gbdt_fit(&x, &[true, true, true], &GbdtParams::default()).unwrap();
        assert!(m.single_class);
        assert!(m.predict_proba(&x).unwrap().iter().all(|&p| p >= 0.99));
    }

    #[test]
    fn threshold_data_separates_quickly() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<bool> = xs.iter().map(|&v| v >= 17.0).collect();
        let params = GbdtParams { n_trees: 10, ..Default::default() };
        let m = gbdt_fit(&column(&xs), &y, &params).unwrap();
        let p = m.predict_proba(&column(&xs)).unwrap();
        assert_eq!(roc_auc(&p, &y).unwrap(), 1.0);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        match m.trees[0].nodes()[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 16.5),
            Node::Leaf { .. } => panic!("root should split"),
        }
    }

    #[test]
    fn monotone_on_one_dimensional_grid() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 / 6.0).collect();
        let y: Vec<bool> = xs.iter().map(|&v| v > 4.0).collect();
        let m = gbdt_fit(&column(&xs), &y, &GbdtParams { n_trees: 20, ..Default::default() }).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 * 0.06).collect();
        let p = m.predict_proba(&column(&grid)).unwrap();
        assert!(p.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn empty_ensemble_predicts_prior() {
        let m = GbdtModel {
            initial_log_odds: 0.4,
            trees: vec![],
            n_features: 1,
            train_loss: vec![],
            single_class: false,
        };
        let p = m.predict_proba(&column(&[0.0, 5.0])).unwrap();
        assert!(p.iter().all(|&v| (v - sigmoid(0.4)).abs() < 1e-15));
    }

    #[test]
    fn loss_never_increases_and_fit_is_deterministic() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 101) as f64).collect();
        let y: Vec<bool> = (0..100).map(|i| (i * 7919) % 3 == 0).collect();
        let params = GbdtParams { subsample: 0.8, seed: 5, ..Default::default() };
        let a = gbdt_fit(&column(&xs), &y, &GbdtParams::default()).unwrap();
        assert!(a.train_loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let b = gbdt_fit(&column(&xs), &y, &params).unwrap();
        let c = gbdt_fit(&column(&xs), &y, &params).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<bool> = (0..20).map(|i| i == 19).collect();
        let m = gbdt_fit(&column(&xs), &y, &GbdtParams { min_samples_leaf: 5, n_trees: 1, ..Default::default() }).unwrap();
        for node in m.trees[0].nodes() {
            if let Node::Split { threshold, .. } = node {
                let left = xs.iter().filter(|&&v| v <= *threshold).count();
                assert!(left >= 5 && 20 - left >= 5);
            }
        }
    }

    #[test]
    fn width_mismatch() {
        let m = gbdt_fit(&column(&[0.0, 1.0]), &[false, true], &GbdtParams::default()).unwrap();
        let wide = FeatureMatrix::zeros(1, vec!["a".into(), "b".into()]);
        assert!(m.predict_proba(&wide).is_err());
        assert!(gbdt_fit(&column(&[0.0, 1.0]), &[true], &GbdtParams::default()).is_err());
        let bad = GbdtParams { learning_rate: 0.0, ..Default::default() };
        assert!(gbdt_fit(&column(&[0.0, 1.0]), &[false, true], &bad).is_err());
    }
}
