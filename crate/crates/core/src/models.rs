//! Model families with a uniform scalar prediction contract, and the JSON
//! model file format.
//!
//! ```json
//! {"kind": "linear", "intercept": 0.5, "coefficients": [1.0, -2.0]}
//! {"kind": "spline_linear", "beta0": 0.0, "beta1": 1.0, "beta12": 1.0}
//! {"kind": "spline_constant", "beta0": 0.0, "beta1": 1.0, "beta12": 1.0}
//! {"kind": "tree_ensemble", "base_score": 0.0, "n_features": 2,
//!  "trees": [{"nodes": [{"feature": 0, "threshold": 0.0, "left": 1, "right": 2},
//!                       {"leaf": -1.0}, {"leaf": 1.0}]}]}
//! ```
//!
//! Tree routing: a row goes to `left` iff `x[feature] <= threshold`. Node 0 is
//! the root. `n_features` is optional for tree ensembles; when absent it is one
//! past the largest split feature.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Coefficients of `f = beta0 + beta1 * x1 + beta12 * x1 * x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineParams {
    pub beta0: f64,
    pub beta1: f64,
    pub beta12: f64,
}

impl SplineParams {
    pub fn new(beta0: f64, beta1: f64, beta12: f64) -> Self {
        SplineParams { beta0, beta1, beta12 }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("beta0", self.beta0), ("beta1", self.beta1), ("beta12", self.beta12)] {
            if !v.is_finite() {
                return Err(Error::ModelFormat {
                    path: name.into(),
                    message: format!("non-finite coefficient {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { leaf: value }],
        }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                TreeNode::Leaf { leaf } => return leaf,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_features: Option<usize>,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn n_features(&self) -> usize {
        self.n_features.unwrap_or_else(|| {
            self.trees
                .iter()
                .flat_map(|t| &t.nodes)
                .filter_map(|n| match n {
                    TreeNode::Split { feature, .. } => Some(feature + 1),
                    TreeNode::Leaf { .. } => None,
                })
                .max()
                .unwrap_or(0)
        })
    }

    /// Checks feature bounds, child indices and that each tree is a proper tree
    /// rooted at node 0 (no cycles, no shared children).
    pub fn validate(&self) -> Result<()> {
        let fail = |path: String, message: String| Err(Error::ModelFormat { path, message });
        if !self.base_score.is_finite() {
            return fail("base_score".into(), "non-finite".into());
        }
        let m = self.n_features();
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return fail(format!("trees[{t}].nodes"), "tree has no nodes".into());
            }
            let mut seen = vec![false; tree.nodes.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                let path = format!("trees[{t}].nodes[{i}]");
                match tree.nodes[i] {
                    TreeNode::Leaf { leaf } => {
                        if !leaf.is_finite() {
                            return fail(format!("{path}.leaf"), "non-finite leaf value".into());
                        }
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if feature >= m {
                            return fail(
                                format!("{path}.feature"),
                                format!("feature index {feature} >= n_features {m}"),
                            );
                        }
                        if threshold.is_nan() {
                            return fail(format!("{path}.threshold"), "threshold is NaN".into());
                        }
                        for (side, child) in [("left", left), ("right", right)] {
                            if child >= tree.nodes.len() {
                                return fail(
                                    format!("{path}.{side}"),
                                    format!("child {child} out of range ({} nodes)", tree.nodes.len()),
                                );
                            }
                            if seen[child] {
                                return fail(
                                    format!("{path}.{side}"),
                                    format!("node {child} is reachable twice"),
                                );
                            }
                            seen[child] = true;
                            stack.push(child);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        self.trees.iter().fold(self.base_score, |acc, t| acc + t.eval(x))
    }
}

/// A predictor over `M` numeric features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Linear { intercept: f64, coefficients: Vec<f64> },
    /// The spline formula evaluated everywhere, extrapolating linearly off the data.
    SplineLinear(SplineParams),
    /// The spline as a tree split on `x2` first: constant outside each branch's region.
    SplineConstant(SplineParams),
    TreeEnsemble(TreeEnsemble),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear { coefficients, .. } => coefficients.len(),
            Model::SplineLinear(_) | Model::SplineConstant(_) => 2,
            Model::TreeEnsemble(t) => t.n_features(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Linear {
                intercept,
                coefficients,
            } => {
                if !intercept.is_finite() {
                    return Err(Error::ModelFormat {
                        path: "intercept".into(),
                        message: "non-finite".into(),
                    });
                }
                if let Some(j) = coefficients.iter().position(|c| !c.is_finite()) {
                    return Err(Error::ModelFormat {
                        path: format!("coefficients[{j}]"),
                        message: "non-finite".into(),
                    });
                }
                Ok(())
            }
            Model::SplineLinear(p) | Model::SplineConstant(p) => p.validate(),
            Model::TreeEnsemble(t) => t.validate(),
        }
    }

    /// Predicts one row, rejecting wrong lengths and non-finite values.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let m = self.n_features();
        if x.len() != m {
            return Err(Error::InvalidInput(format!(
                "expected {m} features, got {}",
                x.len()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature {j} has non-finite value {}",
                x[j]
            )));
        }
        Ok(self.eval(x))
    }

    /// Predicts every row of `rows` in order.
    pub fn predict_batch(&self, rows: &Dataset) -> Result<Vec<f64>> {
        let m = self.n_features();
        if rows.n_cols() != m {
            return Err(Error::InvalidInput(format!(
                "expected {m} columns, got {}",
                rows.n_cols()
            )));
        }
        // Dataset values are finite by construction.
        Ok(rows
            .as_flat()
            .par_chunks_exact(m)
            .map(|r| self.eval(r))
            .collect())
    }

    /// Unchecked evaluation; callers guarantee length and finiteness.
    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Model::Linear {
                intercept,
                coefficients,
            } => coefficients
                .iter()
                .zip(x)
                .fold(*intercept, |acc, (c, v)| acc + c * v),
            // Grouped so that on the manifold it rounds exactly like the constant variant.
            Model::SplineLinear(p) => p.beta0 + (p.beta1 + p.beta12 * x[1]) * x[0],
            Model::SplineConstant(p) => {
                let x1 = x[0];
                if x[1] > 0.5 {
                    if x1 > 0.0 {
                        p.beta0 + (p.beta1 + p.beta12) * x1
                    } else {
                        p.beta0
                    }
                } else if x1 <= 0.0 {
                    p.beta0 + p.beta1 * x1
                } else {
                    p.beta0
                }
            }
            Model::TreeEnsemble(t) => t.eval(x),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Model> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::ModelFormat {
            path: ".".into(),
            message: e.to_string(),
        })?;
        let kind = doc
            .get("kind")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| Error::ModelFormat {
                path: "kind".into(),
                message: "missing or non-string model kind".into(),
            })?
            .to_owned();
        // Each variant is parsed from its own struct so errors carry field paths.
        let model = match kind.as_str() {
            "linear" => {
                let r: LinearRepr = parse_at(doc)?;
                Model::Linear {
                    intercept: r.intercept,
                    coefficients: r.coefficients,
                }
            }
            "spline_linear" => Model::SplineLinear(parse_at(doc)?),
            "spline_constant" => Model::SplineConstant(parse_at(doc)?),
            "tree_ensemble" => Model::TreeEnsemble(parse_at(doc)?),
            other => {
                return Err(Error::ModelFormat {
                    path: "kind".into(),
                    message: format!("unknown model kind `{other}`"),
                })
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct LinearRepr {
    intercept: f64,
    coefficients: Vec<f64>,
}

fn parse_at<T: serde::de::DeserializeOwned>(doc: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(doc).map_err(|e| Error::ModelFormat {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Loads and validates a JSON model file.
pub fn load_model(path: &Path) -> Result<Model> {
    Model::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spline(b0: f64, b1: f64, b12: f64) -> SplineParams {
        SplineParams::new(b0, b1, b12)
    }

    #[test]
    fn spline_linear_examples() {
        let m = Model::SplineLinear(spline(0.0, 1.0, 1.0));
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn spline_constant_examples() {
        let m = Model::SplineConstant(spline(0.0, 1.0, 1.0));
        assert_eq!(m.predict(&[-1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(m.predict(&[-1.0, 0.0]).unwrap(), -1.0);
        // x1 = 0 belongs to the x2 = 0 region
        assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn spline_variants_agree_on_manifold_and_differ_off_it() {
        let p = spline(0.3, 1.7, -0.9);
        let lin = Model::SplineLinear(p);
        let con = Model::SplineConstant(p);
        for i in -50..=50 {
            let x1 = i as f64 / 10.0;
            let x = [x1, if x1 > 0.0 { 1.0 } else { 0.0 }];
            assert_eq!(lin.predict(&x).unwrap(), con.predict(&x).unwrap());
        }
        assert_eq!(lin.predict(&[1.0, 0.0]).unwrap(), p.beta0 + p.beta1);
        assert_eq!(con.predict(&[1.0, 0.0]).unwrap(), p.beta0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = Model::SplineLinear(spline(0.0, 1.0, 1.0));
        assert!(matches!(m.predict(&[f64::INFINITY, 0.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(m.predict(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn batch_matches_single() {
        let m = Model::SplineLinear(spline(0.5, 1.0, 2.0));
        let ds = Dataset::new(
            vec!["x1".into(), "x2".into()],
            vec![vec![1.0, 1.0], vec![-0.5, 0.0], vec![2.0, 1.0]],
        )
        .unwrap();
        let batch = m.predict_batch(&ds).unwrap();
        let single: Vec<f64> = ds.rows().map(|r| m.predict(r).unwrap()).collect();
        assert_eq!(batch, single);
        let empty = Dataset::from_flat(vec!["x1".into(), "x2".into()], vec![]).unwrap();
        assert!(m.predict_batch(&empty).unwrap().is_empty());
    }

    #[test]
    fn json_round_trip_spline() {
        let m = Model::SplineLinear(spline(0.0, 1.0, 1.0));
        let back = Model::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back.predict(&[1.0, 1.0]).unwrap(), 2.0);
        assert!(m.to_json_string().contains("\"kind\": \"spline_linear\""));
    }

    #[test]
    fn tree_feature_out_of_range() {
        let text = r#"{"kind":"tree_ensemble","base_score":0,"n_features":2,
            "trees":[{"nodes":[{"feature":2,"threshold":0,"left":1,"right":2},{"leaf":1},{"leaf":2}]}]}"#;
        match Model::from_json_str(text) {
            Err(Error::ModelFormat { path, .. }) => assert_eq!(path, "trees[0].nodes[0].feature"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tree_cycle_rejected() {
        let text = r#"{"kind":"tree_ensemble","base_score":0,
            "trees":[{"nodes":[{"feature":0,"threshold":0,"left":1,"right":0},{"leaf":1}]}]}"#;
        assert!(matches!(Model::from_json_str(text), Err(Error::ModelFormat { .. })));
    }

    #[test]
    fn schema_violation_reports_path() {
        let text = r#"{"kind":"linear","intercept":0,"coefficients":[1.0,"a"]}"#;
        match Model::from_json_str(text) {
            Err(Error::ModelFormat { path, .. }) => assert_eq!(path, "coefficients[1]"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"kind":"spline_cubic"}"#;
        assert!(matches!(Model::from_json_str(text), Err(Error::ModelFormat { .. })));
        let text = r#"{"kind":"tree_ensemble","base_score":"zero","trees":[]}"#;
        match Model::from_json_str(text) {
            Err(Error::ModelFormat { path, .. }) => assert!(path.contains("base_score"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_leaf_tree_is_constant() {
        let text = r#"{"kind":"tree_ensemble","base_score":0,"n_features":3,"trees":[{"nodes":[{"leaf":5}]}]}"#;
        let m = Model::from_json_str(text).unwrap();
        assert_eq!(m.predict(&[1.0, -7.0, 1e6]).unwrap(), 5.0);
        assert_eq!(m.predict(&[0.0, 0.0, 0.0]).unwrap(), 5.0);
    }

    #[test]
    fn tree_ties_go_left() {
        let text = r#"{"kind":"tree_ensemble","base_score":1,
            "trees":[{"nodes":[{"feature":0,"threshold":0.5,"left":1,"right":2},{"leaf":-1},{"leaf":1}]}]}"#;
        let m = Model::from_json_str(text).unwrap();
        assert_eq!(m.predict(&[0.5]).unwrap(), 0.0);
        assert_eq!(m.predict(&[0.5000001]).unwrap(), 2.0);
    }
}
