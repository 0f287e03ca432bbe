use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GbdtConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::sigmoid;

pub const MODEL_FORMAT: &str = "growth-target-gbdt";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x <= threshold` go left; missing values follow
    /// `missing_left`.
    Split {
        feature: usize,
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
        /// Training rows that reached this node.
        cover: f64,
    },
    Leaf {
        /// Log-odds increment.
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// A binary tree stored as a node arena with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    /// Index of the leaf reached by a row; `x(f)` returns feature `f`
    /// (NaN for missing).
    pub fn leaf_index(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let v = x(*feature);
                    let go_left = if v.is_nan() { *missing_left } else { v <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: impl Fn(usize) -> f64) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        fn walk(t: &Tree, i: usize) -> f64 {
            match &t.nodes[i] {
                Node::Leaf { value, .. } => *value,
                Node::Split {
                    left, right, cover, ..
                } => {
                    let lc = t.nodes[*left].cover();
                    let rc = t.nodes[*right].cover();
                    (lc * walk(t, *left) + rc * walk(t, *right)) / cover
                }
            }
        }
        walk(self, 0)
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn check(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::input("tree has no nodes"));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(Error::input("tree node reached twice"));
            }
            seen[i] = true;
            match &self.nodes[i] {
                Node::Leaf { value, cover } => {
                    if !value.is_finite() || !(*cover >= 0.0) {
                        return Err(Error::input("leaf with non-finite value or bad cover"));
                    }
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    cover,
                    ..
                } => {
                    if *feature >= n_features {
                        return Err(Error::input("split on unknown feature"));
                    }
                    if *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(Error::input("child index out of range"));
                    }
                    if !(*cover > 0.0) {
                        return Err(Error::input("split node without positive cover"));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        Ok(())
    }
}

/// Boosted binary-logistic tree model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    /// Log-odds of the (class-weighted) training prevalence.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub config: GbdtConfig,
    /// Mean training loss before the first tree and after each tree.
    pub train_loss: Vec<f64>,
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format: &'a str,
    version: u32,
    model: &'a TreeEnsemble,
}

#[derive(Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct ModelFileIn {
    model: TreeEnsemble,
}

impl TreeEnsemble {
    /// Model with no trees: predicts the base rate everywhere.
    pub fn base_only(base_score: f64, feature_names: Vec<String>, config: GbdtConfig) -> Self {
        TreeEnsemble {
            base_score,
            trees: Vec::new(),
            feature_names,
            config,
            train_loss: Vec::new(),
        }
    }

    /// Maps each model feature to a matrix column.
    pub fn column_map(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|n| matrix.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect()
    }

    /// Raw margin for a row given as a lookup over model feature indices.
    pub fn margin_with(&self, x: impl Fn(usize) -> f64 + Copy) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_margin(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        let cols = self.column_map(matrix)?;
        Ok((0..matrix.n_rows())
            .map(|r| {
                let row = matrix.row(r);
                self.margin_with(|f| row[cols[f]])
            })
            .collect())
    }

    /// Margins for the listed matrix rows, in order.
    pub fn predict_margin_rows(&self, matrix: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
        let cols = self.column_map(matrix)?;
        Ok(rows
            .iter()
            .map(|&r| {
                let row = matrix.row(r);
                self.margin_with(|f| row[cols[f]])
            })
            .collect())
    }

    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self
            .predict_margin(matrix)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Versioned JSON encoding.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(&ModelFileOut {
            format: MODEL_FORMAT,
            version: MODEL_FORMAT_VERSION,
            model: self,
        })?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_json(bytes: &[u8]) -> Result<TreeEnsemble> {
        let header: ModelHeader = serde_json::from_slice(bytes)?;
        if header.format != MODEL_FORMAT {
            return Err(Error::input(format!("unknown model format {:?}", header.format)));
        }
        if header.version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: header.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFileIn = serde_json::from_slice(bytes)?;
        let model = file.model;
        if !model.base_score.is_finite() {
            return Err(Error::input("model base score is not finite"));
        }
        for t in &model.trees {
            t.check(model.feature_names.len())?;
        }
        Ok(model)
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_tree_model() -> TreeEnsemble {
        let t1 = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    missing_left: true,
                    left: 1,
                    right: 2,
                    cover: 10.0,
                },
                Node::Leaf { value: -1.0, cover: 6.0 },
                Node::Leaf { value: 2.0, cover: 4.0 },
            ],
        };
        let t2 = Tree {
            nodes: vec![
                Node::Split {
                    feature: 1,
                    threshold: 3.0,
                    missing_left: false,
                    left: 1,
                    right: 2,
                    cover: 10.0,
                },
                Node::Leaf { value: 0.25, cover: 5.0 },
                Node::Leaf { value: -0.5, cover: 5.0 },
            ],
        };
        TreeEnsemble {
            base_score: 0.1,
            trees: vec![t1, t2],
            feature_names: vec!["a".into(), "b".into()],
            config: GbdtConfig::default(),
            train_loss: vec![],
        }
    }

    #[test]
    fn hand_traced_predictions() {
        let m = two_tree_model();
        let x = FeatureMatrix::from_rows(
            vec!["r0".into(), "r1".into(), "r2".into()],
            vec!["b".into(), "a".into()],
            vec![1.0, 0.2, 5.0, 0.9, f64::NAN, f64::NAN],
        )
        .unwrap();
        let p = m.predict_proba(&x).unwrap();
        // r0: a=0.2 -> -1, b=1 -> 0.25; r1: a=0.9 -> 2, b=5 -> -0.5;
        // r2: a missing -> left -1, b missing -> right -0.5
        let expect = [0.1 - 1.0 + 0.25, 0.1 + 2.0 - 0.5, 0.1 - 1.0 - 0.5];
        for (got, want) in p.iter().zip(expect) {
            assert!((got - sigmoid(want)).abs() < 1e-15);
        }
    }

    #[test]
    fn base_only_predicts_base_rate() {
        let m = TreeEnsemble::base_only(-0.4, vec!["a".into()], GbdtConfig::default());
        let x = FeatureMatrix::from_rows(vec!["r".into()], vec!["a".into()], vec![3.0]).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![sigmoid(-0.4)]);
    }

    #[test]
    fn missing_column_is_an_error() {
        let m = two_tree_model();
        let x = FeatureMatrix::from_rows(vec!["r".into()], vec!["a".into()], vec![3.0]).unwrap();
        assert!(matches!(m.predict_proba(&x), Err(Error::MissingFeature(n)) if n == "b"));
    }

    #[test]
    fn serialization_checks_version_and_truncation() {
        let m = two_tree_model();
        let bytes = m.to_json().unwrap();
        assert_eq!(TreeEnsemble::from_json(&bytes).unwrap(), m);
        assert!(TreeEnsemble::from_json(&bytes[..bytes.len() / 2]).is_err());
        let bumped = String::from_utf8(bytes)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(
            TreeEnsemble::from_json(bumped.as_bytes()),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn expected_value_is_cover_weighted() {
        let m = two_tree_model();
        assert!((m.trees[0].expected_value() - (6.0 * -1.0 + 4.0 * 2.0) / 10.0).abs() < 1e-15);
    }
}
