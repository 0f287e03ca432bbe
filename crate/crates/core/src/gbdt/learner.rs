use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::binning::{bin_column, BinnedColumn, MISSING_BIN};
use super::model::{Node, Tree, TreeEnsemble};
use super::{GbdtConfig, GrowthPolicy};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::stats::{logit, sigmoid};

/// Splits must improve the regularized objective by more than this.
const MIN_SPLIT_GAIN: f64 = 1e-12;
/// Halvings tried before a tree that raises the training loss is zeroed.
const MAX_HALVINGS: usize = 40;

/// Fits on every row and column of `matrix`.
pub fn fit(matrix: &FeatureMatrix, labels: &[u8], config: &GbdtConfig) -> Result<TreeEnsemble> {
    let rows: Vec<usize> = (0..matrix.n_rows()).collect();
    fit_rows(matrix, labels, &rows, matrix.feature_names(), config)
}

/// Fits on a subset of rows and named columns. `labels` is indexed by
/// matrix row; the model's features are `features` in the given order.
pub fn fit_rows(
    matrix: &FeatureMatrix,
    labels: &[u8],
    rows: &[usize],
    features: &[String],
    config: &GbdtConfig,
) -> Result<TreeEnsemble> {
    config.validate()?;
    if labels.len() != matrix.n_rows() {
        return Err(Error::input("label count does not match matrix rows"));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= matrix.n_rows()) {
        return Err(Error::input(format!("row {r} out of range")));
    }
    let y: Vec<f64> = rows.iter().map(|&r| f64::from(labels[r])).collect();
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let col_idx = features
        .iter()
        .map(|n| matrix.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<BinnedColumn> = col_idx
        .par_iter()
        .map(|&c| bin_column(&matrix.column_subset(c, rows), config.n_bins))
        .collect();

    let w: Vec<f64> = y
        .iter()
        .map(|&v| if v == 1.0 { config.pos_class_weight } else { 1.0 })
        .collect();
    let total_w: f64 = w.iter().sum();
    let pos_w: f64 = w.iter().zip(&y).map(|(w, y)| w * y).sum();
    let base_score = logit((pos_w / total_w).clamp(1e-12, 1.0 - 1e-12));

    let mut model = TreeEnsemble::base_only(base_score, features.to_vec(), config.clone());
    let mut margin = vec![base_score; y.len()];
    let mut loss = mean_loss(&margin, &y, &w, total_w);
    model.train_loss.push(loss);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for _ in 0..config.n_trees {
        let (grad, hess): (Vec<f64>, Vec<f64>) = margin
            .par_iter()
            .zip(&y)
            .zip(&w)
            .map(|((&m, &y), &w)| {
                let p = sigmoid(m);
                (w * (p - y), w * p * (1.0 - p))
            })
            .unzip();
        let feats = sample_features(columns.len(), config.feature_subsample, &mut rng);
        let grower = Grower {
            columns: &columns,
            grad: &grad,
            hess: &hess,
            feats: &feats,
            config,
            nodes: Vec::new(),
            leaf_of: vec![0; y.len()],
        };
        let (mut tree, leaf_of) = grower.grow();

        // Guard against Newton steps that overshoot on the full loss.
        let values: Vec<f64> = tree
            .nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { value, .. } => *value,
                Node::Split { .. } => 0.0,
            })
            .collect();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = margin
                .iter()
                .zip(&leaf_of)
                .map(|(m, &l)| m + values[l] * scale)
                .collect();
            let cand_loss = mean_loss(&cand, &y, &w, total_w);
            if cand_loss <= loss {
                accepted = Some((cand, cand_loss));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, cand_loss)) => {
                if scale != 1.0 {
                    log::debug!("tree {} step scaled by {scale}", model.trees.len());
                    scale_leaves(&mut tree, scale);
                }
                margin = cand;
                loss = cand_loss;
            }
            None => scale_leaves(&mut tree, 0.0),
        }
        model.trees.push(tree);
        model.train_loss.push(loss);
    }
    Ok(model)
}

fn scale_leaves(tree: &mut Tree, scale: f64) {
    for n in &mut tree.nodes {
        if let Node::Leaf { value, .. } = n {
            *value *= scale;
        }
    }
}

/// Weighted mean logistic loss, summed sequentially for reproducibility.
fn mean_loss(margin: &[f64], y: &[f64], w: &[f64], total_w: f64) -> f64 {
    let mut s = 0.0;
    for ((&m, &y), &w) in margin.iter().zip(y).zip(w) {
        let softplus = m.max(0.0) + (-m.abs()).exp().ln_1p();
        s += w * (softplus - y * m);
    }
    s / total_w
}

fn sample_features(m: usize, frac: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = ((frac * m as f64).round() as usize).clamp(1, m.max(1));
    if frac >= 1.0 || k >= m {
        return (0..m).collect();
    }
    let mut picked = rand::seq::index::sample(rng, m, k).into_vec();
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    g: f64,
    h: f64,
    n: u32,
}

impl BinStat {
    fn add(&mut self, o: &BinStat) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }
}

/// Per sampled feature: one slot per non-missing bin, then the missing slot.
type Histogram = Vec<Vec<BinStat>>;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    slot: usize,
    bin: usize,
    missing_left: bool,
}

struct Pending {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    hist: Histogram,
    g: f64,
    h: f64,
    best: Option<Candidate>,
}

struct Grower<'a> {
    columns: &'a [BinnedColumn],
    grad: &'a [f64],
    hess: &'a [f64],
    /// Sampled feature indices, ascending.
    feats: &'a [usize],
    config: &'a GbdtConfig,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
}

impl Grower<'_> {
    fn grow(mut self) -> (Tree, Vec<usize>) {
        let rows: Vec<u32> = (0..self.grad.len() as u32).collect();
        let hist = self.histogram(&rows);
        self.nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        let root = self.pending(0, rows, 0, hist);
        match self.config.growth_policy {
            GrowthPolicy::DepthWise => {
                let mut queue = VecDeque::from([root]);
                while let Some(p) = queue.pop_front() {
                    if p.best.is_some() {
                        let (l, r) = self.split(p);
                        queue.push_back(l);
                        queue.push_back(r);
                    } else {
                        self.finish_leaf(p);
                    }
                }
            }
            GrowthPolicy::LeafWise => {
                let mut open = vec![root];
                let mut leaves = 1;
                while leaves < self.config.max_leaves {
                    let mut pick: Option<usize> = None;
                    for (i, p) in open.iter().enumerate() {
                        let Some(c) = p.best else { continue };
                        let better = match pick {
                            None => true,
                            Some(j) => {
                                let b = open[j].best.unwrap();
                                c.gain > b.gain || (c.gain == b.gain && p.node < open[j].node)
                            }
                        };
                        if better {
                            pick = Some(i);
                        }
                    }
                    let Some(i) = pick else { break };
                    let p = open.swap_remove(i);
                    let (l, r) = self.split(p);
                    open.push(l);
                    open.push(r);
                    leaves += 1;
                }
                for p in open {
                    self.finish_leaf(p);
                }
            }
        }
        (Tree { nodes: self.nodes }, self.leaf_of)
    }

    fn histogram(&self, rows: &[u32]) -> Histogram {
        self.feats
            .par_iter()
            .map(|&f| {
                let col = &self.columns[f];
                let nb = col.n_bins();
                let mut h = vec![BinStat::default(); nb + 1];
                for &r in rows {
                    let r = r as usize;
                    let b = col.bins[r];
                    let slot = if b == MISSING_BIN { nb } else { b as usize };
                    h[slot].g += self.grad[r];
                    h[slot].h += self.hess[r];
                    h[slot].n += 1;
                }
                h
            })
            .collect()
    }

    fn pending(&self, node: usize, rows: Vec<u32>, depth: usize, hist: Histogram) -> Pending {
        let (mut g, mut h) = (0.0, 0.0);
        for &r in &rows {
            g += self.grad[r as usize];
            h += self.hess[r as usize];
        }
        let splittable =
            depth < self.config.max_depth && rows.len() >= 2 * self.config.min_samples_leaf;
        let best = if splittable {
            self.best_split(&hist, g, h, rows.len() as u32)
        } else {
            None
        };
        Pending {
            node,
            rows,
            depth,
            hist,
            g,
            h,
            best,
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let d = h + self.config.l2_leaf_reg;
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    }

    fn best_split(&self, hist: &Histogram, g: f64, h: f64, n: u32) -> Option<Candidate> {
        let min_leaf = self.config.min_samples_leaf as u32;
        let parent = self.score(g, h);
        let per_feature: Vec<Option<Candidate>> = hist
            .par_iter()
            .enumerate()
            .map(|(slot, bins)| {
                let nb = bins.len() - 1;
                let miss = bins[nb];
                let mut acc = BinStat::default();
                let mut best: Option<Candidate> = None;
                for (b, stat) in bins[..nb].iter().enumerate() {
                    acc.add(stat);
                    for missing_left in [true, false] {
                        let mut left = acc;
                        if missing_left {
                            left.add(&miss);
                        }
                        let rn = n - left.n;
                        if left.n < min_leaf || rn < min_leaf {
                            continue;
                        }
                        let gain = 0.5
                            * (self.score(left.g, left.h) + self.score(g - left.g, h - left.h)
                                - parent);
                        if gain > MIN_SPLIT_GAIN && best.is_none_or(|c| gain > c.gain) {
                            best = Some(Candidate {
                                gain,
                                slot,
                                bin: b,
                                missing_left,
                            });
                        }
                    }
                }
                best
            })
            .collect();
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        best
    }

    fn split(&mut self, p: Pending) -> (Pending, Pending) {
        let c = p.best.expect("split called on a node without a candidate");
        let f = self.feats[c.slot];
        let col = &self.columns[f];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = p.rows.iter().copied().partition(|&r| {
            let b = col.bins[r as usize];
            if b == MISSING_BIN {
                c.missing_left
            } else {
                b as usize <= c.bin
            }
        });
        let threshold = col.cuts.get(c.bin).copied().unwrap_or(f64::MAX);
        let left_id = self.nodes.len();
        let right_id = left_id + 1;
        self.nodes[p.node] = Node::Split {
            feature: f,
            threshold,
            missing_left: c.missing_left,
            left: left_id,
            right: right_id,
            cover: p.rows.len() as f64,
        };
        self.nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        self.nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });

        let left_small = left_rows.len() <= right_rows.len();
        let small = self.histogram(if left_small { &left_rows } else { &right_rows });
        let large: Histogram = p
            .hist
            .iter()
            .zip(&small)
            .map(|(pb, sb)| {
                pb.iter()
                    .zip(sb)
                    .map(|(a, b)| BinStat {
                        g: a.g - b.g,
                        h: a.h - b.h,
                        n: a.n - b.n,
                    })
                    .collect()
            })
            .collect();
        let (lh, rh) = if left_small { (small, large) } else { (large, small) };
        let depth = p.depth + 1;
        (
            self.pending(left_id, left_rows, depth, lh),
            self.pending(right_id, right_rows, depth, rh),
        )
    }

    fn finish_leaf(&mut self, p: Pending) {
        let d = p.h + self.config.l2_leaf_reg;
        let value = if d > 0.0 {
            -p.g / d * self.config.learning_rate
        } else {
            0.0
        };
        self.nodes[p.node] = Node::Leaf {
            value,
            cover: p.rows.len() as f64,
        };
        for &r in &p.rows {
            self.leaf_of[r as usize] = p.node;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(
            (0..xs.len()).map(|i| format!("c{i:03}")).collect(),
            vec!["x".into()],
            xs.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn separable_one_split() {
        let xs: Vec<f64> = (-20..20).map(|i| i as f64 + 0.5).collect();
        let y: Vec<u8> = xs.iter().map(|&x| u8::from(x > 0.0)).collect();
        let cfg = GbdtConfig {
            n_trees: 1,
            max_depth: 1,
            min_samples_leaf: 1,
            learning_rate: 1.0,
            ..GbdtConfig::default()
        };
        let m = fit(&matrix(&xs), &y, &cfg).unwrap();
        let p = m.predict_proba(&matrix(&xs)).unwrap();
        for (p, y) in p.iter().zip(&y) {
            assert_eq!(u8::from(*p > 0.5), *y);
        }
        assert!(matches!(m.trees[0].nodes[0], Node::Split { threshold, .. } if threshold == -0.5));
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            fit(&matrix(&[1.0, 2.0]), &[1, 1], &GbdtConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn all_missing_feature_never_split() {
        let xs = vec![f64::NAN; 40];
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let cfg = GbdtConfig {
            n_trees: 5,
            min_samples_leaf: 1,
            ..GbdtConfig::default()
        };
        let m = fit(&matrix(&xs), &y, &cfg).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn leaf_wise_respects_leaf_budget() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64).collect();
        let y: Vec<u8> = xs.iter().map(|&x| u8::from((x as i64 / 25) % 2 == 0)).collect();
        let cfg = GbdtConfig {
            n_trees: 3,
            max_leaves: 5,
            max_depth: 10,
            min_samples_leaf: 2,
            growth_policy: GrowthPolicy::LeafWise,
            ..GbdtConfig::default()
        };
        let m = fit(&matrix(&xs), &y, &cfg).unwrap();
        assert!(m.trees.iter().all(|t| t.n_leaves() <= 5));
        assert_eq!(m.trees[0].n_leaves(), 5);
    }

    #[test]
    fn depth_wise_respects_depth() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64).collect();
        let y: Vec<u8> = xs.iter().map(|&x| u8::from((x as i64 / 25) % 2 == 0)).collect();
        let cfg = GbdtConfig {
            n_trees: 3,
            max_depth: 2,
            min_samples_leaf: 2,
            ..GbdtConfig::default()
        };
        let m = fit(&matrix(&xs), &y, &cfg).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
    }
}
