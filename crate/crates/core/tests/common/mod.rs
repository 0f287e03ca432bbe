//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use growth_target::features::FeatureMatrix;
use growth_target::gbdt::{GbdtConfig, Node, Tree, TreeEnsemble};
use growth_target::ingest::DatasetBundle;
use growth_target::syndata::{generate, GeneratorConfig, GroundTruth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_bundle(n_clients: usize, seed: u64) -> (DatasetBundle, GroundTruth) {
    let cfg = GeneratorConfig {
        n_clients,
        n_competitors: n_clients,
        seed,
        ..GeneratorConfig::default()
    };
    generate(&cfg).expect("generator")
}

/// Per-client (v_pre, v_post, labels, eligible) by direct month arithmetic.
pub struct OracleLabel {
    pub v_pre: f64,
    pub v_post: f64,
    pub labels: Vec<u8>,
    pub eligible: bool,
}

pub fn oracle_labels(bundle: &DatasetBundle, taus: &[f64]) -> BTreeMap<String, OracleLabel> {
    let idx = |y: i32, m: u32| y * 12 + m as i32 - 1;
    let mut out = BTreeMap::new();
    for c in &bundle.clients {
        let inst = idx(c.install_month.year(), c.install_month.month());
        let (mut pre, mut post) = (0.0, 0.0);
        for t in bundle.transactions.iter().filter(|t| t.client_id == c.client_id) {
            let d = idx(t.month.year(), t.month.month()) - inst;
            if (-12..=-1).contains(&d) {
                pre += t.volume_hl;
            } else if (1..=12).contains(&d) {
                post += t.volume_hl;
            }
        }
        let eligible = pre >= 0.01;
        let labels = taus
            .iter()
            .map(|&tau| u8::from(eligible && (post - pre) / pre >= tau))
            .collect();
        out.insert(
            c.client_id.clone(),
            OracleLabel {
                v_pre: pre,
                v_post: post,
                labels,
                eligible,
            },
        );
    }
    out
}

/// AUC by counting every positive/negative pair, ties as one half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for i in 0..scores.len() {
        if labels[i] != 1 {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            twice += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Precision of the top K after a stable sort by (score desc, id asc).
pub fn precision_at_k_oracle(scores: &[f64], labels: &[u8], ids: &[String], k: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let k = k.min(scores.len());
    order[..k].iter().filter(|&&i| labels[i] == 1).count() as f64 / k as f64
}

/// Random tree with consistent covers. Thresholds are drawn from {0, 1, 2}
/// and every split sends missing values one way at random.
pub fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_depth: usize) -> Tree {
    fn grow(
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<Node>,
        n_features: usize,
        depth: usize,
        max_depth: usize,
    ) -> (usize, f64) {
        let id = nodes.len();
        if depth == max_depth || (depth > 0 && rng.random::<f64>() < 0.25) {
            let cover = rng.random_range(1..20) as f64;
            nodes.push(Node::Leaf {
                value: rng.random_range(-1.0..1.0),
                cover,
            });
            return (id, cover);
        }
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        let (left, cl) = grow(rng, nodes, n_features, depth + 1, max_depth);
        let (right, cr) = grow(rng, nodes, n_features, depth + 1, max_depth);
        nodes[id] = Node::Split {
            feature: rng.random_range(0..n_features),
            threshold: rng.random_range(0..3) as f64 + 0.5,
            missing_left: rng.random(),
            left,
            right,
            cover: cl + cr,
        };
        (id, cl + cr)
    }
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, n_features, 0, max_depth);
    Tree { nodes }
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, n_features: usize, n_trees: usize) -> TreeEnsemble {
    let mut m = TreeEnsemble::base_only(
        rng.random_range(-1.0..1.0),
        (0..n_features).map(|j| format!("F{j}")).collect(),
        GbdtConfig::default(),
    );
    for _ in 0..n_trees {
        m.trees.push(random_tree(rng, n_features, 4));
    }
    m
}

/// Path-dependent conditional expectation of one tree given the features in
/// `known` (bitmask).
fn cond_expectation(tree: &Tree, node: usize, x: &[f64], known: u32) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => *value,
        Node::Split {
            feature,
            threshold,
            missing_left,
            left,
            right,
            cover,
        } => {
            if known & (1 << feature) != 0 {
                let v = x[*feature];
                let go_left = if v.is_nan() { *missing_left } else { v <= *threshold };
                cond_expectation(tree, if go_left { *left } else { *right }, x, known)
            } else {
                let cl = tree.nodes[*left].cover();
                let cr = tree.nodes[*right].cover();
                (cl * cond_expectation(tree, *left, x, known)
                    + cr * cond_expectation(tree, *right, x, known))
                    / cover
            }
        }
    }
}

/// Exact Shapley values by enumerating all 2^m coalitions.
pub fn brute_force_shap(model: &TreeEnsemble, x: &[f64]) -> Vec<f64> {
    let m = x.len();
    assert!(m <= 16);
    let v: Vec<f64> = (0..1u32 << m)
        .map(|s| model.trees.iter().map(|t| cond_expectation(t, 0, x, s)).sum())
        .collect();
    let fact: Vec<f64> = (0..=m).scan(1.0, |acc, i| {
        if i > 0 {
            *acc *= i as f64;
        }
        Some(*acc)
    })
    .collect();
    (0..m)
        .map(|i| {
            let mut phi = 0.0;
            for s in 0..1u32 << m {
                if s & (1 << i) != 0 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = fact[size] * fact[m - size - 1] / fact[m];
                phi += w * (v[(s | (1 << i)) as usize] - v[s as usize]);
            }
            phi
        })
        .collect()
}

/// Matrix from a row-major grid with generated ids and names.
pub fn matrix(n_rows: usize, n_cols: usize, values: Vec<f64>) -> FeatureMatrix {
    FeatureMatrix::from_rows(
        (0..n_rows).map(|i| format!("C{i:05}")).collect(),
        (0..n_cols).map(|j| format!("F{j}")).collect(),
        values,
    )
    .unwrap()
}

/// Two interleaved XOR clusters on features F0, F1.
pub fn xor_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut r = rng(seed);
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = r.random_range(-1.0..1.0);
        let b: f64 = r.random_range(-1.0..1.0);
        values.push(a);
        values.push(b);
        labels.push(u8::from((a > 0.0) != (b > 0.0)));
    }
    (matrix(n, 2, values), labels)
}

/// Label driven by whether F0 is missing, plus two noise columns.
pub fn missing_signal_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut r = rng(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = u8::from(r.random::<f64>() < 0.4);
        let flip = r.random::<f64>() < 0.02;
        values.push(if y == 1 { f64::NAN } else { r.random_range(-1.0..1.0) });
        values.push(r.random_range(-1.0..1.0));
        values.push(r.random_range(-1.0..1.0));
        labels.push(if flip { 1 - y } else { y });
    }
    (matrix(n, 3, values), labels)
}
