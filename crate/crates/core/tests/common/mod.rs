#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stratshap::models::{Tree, TreeNode};
use stratshap::{Model, TreeEnsemble};

/// Shapley values by averaging marginal contributions over all `M!` orderings.
/// Independent of the subset-weight route used by the engine.
pub fn brute_force_by_orderings(table: &[f64], m: usize) -> Vec<f64> {
    let mut phi = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut s = 0usize;
        for &j in perm {
            phi[j] += table[s | (1 << j)] - table[s];
            s |= 1 << j;
        }
        count += 1;
    });
    phi.iter().map(|p| p / count as f64).collect()
}

fn permute(order: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == order.len() {
        visit(order);
        return;
    }
    for i in k..order.len() {
        order.swap(k, i);
        permute(order, k + 1, visit);
        order.swap(k, i);
    }
}

/// Random full-depth trees over `m` features, thresholds in [-1, 1].
pub fn random_tree_ensemble(m: usize, trees: usize, depth: usize, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..trees {
        let mut nodes = Vec::new();
        build(&mut nodes, depth, m, &mut rng);
        out.push(Tree { nodes });
    }
    Model::TreeEnsemble(TreeEnsemble {
        base_score: rng.gen_range(-1.0..1.0),
        n_features: Some(m),
        trees: out,
    })
}

fn build(nodes: &mut Vec<TreeNode>, depth: usize, m: usize, rng: &mut ChaCha8Rng) -> usize {
    let idx = nodes.len();
    if depth == 0 {
        nodes.push(TreeNode::Leaf { leaf: rng.gen_range(-1.0..1.0) });
        return idx;
    }
    nodes.push(TreeNode::Leaf { leaf: 0.0 });
    let feature = rng.gen_range(0..m);
    let threshold = rng.gen_range(-1.0..1.0);
    let left = build(nodes, depth - 1, m, rng);
    let right = build(nodes, depth - 1, m, rng);
    nodes[idx] = TreeNode::Split { feature, threshold, left, right };
    idx
}

pub fn uniform_rows(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect()
}

pub fn names(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("x{j}")).collect()
}
