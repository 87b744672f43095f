#![allow(dead_code)]

use hemon_core::graphcore::Tree;
use hemon_core::hemon::{gradient, Matrix, ModelConfig, Network, Sample, Target};
use hemon_core::rng::{substream, Stream};
use hemon_core::synth::random_tree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled tree on `n` nodes.
pub fn tree(n: usize, seed: u64) -> Tree {
    random_tree(n, &mut rng(seed)).0
}

/// Random tree with a uniformly random size in
/// `lo..=hi`.
pub fn tree_in(lo: usize, hi: usize, seed: u64) -> Tree {
    let mut r = rng(seed);
    let n = r.random_range(lo..=hi);
    random_tree(n, &mut r).0
}

pub fn tiny_config(categories: usize) -> ModelConfig {
    let mut c = ModelConfig::regression(1, categories);
    c.embed_dim = 3;
    c.hidden_dim = 4;
    c.lstm_layers = 2;
    c
}

pub fn random_sample(n: usize, categories: usize, seed: u64) -> Sample {
    let mut r = rng(seed);
    Sample {
        features: Matrix::from_vec(n, 1, (0..n).map(|_| r.random_range(-1.5..1.5)).collect()),
        target: Target::Ratings((0..categories).map(|_| r.random_range(0.0..100.0)).collect()),
    }
}

/// Flattened copy of every parameter, in `params()` order.
pub fn flat_params<M: Network>(m: &M) -> Vec<Vec<f64>> {
    m.params().into_iter().map(|(_, p)| p.data().to_vec()).collect()
}

/// Random connected weighted graph on `n` nodes: a random spanning tree plus
/// each remaining pair with probability `density`. Weights are uniform in
/// `[-1, 1)`.
pub fn connected_graph(n: usize, density: f64, seed: u64) -> hemon_core::graphcore::WeightedGraph {
    let mut r = rng(seed);
    let (t, _) = random_tree(n, &mut r);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if t.has_edge(u, v) || r.random_bool(density) {
                edges.push((u, v, r.random_range(-1.0..1.0)));
            }
        }
    }
    hemon_core::graphcore::WeightedGraph::new(n, edges).unwrap()
}

/// Sum of `weights` taken in ascending order, so that equal multisets give
/// bit-identical totals.
pub fn canonical_sum(mut weights: Vec<f64>) -> f64 {
    weights.sort_by(f64::total_cmp);
    weights.iter().sum()
}

/// Maximum total weight over every spanning tree, by include/exclude search
/// over the edge list with a union-find cycle check.
pub fn exhaustive_max_spanning_weight(g: &hemon_core::graphcore::WeightedGraph) -> f64 {
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    fn go(
        edges: &[(usize, usize, f64)],
        i: usize,
        parent: &mut Vec<usize>,
        chosen: &mut Vec<f64>,
        need: usize,
        best: &mut f64,
    ) {
        if chosen.len() == need {
            *best = best.max(canonical_sum(chosen.clone()));
            return;
        }
        if i == edges.len() || edges.len() - i < need - chosen.len() {
            return;
        }
        let (u, v, w) = edges[i];
        let (ru, rv) = (find(parent, u), find(parent, v));
        if ru != rv {
            let saved = parent.clone();
            parent[ru] = rv;
            chosen.push(w);
            go(edges, i + 1, parent, chosen, need, best);
            chosen.pop();
            *parent = saved;
        }
        go(edges, i + 1, parent, chosen, need, best);
    }
    let edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
    let n = g.node_count();
    let mut best = f64::NEG_INFINITY;
    go(&edges, 0, &mut (0..n).collect(), &mut Vec::new(), n - 1, &mut best);
    best
}

/// Tree total weight of `tree` measured in `g`, summed canonically.
pub fn tree_weight(g: &hemon_core::graphcore::WeightedGraph, tree: &Tree) -> f64 {
    canonical_sum(tree.edges().iter().map(|&(u, v)| g.weight(u, v).unwrap()).collect())
}

/// Diameter from BFS out of every node.
pub fn all_pairs_diameter(tree: &Tree) -> usize {
    (0..tree.node_count())
        .map(|u| *tree.distances_from(u).unwrap().iter().max().unwrap())
        .max()
        .unwrap()
}

/// Ten-node worked example, labelled u0 = 0, v0..v6 = 1..7, u1 = 8, u2 = 9.
pub fn worked_example_tree() -> Tree {
    let v = |i: usize| i + 1;
    let (u0, u1, u2) = (0, 8, 9);
    let mut edges: Vec<(usize, usize)> = (0..6).map(|i| (v(i), v(i + 1))).collect();
    edges.extend([(u1, u2), (v(2), u0), (v(3), u1)]);
    Tree::new(10, edges).unwrap()
}

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

/// Per parameter group `||analytic - numeric|| / (||analytic|| + ||numeric||)`
/// using central differences on the batch loss. With `dropout_seed` set, the
/// same dropout masks are replayed for every evaluation.
pub fn gradient_errors<M: Network>(model: &M, batch: &[&Sample], dropout_seed: Option<u64>) -> Vec<(String, f64)> {
    let rng = || dropout_seed.map(|s| substream(s, Stream::Dropout));
    let loss = |m: &M| {
        let mut r = rng();
        gradient(m, batch, r.as_mut()).unwrap().0
    };
    let mut r = rng();
    let (_, analytic) = gradient(model, batch, r.as_mut()).unwrap();
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = analytic.params().into_iter().map(|(_, p)| p.data().to_vec()).collect();
    let mut out = Vec::new();
    for (g, name) in names.iter().enumerate() {
        let len = analytic[g].len();
        let mut diff = 0.0;
        let mut na = 0.0;
        let mut nn = 0.0;
        for i in 0..len {
            let mut plus = model.clone();
            plus.params_mut()[g].data_mut()[i] += FD_STEP;
            let mut minus = model.clone();
            minus.params_mut()[g].data_mut()[i] -= FD_STEP;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * FD_STEP);
            let a = analytic[g][i];
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
        }
        let rel = if na + nn == 0.0 { 0.0 } else { diff.sqrt() / (na.sqrt() + nn.sqrt()) };
        out.push((name.clone(), rel));
    }
    out
}

pub fn assert_close(report: &[(String, f64)]) {
    for (name, rel) in report {
        assert!(*rel <= GRAD_TOL, "{name}: relative error {rel:e}");
    }
}


/// Edge partition, node coverage, vertex-disjoint trunks within a level,
/// `L <= |E| + 1`, level-1 length equal to the diameter, removal trace
/// consistency and determinism of the decomposition.
pub fn check_trunk_invariants(t: &Tree) -> Result<(), String> {
    use hemon_core::trunks::{area_at, decompose, decompose_with_trace};
    use std::collections::BTreeSet;

    let (h, removed) = decompose_with_trace(t);
    if h != decompose(t) {
        return Err("decomposition is not deterministic".into());
    }
    let mut seen = BTreeSet::new();
    for trunk in h.all_trunks() {
        for e in trunk.path.edges() {
            if !t.has_edge(e.0, e.1) {
                return Err(format!("trunk edge {e:?} not in tree"));
            }
            if !seen.insert(e) {
                return Err(format!("edge {e:?} on two trunks"));
            }
        }
    }
    if seen.len() != t.edges().len() {
        return Err(format!("{} of {} edges covered", seen.len(), t.edges().len()));
    }
    let mut covered = BTreeSet::new();
    for level in 1..=h.level_count() {
        let mut used = BTreeSet::new();
        for trunk in h.trunks(level).unwrap() {
            if trunk.level != level {
                return Err(format!("trunk labelled {} stored at level {level}", trunk.level));
            }
            for &v in trunk.path.vertices() {
                if !used.insert(v) {
                    return Err(format!("node {v} on two trunks of level {level}"));
                }
                covered.insert(v);
            }
        }
        if area_at(&h, level).unwrap().nodes != used.into_iter().collect::<Vec<_>>() {
            return Err(format!("area {level} differs from its trunk nodes"));
        }
    }
    if covered.len() != t.node_count() {
        return Err(format!("{} of {} nodes covered", covered.len(), t.node_count()));
    }
    if h.level_count() > t.edges().len() + 1 {
        return Err(format!("{} levels for {} edges", h.level_count(), t.edges().len()));
    }
    if h.trunks(1).unwrap()[0].path.len() != all_pairs_diameter(t) {
        return Err("level-1 trunk is not a diameter".into());
    }
    for (l, dropped) in removed.iter().enumerate() {
        for v in dropped {
            if !(1..=l + 1).any(|k| area_at(&h, k).unwrap().nodes.contains(v)) {
                return Err(format!("node {v} dropped after level {} without a trunk", l + 1));
            }
        }
    }
    if removed.iter().map(Vec::len).sum::<usize>() != t.node_count() {
        return Err("removal trace does not account for every node".into());
    }
    Ok(())
}
