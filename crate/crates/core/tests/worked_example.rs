//! The ten-node worked example: a seven-node chain v0..v6 with u0 hanging off
//! v2 and the branch u1 - u2 hanging off v3.

mod common;

use common::{worked_example_tree, tiny_config};
use hemon_core::graphcore::{connected_components, longest_shortest_path, Forest};
use hemon_core::hemon::{build_ea1_variant, dft_sequence, HemonModel, Matrix, Network};
use hemon_core::influence::max_information_path_bruteforce;
use hemon_core::trunks::{area_at, decompose, decompose_with_trace, TrunkHierarchy};

const U0: usize = 0;
const U1: usize = 8;
const U2: usize = 9;
const V: [usize; 7] = [1, 2, 3, 4, 5, 6, 7];

#[test]
fn main_trunk_is_the_chain() {
    let t = worked_example_tree();
    let p = longest_shortest_path(&t);
    assert_eq!(p.vertices(), &V);
    assert_eq!(p.len(), 6);
    assert_eq!(max_information_path_bruteforce(&t).unwrap(), p);
}

#[test]
fn forest_after_main_trunk_has_two_components() {
    let t = worked_example_tree();
    let mut f = Forest::from_tree(&t);
    for w in V.windows(2) {
        assert!(f.remove_edge(w[0], w[1]));
    }
    let dropped = f.remove_isolated();
    assert_eq!(dropped, vec![V[0], V[1], V[4], V[5], V[6]]);
    let comps: Vec<Vec<usize>> = connected_components(&f).into_iter().map(|c| c.nodes).collect();
    assert_eq!(comps, vec![vec![U0, V[2]], vec![V[3], U1, U2]]);
}

#[test]
fn two_levels_of_trunks() {
    let (h, removed) = decompose_with_trace(&worked_example_tree());
    assert_eq!(h.level_count(), 2);
    let paths = |level| -> Vec<Vec<usize>> {
        h.trunks(level)
            .unwrap()
            .iter()
            .map(|t| t.path.vertices().to_vec())
            .collect()
    };
    assert_eq!(paths(1), vec![V.to_vec()]);
    assert_eq!(paths(2), vec![vec![U0, V[2]], vec![V[3], U1, U2]]);
    assert_eq!(area_at(&h, 1).unwrap().nodes, V.to_vec());
    let mut a2 = vec![U0, V[2], V[3], U1, U2];
    a2.sort_unstable();
    assert_eq!(area_at(&h, 2).unwrap().nodes, a2);
    // junction nodes shared across levels
    let a1 = area_at(&h, 1).unwrap().nodes;
    let shared: Vec<usize> = a2.iter().copied().filter(|v| a1.contains(v)).collect();
    assert_eq!(shared, vec![V[2], V[3]]);
    assert_eq!(removed, vec![vec![V[0], V[1], V[4], V[5], V[6]], vec![U0, V[2], V[3], U1, U2]]);
    assert!(area_at(&h, 3).is_err());
}

#[test]
fn hierarchy_document_roundtrip() {
    let h = decompose(&worked_example_tree());
    let doc = h.to_document();
    assert_eq!(doc.levels.len(), 2);
    assert_eq!(TrunkHierarchy::from_json(&h.to_json()).unwrap(), h);
}

#[test]
fn level_two_sums_two_trunk_lstms() {
    let h = decompose(&worked_example_tree());
    let model = HemonModel::new(tiny_config(2), &h).unwrap();
    let x = Matrix::from_vec(10, 1, (0..10).map(|i| 0.3 * i as f64 - 1.0).collect());
    let e = model.embed(&x);
    let stack = &model.stacks[model.levels[1].stack];
    let seq = |ids: &[usize]| ids.iter().map(|&v| e[v].clone()).collect::<Vec<_>>();
    let a = stack.output(&seq(&[U0, V[2]]));
    let b = stack.output(&seq(&[V[3], U1, U2]));
    let level2 = model.level_representation(&x, 2).unwrap();
    for k in 0..a.len() {
        assert!((level2[k] - (a[k] + b[k])).abs() <= 1e-15);
    }
    let level1 = model.level_representation(&x, 1).unwrap();
    assert_eq!(level1, model.stacks[model.levels[0].stack].output(&seq(&V)));
}

#[test]
fn ea1_reads_only_the_main_trunk() {
    let h = decompose(&worked_example_tree());
    let model = HemonModel::new(tiny_config(2), &h).unwrap();
    let ea1 = build_ea1_variant(&model);
    assert_eq!(ea1.levels.len(), 1);
    assert_eq!(ea1.levels[0].sequences, vec![V.to_vec()]);
    assert!(ea1.parameter_count() < model.parameter_count());
}

/// Recursive preorder with ascending neighbours, written independently of
/// the iterative traversal under test.
fn preorder(t: &hemon_core::graphcore::Tree, v: usize, parent: Option<usize>, out: &mut Vec<usize>) {
    out.push(v);
    for &w in t.neighbors(v).unwrap() {
        if Some(w) != parent {
            preorder(t, w, Some(v), out);
        }
    }
}

#[test]
fn depth_first_sequence() {
    let t = worked_example_tree();
    let mut expected = Vec::new();
    preorder(&t, 0, None, &mut expected);
    // u0, v2, v1, v0, v3, v4, v5, v6, u1, u2
    assert_eq!(expected, vec![U0, V[2], V[1], V[0], V[3], V[4], V[5], V[6], U1, U2]);
    assert_eq!(dft_sequence(&t), expected);
}
