mod common;

use common::{all_pairs_diameter, check_trunk_invariants, connected_graph, exhaustive_max_spanning_weight, tree, tree_weight};
use hemon_core::connectome::{pearson_correlation, TimeSeriesMatrix};
use hemon_core::graphcore::{longest_shortest_path, max_spanning_tree, shortest_path, Tree, WeightedGraph};
use hemon_core::influence::{
    audit, max_information_path_bruteforce, node_influence_closed, node_influence_oracle,
    path_information_closed_form, path_information_literal,
};
use proptest::prelude::*;

fn small_tree(max: usize) -> impl Strategy<Value = Tree> {
    (2..=max, any::<u64>()).prop_map(|(n, seed)| tree(n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mst_matches_exhaustive_maximum(n in 2usize..=7, density in 0.0f64..1.0, seed in any::<u64>()) {
        let g = connected_graph(n, density, seed);
        let t = max_spanning_tree(&g).unwrap();
        prop_assert_eq!(t.edges().len(), n - 1);
        prop_assert_eq!(tree_weight(&g, &t), exhaustive_max_spanning_weight(&g));
    }

    #[test]
    fn mst_is_deterministic_and_shift_invariant(n in 2usize..=12, seed in any::<u64>(), shift in -3.0f64..3.0) {
        let g = connected_graph(n, 0.5, seed);
        let t = max_spanning_tree(&g).unwrap();
        prop_assert_eq!(&t, &max_spanning_tree(&g).unwrap());
        // a constant shift keeps the edge order of the sort
        let shifted = WeightedGraph::new(n, g.edges().iter().map(|e| (e.u, e.v, e.weight + shift))).unwrap();
        let ts = max_spanning_tree(&shifted).unwrap();
        let order = |g: &WeightedGraph| {
            let mut w: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
            w.sort_by(|a, b| g.weight(b.0, b.1).unwrap().total_cmp(&g.weight(a.0, a.1).unwrap()).then(a.cmp(b)));
            w
        };
        if order(&g) == order(&shifted) {
            prop_assert_eq!(t, ts);
        }
    }

    #[test]
    fn diameter_path_matches_all_pairs(t in small_tree(12)) {
        let p = longest_shortest_path(&t);
        prop_assert_eq!(p.len(), all_pairs_diameter(&t));
        prop_assert_eq!(t.diameter(), p.len());
        prop_assert!(p.first() < p.last());
        for (u, v) in p.edges() {
            prop_assert!(t.has_edge(u, v));
        }
    }

    #[test]
    fn shortest_path_is_symmetric(t in small_tree(15), a in any::<usize>(), b in any::<usize>()) {
        let n = t.node_count();
        let (u, v) = (a % n, b % n);
        let p = shortest_path(&t, u, v).unwrap();
        prop_assert_eq!(p.clone().reversed(), shortest_path(&t, v, u).unwrap());
        prop_assert_eq!(p.len(), t.distances_from(u).unwrap()[v]);
    }

    #[test]
    fn pearson_is_affine_invariant(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 6..20),
        scale in prop::collection::vec(0.1f64..10.0, 4),
        offset in prop::collection::vec(-50.0f64..50.0, 4),
    ) {
        let base = TimeSeriesMatrix::from_rows(rows.clone()).unwrap();
        let Ok(c) = pearson_correlation(&base) else { return Ok(()) };
        let moved: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, x)| scale[j] * x + offset[j]).collect())
            .collect();
        let c2 = pearson_correlation(&TimeSeriesMatrix::from_rows(moved).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((c.get(i, j) - c2.get(i, j)).abs() <= 1e-12);
                prop_assert!(c.get(i, j).abs() <= 1.0);
                prop_assert_eq!(c.get(i, j), c.get(j, i));
            }
        }
    }

    #[test]
    fn closed_influence_matches_matrix_powers(t in small_tree(30)) {
        for row in audit(&t) {
            prop_assert!(row.abs_diff() <= 1e-12, "({}, {}): {} vs {}", row.u, row.v, row.closed, row.oracle);
        }
    }

    #[test]
    fn influence_is_zero_before_the_walk_arrives(t in small_tree(12), a in any::<usize>(), b in any::<usize>()) {
        let n = t.node_count();
        let (u, v) = (a % n, b % n);
        let d = t.distances_from(u).unwrap()[v];
        if d > 0 {
            prop_assert_eq!(node_influence_oracle(&t, u, v, d - 1).unwrap(), 0.0);
        }
        prop_assert!(node_influence_closed(&t, u, v).unwrap().value() > 0.0);
    }

    #[test]
    fn extending_a_path_adds_information(t in small_tree(12)) {
        // every shortest path extended by one tree edge carries more information
        let n = t.node_count();
        for u in 0..n {
            for v in 0..n {
                if u == v { continue; }
                let p = shortest_path(&t, u, v).unwrap();
                for &w in t.neighbors(v).unwrap() {
                    if !p.vertices().contains(&w) {
                        let longer = shortest_path(&t, u, w).unwrap();
                        prop_assert!(path_information_literal(&longer) > path_information_literal(&p));
                    }
                }
            }
        }
    }

    #[test]
    fn most_informative_path_is_a_diameter(t in small_tree(12)) {
        let p = max_information_path_bruteforce(&t).unwrap();
        prop_assert_eq!(p.len(), all_pairs_diameter(&t));
    }

    #[test]
    fn trunk_invariants(t in small_tree(264)) {
        if let Err(e) = check_trunk_invariants(&t) {
            prop_assert!(false, "{}", e);
        }
    }
}

#[test]
fn information_increases_with_length() {
    for m in 1..20 {
        let chain = |len: usize| hemon_core::graphcore::Path::new((0..=len).collect()).unwrap();
        assert!(path_information_literal(&chain(m + 1)) > path_information_literal(&chain(m)));
        assert!(path_information_closed_form(m + 1) > path_information_closed_form(m));
    }
}
