//! Random-walk node influence on trees and the information carried by a path.
//!
//! On a unit-weight tree the influence of `v` on `u` after `k = dist(u, v)`
//! walk steps is `1 / (d_u * d_{v_1} * ... * d_{v_{k-1}})`, the product of the
//! degrees of every path vertex except `v`. The matrix-power routines below
//! compute the same quantity the long way and serve as an independent check.

use thiserror::Error;

use crate::graphcore::{self, GraphError, Path, Tree};

/// Largest tree accepted by [`max_information_path_bruteforce`].
pub const BRUTEFORCE_MAX_NODES: usize = 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfluenceError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("exhaustive search is limited to {limit} nodes, tree has {nodes}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("weight matrix must be square with {expected} rows")]
    Shape { expected: usize },
}

/// Influence value in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InfluenceValue(f64);

impl InfluenceValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<InfluenceValue> for f64 {
    fn from(v: InfluenceValue) -> f64 {
        v.0
    }
}

/// Closed-form influence of `v` on `u` at `k = dist(u, v)` steps.
pub fn node_influence_closed(tree: &Tree, u: usize, v: usize) -> Result<InfluenceValue, InfluenceError> {
    let path = graphcore::shortest_path(tree, u, v)?;
    let vs = path.vertices();
    let mut denom = 1.0;
    for &x in &vs[..vs.len() - 1] {
        denom *= tree.degree(x)? as f64;
    }
    Ok(InfluenceValue(1.0 / denom))
}

/// Row-normalized transition matrix `D^{-1} A` of a symmetric weight matrix.
/// Rows of isolated nodes stay zero.
pub fn transition_matrix(weights: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, InfluenceError> {
    let n = weights.len();
    if weights.iter().any(|r| r.len() != n) {
        return Err(InfluenceError::Shape { expected: n });
    }
    Ok(weights
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                vec![0.0; n]
            } else {
                row.iter().map(|a| a / s).collect()
            }
        })
        .collect())
}

/// `|(P^k)_{uv}|` for the transition matrix of an arbitrary weighted graph.
pub fn node_influence_oracle_weighted(
    weights: &[Vec<f64>],
    u: usize,
    v: usize,
    k: usize,
) -> Result<f64, InfluenceError> {
    let p = transition_matrix(weights)?;
    let n = p.len();
    for node in [u, v] {
        if node >= n {
            return Err(GraphError::InvalidNode { node, node_count: n }.into());
        }
    }
    // propagate the unit row vector e_u through k steps: r <- r P
    let mut row = vec![0.0; n];
    row[u] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; n];
        for (i, &ri) in row.iter().enumerate() {
            if ri != 0.0 {
                for (nj, pij) in next.iter_mut().zip(&p[i]) {
                    *nj += ri * pij;
                }
            }
        }
        row = next;
    }
    Ok(row[v].abs())
}

/// Unit-weight adjacency matrix of a tree.
pub fn adjacency_matrix(tree: &Tree) -> Vec<Vec<f64>> {
    let n = tree.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v) in tree.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

/// `|(P^k)_{uv}|` with `P` the random-walk matrix of the unit-weight tree.
pub fn node_influence_oracle(tree: &Tree, u: usize, v: usize, k: usize) -> Result<f64, InfluenceError> {
    node_influence_oracle_weighted(&adjacency_matrix(tree), u, v, k)
}

/// Sum of influences over ordered vertex pairs of `path`, with degrees taken
/// inside the path itself (endpoints 1, interior vertices 2).
pub fn path_information_literal(path: &Path) -> f64 {
    let m = path.len();
    if m == 0 {
        return 0.0;
    }
    let chain = Tree::chain(m + 1).expect("chain is a tree");
    let mut total = 0.0;
    for i in 0..=m {
        for j in 0..=m {
            if i != j {
                total += node_influence_closed(&chain, i, j)
                    .expect("chain ids are valid")
                    .value();
            }
        }
    }
    total
}

/// `sum_{k=1}^{d} (d - k + 1) * 2 / 2^{k-1}`.
pub fn path_information_closed_form(diameter: usize) -> f64 {
    (1..=diameter)
        .map(|k| (diameter - k + 1) as f64 * 2.0 / 2f64.powi(k as i32 - 1))
        .sum()
}

/// Exhaustive argmax of [`path_information_literal`] over the paths between
/// all vertex pairs `u < v`; the lexicographically first pair wins ties.
pub fn max_information_path_bruteforce(tree: &Tree) -> Result<Path, InfluenceError> {
    let n = tree.node_count();
    if n > BRUTEFORCE_MAX_NODES {
        return Err(InfluenceError::TooLarge {
            nodes: n,
            limit: BRUTEFORCE_MAX_NODES,
        });
    }
    let mut best = Path::new(vec![0])?;
    let mut best_info = 0.0;
    for u in 0..n {
        for v in u + 1..n {
            let p = graphcore::shortest_path(tree, u, v)?;
            let info = path_information_literal(&p);
            if info > best_info {
                best = p;
                best_info = info;
            }
        }
    }
    Ok(best)
}

/// One row of the influence audit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceAudit {
    pub u: usize,
    pub v: usize,
    pub closed: f64,
    pub oracle: f64,
}

impl InfluenceAudit {
    pub fn abs_diff(&self) -> f64 {
        (self.closed - self.oracle).abs()
    }
}

/// Closed form against the matrix-power oracle for every ordered pair.
pub fn audit(tree: &Tree) -> Vec<InfluenceAudit> {
    let n = tree.node_count();
    let p = transition_matrix(&adjacency_matrix(tree)).expect("square");
    let mut out = Vec::with_capacity(n * n);
    for u in 0..n {
        let dist = tree.distances_from(u).expect("valid id");
        // one pass of powers of P from e_u, reading column v at step dist(u, v)
        let max_k = *dist.iter().max().unwrap_or(&0);
        let mut at_distance = vec![0.0; n];
        let mut row = vec![0.0f64; n];
        row[u] = 1.0;
        for k in 0..=max_k {
            for v in 0..n {
                if dist[v] == k {
                    at_distance[v] = row[v].abs();
                }
            }
            let mut next = vec![0.0; n];
            for (i, &ri) in row.iter().enumerate() {
                if ri != 0.0 {
                    for (nj, pij) in next.iter_mut().zip(&p[i]) {
                        *nj += ri * pij;
                    }
                }
            }
            row = next;
        }
        for v in 0..n {
            let closed = node_influence_closed(tree, u, v).expect("valid ids").value();
            out.push(InfluenceAudit {
                u,
                v,
                closed,
                oracle: at_distance[v],
            });
        }
    }
    out
}

pub fn audit_csv(rows: &[InfluenceAudit]) -> String {
    let mut out = String::from("u,v,closed,oracle,abs_diff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:?},{:?},{:?}\n",
            r.u,
            r.v,
            r.closed,
            r.oracle,
            r.abs_diff()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_influences() {
        let star = Tree::star(4, 0).unwrap();
        assert_eq!(node_influence_closed(&star, 1, 0).unwrap().value(), 1.0);
        assert_eq!(node_influence_closed(&star, 0, 1).unwrap().value(), 1.0 / 3.0);
        assert_eq!(node_influence_closed(&star, 2, 2).unwrap().value(), 1.0);
        assert_eq!(node_influence_oracle(&star, 1, 0, 1).unwrap(), 1.0);
        assert_eq!(node_influence_oracle(&star, 0, 1, 1).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn oracle_examples() {
        let chain = Tree::chain(3).unwrap();
        assert_eq!(node_influence_oracle(&chain, 0, 2, 2).unwrap(), 0.5);
        assert_eq!(node_influence_oracle(&chain, 1, 1, 0).unwrap(), 1.0);
        assert_eq!(node_influence_oracle(&chain, 0, 1, 0).unwrap(), 0.0);
        assert!(node_influence_oracle(&chain, 0, 3, 1).is_err());
    }

    #[test]
    fn weighted_oracle_follows_edge_weights() {
        // 0 -(2)- 1 -(1)- 2 : from 0, one step always reaches 1; from 1 the
        // walk goes to 0 with prob 2/3 and to 2 with prob 1/3
        let w = vec![vec![0.0, 2.0, 0.0], vec![2.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]];
        assert!((node_influence_oracle_weighted(&w, 0, 2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((node_influence_oracle_weighted(&w, 1, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn path_information_small_cases() {
        assert_eq!(path_information_literal(&Path::new(vec![4]).unwrap()), 0.0);
        assert_eq!(path_information_literal(&Path::new(vec![0, 1]).unwrap()), 2.0);
        assert_eq!(path_information_literal(&Path::new(vec![2, 0, 1]).unwrap()), 4.0);
        assert_eq!(path_information_closed_form(0), 0.0);
        assert_eq!(path_information_closed_form(1), 2.0);
        assert_eq!(path_information_closed_form(2), 5.0);
    }

    #[test]
    fn bruteforce_examples() {
        let star = Tree::star(4, 0).unwrap();
        assert_eq!(max_information_path_bruteforce(&star).unwrap().vertices(), &[1, 0, 2]);
        let chain = Tree::chain(6).unwrap();
        assert_eq!(
            max_information_path_bruteforce(&chain).unwrap().vertices(),
            &[0, 1, 2, 3, 4, 5]
        );
        let big = Tree::chain(BRUTEFORCE_MAX_NODES + 1).unwrap();
        assert!(matches!(
            max_information_path_bruteforce(&big),
            Err(InfluenceError::TooLarge { .. })
        ));
    }

    #[test]
    fn audit_rows_agree() {
        let t = Tree::new(6, [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)]).unwrap();
        let rows = audit(&t);
        assert_eq!(rows.len(), 36);
        assert!(rows.iter().all(|r| r.abs_diff() <= 1e-12));
        let csv = audit_csv(&rows[..1]);
        assert_eq!(csv, "u,v,closed,oracle,abs_diff\n0,0,1.0,1.0,0.0\n");
    }
}
