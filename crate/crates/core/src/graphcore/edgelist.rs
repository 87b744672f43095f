//! Plain-text edge lists: a `#nodes N` header followed by one `u v w` line per
//! edge (`u v` for trees). Blank lines are ignored. Weights are written with
//! the shortest representation that round-trips exactly.

use std::fmt::Write as _;

use super::{GraphError, Result, Tree, WeightedGraph};

fn parse_err(line: usize, msg: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        msg: msg.into(),
    }
}

fn header_and_body(text: &str) -> Result<(usize, Vec<(usize, Vec<&str>)>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing `#nodes N` header"))?;
    let n = header
        .strip_prefix("#nodes")
        .ok_or_else(|| parse_err(hline, "missing `#nodes N` header"))?
        .trim()
        .parse::<usize>()
        .map_err(|e| parse_err(hline, format!("bad node count: {e}")))?;
    let body = lines
        .map(|(i, l)| (i, l.split_whitespace().collect()))
        .collect();
    Ok((n, body))
}

fn parse_id(line: usize, field: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("bad node id `{field}`")))
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let (n, body) = header_and_body(text)?;
    let mut edges = Vec::with_capacity(body.len());
    for (line, fields) in body {
        if fields.len() != 3 {
            return Err(parse_err(line, format!("expected `u v w`, got {} fields", fields.len())));
        }
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad weight `{}`", fields[2])))?;
        edges.push((parse_id(line, fields[0])?, parse_id(line, fields[1])?, w));
    }
    WeightedGraph::new(n, edges)
}

pub fn write_graph(graph: &WeightedGraph) -> String {
    let mut out = format!("#nodes {}\n", graph.node_count());
    for e in graph.edges() {
        let _ = writeln!(out, "{} {} {:?}", e.u, e.v, e.weight);
    }
    out
}

pub fn parse_tree(text: &str) -> Result<Tree> {
    let (n, body) = header_and_body(text)?;
    let mut edges = Vec::with_capacity(body.len());
    for (line, fields) in body {
        if fields.len() != 2 {
            return Err(parse_err(line, format!("expected `u v`, got {} fields", fields.len())));
        }
        edges.push((parse_id(line, fields[0])?, parse_id(line, fields[1])?));
    }
    Tree::new(n, edges)
}

pub fn write_tree(tree: &Tree) -> String {
    let mut out = format!("#nodes {}\n", tree.node_count());
    for (u, v) in tree.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_roundtrip_is_exact() {
        let g = WeightedGraph::new(3, [(0, 1, 0.1 + 0.2), (1, 2, -1e-300), (0, 2, 1.0)]).unwrap();
        let text = write_graph(&g);
        assert!(text.starts_with("#nodes 3\n0 1 0.30000000000000004\n"));
        assert_eq!(parse_graph(&text).unwrap(), g);
    }

    #[test]
    fn tree_roundtrip() {
        let t = Tree::star(5, 2).unwrap();
        assert_eq!(parse_tree(&write_tree(&t)).unwrap(), t);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(parse_graph("0 1 2\n"), Err(GraphError::Parse { line: 1, .. })));
        assert!(matches!(
            parse_graph("#nodes 3\n0 1 0.5\n\n1 2 x\n"),
            Err(GraphError::Parse { line: 4, .. })
        ));
        assert!(matches!(parse_tree("#nodes 2\n0 1 1.0\n"), Err(GraphError::Parse { line: 2, .. })));
        assert!(matches!(parse_tree("#nodes 3\n0 1\n"), Err(GraphError::EdgeCount { .. })));
    }
}
