//! Undirected graphs, trees and forests over dense node ids `0..n`, plus the
//! spanning-tree and path algorithms the rest of the crate is built on.
//!
//! Every algorithm here is deterministic: whenever a choice between equal
//! candidates arises, the smaller node id wins.

mod disjoint_set;
pub mod edgelist;

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

pub use disjoint_set::DisjointSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("node {node} out of range for a graph with {node_count} nodes")]
    InvalidNode { node: usize, node_count: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("non-finite weight on edge ({u}, {v})")]
    NonFiniteWeight { u: usize, v: usize },
    #[error("graph is disconnected into {} components (smallest ids: {:?})", .components.len(), .components.iter().map(|c| c[0]).collect::<Vec<_>>())]
    Disconnected { components: Vec<Vec<usize>> },
    #[error("a tree on {node_count} nodes needs {expected} edges, got {found}")]
    EdgeCount {
        node_count: usize,
        expected: usize,
        found: usize,
    },
    #[error("edge ({0}, {1}) closes a cycle")]
    Cycle(usize, usize),
    #[error("not a path: {0}")]
    NotAPath(String),
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, GraphError>;

fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn check_node(node: usize, node_count: usize) -> Result<()> {
    if node < node_count {
        Ok(())
    } else {
        Err(GraphError::InvalidNode { node, node_count })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph without self-loops or parallel edges. Edges are
/// stored with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    edges: Vec<WeightedEdge>,
    index: HashMap<(usize, usize), usize>,
    adjacency: Vec<Vec<usize>>,
}

impl WeightedGraph {
    pub fn new<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut graph = WeightedGraph {
            node_count,
            edges: Vec::new(),
            index: HashMap::new(),
            adjacency: vec![Vec::new(); node_count],
        };
        for (u, v, weight) in edges {
            check_node(u, node_count)?;
            check_node(v, node_count)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !weight.is_finite() {
                return Err(GraphError::NonFiniteWeight { u, v });
            }
            let key = ordered(u, v);
            if graph.index.contains_key(&key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            graph.index.insert(key, graph.edges.len());
            graph.edges.push(WeightedEdge {
                u: key.0,
                v: key.1,
                weight,
            });
            graph.adjacency[u].push(v);
            graph.adjacency[v].push(u);
        }
        for nbrs in &mut graph.adjacency {
            nbrs.sort_unstable();
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.index.get(&ordered(u, v)).map(|&i| self.edges[i].weight)
    }

    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        check_node(v, self.node_count)?;
        Ok(&self.adjacency[v])
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.neighbors(v).map(|n| n.len())
    }

    /// Same graph with every weight replaced by its absolute value.
    pub fn with_abs_weights(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.weight = e.weight.abs();
        }
        out
    }

    /// Sum of the weights of the given edges. Missing edges yield `None`.
    pub fn total_weight<'a, I>(&self, edges: I) -> Option<f64>
    where
        I: IntoIterator<Item = &'a (usize, usize)>,
    {
        edges.into_iter().map(|&(u, v)| self.weight(u, v)).sum()
    }

    /// Connected components as sorted node lists ordered by smallest id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut ds = DisjointSet::new(self.node_count);
        for e in &self.edges {
            ds.union(e.u, e.v);
        }
        ds.classes()
    }
}

/// Spanning tree with implicit unit edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut ds = DisjointSet::new(node_count);
        let mut adjacency = vec![Vec::new(); node_count];
        let mut list = Vec::with_capacity(node_count - 1);
        for (u, v) in edges {
            check_node(u, node_count)?;
            check_node(v, node_count)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = ordered(u, v);
            if adjacency[u].contains(&v) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            if !ds.union(u, v) {
                return Err(GraphError::Cycle(key.0, key.1));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
            list.push(key);
        }
        if list.len() != node_count - 1 {
            return Err(GraphError::EdgeCount {
                node_count,
                expected: node_count - 1,
                found: list.len(),
            });
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        list.sort_unstable();
        Ok(Tree {
            edges: list,
            adjacency,
        })
    }

    /// The one-node tree.
    pub fn singleton() -> Self {
        Tree {
            edges: Vec::new(),
            adjacency: vec![Vec::new()],
        }
    }

    /// Chain `0 - 1 - ... - (n-1)`.
    pub fn chain(node_count: usize) -> Result<Self> {
        Tree::new(node_count, (1..node_count).map(|v| (v - 1, v)))
    }

    /// Star with `center` joined to every other node.
    pub fn star(node_count: usize, center: usize) -> Result<Self> {
        check_node(center, node_count)?;
        Tree::new(
            node_count,
            (0..node_count).filter(|&v| v != center).map(|v| (center, v)),
        )
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Edges as `(min, max)` pairs in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        check_node(v, self.node_count())?;
        Ok(&self.adjacency[v])
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.neighbors(v).map(|n| n.len())
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Hop distances from `source` to every node.
    pub fn distances_from(&self, source: usize) -> Result<Vec<usize>> {
        check_node(source, self.node_count())?;
        Ok(self.bfs(source).0)
    }

    fn bfs(&self, source: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.node_count();
        let mut dist = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        (dist, parent)
    }

    /// Number of edges on the longest shortest path.
    pub fn diameter(&self) -> usize {
        longest_shortest_path(self).len()
    }
}

/// Ordered sequence of distinct vertices. A single vertex is a path of length 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    vertices: Vec<usize>,
}

impl Path {
    /// Checks distinctness only; use [`Path::in_tree`] to also check edges.
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(GraphError::NotAPath("empty vertex sequence".into()));
        }
        let mut sorted = vertices.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::NotAPath(format!("vertex {} repeats", w[0])));
        }
        Ok(Path { vertices })
    }

    pub fn in_tree(tree: &Tree, vertices: Vec<usize>) -> Result<Self> {
        for &v in &vertices {
            check_node(v, tree.node_count())?;
        }
        let path = Path::new(vertices)?;
        if let Some(w) = path.vertices.windows(2).find(|w| !tree.has_edge(w[0], w[1])) {
            return Err(GraphError::NotAPath(format!(
                "({}, {}) is not an edge",
                w[0], w[1]
            )));
        }
        Ok(path)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> usize {
        self.vertices[0]
    }

    pub fn last(&self) -> usize {
        *self.vertices.last().expect("paths are nonempty")
    }

    /// Consecutive vertex pairs normalized to `(min, max)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.vertices.windows(2).map(|w| ordered(w[0], w[1]))
    }

    pub fn reversed(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        Path { vertices }
    }

    /// Orientation that starts from the smaller-id endpoint.
    pub fn canonical(self) -> Self {
        if self.first() > self.last() {
            self.reversed()
        } else {
            self
        }
    }

    pub fn into_vertices(self) -> Vec<usize> {
        self.vertices
    }
}

/// The unique tree path from `u` to `v`.
pub fn shortest_path(tree: &Tree, u: usize, v: usize) -> Result<Path> {
    check_node(u, tree.node_count())?;
    check_node(v, tree.node_count())?;
    let (_, parent) = tree.bfs(v);
    let mut vertices = vec![u];
    let mut x = u;
    while x != v {
        x = parent[x];
        vertices.push(x);
    }
    Ok(Path { vertices })
}

fn farthest(dist: &[usize]) -> usize {
    // first index attains the max, so ties go to the smallest id
    let max = *dist.iter().max().expect("nonempty");
    dist.iter().position(|&d| d == max).expect("max is present")
}

/// A diameter path found by double BFS: the farthest node `a` from node 0,
/// then the farthest node `b` from `a`, smallest ids winning ties. The path is
/// oriented from its smaller-id endpoint.
pub fn longest_shortest_path(tree: &Tree) -> Path {
    let (d0, _) = tree.bfs(0);
    let a = farthest(&d0);
    let (da, parent) = tree.bfs(a);
    let b = farthest(&da);
    let mut vertices = vec![b];
    let mut x = b;
    while x != a {
        x = parent[x];
        vertices.push(x);
    }
    Path { vertices }.canonical()
}

/// Vertex-induced sub-forest of a fixed node-id universe. Nodes may be removed,
/// and edges may be removed, but nothing is ever added after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest {
    present: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
}

impl Forest {
    /// Forest over the id universe `0..universe` containing `nodes` and `edges`.
    pub fn new<N, E>(universe: usize, nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = usize>,
        E: IntoIterator<Item = (usize, usize)>,
    {
        let mut present = vec![false; universe];
        for v in nodes {
            check_node(v, universe)?;
            present[v] = true;
        }
        let mut ds = DisjointSet::new(universe);
        let mut adjacency = vec![Vec::new(); universe];
        for (u, v) in edges {
            check_node(u, universe)?;
            check_node(v, universe)?;
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !present[u] || !present[v] {
                return Err(GraphError::NotAPath(format!(
                    "edge ({u}, {v}) touches a node outside the forest"
                )));
            }
            let key = ordered(u, v);
            if adjacency[u].contains(&v) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            if !ds.union(u, v) {
                return Err(GraphError::Cycle(key.0, key.1));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Forest { present, adjacency })
    }

    pub fn from_tree(tree: &Tree) -> Self {
        Forest {
            present: vec![true; tree.node_count()],
            adjacency: tree.adjacency.clone(),
        }
    }

    pub fn universe(&self) -> usize {
        self.present.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(v, _)| v)
    }

    pub fn node_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.present.iter().any(|&p| p)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.present.get(v).copied().unwrap_or(false)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| u < v).map(|&v| (u, v)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        if !self.contains(v) {
            return Err(GraphError::InvalidNode {
                node: v,
                node_count: self.universe(),
            });
        }
        Ok(self.adjacency[v].len())
    }

    /// Removes the edge if present; returns whether it was.
    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if u >= self.universe() || v >= self.universe() {
            return false;
        }
        let Some(i) = self.adjacency[u].iter().position(|&x| x == v) else {
            return false;
        };
        self.adjacency[u].remove(i);
        self.adjacency[v].retain(|&x| x != u);
        true
    }

    /// Removes all present nodes with no incident edge; returns them ascending.
    pub fn remove_isolated(&mut self) -> Vec<usize> {
        let isolated: Vec<usize> = self.nodes().filter(|&v| self.adjacency[v].is_empty()).collect();
        for &v in &isolated {
            self.present[v] = false;
        }
        isolated
    }

    /// Component index for every present node, `None` for absent ones.
    /// Components are numbered in order of their smallest node id.
    pub fn component_labels(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.universe()];
        let mut next = 0;
        for s in 0..self.universe() {
            if !self.present[s] || labels[s].is_some() {
                continue;
            }
            let mut stack = vec![s];
            labels[s] = Some(next);
            while let Some(x) = stack.pop() {
                for &y in &self.adjacency[x] {
                    if labels[y].is_none() {
                        labels[y] = Some(next);
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        labels
    }
}

/// One connected component of a forest: a [`Tree`] over local ids together
/// with the ascending list of global ids it was taken from (local id `i`
/// corresponds to `nodes[i]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtree {
    pub nodes: Vec<usize>,
    pub tree: Tree,
}

impl Subtree {
    pub fn to_global(&self, path: &Path) -> Path {
        Path {
            vertices: path.vertices.iter().map(|&i| self.nodes[i]).collect(),
        }
    }

    pub fn local_id(&self, global: usize) -> Option<usize> {
        self.nodes.binary_search(&global).ok()
    }
}

/// Components of `forest` ordered by smallest contained node id.
pub fn connected_components(forest: &Forest) -> Vec<Subtree> {
    let labels = forest.component_labels();
    let count = labels.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); count];
    for (v, label) in labels.iter().enumerate() {
        if let Some(c) = label {
            members[*c].push(v);
        }
    }
    members
        .into_iter()
        .map(|nodes| {
            let local = |g: usize| nodes.binary_search(&g).expect("same component");
            let mut edges = Vec::new();
            for &u in &nodes {
                for &v in &forest.adjacency[u] {
                    if u < v {
                        edges.push((local(u), local(v)));
                    }
                }
            }
            let tree = Tree::new(nodes.len(), edges).expect("forest components are trees");
            Subtree { nodes, tree }
        })
        .collect()
}

/// Maximum-weight spanning tree: edges are scanned by descending weight (ties
/// by ascending `(min id, max id)`) and kept unless they close a cycle. The
/// returned tree forgets the weights.
pub fn max_spanning_tree(graph: &WeightedGraph) -> Result<Tree> {
    let n = graph.node_count();
    let mut order: Vec<&WeightedEdge> = graph.edges().iter().collect();
    order.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then_with(|| (a.u, a.v).cmp(&(b.u, b.v)))
    });
    let mut ds = DisjointSet::new(n);
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        if chosen.len() + 1 == n {
            break;
        }
        if ds.union(e.u, e.v) {
            chosen.push((e.u, e.v));
        }
    }
    if chosen.len() + 1 != n {
        return Err(GraphError::Disconnected {
            components: ds.classes(),
        });
    }
    Tree::new(n, chosen)
}
