//! Hierarchical trunk decomposition of a tree.
//!
//! Level 1 is the longest shortest path of the whole tree. Its edges are
//! removed, nodes left without edges are dropped, and every remaining
//! component contributes its own longest shortest path to level 2, and so on
//! until no node is left. The node set of all level-`l` trunks is the level-`l`
//! area; a junction node lies on trunks of several levels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::{FunctionalSystem, RoiAtlas};
use crate::graphcore::{self, Forest, Path, Tree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrunkError {
    #[error("level {level} out of range; hierarchy has {levels} levels")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("node {0} is not in the atlas")]
    UnknownRoi(usize),
    #[error("invalid hierarchy document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trunk {
    pub level: usize,
    pub component_index: usize,
    pub path: Path,
}

/// Trunks grouped by level (index 0 holds level 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrunkHierarchy {
    levels: Vec<Vec<Trunk>>,
    node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionalArea {
    pub level: usize,
    /// Ascending node ids.
    pub nodes: Vec<usize>,
}

impl TrunkHierarchy {
    /// Number of levels `L`.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Trunks at `level` (1-based).
    pub fn trunks(&self, level: usize) -> Result<&[Trunk], TrunkError> {
        self.check_level(level)?;
        Ok(&self.levels[level - 1])
    }

    pub fn levels(&self) -> impl Iterator<Item = &[Trunk]> {
        self.levels.iter().map(Vec::as_slice)
    }

    pub fn all_trunks(&self) -> impl Iterator<Item = &Trunk> {
        self.levels.iter().flatten()
    }

    fn check_level(&self, level: usize) -> Result<(), TrunkError> {
        if level == 0 || level > self.levels.len() {
            Err(TrunkError::LevelOutOfRange {
                level,
                levels: self.levels.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Keeps only the first `levels` levels.
    pub fn truncated(&self, levels: usize) -> Self {
        TrunkHierarchy {
            levels: self.levels[..levels.min(self.levels.len())].to_vec(),
            node_count: self.node_count,
        }
    }

    pub fn to_document(&self) -> HierarchyDocument {
        HierarchyDocument {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(i, trunks)| LevelDocument {
                    level: i + 1,
                    trunks: trunks.iter().map(|t| t.path.vertices().to_vec()).collect(),
                })
                .collect(),
            areas: (1..=self.levels.len())
                .map(|l| area_at(self, l).expect("level in range").nodes)
                .collect(),
        }
    }

    pub fn from_document(doc: &HierarchyDocument) -> Result<Self, TrunkError> {
        let bad = |msg: String| TrunkError::Document(msg);
        let mut levels = Vec::with_capacity(doc.levels.len());
        let mut max_id = None;
        for (i, level) in doc.levels.iter().enumerate() {
            if level.level != i + 1 {
                return Err(bad(format!("level {} listed at position {}", level.level, i + 1)));
            }
            let mut trunks = Vec::with_capacity(level.trunks.len());
            for (c, ids) in level.trunks.iter().enumerate() {
                let path = Path::new(ids.clone()).map_err(|e| bad(e.to_string()))?;
                max_id = max_id.max(path.vertices().iter().copied().max());
                trunks.push(Trunk {
                    level: i + 1,
                    component_index: c,
                    path,
                });
            }
            levels.push(trunks);
        }
        if levels.is_empty() {
            return Err(bad("no levels".into()));
        }
        let h = TrunkHierarchy {
            levels,
            node_count: max_id.map_or(0, |m| m + 1),
        };
        if doc.areas.len() != h.level_count() {
            return Err(bad("one area per level expected".into()));
        }
        for (l, area) in doc.areas.iter().enumerate() {
            if *area != area_at(&h, l + 1)?.nodes {
                return Err(bad(format!("area {} does not match its trunks", l + 1)));
            }
        }
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("hierarchy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrunkError> {
        let doc: HierarchyDocument =
            serde_json::from_str(text).map_err(|e| TrunkError::Document(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// On-disk form: `{levels: [{level, trunks: [[ids]]}], areas: [[ids]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyDocument {
    pub levels: Vec<LevelDocument>,
    pub areas: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDocument {
    pub level: usize,
    pub trunks: Vec<Vec<usize>>,
}

/// Nodes dropped as isolated at the end of each level.
pub type RemovalTrace = Vec<Vec<usize>>;

pub fn decompose(tree: &Tree) -> TrunkHierarchy {
    decompose_with_trace(tree).0
}

pub fn decompose_with_trace(tree: &Tree) -> (TrunkHierarchy, RemovalTrace) {
    let mut forest = Forest::from_tree(tree);
    let mut levels = Vec::new();
    let mut removed = Vec::new();
    while !forest.is_empty() {
        let level = levels.len() + 1;
        let components = graphcore::connected_components(&forest);
        let mut trunks = Vec::with_capacity(components.len());
        for (c, component) in components.iter().enumerate() {
            let local = graphcore::longest_shortest_path(&component.tree);
            let path = component.to_global(&local);
            for (u, v) in path.edges() {
                forest.remove_edge(u, v);
            }
            trunks.push(Trunk {
                level,
                component_index: c,
                path,
            });
        }
        removed.push(forest.remove_isolated());
        levels.push(trunks);
    }
    (
        TrunkHierarchy {
            levels,
            node_count: tree.node_count(),
        },
        removed,
    )
}

/// Union of the vertex sets of the trunks at `level`.
pub fn area_at(h: &TrunkHierarchy, level: usize) -> Result<EmotionalArea, TrunkError> {
    let nodes: BTreeSet<usize> = h
        .trunks(level)?
        .iter()
        .flat_map(|t| t.path.vertices().iter().copied())
        .collect();
    Ok(EmotionalArea {
        level,
        nodes: nodes.into_iter().collect(),
    })
}

pub fn system_composition(
    area: &EmotionalArea,
    atlas: &RoiAtlas,
) -> Result<BTreeMap<FunctionalSystem, usize>, TrunkError> {
    let mut counts = BTreeMap::new();
    for &v in &area.nodes {
        let roi = atlas.get(v).ok_or(TrunkError::UnknownRoi(v))?;
        *counts.entry(roi.system).or_insert(0) += 1;
    }
    Ok(counts)
}

/// `level,system,count` rows for every level of the hierarchy.
pub fn composition_csv(h: &TrunkHierarchy, atlas: &RoiAtlas) -> Result<String, TrunkError> {
    let mut out = String::from("level,system,count\n");
    for level in 1..=h.level_count() {
        let area = area_at(h, level)?;
        for (system, count) in system_composition(&area, atlas)? {
            out.push_str(&format!("{level},{system},{count}\n"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::Roi;

    fn vertices(h: &TrunkHierarchy, level: usize) -> Vec<Vec<usize>> {
        h.trunks(level)
            .unwrap()
            .iter()
            .map(|t| t.path.vertices().to_vec())
            .collect()
    }

    #[test]
    fn chain_is_one_level() {
        let h = decompose(&Tree::chain(5).unwrap());
        assert_eq!(h.level_count(), 1);
        assert_eq!(vertices(&h, 1), vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(area_at(&h, 1).unwrap().nodes, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn star_with_four_leaves() {
        // level 1 takes leaf 1 - center - leaf 2; the center keeps two edges
        // so level 2 is leaf 3 - center - leaf 4
        let h = decompose(&Tree::star(5, 0).unwrap());
        assert_eq!(h.level_count(), 2);
        assert_eq!(vertices(&h, 1), vec![vec![1, 0, 2]]);
        assert_eq!(vertices(&h, 2), vec![vec![3, 0, 4]]);
    }

    #[test]
    fn single_node_tree_has_degenerate_trunk() {
        let h = decompose(&Tree::singleton());
        assert_eq!(vertices(&h, 1), vec![vec![0]]);
    }

    #[test]
    fn level_out_of_range() {
        let h = decompose(&Tree::chain(3).unwrap());
        assert!(matches!(area_at(&h, 2), Err(TrunkError::LevelOutOfRange { .. })));
        assert!(matches!(area_at(&h, 0), Err(TrunkError::LevelOutOfRange { .. })));
    }

    fn atlas(systems: &[FunctionalSystem]) -> RoiAtlas {
        RoiAtlas::new(
            systems
                .iter()
                .enumerate()
                .map(|(id, &system)| Roi {
                    id,
                    name: format!("roi_{id}"),
                    system,
                    xyz: [0.0; 3],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn composition_counts() {
        use FunctionalSystem::*;
        let a = atlas(&[Visual, Visual, Visual, Auditory]);
        let area = |nodes: Vec<usize>| EmotionalArea { level: 1, nodes };
        let all_visual = system_composition(&area(vec![0, 1, 2]), &a).unwrap();
        assert_eq!(all_visual, BTreeMap::from([(Visual, 3)]));
        assert!(system_composition(&area(vec![]), &a).unwrap().is_empty());
        let mixed = system_composition(&area(vec![0, 1, 3]), &a).unwrap();
        assert_eq!(mixed.len(), 2);
        assert_eq!(mixed.values().sum::<usize>(), 3);
        assert_eq!(
            system_composition(&area(vec![4]), &a).unwrap_err(),
            TrunkError::UnknownRoi(4)
        );
    }

    #[test]
    fn json_roundtrip() {
        let t = Tree::new(7, [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5), (2, 6)]).unwrap();
        let h = decompose(&t);
        let back = TrunkHierarchy::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn document_with_wrong_area_rejected() {
        let text = r#"{"levels":[{"level":1,"trunks":[[0,1]]}],"areas":[[0]]}"#;
        assert!(TrunkHierarchy::from_json(text).is_err());
    }
}
