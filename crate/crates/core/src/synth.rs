//! Synthetic ROI data with a planted tree.
//!
//! Latent signals diffuse along a random planted tree: the root draws
//! `z ~ N(0, 1)` and every child draws `z_c = rho * z_p + sqrt(1 - rho^2) * e`
//! with a per-edge coupling `rho`, so every latent signal has unit variance and
//! correlations decay as the product of couplings along the tree path. The
//! observed signal adds independent `N(0, sigma^2)` noise. Each time point is
//! also one stimulus: its ratings are `a * sigmoid(beta_j . x)` with the
//! readout `beta_j` supported on the planted areas of the levels assigned to
//! category `j`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectome::{
    ConnectomeError, EmotionRatings, FunctionalSystem, Roi, RoiAtlas, TimeSeriesMatrix, DEFAULT_MAX_RATING,
};
use crate::graphcore::Tree;
use crate::rng::{substream, Stream};
use crate::trunks::{area_at, decompose, TrunkHierarchy};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Data(#[from] ConnectomeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Planted tree size `N`.
    pub nodes: usize,
    /// Observation noise standard deviation.
    pub noise: f64,
    /// Rows of the generated matrix; each row is one TR and one stimulus.
    pub time_points: usize,
    /// Rating dimension `C`.
    pub categories: usize,
    /// Edge couplings are drawn uniformly from this range.
    pub coupling: [f64; 2],
    /// Area levels driving each category. Empty means category `j` is driven
    /// by level `j mod L + 1`.
    pub readout_levels: Vec<Vec<usize>>,
    /// Standard deviation of the linear readout before the logistic map.
    pub readout_gain: f64,
    pub max_rating: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            nodes: 30,
            noise: 0.0,
            time_points: 600,
            categories: 2,
            coupling: [0.5, 0.85],
            readout_levels: Vec::new(),
            readout_gain: 1.5,
            max_rating: DEFAULT_MAX_RATING,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        if self.nodes < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.nodes));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        if self.time_points < 3 {
            return bad(format!("need at least 3 time points, got {}", self.time_points));
        }
        if self.categories == 0 {
            return bad("need at least one rating category".into());
        }
        let [lo, hi] = self.coupling;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return bad(format!("coupling range must satisfy 0 < lo <= hi < 1, got [{lo}, {hi}]"));
        }
        if !self.readout_levels.is_empty() && self.readout_levels.len() != self.categories {
            return bad("readout_levels needs one entry per category".into());
        }
        if !(self.readout_gain >= 0.0 && self.max_rating > 0.0) {
            return bad("readout gain must be >= 0 and max rating > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub time_series: TimeSeriesMatrix,
    pub ratings: EmotionRatings,
    pub atlas: RoiAtlas,
    pub planted: Tree,
    pub planted_hierarchy: TrunkHierarchy,
    /// Readout weights, one row of `N` entries per category.
    pub readout: Vec<Vec<f64>>,
}

/// Uniform random recursive tree on `n` nodes with randomly permuted labels.
/// Returns the tree and its root.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Tree, usize) {
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    let edges: Vec<(usize, usize)> = (1..n)
        .map(|v| (labels[rng.random_range(0..v)], labels[v]))
        .collect();
    (Tree::new(n, edges).expect("recursive trees are trees"), labels[0])
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData, SynthError> {
    spec.validate()?;
    let mut rng = substream(spec.seed, Stream::Data);
    let n = spec.nodes;
    let (planted, root) = random_tree(n, &mut rng);

    // parent order from the root so parents are drawn before children
    let mut order = vec![root];
    let mut parent = vec![usize::MAX; n];
    parent[root] = root;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &w in planted.neighbors(v).expect("valid id") {
            if parent[w] == usize::MAX {
                parent[w] = v;
                order.push(w);
            }
        }
        i += 1;
    }
    let coupling_dist = Uniform::new_inclusive(spec.coupling[0], spec.coupling[1]).expect("validated range");
    let mut coupling = vec![0.0; n];
    for &v in &order[1..] {
        coupling[v] = coupling_dist.sample(&mut rng);
    }

    let noise = Normal::new(0.0, spec.noise).expect("validated noise");
    let mut rows = Vec::with_capacity(spec.time_points);
    for _ in 0..spec.time_points {
        let mut z = vec![0.0; n];
        for &v in &order {
            let e: f64 = StandardNormal.sample(&mut rng);
            z[v] = if v == root {
                e
            } else {
                let rho = coupling[v];
                rho * z[parent[v]] + (1.0 - rho * rho).sqrt() * e
            };
        }
        let x: Vec<f64> = z.iter().map(|&zv| zv + noise.sample(&mut rng)).collect();
        rows.push(x);
    }

    let hierarchy = decompose(&planted);
    let levels = hierarchy.level_count();
    let mut readout = Vec::with_capacity(spec.categories);
    for j in 0..spec.categories {
        let driving: Vec<usize> = if spec.readout_levels.is_empty() {
            vec![j % levels + 1]
        } else {
            spec.readout_levels[j].iter().copied().filter(|&l| l >= 1 && l <= levels).collect()
        };
        let mut support: Vec<usize> = driving
            .iter()
            .flat_map(|&l| area_at(&hierarchy, l).expect("level in range").nodes)
            .collect();
        support.sort_unstable();
        support.dedup();
        let mut beta = vec![0.0; n];
        if !support.is_empty() {
            let scale = spec.readout_gain / (support.len() as f64).sqrt();
            for &v in &support {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                beta[v] = sign * scale;
            }
        }
        readout.push(beta);
    }
    let ratings_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| {
            readout
                .iter()
                .map(|beta| {
                    let s: f64 = beta.iter().zip(x).map(|(b, xv)| b * xv).sum();
                    spec.max_rating * crate::hemon::sigmoid(s)
                })
                .collect()
        })
        .collect();

    let systems = FunctionalSystem::ALL;
    let xyz = Uniform::new_inclusive(-70.0, 70.0).expect("range");
    let atlas = RoiAtlas::new(
        (0..n)
            .map(|id| Roi {
                id,
                name: format!("roi_{id}"),
                system: systems[rng.random_range(0..systems.len())],
                xyz: [
                    (xyz.sample(&mut rng) * 10.0f64).round() / 10.0,
                    (xyz.sample(&mut rng) * 10.0f64).round() / 10.0,
                    (xyz.sample(&mut rng) * 10.0f64).round() / 10.0,
                ],
            })
            .collect(),
    )?;

    Ok(SyntheticData {
        time_series: TimeSeriesMatrix::from_rows(rows)?,
        ratings: EmotionRatings::new(
            (0..spec.categories).map(|j| format!("emotion_{j}")).collect(),
            ratings_rows,
            spec.max_rating,
        )?,
        atlas,
        planted,
        planted_hierarchy: hierarchy,
        readout,
    })
}

/// Fraction of `planted` edges that also appear in `recovered`.
pub fn edge_overlap(planted: &Tree, recovered: &Tree) -> f64 {
    let hits = planted
        .edges()
        .iter()
        .filter(|&&(u, v)| recovered.has_edge(u, v))
        .count();
    if planted.edges().is_empty() {
        1.0
    } else {
        hits as f64 / planted.edges().len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{build_network, pearson_correlation};
    use crate::graphcore::max_spanning_tree;

    #[test]
    fn two_nodes_give_single_edge() {
        let spec = SyntheticSpec {
            nodes: 2,
            time_points: 50,
            ..Default::default()
        };
        let d = generate(&spec).unwrap();
        assert_eq!(d.planted.edges(), &[(0, 1)]);
        assert_eq!(d.time_series.roi_count(), 2);
    }

    #[test]
    fn zero_noise_recovers_small_tree() {
        let spec = SyntheticSpec {
            nodes: 12,
            time_points: 2000,
            seed: 3,
            ..Default::default()
        };
        let d = generate(&spec).unwrap();
        let c = pearson_correlation(&d.time_series).unwrap();
        let t = max_spanning_tree(&build_network(&c)).unwrap();
        assert_eq!(t, d.planted);
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec {
            nodes: 8,
            time_points: 20,
            noise: 0.5,
            seed: 9,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.time_series.to_csv(), b.time_series.to_csv());
        assert_eq!(a.ratings.to_csv(), b.ratings.to_csv());
        assert_eq!(a.atlas.to_json(), b.atlas.to_json());
    }

    #[test]
    fn impossible_specs_rejected() {
        for spec in [
            SyntheticSpec { time_points: 2, ..Default::default() },
            SyntheticSpec { nodes: 1, ..Default::default() },
            SyntheticSpec { noise: -1.0, ..Default::default() },
            SyntheticSpec { categories: 0, ..Default::default() },
        ] {
            assert!(matches!(generate(&spec), Err(SynthError::Spec(_))));
        }
    }

    #[test]
    fn ratings_stay_on_scale() {
        let d = generate(&SyntheticSpec { time_points: 100, ..Default::default() }).unwrap();
        for i in 0..d.ratings.len() {
            assert!(d.ratings.row(i).iter().all(|&y| (0.0..=100.0).contains(&y)));
        }
    }
}
