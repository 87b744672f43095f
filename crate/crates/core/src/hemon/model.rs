use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::StackTape;
use super::{xavier_init, LstmStack, Matrix, ModelConfig, ModelError, Network, Result};
use crate::graphcore::Tree;
use crate::rng::{substream, Stream};
use crate::trunks::TrunkHierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// All trunk levels.
    Hemon,
    /// Level-1 trunks only.
    HemonEa1,
    /// One depth-first sequence over the whole tree.
    HemonDft,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Hemon => "hemon",
            ModelKind::HemonEa1 => "hemon-ea1",
            ModelKind::HemonDft => "hemon-dft",
        }
    }
}

/// One summand of the level combination: the sequences run through
/// `stacks[stack]`, summed, then mapped by `combine` (`C x hidden`).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBranch {
    pub stack: usize,
    pub sequences: Vec<Vec<usize>>,
    pub combine: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HemonModel {
    config: ModelConfig,
    kind: ModelKind,
    node_count: usize,
    pub embed_weight: Matrix,
    pub embed_bias: Matrix,
    pub stacks: Vec<LstmStack>,
    pub levels: Vec<LevelBranch>,
}

/// Activations of one forward pass.
pub struct HemonTape {
    features: Matrix,
    level_outputs: Vec<Vec<f64>>,
    trunk_tapes: Vec<Vec<StackTape>>,
}

impl HemonModel {
    /// Model over the trunks of `hierarchy`, Xavier-initialized from the
    /// config seed.
    pub fn new(config: ModelConfig, hierarchy: &TrunkHierarchy) -> Result<Self> {
        let levels = hierarchy
            .levels()
            .map(|trunks| trunks.iter().map(|t| t.path.vertices().to_vec()).collect())
            .collect();
        Self::from_sequences(config, ModelKind::Hemon, hierarchy.node_count(), levels)
    }

    /// Single-level model reading one depth-first traversal of `tree`.
    pub fn new_dft(config: ModelConfig, tree: &Tree) -> Result<Self> {
        Self::from_sequences(config, ModelKind::HemonDft, tree.node_count(), vec![vec![dft_sequence(tree)]])
    }

    pub fn from_sequences(
        config: ModelConfig,
        kind: ModelKind,
        node_count: usize,
        levels: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        config.validate()?;
        if levels.is_empty() {
            return Err(ModelError::Config("model needs at least one level".into()));
        }
        if let Some(&v) = levels.iter().flatten().flatten().find(|&&v| v >= node_count) {
            return Err(ModelError::Shape(format!("sequence node {v} >= node count {node_count}")));
        }
        let mut rng = substream(config.seed, Stream::Init);
        let embed_weight = xavier_init(config.embed_dim, config.input_dim, &mut rng)?;
        let embed_bias = Matrix::zeros(config.embed_dim, 1);
        let stack_count = if config.share_lstm_across_levels { 1 } else { levels.len() };
        let stacks = (0..stack_count)
            .map(|_| {
                LstmStack::new(
                    config.embed_dim,
                    config.hidden_dim,
                    config.lstm_layers,
                    config.dropout,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let outputs = config.head.outputs();
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(l, sequences)| {
                Ok(LevelBranch {
                    stack: l.min(stack_count - 1),
                    sequences,
                    combine: xavier_init(outputs, config.hidden_dim, &mut rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HemonModel {
            config,
            kind,
            node_count,
            embed_weight,
            embed_bias,
            stacks,
            levels,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    fn check_features(&self, features: &Matrix) {
        assert_eq!(
            (features.rows(), features.cols()),
            (self.node_count, self.config.input_dim),
            "feature matrix shape"
        );
    }

    /// Input embedding of every node.
    pub fn embed(&self, features: &Matrix) -> Vec<Vec<f64>> {
        self.check_features(features);
        (0..features.rows())
            .map(|v| {
                let mut e = self.embed_bias.data().to_vec();
                self.embed_weight.matvec_acc(features.row(v), &mut e);
                e
            })
            .collect()
    }

    /// Sum of the stack outputs over the trunks of `level` (1-based), in
    /// evaluation mode.
    pub fn level_representation(&self, features: &Matrix, level: usize) -> Result<Vec<f64>> {
        let branch = self
            .levels
            .get(level.wrapping_sub(1))
            .ok_or_else(|| ModelError::Shape(format!("model has no level {level}")))?;
        let embedded = self.embed(features);
        let stack = &self.stacks[branch.stack];
        let mut acc = vec![0.0; self.config.hidden_dim];
        for seq in &branch.sequences {
            let inputs: Vec<Vec<f64>> = seq.iter().map(|&v| embedded[v].clone()).collect();
            let out = stack.output(&inputs);
            acc.iter_mut().zip(&out).for_each(|(a, o)| *a += o);
        }
        Ok(acc)
    }

    /// `sum_l W_l h_l` over the per-level representations.
    pub fn combine_levels(&self, level_outputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if level_outputs.len() != self.levels.len() {
            return Err(ModelError::Shape(format!(
                "{} level vectors for {} levels",
                level_outputs.len(),
                self.levels.len()
            )));
        }
        let mut logits = vec![0.0; self.config.head.outputs()];
        for (branch, h) in self.levels.iter().zip(level_outputs) {
            if h.len() != branch.combine.cols() {
                return Err(ModelError::Shape(format!(
                    "level vector has {} entries, expected {}",
                    h.len(),
                    branch.combine.cols()
                )));
            }
            branch.combine.matvec_acc(h, &mut logits);
        }
        Ok(logits)
    }
}

impl Network for HemonModel {
    type Tape = HemonTape;

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn forward(&self, features: &Matrix, mut dropout: Option<&mut ChaCha8Rng>) -> (Vec<f64>, HemonTape) {
        let embedded = self.embed(features);
        let mut level_outputs = Vec::with_capacity(self.levels.len());
        let mut trunk_tapes = Vec::with_capacity(self.levels.len());
        let mut logits = vec![0.0; self.config.head.outputs()];
        for branch in &self.levels {
            let stack = &self.stacks[branch.stack];
            let mut acc = vec![0.0; self.config.hidden_dim];
            let mut tapes = Vec::with_capacity(branch.sequences.len());
            for seq in &branch.sequences {
                let inputs: Vec<Vec<f64>> = seq.iter().map(|&v| embedded[v].clone()).collect();
                let (out, tape) = stack.forward(&inputs, dropout.as_deref_mut());
                acc.iter_mut().zip(&out).for_each(|(a, o)| *a += o);
                tapes.push(tape);
            }
            branch.combine.matvec_acc(&acc, &mut logits);
            level_outputs.push(acc);
            trunk_tapes.push(tapes);
        }
        let tape = HemonTape {
            features: features.clone(),
            level_outputs,
            trunk_tapes,
        };
        (logits, tape)
    }

    fn backward(&self, tape: &HemonTape, d_logits: &[f64], grads: &mut Self) {
        let mut d_embedded = vec![vec![0.0; self.config.embed_dim]; tape.features.rows()];
        for (l, branch) in self.levels.iter().enumerate() {
            grads.levels[l].combine.add_outer(d_logits, &tape.level_outputs[l]);
            let mut d_level = vec![0.0; self.config.hidden_dim];
            branch.combine.matvec_t_acc(d_logits, &mut d_level);
            let stack = &self.stacks[branch.stack];
            for (seq, trunk_tape) in branch.sequences.iter().zip(&tape.trunk_tapes[l]) {
                let d_inputs = stack.backward(trunk_tape, &d_level, &mut grads.stacks[branch.stack]);
                for (&v, d) in seq.iter().zip(&d_inputs) {
                    d_embedded[v].iter_mut().zip(d).for_each(|(a, b)| *a += b);
                }
            }
        }
        for (v, d) in d_embedded.iter().enumerate() {
            if d.iter().any(|&x| x != 0.0) {
                grads.embed_weight.add_outer(d, tape.features.row(v));
                grads.embed_bias.add_column(d);
            }
        }
    }

    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("embed.weight".to_string(), &self.embed_weight),
            ("embed.bias".to_string(), &self.embed_bias),
        ];
        for (s, stack) in self.stacks.iter().enumerate() {
            out.extend(stack.params(&format!("stack{s}")));
        }
        for (l, branch) in self.levels.iter().enumerate() {
            out.push((format!("level{}.combine", l + 1), &branch.combine));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.embed_weight, &mut self.embed_bias];
        for stack in &mut self.stacks {
            out.extend(stack.params_mut());
        }
        for branch in &mut self.levels {
            out.push(&mut branch.combine);
        }
        out
    }
}

/// Restriction of `model` to its level-1 trunks (and the parameters they use).
pub fn build_ea1_variant(model: &HemonModel) -> HemonModel {
    let first = &model.levels[0];
    HemonModel {
        config: model.config.clone(),
        kind: ModelKind::HemonEa1,
        node_count: model.node_count,
        embed_weight: model.embed_weight.clone(),
        embed_bias: model.embed_bias.clone(),
        stacks: vec![model.stacks[first.stack].clone()],
        levels: vec![LevelBranch {
            stack: 0,
            sequences: first.sequences.clone(),
            combine: first.combine.clone(),
        }],
    }
}

/// Model that reads `sequence` with the embedding, first stack and first
/// combination matrix of `model`.
pub fn build_dft_variant(model: &HemonModel, sequence: Vec<usize>) -> Result<HemonModel> {
    if let Some(&v) = sequence.iter().find(|&&v| v >= model.node_count) {
        return Err(ModelError::Shape(format!("sequence node {v} >= node count {}", model.node_count)));
    }
    let first = &model.levels[0];
    Ok(HemonModel {
        config: model.config.clone(),
        kind: ModelKind::HemonDft,
        node_count: model.node_count,
        embed_weight: model.embed_weight.clone(),
        embed_bias: model.embed_bias.clone(),
        stacks: vec![model.stacks[first.stack].clone()],
        levels: vec![LevelBranch {
            stack: 0,
            sequences: vec![sequence],
            combine: first.combine.clone(),
        }],
    })
}

/// Preorder depth-first traversal from node 0 visiting neighbors in
/// ascending id order.
pub fn dft_sequence(tree: &Tree) -> Vec<usize> {
    let n = tree.node_count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        order.push(v);
        let nbrs = tree.neighbors(v).expect("valid id");
        stack.extend(nbrs.iter().rev().filter(|&&w| !seen[w]));
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hemon::Head;
    use crate::trunks::decompose;

    fn tiny_config() -> ModelConfig {
        let mut c = ModelConfig::new(
            2,
            Head::Regression {
                categories: 2,
                max_rating: 100.0,
            },
        );
        c.embed_dim = 3;
        c.hidden_dim = 4;
        c.lstm_layers = 2;
        c.seed = 4;
        c
    }

    fn features(n: usize) -> Matrix {
        Matrix::from_vec(n, 2, (0..2 * n).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.6).collect())
    }

    #[test]
    fn dft_examples() {
        assert_eq!(dft_sequence(&Tree::chain(3).unwrap()), vec![0, 1, 2]);
        assert_eq!(dft_sequence(&Tree::star(4, 0).unwrap()), vec![0, 1, 2, 3]);
        let t = Tree::new(5, [(0, 3), (3, 1), (0, 2), (2, 4)]).unwrap();
        assert_eq!(dft_sequence(&t), vec![0, 2, 4, 3, 1]);
    }

    #[test]
    fn single_trunk_level_equals_one_stack_run() {
        let t = Tree::chain(4).unwrap();
        let m = HemonModel::new(tiny_config(), &decompose(&t)).unwrap();
        let x = features(4);
        let emb = m.embed(&x);
        let direct = m.stacks[0].output(&emb);
        assert_eq!(m.level_representation(&x, 1).unwrap(), direct);
        assert!(m.level_representation(&x, 2).is_err());
    }

    #[test]
    fn combine_levels_is_linear() {
        let t = Tree::star(5, 0).unwrap();
        let mut m = HemonModel::new(tiny_config(), &decompose(&t)).unwrap();
        assert_eq!(m.level_count(), 2);
        m.levels[0].combine = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        m.levels[1].combine = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        let h = m
            .combine_levels(&[vec![1.0, 2.0, 9.0, 9.0], vec![10.0, 20.0, 9.0, 9.0]])
            .unwrap();
        assert_eq!(h, vec![11.0, 22.0]);
        for b in &mut m.levels {
            b.combine.fill(0.0);
        }
        assert_eq!(m.combine_levels(&[vec![1.0; 4], vec![1.0; 4]]).unwrap(), vec![0.0, 0.0]);
        assert!(m.combine_levels(&[vec![1.0; 4]]).is_err());
    }

    #[test]
    fn ea1_matches_full_model_with_zeroed_upper_levels() {
        let t = Tree::new(7, [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5), (2, 6)]).unwrap();
        let mut full = HemonModel::new(tiny_config(), &decompose(&t)).unwrap();
        assert!(full.level_count() >= 2);
        let ea1 = build_ea1_variant(&full);
        assert!(ea1.parameter_count() < full.parameter_count());
        for b in full.levels.iter_mut().skip(1) {
            b.combine.fill(0.0);
        }
        let x = features(7);
        assert_eq!(ea1.logits(&x), full.logits(&x));
    }

    #[test]
    fn shared_stacks_switch() {
        let t = Tree::star(5, 0).unwrap();
        let mut c = tiny_config();
        c.share_lstm_across_levels = true;
        let m = HemonModel::new(c, &decompose(&t)).unwrap();
        assert_eq!(m.stacks.len(), 1);
        assert!(m.levels.iter().all(|b| b.stack == 0));
    }
}
