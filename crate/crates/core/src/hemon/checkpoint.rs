use serde::{Deserialize, Serialize};

use super::{evaluate, predictions, FnnModel, HemonModel, Matrix, ModelConfig, ModelError, ModelKind, Network, Result, Sample};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// JSON checkpoint: configuration, model structure and named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// `hemon`, `hemon-ea1`, `hemon-dft` or `fnn`.
    pub model: String,
    pub config: ModelConfig,
    pub node_count: usize,
    /// Node sequences per level; empty for the fully connected baseline.
    pub sequences: Vec<Vec<Vec<usize>>>,
    pub params: Vec<NamedTensor>,
}

/// Either kind of trainable model, as restored from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Hemon(HemonModel),
    Fnn(FnnModel),
}

impl AnyModel {
    pub fn label(&self) -> &'static str {
        match self {
            AnyModel::Hemon(m) => m.kind().label(),
            AnyModel::Fnn(_) => "fnn",
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            AnyModel::Hemon(m) => m.config(),
            AnyModel::Fnn(m) => m.config(),
        }
    }

    pub fn evaluate(&self, samples: &[Sample]) -> Result<f64> {
        match self {
            AnyModel::Hemon(m) => evaluate(m, samples),
            AnyModel::Fnn(m) => evaluate(m, samples),
        }
    }

    pub fn predictions(&self, samples: &[Sample]) -> Vec<Vec<f64>> {
        match self {
            AnyModel::Hemon(m) => predictions(m, samples),
            AnyModel::Fnn(m) => predictions(m, samples),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        match self {
            AnyModel::Hemon(m) => Checkpoint::from_hemon(m),
            AnyModel::Fnn(m) => Checkpoint::from_fnn(m),
        }
    }
}

fn tensors<M: Network>(model: &M) -> Vec<NamedTensor> {
    model
        .params()
        .into_iter()
        .map(|(name, m)| NamedTensor {
            name,
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        })
        .collect()
}

fn restore<M: Network>(model: &mut M, tensors: &[NamedTensor]) -> Result<()> {
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    if names.len() != tensors.len() {
        return Err(ModelError::Checkpoint(format!(
            "expected {} tensors, found {}",
            names.len(),
            tensors.len()
        )));
    }
    for ((name, slot), t) in names.iter().zip(model.params_mut()).zip(tensors) {
        if *name != t.name || slot.rows() != t.rows || slot.cols() != t.cols || t.data.len() != t.rows * t.cols {
            return Err(ModelError::Checkpoint(format!(
                "tensor `{}` ({}x{}) does not match `{name}` ({}x{})",
                t.name,
                t.rows,
                t.cols,
                slot.rows(),
                slot.cols()
            )));
        }
        *slot = Matrix::from_vec(t.rows, t.cols, t.data.clone());
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_hemon(model: &HemonModel) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            model: model.kind().label().into(),
            config: model.config().clone(),
            node_count: model.node_count(),
            sequences: model.levels.iter().map(|b| b.sequences.clone()).collect(),
            params: tensors(model),
        }
    }

    pub fn from_fnn(model: &FnnModel) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            model: "fnn".into(),
            config: model.config().clone(),
            node_count: model.node_count(),
            sequences: Vec::new(),
            params: tensors(model),
        }
    }

    pub fn into_model(self) -> Result<AnyModel> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let kind = match self.model.as_str() {
            "fnn" => {
                let mut m = FnnModel::new(self.config, self.node_count)?;
                restore(&mut m, &self.params)?;
                return Ok(AnyModel::Fnn(m));
            }
            "hemon" => ModelKind::Hemon,
            "hemon-ea1" => ModelKind::HemonEa1,
            "hemon-dft" => ModelKind::HemonDft,
            other => return Err(ModelError::Checkpoint(format!("unknown model `{other}`"))),
        };
        let mut m = HemonModel::from_sequences(self.config, kind, self.node_count, self.sequences)?;
        restore(&mut m, &self.params)?;
        Ok(AnyModel::Hemon(m))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcore::Tree;
    use crate::hemon::build_ea1_variant;
    use crate::trunks::decompose;

    fn small_config() -> ModelConfig {
        let mut c = ModelConfig::regression(1, 2);
        c.embed_dim = 3;
        c.hidden_dim = 3;
        c.lstm_layers = 2;
        c
    }

    #[test]
    fn hemon_roundtrip() {
        let t = Tree::star(6, 1).unwrap();
        let m = HemonModel::new(small_config(), &decompose(&t)).unwrap();
        for model in [m.clone(), build_ea1_variant(&m)] {
            let text = Checkpoint::from_hemon(&model).to_json();
            let back = Checkpoint::from_json(&text).unwrap().into_model().unwrap();
            assert_eq!(back, AnyModel::Hemon(model));
        }
    }

    #[test]
    fn fnn_roundtrip_and_bad_tensor() {
        let m = FnnModel::new(small_config(), 4).unwrap();
        let ck = Checkpoint::from_fnn(&m);
        assert_eq!(ck.clone().into_model().unwrap(), AnyModel::Fnn(m));
        let mut broken = ck;
        broken.params[0].rows += 1;
        assert!(broken.into_model().is_err());
    }
}
