use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{xavier_init, Matrix, ModelConfig, Network, Result};
use crate::rng::{substream, Stream};

/// Fully connected baseline: flattened node features, one ReLU hidden layer of
/// `hidden_dim` units (with dropout while training), then the output head.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    config: ModelConfig,
    node_count: usize,
    pub hidden_weight: Matrix,
    pub hidden_bias: Matrix,
    pub output_weight: Matrix,
    pub output_bias: Matrix,
}

pub struct FnnTape {
    input: Vec<f64>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
}

impl FnnModel {
    pub fn new(config: ModelConfig, node_count: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(config.seed, Stream::Init);
        let inputs = node_count * config.input_dim;
        Ok(FnnModel {
            hidden_weight: xavier_init(config.hidden_dim, inputs, &mut rng)?,
            hidden_bias: Matrix::zeros(config.hidden_dim, 1),
            output_weight: xavier_init(config.head.outputs(), config.hidden_dim, &mut rng)?,
            output_bias: Matrix::zeros(config.head.outputs(), 1),
            config,
            node_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }
}

impl Network for FnnModel {
    type Tape = FnnTape;

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn forward(&self, features: &Matrix, dropout: Option<&mut ChaCha8Rng>) -> (Vec<f64>, FnnTape) {
        assert_eq!(
            (features.rows(), features.cols()),
            (self.node_count, self.config.input_dim),
            "feature matrix shape"
        );
        let input = features.data().to_vec();
        let mut hidden = self.hidden_bias.data().to_vec();
        self.hidden_weight.matvec_acc(&input, &mut hidden);
        hidden.iter_mut().for_each(|x| *x = x.max(0.0));
        let mask = match dropout {
            Some(rng) if self.config.dropout > 0.0 => {
                let keep = 1.0 - self.config.dropout;
                let m: Vec<f64> = hidden
                    .iter()
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                hidden.iter_mut().zip(&m).for_each(|(x, k)| *x *= k);
                Some(m)
            }
            _ => None,
        };
        let mut logits = self.output_bias.data().to_vec();
        self.output_weight.matvec_acc(&hidden, &mut logits);
        (logits, FnnTape { input, hidden, mask })
    }

    fn backward(&self, tape: &FnnTape, d_logits: &[f64], grads: &mut Self) {
        grads.output_weight.add_outer(d_logits, &tape.hidden);
        grads.output_bias.add_column(d_logits);
        let mut d_hidden = vec![0.0; self.config.hidden_dim];
        self.output_weight.matvec_t_acc(d_logits, &mut d_hidden);
        if let Some(mask) = &tape.mask {
            d_hidden.iter_mut().zip(mask).for_each(|(d, k)| *d *= k);
        }
        // ReLU: the stored activation is zero exactly where the unit was off
        d_hidden
            .iter_mut()
            .zip(&tape.hidden)
            .for_each(|(d, &h)| {
                if h <= 0.0 {
                    *d = 0.0
                }
            });
        grads.hidden_weight.add_outer(&d_hidden, &tape.input);
        grads.hidden_bias.add_column(&d_hidden);
    }

    fn params(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("fc1.weight".into(), &self.hidden_weight),
            ("fc1.bias".into(), &self.hidden_bias),
            ("fc2.weight".into(), &self.output_weight),
            ("fc2.bias".into(), &self.output_bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.hidden_weight,
            &mut self.hidden_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }
}
