use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, xavier_init, Matrix, Result};

/// One LSTM layer. Gate rows are stacked as `[input; forget; cell; output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub bias: Matrix,
}

impl LstmLayer {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(LstmLayer {
            w_ih: xavier_init(4 * hidden_dim, input_dim, rng)?,
            w_hh: xavier_init(4 * hidden_dim, hidden_dim, rng)?,
            bias: Matrix::zeros(4 * hidden_dim, 1),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    fn forward(&self, xs: Vec<Vec<f64>>) -> LayerTape {
        let h = self.hidden_dim();
        let steps = xs.len();
        let mut tape = LayerTape {
            xs,
            gates: Vec::with_capacity(steps),
            cells: Vec::with_capacity(steps + 1),
            hidden: Vec::with_capacity(steps + 1),
        };
        tape.cells.push(vec![0.0; h]);
        tape.hidden.push(vec![0.0; h]);
        for t in 0..steps {
            let mut z = self.bias.data().to_vec();
            self.w_ih.matvec_acc(&tape.xs[t], &mut z);
            self.w_hh.matvec_acc(&tape.hidden[t], &mut z);
            for (k, zk) in z.iter_mut().enumerate() {
                *zk = if (2 * h..3 * h).contains(&k) {
                    zk.tanh()
                } else {
                    sigmoid(*zk)
                };
            }
            let c_prev = &tape.cells[t];
            let mut c = vec![0.0; h];
            let mut hid = vec![0.0; h];
            for j in 0..h {
                let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
                c[j] = f * c_prev[j] + i * g;
                hid[j] = o * c[j].tanh();
            }
            tape.gates.push(z);
            tape.cells.push(c);
            tape.hidden.push(hid);
        }
        tape
    }

    /// Backpropagation through time. `d_hidden[t]` is the external gradient on
    /// the hidden output of step `t`; returns gradients on the inputs.
    fn backward(&self, tape: &LayerTape, d_hidden: &[Vec<f64>], grads: &mut LstmLayer) -> Vec<Vec<f64>> {
        let h = self.hidden_dim();
        let steps = tape.xs.len();
        let mut d_xs = vec![Vec::new(); steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let gates = &tape.gates[t];
            let c = &tape.cells[t + 1];
            let c_prev = &tape.cells[t];
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dh = d_hidden[t][j] + dh_next[j];
                let tc = c[j].tanh();
                let d_o = dh * tc;
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                let d_f = dc * c_prev[j];
                let d_i = dc * g;
                let d_g = dc * i;
                dc_next[j] = dc * f;
                dz[j] = d_i * i * (1.0 - i);
                dz[h + j] = d_f * f * (1.0 - f);
                dz[2 * h + j] = d_g * (1.0 - g * g);
                dz[3 * h + j] = d_o * o * (1.0 - o);
            }
            grads.w_ih.add_outer(&dz, &tape.xs[t]);
            grads.w_hh.add_outer(&dz, &tape.hidden[t]);
            grads.bias.add_column(&dz);
            let mut dx = vec![0.0; self.input_dim()];
            self.w_ih.matvec_t_acc(&dz, &mut dx);
            d_xs[t] = dx;
            dh_next.iter_mut().for_each(|x| *x = 0.0);
            self.w_hh.matvec_t_acc(&dz, &mut dh_next);
        }
        d_xs
    }
}

#[derive(Debug, Clone)]
struct LayerTape {
    xs: Vec<Vec<f64>>,
    /// Post-activation gates per step.
    gates: Vec<Vec<f64>>,
    /// `cells[0]` and `hidden[0]` are the zero initial state.
    cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

/// Activations of one stack run, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StackTape {
    layers: Vec<LayerTape>,
    /// Inverted-dropout masks applied to the outputs of every layer but the
    /// last, one vector per step. Empty in evaluation mode.
    masks: Vec<Vec<Vec<f64>>>,
}

/// Stacked LSTM whose output is the top layer's final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
    pub dropout: f64,
}

impl LstmStack {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        layers: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let layers = (0..layers)
            .map(|l| LstmLayer::new(if l == 0 { input_dim } else { hidden_dim }, hidden_dim, rng))
            .collect::<Result<_>>()?;
        Ok(LstmStack { layers, dropout })
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers.last().map_or(0, LstmLayer::hidden_dim)
    }

    /// Evaluation-mode output for a sequence; the empty sequence maps to zeros.
    pub fn output(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        self.forward(inputs, None).0
    }

    pub fn forward(&self, inputs: &[Vec<f64>], mut dropout: Option<&mut ChaCha8Rng>) -> (Vec<f64>, StackTape) {
        let mut tape = StackTape {
            layers: Vec::with_capacity(self.layers.len()),
            masks: Vec::new(),
        };
        if inputs.is_empty() {
            return (vec![0.0; self.hidden_dim()], tape);
        }
        let mut xs = inputs.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let layer_tape = layer.forward(xs);
            let mut outs: Vec<Vec<f64>> = layer_tape.hidden[1..].to_vec();
            if l < last && self.dropout > 0.0 {
                if let Some(rng) = dropout.as_deref_mut() {
                    let keep = 1.0 - self.dropout;
                    let masks: Vec<Vec<f64>> = outs
                        .iter()
                        .map(|o| {
                            o.iter()
                                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                                .collect()
                        })
                        .collect();
                    for (o, m) in outs.iter_mut().zip(&masks) {
                        o.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
                    }
                    tape.masks.push(masks);
                }
            }
            tape.layers.push(layer_tape);
            xs = outs;
        }
        let out = tape.layers[last].hidden.last().expect("nonempty").clone();
        (out, tape)
    }

    /// Gradients of the stack output w.r.t. parameters (accumulated into
    /// `grads`) and w.r.t. each input vector (returned).
    pub fn backward(&self, tape: &StackTape, d_out: &[f64], grads: &mut LstmStack) -> Vec<Vec<f64>> {
        let Some(top) = tape.layers.last() else {
            return Vec::new();
        };
        let steps = top.xs.len();
        let h = self.hidden_dim();
        let mut d_hidden = vec![vec![0.0; h]; steps];
        d_hidden[steps - 1].copy_from_slice(d_out);
        for l in (0..self.layers.len()).rev() {
            let mut d_xs = self.layers[l].backward(&tape.layers[l], &d_hidden, &mut grads.layers[l]);
            if l == 0 {
                return d_xs;
            }
            if let Some(masks) = tape.masks.get(l - 1) {
                for (d, m) in d_xs.iter_mut().zip(masks) {
                    d.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
                }
            }
            d_hidden = d_xs;
        }
        unreachable!("stack has at least one layer")
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(3 * self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.layer{l}.w_ih"), &layer.w_ih));
            out.push((format!("{prefix}.layer{l}.w_hh"), &layer.w_hh));
            out.push((format!("{prefix}.layer{l}.bias"), &layer.bias));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(3 * self.layers.len());
        for layer in &mut self.layers {
            out.push(&mut layer.w_ih);
            out.push(&mut layer.w_hh);
            out.push(&mut layer.bias);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn stack(layers: usize, dropout: f64) -> LstmStack {
        LstmStack::new(3, 4, layers, dropout, &mut substream(1, Stream::Init)).unwrap()
    }

    fn seq(len: usize) -> Vec<Vec<f64>> {
        (0..len)
            .map(|t| vec![0.3 * t as f64 - 0.5, 0.1, -0.2 * t as f64])
            .collect()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut s = stack(2, 0.0);
        for p in s.params_mut() {
            p.fill(0.0);
        }
        assert_eq!(s.output(&seq(5)), vec![0.0; 4]);
    }

    #[test]
    fn empty_sequence_is_zero_vector() {
        assert_eq!(stack(2, 0.0).output(&[]), vec![0.0; 4]);
    }

    #[test]
    fn single_step_matches_cell_equations() {
        let s = stack(1, 0.0);
        let x = vec![0.4, -0.7, 0.2];
        let layer = &s.layers[0];
        let z = layer.w_ih.matvec(&x);
        let h: Vec<f64> = (0..4)
            .map(|j| {
                let i = sigmoid(z[j]);
                let g = z[8 + j].tanh();
                let o = sigmoid(z[12 + j]);
                o * (i * g).tanh()
            })
            .collect();
        let out = s.output(&[x]);
        for (a, b) in out.iter().zip(&h) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let s = stack(3, 0.5);
        let x = seq(6);
        assert_eq!(s.output(&x), s.output(&x));
        let mut rng = substream(9, Stream::Dropout);
        let (train_out, _) = s.forward(&x, Some(&mut rng));
        assert_ne!(train_out, s.output(&x));
    }
}
