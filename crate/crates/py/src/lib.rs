//! Python bindings. Trees and graphs cross the boundary as a node count plus
//! an edge list; time series and ratings as lists of rows.

use hemon_core::connectome::{pearson_correlation, TimeSeriesMatrix};
use hemon_core::graphcore::{self, Tree, WeightedGraph};
use hemon_core::hemon::{
    self as model, build_dft_variant, build_ea1_variant, dft_sequence, AnyModel, Checkpoint, FnnModel, Head,
    HemonModel, Matrix, ModelConfig, Network, Sample, Target, TrainOptions,
};
use hemon_core::{influence, synth, trunks};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn tree_of(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Tree> {
    Tree::new(n, edges).map_err(err)
}

/// Maximum spanning tree of a weighted graph given as `(u, v, w)` triples.
#[pyfunction]
fn max_spanning_tree(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Vec<(usize, usize)>> {
    let g = WeightedGraph::new(n, edges).map_err(err)?;
    Ok(graphcore::max_spanning_tree(&g).map_err(err)?.edges().to_vec())
}

/// Longest shortest path of a tree, starting at its smaller endpoint.
#[pyfunction]
fn diameter_path(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Vec<usize>> {
    Ok(graphcore::longest_shortest_path(&tree_of(n, edges)?).into_vertices())
}

/// Trunk hierarchy as levels of trunks, each trunk a vertex sequence.
#[pyfunction]
fn decompose(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Vec<Vec<Vec<usize>>>> {
    let h = trunks::decompose(&tree_of(n, edges)?);
    Ok(h.levels()
        .map(|level| level.iter().map(|t| t.path.vertices().to_vec()).collect())
        .collect())
}

/// Closed-form influence of `v` on `u` at `dist(u, v)` walk steps.
#[pyfunction]
fn node_influence(n: usize, edges: Vec<(usize, usize)>, u: usize, v: usize) -> PyResult<f64> {
    Ok(influence::node_influence_closed(&tree_of(n, edges)?, u, v)
        .map_err(err)?
        .value())
}

/// `|(P^k)_{uv}|` for the random-walk matrix of the tree.
#[pyfunction]
fn node_influence_oracle(n: usize, edges: Vec<(usize, usize)>, u: usize, v: usize, k: usize) -> PyResult<f64> {
    influence::node_influence_oracle(&tree_of(n, edges)?, u, v, k).map_err(err)
}

/// Information carried by a path with `m` edges.
#[pyfunction]
fn path_information(m: usize) -> PyResult<f64> {
    let path = graphcore::Path::new((0..=m).collect()).map_err(err)?;
    Ok(influence::path_information_literal(&path))
}

#[pyfunction]
fn path_information_closed_form(diameter: usize) -> f64 {
    influence::path_information_closed_form(diameter)
}

/// Pearson correlation of the columns of a `T x N` matrix.
#[pyfunction]
fn pearson(rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let ts = TimeSeriesMatrix::from_rows(rows).map_err(err)?;
    Ok(pearson_correlation(&ts).map_err(err)?.to_full())
}

#[pyfunction]
fn mae(truth: Vec<Vec<f64>>, predicted: Vec<Vec<f64>>) -> PyResult<f64> {
    model::mae(&truth, &predicted).map_err(err)
}

/// Synthetic data over a planted tree, returned as a dict.
#[pyfunction]
#[pyo3(signature = (nodes=30, time_points=600, noise=0.0, categories=2, seed=0))]
fn synthesize<'py>(
    py: Python<'py>,
    nodes: usize,
    time_points: usize,
    noise: f64,
    categories: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = synth::SyntheticSpec {
        nodes,
        time_points,
        noise,
        categories,
        seed,
        ..Default::default()
    };
    let d = synth::generate(&spec).map_err(err)?;
    let out = PyDict::new(py);
    let rows: Vec<Vec<f64>> = (0..d.time_series.time_count()).map(|t| d.time_series.row(t).to_vec()).collect();
    let ratings: Vec<Vec<f64>> = (0..d.ratings.len()).map(|i| d.ratings.row(i).to_vec()).collect();
    out.set_item("time_series", rows)?;
    out.set_item("ratings", ratings)?;
    out.set_item("tree", d.planted.edges().to_vec())?;
    Ok(out)
}

fn samples(x: Vec<Vec<f64>>, y: Option<Vec<Vec<f64>>>) -> PyResult<Vec<Sample>> {
    if let Some(y) = &y {
        if y.len() != x.len() {
            return Err(err(format!("{} feature rows vs {} target rows", x.len(), y.len())));
        }
    }
    Ok(x.into_iter()
        .enumerate()
        .map(|(i, row)| Sample {
            features: Matrix::from_vec(row.len(), 1, row),
            target: Target::Ratings(y.as_ref().map_or_else(Vec::new, |y| y[i].clone())),
        })
        .collect())
}

/// Trainable rating regressor: `hemon`, `ea1`, `dft` or `fnn`.
#[pyclass(name = "Model")]
struct PyModel {
    inner: AnyModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (variant, n, edges, categories, *, embed_dim=64, hidden_dim=64, lstm_layers=3,
        dropout=0.2, batch_size=32, lr_init=5e-4, max_epochs=300, max_rating=100.0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        variant: &str,
        n: usize,
        edges: Vec<(usize, usize)>,
        categories: usize,
        embed_dim: usize,
        hidden_dim: usize,
        lstm_layers: usize,
        dropout: f64,
        batch_size: usize,
        lr_init: f64,
        max_epochs: usize,
        max_rating: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let tree = tree_of(n, edges)?;
        let cfg = ModelConfig {
            embed_dim,
            hidden_dim,
            lstm_layers,
            dropout,
            batch_size,
            lr_init,
            max_epochs,
            seed,
            ..ModelConfig::new(1, Head::Regression { categories, max_rating })
        };
        let inner = match variant {
            "fnn" => AnyModel::Fnn(FnnModel::new(cfg, n).map_err(err)?),
            "hemon" | "ea1" | "dft" => {
                let full = HemonModel::new(cfg, &trunks::decompose(&tree)).map_err(err)?;
                AnyModel::Hemon(match variant {
                    "ea1" => build_ea1_variant(&full),
                    "dft" => build_dft_variant(&full, dft_sequence(&tree)).map_err(err)?,
                    _ => full,
                })
            }
            other => return Err(err(format!("unknown variant `{other}`"))),
        };
        Ok(PyModel { inner })
    }

    #[getter]
    fn label(&self) -> &'static str {
        self.inner.label()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        match &self.inner {
            AnyModel::Hemon(m) => m.parameter_count(),
            AnyModel::Fnn(m) => m.parameter_count(),
        }
    }

    /// Trains in place, keeping the parameters with the best validation MAE.
    /// Returns the per-epoch history and the best epoch.
    fn train<'py>(
        &mut self,
        py: Python<'py>,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        val_x: Vec<Vec<f64>>,
        val_y: Vec<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let (train, val) = (samples(x, Some(y))?, samples(val_x, Some(val_y))?);
        let opts = TrainOptions::default();
        let report = match &self.inner {
            AnyModel::Hemon(m) => {
                let (m, r) = model::train(m.clone(), &train, &val, opts).map_err(err)?;
                self.inner = AnyModel::Hemon(m);
                r
            }
            AnyModel::Fnn(m) => {
                let (m, r) = model::train(m.clone(), &train, &val, opts).map_err(err)?;
                self.inner = AnyModel::Fnn(m);
                r
            }
        };
        let out = PyDict::new(py);
        out.set_item("best_epoch", report.best_epoch)?;
        out.set_item("best_val_mae", report.best_val_metric)?;
        out.set_item("train_loss", report.epochs.iter().map(|e| e.train_loss).collect::<Vec<_>>())?;
        out.set_item("val_mae", report.epochs.iter().map(|e| e.val_metric).collect::<Vec<_>>())?;
        Ok(out)
    }

    /// Ratings for each row of ROI values.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.predictions(&samples(x, None)?))
    }

    fn evaluate(&self, x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.evaluate(&samples(x, Some(y))?).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.checkpoint().to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = Checkpoint::from_json(text).and_then(Checkpoint::into_model).map_err(err)?;
        Ok(PyModel { inner })
    }
}

#[pymodule]
fn hemon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(max_spanning_tree, m)?)?;
    m.add_function(wrap_pyfunction!(diameter_path, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(node_influence, m)?)?;
    m.add_function(wrap_pyfunction!(node_influence_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(path_information, m)?)?;
    m.add_function(wrap_pyfunction!(path_information_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
