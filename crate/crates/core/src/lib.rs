//! Hierarchical emotional-network toolkit: functional networks from ROI time
//! series, maximum spanning trees, node influence, trunk decomposition into
//! emotional areas and the hierarchical LSTM decoder built on top of them.

pub mod connectome;
pub mod graphcore;
pub mod hemon;
pub mod influence;
pub mod rng;
pub mod synth;
pub mod trunks;
