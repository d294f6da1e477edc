//! Estimation of the weighted graph Helmholtzian (the 1-Hodge Laplacian of
//! a weighted clique complex) from a point cloud sampled on a manifold, with
//! spectral analysis, Hodge decomposition and semi-supervised learning of
//! edge flows built on top of it.

pub mod complex;
pub mod datasets;
pub mod error;
pub mod flows;
pub mod io;
pub mod learning;
pub mod linalg;
pub mod operators;
pub mod pipeline;
pub mod sparse;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
