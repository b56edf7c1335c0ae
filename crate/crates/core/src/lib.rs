//! Delay-embedding dimension analysis for multichannel recordings.
//!
//! The crate estimates fractal dimensions of embedded point clouds, turns them
//! into directed interaction strengths between channels, summarises the
//! resulting weighted graphs with persistent homology and decodes condition
//! labels from the connectivity features.

pub mod cim;
pub mod connectivity;
pub mod decode;
pub mod embedding;
pub mod error;
pub mod fractal;
pub mod io;
pub mod oracle;
pub mod stats;
pub mod synth;
pub mod topology;

pub use cim::{best_lag, cim_pair, progressive_embed, CimResult, LagSet};
pub use embedding::{embed_multivariate, embed_pair, embed_univariate, EmbeddingSpec, PointCloud};
pub use error::{Error, Result};
pub use fractal::{correlation_dimension, DimensionConfig, DimensionEstimate, Method};
pub use io::{Recording, WindowSpec};
