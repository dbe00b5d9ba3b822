//! Encoder-free 3D scene tokenization.
//!
//! A raw point cloud is turned into a fixed budget of context-rich tokens:
//! superpoint pooling of per-point tokens, space-filling-curve serialization,
//! windowed FFT context mixing, a sparse window-voting superpoint graph, and
//! optimal-transport token merging. The channel-wise global filter operator
//! lives in [`gfm`].

pub mod bench;
pub mod config;
pub mod enhancer;
pub mod error;
pub mod gfm;
pub mod graph;
pub mod io;
pub mod knn;
pub mod merge;
pub mod pipeline;
pub mod sfc;
pub mod spectrum;
pub mod synth;
pub mod tokenizer;
pub mod types;

pub use error::{Error, Result};
pub use types::{seeded_init, validate_cloud, PointCloud, SeededWeights, SuperpointPartition, TokenMatrix, SENTINEL};
pub use config::PipelineConfig;
pub use pipeline::{tokenize, ModelWeights, TokenizeReport};
