//! Token merging: graph-smoothed spectral embedding, importance-weighted
//! entropic transport onto a fixed number of clusters, and soft pooling.

pub mod kmeans;
pub mod spectral;
pub mod transport;

pub use kmeans::{kmeans_proposals, KMeans};
pub use spectral::{smooth_features, spectral_embed, spectral_embed_with, SpectralEmbedding, SvdOptions};
pub use transport::{importance_scores, project_logits, sinkhorn, soft_pool, uniform_marginal, TransportPlan};
