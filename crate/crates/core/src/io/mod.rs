//! File formats: PLY clouds, superpoint labels, token output and weights.

pub mod labels;
pub mod ply;
pub mod tokenfile;
pub mod weights;

pub use labels::{load_labels, parse_labels, read_labels};
pub use ply::{load_ply, parse_ply, save_ply, PlyFormat};
pub use tokenfile::{inspect_tokens, read_tokens, write_tokens, Precision, TokenHeader};
pub use weights::{read_weights, write_weights, Tensors};
