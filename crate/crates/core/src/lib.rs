//! Robot action tokenization toolkit.
//!
//! Two action tokenizers are provided:
//!
//! - [`binning`]: the per-dimension 256-bin quantile tokenizer, one token per
//!   action dimension per timestep.
//! - [`fast`]: a compressed chunk codec (normalize, DCT, quantize, flatten,
//!   BPE) whose decode path is the exact inverse of every lossless stage.
//!
//! Around them sit a deterministic toy tabletop simulator ([`sim`]),
//! token-emitting policies ([`policy`]) and a chunked-execution evaluation
//! harness ([`eval`]) that produces success-rate tables.

pub mod binning;
pub mod bpe;
pub mod dct;
pub mod eval;
pub mod fast;
pub mod matrix;
pub mod policy;
pub mod quantile;
pub mod sim;
pub mod suites;
pub mod tables;
pub mod trajectory;

pub use binning::BinningScheme;
pub use bpe::BpeModel;
pub use dct::DctAxis;
pub use fast::{FastConfig, FastModel};
pub use matrix::Matrix;
pub use trajectory::{ActionChunk, ChunkSpec, Step, Trajectory};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of a byte string. Used for model fingerprints and state digests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
