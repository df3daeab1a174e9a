//! Workbench for the autoblocking, ECG-seeded image cipher (IEAE).
//!
//! The crate reproduces the cipher bit-for-bit under a binary64 contract,
//! mounts the known-plaintext equivalent-key attack against it, and builds
//! the exact functional graphs used to expose its digital-chaos weaknesses.
//!
//! * [`keystream`]: Logistic byte stream, Arnold mask matrix, `C0` block.
//! * [`cipher`]: autoblocking, padding, round function, encrypt/decrypt.
//! * [`lyapunov`]: Wolf-style largest Lyapunov exponent estimator.
//! * [`attack`]: mask extraction, mask decryption, collision experiment.
//! * [`chaos`]: functional graphs, component census, `10^m` statistics.
//! * [`formats`]: PGM, sidecar/key files, CSV series.

pub mod attack;
pub mod chaos;
pub mod cipher;
mod error;
pub mod formats;
mod image;
pub mod keystream;
pub mod lyapunov;

pub use crate::error::{Error, Result};
pub use crate::image::GrayImage;

pub use crate::attack::{ExperimentReport, MaskImage};
pub use crate::chaos::{ComponentCensus, FunctionalGraph};
pub use crate::cipher::{BlockLayout, BlockStream, Encrypted, Ieae, PublicParams, SecretKey};
pub use crate::keystream::{ByteSequence, ChaoticSeed, KeystreamSet, Quantizer};
pub use crate::lyapunov::{EmbeddingConfig, ReplacementLog};
