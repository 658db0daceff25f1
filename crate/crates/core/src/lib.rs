//! Zero-shot action recognition from object classifier scores.
//!
//! Videos are described by the responses of a large bank of object
//! classifiers. Action labels never seen with any video example are assigned
//! by translating those object responses through a semantic word embedding:
//! object and action labels are encoded as vectors in the embedding space,
//! their inner products form an object-to-action affinity matrix, and a
//! video's action score is the affinity-weighted sum of its object scores.
//!
//! The crate provides:
//!
//! - [`embedding`]: loading word vectors and tokenizing multi-word labels,
//! - [`gmm`]: a diagonal-covariance Gaussian mixture fitted with EM, the
//!   generative model behind the Fisher label encoder,
//! - [`pca`]: the dimensionality reduction applied before mixture fitting,
//! - [`encoding`]: the two label encoders — average word vectors and Fisher
//!   word vectors,
//! - [`translation`]: affinity construction plus action-side and video-side
//!   top-T sparsification and score normalization,
//! - [`engine`]: classification, retrieval ranking, and spatio-temporal
//!   localization over tube proposals,
//! - [`evaluation`]: average class accuracy, average precision, tube overlap,
//!   and AUC-versus-overlap-threshold curves,
//! - [`io`]: the text file formats used by the command-line tools.

pub mod embedding;
pub mod encoding;
pub mod engine;
mod error;
pub mod evaluation;
pub mod gmm;
pub mod io;
mod numeric;
pub mod pca;
pub mod translation;

pub use error::{Error, Result};
