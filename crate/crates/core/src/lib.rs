//! Topic modeling for short texts.
//!
//! Three models share one output type, the row-stochastic [`TopicWordMatrix`]:
//!
//! * [`dmm`]: Dirichlet Multinomial Mixture trained by collapsed Gibbs sampling,
//!   one topic per document.
//! * [`lda`]: Latent Dirichlet Allocation trained by online variational Bayes.
//! * [`prodlda`]: the product-of-experts variational autoencoder, built on the
//!   small dense-network kernel in [`nn`].
//!
//! [`eval`] holds perplexity, relevance ranking and the UMass/UCI/NPMI
//! coherence scores, [`select`] the cross-validated grid search, and
//! [`signal`] the daily topic/sentiment regression against next-day returns.

// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod dmm;
pub mod error;
pub mod eval;
pub mod lda;
pub mod model;
pub mod nn;
pub mod prodlda;
pub mod select;
pub mod signal;
pub mod special;
pub mod synthetic;

pub use corpus::{Corpus, Document, PreprocessConfig, Vocabulary};
pub use error::{Error, Result};
pub use eval::TopicWordMatrix;
pub use model::TopicModel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used by every randomized path. ChaCha keeps streams identical
/// across platforms, so a seed pins a run bit-for-bit.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Numerically stable `log(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
