//! Data-noising schemes for token sequences and the n-gram smoothing
//! estimators they correspond to.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`]: vocabularies, encoding and corpus loading.
//! * [`counts`]: unigram/bigram/trigram counts with continuation counts.
//! * [`rng`]: the counter-based random stream every sampler draws from.
//! * [`noising`]: blank, unigram, absolute-discount and bigram Kneser-Ney noising.
//! * [`smoothing`]: MLE, interpolated, absolute-discount and Kneser-Ney estimators.
//! * [`verify`]: exact and Monte-Carlo checks relating noising to smoothing.
//! * [`synth`]: seeded Zipfian corpora for tests and benchmarks.

pub mod corpus;
pub mod counts;
pub mod error;
pub mod hash;
pub mod noising;
pub mod rng;
pub mod smoothing;
pub mod synth;
pub mod verify;

pub use corpus::{CorpusMode, TokenId, TokenSequence, Vocabulary};
pub use counts::CountTable;
pub use error::{Error, Result};
pub use noising::{NoisedBatch, Noiser, NoisingConfig, PairSides, ProposalDistribution, ProposalKind, Scheme};
pub use smoothing::{BigramModel, Estimator, Perplexity, SmoothedModel};
pub use verify::{EquivalenceReport, MixtureDecomposition};
