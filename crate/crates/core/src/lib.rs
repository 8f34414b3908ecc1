//! Corpus engineering for low-resource machine translation.
//!
//! The crate covers the data side of a back-translation workflow for the
//! Vietnamese-Chinese pair:
//!
//! * [`corpus_io`]: streaming readers and writers for one-sentence-per-line
//!   corpora and the JSON-lines experiment manifest.
//! * [`cleaning`]: markup stripping, script-based language filtering and
//!   length bounds.
//! * [`tokenization`]: whitespace tokens for Vietnamese, per-ideograph tokens
//!   for Chinese.
//! * [`selection`]: TF-IDF vectors, a domain centroid and bounded top-k
//!   ranking of monolingual sentences.
//! * [`synthesis`]: batched, retrying back-translation through a pluggable
//!   [`synthesis::TranslationBackend`], and merging with the original bitext.
//! * [`evaluation`]: corpus-level BLEU-4.
//! * [`pipeline`]: run configuration and the file-based stage runner used by
//!   the `bitext-forge` binary.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the pipeline.

pub mod cleaning;
pub mod corpus_io;
pub mod evaluation;
pub mod pipeline;
pub mod scalar;
pub mod selection;
pub mod synthesis;
pub mod tokenization;

pub use corpus_io::{LanguageTag, Origin, Sentence, SentencePair};
pub use scalar::Scalar;

/// TF-IDF vector at pipeline precision.
pub type SparseVec = selection::SparseVector<f64>;
/// Single-precision TF-IDF vector, for memory-constrained scoring.
pub type SparseVecF32 = selection::SparseVector<f32>;
/// Ranked sentence at pipeline precision.
pub type Scored = selection::ScoredSentence<f64>;
/// Bounded top-k selector at pipeline precision.
pub type TopKSelector = selection::TopK<f64>;
/// BLEU result at pipeline precision.
pub type Bleu = evaluation::BleuScore<f64>;
