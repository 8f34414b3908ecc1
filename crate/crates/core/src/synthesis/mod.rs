//! Back-translation: drive a [`TranslationBackend`] over selected
//! monolingual sentences, then merge the synthetic pairs with the bitext.

mod backend;
mod http;
mod merge;
mod translate;

pub use backend::{load_dictionary, stub_backend, BackendError, StubBackend, StubKind, TranslationBackend};
pub use http::{http_backend, HttpBackend};
pub use merge::{merge_corpora, MergeReport, MergeStrategy, Merged};
pub use translate::{back_translate, BackTranslation, Direction, SynthesisConfig, SynthesisReport};

use crate::corpus_io::{CorpusError, LanguageTag};

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("backend translates {backend} but the configured direction is {configured}")]
    DirectionMismatch {
        backend: Direction,
        configured: Direction,
    },
    #[error("sentence {id} is {found}, expected {expected}")]
    SentenceLanguage {
        id: u64,
        found: LanguageTag,
        expected: LanguageTag,
    },
    #[error("translation backend unreachable after {completed} pairs: {source}")]
    BackendUnreachable {
        completed: u64,
        #[source]
        source: BackendError,
    },
    #[error("merge streams disagree on languages: expected {expected:?}, found {found:?}")]
    LanguageMismatch {
        expected: (LanguageTag, LanguageTag),
        found: (LanguageTag, LanguageTag),
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
