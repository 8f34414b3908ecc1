//! In-domain data selection by TF-IDF cosine similarity.
//!
//! Each sentence is a document. Document frequencies come from a reference
//! corpus (by default the same-language side of the parallel training data),
//! the domain is represented by the centroid of the reference sentences'
//! normalized TF-IDF vectors, and monolingual sentences are ranked by cosine
//! similarity to that centroid. The selector holds at most `k` candidates.

mod df;
mod topk;
mod vector;

use rayon::prelude::*;

use crate::corpus_io::{CorpusError, Sentence};
use crate::Scalar;

pub use df::{build_df_table, DfTable, DfTableBuilder};
pub use topk::{ScoredSentence, TopK};
pub use vector::{domain_centroid, score_sentence, tfidf_vector, CentroidScorer, SparseVector};

/// Default number of selected sentences per language.
pub const DEFAULT_K: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("no documents: document frequencies are undefined")]
    EmptyCorpus,
    #[error("every in-domain sentence has a zero TF-IDF vector; no domain signal")]
    NoDomainSignal,
    #[error("centroid has zero norm")]
    ZeroCentroid,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("term {term_id} has invalid weight {weight}")]
    InvalidWeight { term_id: u32, weight: f64 },
    #[error("df table: {0}")]
    TableFormat(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

const SCORE_CHUNK: usize = 8192;

/// Streams `mono` once and returns the `min(k, distinct texts)` sentences most
/// similar to `centroid`, best first, ties broken by ascending id. Repeated
/// texts are kept once (the earliest copy). Scoring runs in parallel per
/// chunk; memory is bounded by `k` candidates plus one chunk.
pub fn select_top_k<F, I>(
    mono: I,
    centroid: &SparseVector<F>,
    table: &DfTable,
    k: usize,
) -> Result<Vec<ScoredSentence<F>>, SelectionError>
where
    F: Scalar,
    I: IntoIterator<Item = Sentence>,
{
    if k == 0 {
        return Err(SelectionError::InvalidK);
    }
    let scorer = CentroidScorer::new(centroid, table)?;
    let mut top = TopK::new(k);
    let mut chunk = Vec::with_capacity(SCORE_CHUNK);
    let mut mono = mono.into_iter();
    loop {
        chunk.clear();
        chunk.extend(mono.by_ref().take(SCORE_CHUNK));
        if chunk.is_empty() {
            break;
        }
        let scores: Vec<F> = chunk
            .par_iter()
            .map(|s| scorer.score(&tfidf_vector::<F>(&s.text, table)))
            .collect();
        for (s, score) in chunk.drain(..).zip(scores) {
            top.push(s, score);
        }
    }
    Ok(top.into_sorted_vec())
}

/// One line of the `selected.scores` sidecar: `<id>\t<score>` with six decimals.
pub fn format_score_line<F: Scalar>(s: &ScoredSentence<F>) -> String {
    format!("{}\t{:.6}", s.sentence.id, s.score.to_f64_lossy())
}
