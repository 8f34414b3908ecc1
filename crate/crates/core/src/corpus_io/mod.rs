//! Streaming access to monolingual and parallel corpora and the run manifest.
//!
//! On disk a monolingual corpus is a UTF-8 file with one sentence per LF
//! terminated line. A parallel corpus is two such files with identical line
//! counts, conventionally `<stem>.<lang>`.

mod manifest;
mod reader;
mod types;
mod writer;

use std::path::{Path, PathBuf};

pub use manifest::{
    append_manifest, file_digest, read_manifest, ExperimentManifest, ModelHyperparameters,
};
pub use reader::{
    count_lines, read_monolingual, read_parallel, LineDiagnostic, MonolingualReader,
    ParallelReader,
};
pub use types::{LanguageTag, Origin, PairError, Sentence, SentencePair};
pub use writer::{write_monolingual, write_parallel, WriteCounts};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parallel corpus is not aligned: {source_lines} vs {target_lines} lines")]
    Alignment { source_lines: u64, target_lines: u64 },
    #[error("manifest {}: line {line}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// `<stem>.<lang>`, e.g. `train.vi`.
pub fn lang_path(stem: &Path, lang: LanguageTag) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(lang.code());
    PathBuf::from(s)
}
