use std::collections::HashMap;

use crate::corpus_io::LanguageTag;
use crate::tokenization::{tokenize_with, CaseMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Nothing is listening or the host cannot be resolved.
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out")]
    Timeout,
    #[error("backend returned HTTP {status}")]
    Status { status: u16 },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("backend returned {got} translations for {expected} inputs")]
    Contract { expected: usize, got: usize },
    #[error("backend failure: {0}")]
    Other(String),
}

impl BackendError {
    /// Errors that end the stage once retries are exhausted; everything else
    /// only loses the batch.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Unreachable(_))
    }
}

/// Batch translation between two declared languages.
///
/// `translate_batch` returns exactly one translation per input, in input
/// order. Implementations must tolerate concurrent calls.
pub trait TranslationBackend: Send + Sync {
    fn src_lang(&self) -> LanguageTag;
    fn tgt_lang(&self) -> LanguageTag;
    fn translate_batch(&self, texts: &[String]) -> Result<Vec<String>, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubKind {
    Identity,
    /// Reverses the token sequence.
    TokenReverse,
    /// Token-by-token lookup; unknown tokens pass through.
    Dictionary(HashMap<String, String>),
}

/// Deterministic, in-process backend for tests and dry runs.
#[derive(Debug, Clone)]
pub struct StubBackend {
    kind: StubKind,
    src: LanguageTag,
    tgt: LanguageTag,
}

pub fn stub_backend(kind: StubKind, src: LanguageTag, tgt: LanguageTag) -> StubBackend {
    StubBackend { kind, src, tgt }
}

impl StubBackend {
    /// Tokens are the case-preserving tokens of the source language, joined
    /// with single spaces.
    pub fn translate_one(&self, text: &str) -> String {
        let tokens = || {
            tokenize_with(text, self.src, CaseMode::Preserve)
                .into_iter()
                .map(|t| t.text)
        };
        match &self.kind {
            StubKind::Identity => text.to_string(),
            StubKind::TokenReverse => {
                let mut t: Vec<String> = tokens().collect();
                t.reverse();
                t.join(" ")
            }
            StubKind::Dictionary(map) => tokens()
                .map(|t| map.get(&t).cloned().unwrap_or(t))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

impl TranslationBackend for StubBackend {
    fn src_lang(&self) -> LanguageTag {
        self.src
    }

    fn tgt_lang(&self) -> LanguageTag {
        self.tgt
    }

    fn translate_batch(&self, texts: &[String]) -> Result<Vec<String>, BackendError> {
        Ok(texts.iter().map(|t| self.translate_one(t)).collect())
    }
}

/// Reads a dictionary file: one `source<TAB>target` entry per line.
pub fn load_dictionary(path: &std::path::Path) -> std::io::Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('\t').ok_or_else(|| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: expected `source<TAB>target`", path.display(), i + 1),
            )
        })?;
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}
