//! Corpus cleaning: markup stripping, language filtering and length bounds,
//! applied in that order.

mod detect;
mod markup;

use std::collections::VecDeque;
use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{LanguageTag, Sentence};
use crate::tokenization::tokenize;

pub use detect::{
    detect_language, LanguageDetector, LanguageVerdict, ScriptCounts, ScriptDetector,
    UndecidableText, DEFAULT_MIN_CONFIDENCE,
};
pub use markup::strip_markup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleaningConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub min_language_confidence: f64,
    pub strip_markup: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            min_words: 2,
            max_words: 100,
            min_language_confidence: DEFAULT_MIN_CONFIDENCE,
            strip_markup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CleaningConfigError {
    #[error("min_words must be at least 1, got {0}")]
    MinWords(usize),
    #[error("max_words ({max}) must not be below min_words ({min})")]
    MaxWords { min: usize, max: usize },
    #[error("min_language_confidence must lie in [0, 1], got {0}")]
    Confidence(f64),
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<(), CleaningConfigError> {
        if self.min_words < 1 {
            return Err(CleaningConfigError::MinWords(self.min_words));
        }
        if self.max_words < self.min_words {
            return Err(CleaningConfigError::MaxWords {
                min: self.min_words,
                max: self.max_words,
            });
        }
        if !(0.0..=1.0).contains(&self.min_language_confidence) {
            return Err(CleaningConfigError::Confidence(self.min_language_confidence));
        }
        Ok(())
    }
}

/// Per-reason tallies. `input_count` always equals `kept_count` plus the drops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_count: u64,
    pub kept_count: u64,
    pub dropped_language: u64,
    pub dropped_length: u64,
    pub dropped_empty_after_strip: u64,
}

impl CleaningReport {
    pub fn dropped(&self) -> u64 {
        self.dropped_language + self.dropped_length + self.dropped_empty_after_strip
    }

    pub fn tally(&mut self, outcome: &Result<Sentence, DropReason>) {
        self.input_count += 1;
        match outcome {
            Ok(_) => self.kept_count += 1,
            Err(DropReason::Empty) => self.dropped_empty_after_strip += 1,
            Err(DropReason::Language(_)) => self.dropped_language += 1,
            Err(DropReason::Length(_)) => self.dropped_length += 1,
        }
    }
}

impl AddAssign for CleaningReport {
    fn add_assign(&mut self, o: Self) {
        self.input_count += o.input_count;
        self.kept_count += o.kept_count;
        self.dropped_language += o.dropped_language;
        self.dropped_length += o.dropped_length;
        self.dropped_empty_after_strip += o.dropped_empty_after_strip;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthDecision {
    Keep,
    TooShort(usize),
    TooLong(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DropReason {
    Empty,
    Language(LanguageVerdict),
    Length(LengthDecision),
}

/// Number of non-punctuation tokens.
pub fn word_count(text: &str, lang: LanguageTag) -> usize {
    tokenize(text, lang).iter().filter(|t| !t.is_punct()).count()
}

/// Both bounds are inclusive: `min_words` and `max_words` themselves are kept.
pub fn length_filter(sentence: &Sentence, config: &CleaningConfig) -> LengthDecision {
    let n = word_count(&sentence.text, sentence.lang);
    if n < config.min_words {
        LengthDecision::TooShort(n)
    } else if n > config.max_words {
        LengthDecision::TooLong(n)
    } else {
        LengthDecision::Keep
    }
}

/// The per-sentence cleaning rules for one expected language.
pub struct Cleaner<D = ScriptDetector> {
    pub expected_lang: LanguageTag,
    pub config: CleaningConfig,
    pub detector: D,
}

impl Cleaner<ScriptDetector> {
    pub fn new(expected_lang: LanguageTag, config: CleaningConfig) -> Self {
        let detector = ScriptDetector::new(config.min_language_confidence);
        Cleaner {
            expected_lang,
            config,
            detector,
        }
    }
}

impl<D: LanguageDetector> Cleaner<D> {
    pub fn with_detector(expected_lang: LanguageTag, config: CleaningConfig, detector: D) -> Self {
        Cleaner {
            expected_lang,
            config,
            detector,
        }
    }

    /// Returns the cleaned sentence (same id, retagged with the expected
    /// language) or why it was dropped.
    pub fn clean_one(&self, sentence: Sentence) -> Result<Sentence, DropReason> {
        let text = if self.config.strip_markup {
            strip_markup(&sentence.text)
        } else {
            sentence.text
        };
        let verdict = match self.detector.detect(&text) {
            Ok(v) => v,
            Err(UndecidableText) => return Err(DropReason::Empty),
        };
        if verdict.lang != self.expected_lang
            || verdict.confidence < self.config.min_language_confidence
        {
            return Err(DropReason::Language(verdict));
        }
        let cleaned = Sentence::new(sentence.id, text, self.expected_lang);
        match length_filter(&cleaned, &self.config) {
            LengthDecision::Keep => Ok(cleaned),
            d => Err(DropReason::Length(d)),
        }
    }

    /// Cleans a batch in parallel; results are in input order.
    pub fn clean_batch(&self, batch: Vec<Sentence>) -> Vec<Result<Sentence, DropReason>> {
        batch.into_par_iter().map(|s| self.clean_one(s)).collect()
    }
}

const CHUNK: usize = 4096;

/// Streaming cleaner. Sentences are pulled in chunks, cleaned in parallel
/// and released in input order; [`CleanCorpus::report`] is complete once the
/// iterator is exhausted.
pub struct CleanCorpus<I, E, D = ScriptDetector> {
    input: I,
    cleaner: Cleaner<D>,
    ready: VecDeque<Sentence>,
    failure: Option<E>,
    report: CleaningReport,
    exhausted: bool,
}

/// Applies strip -> language -> length to every sentence of `sentences`.
///
/// `sentences` carries the errors of its source (typically I/O). The first
/// error is yielded after the sentences read before it and ends the stream.
pub fn clean_corpus<I, E>(
    sentences: I,
    expected_lang: LanguageTag,
    config: &CleaningConfig,
) -> CleanCorpus<I::IntoIter, E>
where
    I: IntoIterator<Item = Result<Sentence, E>>,
{
    CleanCorpus::new(sentences.into_iter(), Cleaner::new(expected_lang, config.clone()))
}

impl<I, E, D> CleanCorpus<I, E, D> {
    pub fn new(input: I, cleaner: Cleaner<D>) -> Self {
        CleanCorpus {
            input,
            cleaner,
            ready: VecDeque::new(),
            failure: None,
            report: CleaningReport::default(),
            exhausted: false,
        }
    }

    pub fn report(&self) -> CleaningReport {
        self.report
    }
}

impl<I, E, D> Iterator for CleanCorpus<I, E, D>
where
    I: Iterator<Item = Result<Sentence, E>>,
    D: LanguageDetector,
{
    type Item = Result<Sentence, E>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(s) = self.ready.pop_front() {
                return Some(Ok(s));
            }
            if let Some(e) = self.failure.take() {
                return Some(Err(e));
            }
            if self.exhausted {
                return None;
            }
            let mut batch = Vec::with_capacity(CHUNK);
            while batch.len() < CHUNK {
                match self.input.next() {
                    Some(Ok(s)) => batch.push(s),
                    Some(Err(e)) => {
                        self.failure = Some(e);
                        break;
                    }
                    None => break,
                }
            }
            if batch.len() < CHUNK {
                self.exhausted = true;
            }
            for outcome in self.cleaner.clean_batch(batch) {
                self.report.tally(&outcome);
                if let Ok(s) = outcome {
                    self.ready.push_back(s);
                }
            }
        }
    }
}
