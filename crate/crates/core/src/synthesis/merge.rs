use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::corpus_io::{LanguageTag, SentencePair};

/// How synthetic pairs are placed relative to the original bitext.
///
/// Serialized as `"concat"` or `{"interleave": r}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeStrategy {
    #[default]
    Concat,
    /// `r` synthetic pairs after each original pair.
    Interleave(u32),
}

impl std::fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MergeStrategy::Concat => f.write_str("concat"),
            MergeStrategy::Interleave(r) => write!(f, "interleave:{r}"),
        }
    }
}

impl std::str::FromStr for MergeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "concat" => Ok(MergeStrategy::Concat),
            None if s == "interleave" => Ok(MergeStrategy::Interleave(1)),
            Some(("interleave", r)) => r
                .parse()
                .map(MergeStrategy::Interleave)
                .map_err(|_| format!("interleave ratio `{r}` is not a non-negative integer")),
            _ => Err(format!("unknown merge strategy `{s}` (expected concat or interleave:<r>)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub original: u64,
    pub synthetic_in: u64,
    pub duplicates_dropped: u64,
    pub emitted: u64,
}

/// Merged stream produced by [`merge_corpora`].
pub struct Merged<S> {
    originals: VecDeque<SentencePair>,
    seen: HashSet<(String, String)>,
    synthetic: S,
    strategy: MergeStrategy,
    langs: Option<(LanguageTag, LanguageTag)>,
    since_original: u32,
    synthetic_done: bool,
    failed: bool,
    report: MergeReport,
}

/// Combines the original bitext with synthetic pairs.
///
/// The original stream is buffered up front so that a synthetic pair equal
/// to any original `(source, target)` can be dropped wherever it occurs.
/// Duplicates inside a single stream are kept.
pub fn merge_corpora<O, S, E>(
    original: O,
    synthetic: S,
    strategy: MergeStrategy,
) -> Result<Merged<S::IntoIter>, SynthesisError>
where
    O: IntoIterator<Item = Result<SentencePair, E>>,
    S: IntoIterator<Item = Result<SentencePair, E>>,
    SynthesisError: From<E>,
{
    let mut langs = None;
    let mut originals = VecDeque::new();
    let mut seen = HashSet::new();
    for pair in original {
        let pair = pair?;
        check_langs(&mut langs, &pair)?;
        seen.insert((pair.source.text.clone(), pair.target.text.clone()));
        originals.push_back(pair);
    }
    let report = MergeReport {
        original: originals.len() as u64,
        ..MergeReport::default()
    };
    Ok(Merged {
        originals,
        seen,
        synthetic: synthetic.into_iter(),
        strategy,
        langs,
        since_original: 0,
        synthetic_done: false,
        failed: false,
        report,
    })
}

fn check_langs(
    langs: &mut Option<(LanguageTag, LanguageTag)>,
    pair: &SentencePair,
) -> Result<(), SynthesisError> {
    let found = pair.languages();
    match langs {
        None => {
            *langs = Some(found);
            Ok(())
        }
        Some(expected) if *expected == found => Ok(()),
        Some(expected) => Err(SynthesisError::LanguageMismatch {
            expected: *expected,
            found,
        }),
    }
}

impl<S> Merged<S> {
    pub fn report(&self) -> &MergeReport {
        &self.report
    }
}

impl<S, E> Merged<S>
where
    S: Iterator<Item = Result<SentencePair, E>>,
    SynthesisError: From<E>,
{
    /// Next synthetic pair that does not duplicate an original.
    fn next_synthetic(&mut self) -> Option<Result<SentencePair, SynthesisError>> {
        if self.synthetic_done {
            return None;
        }
        for pair in self.synthetic.by_ref() {
            let pair = match pair {
                Ok(p) => p,
                Err(e) => return Some(Err(e.into())),
            };
            if let Err(e) = check_langs(&mut self.langs, &pair) {
                return Some(Err(e));
            }
            self.report.synthetic_in += 1;
            // Borrowed lookup would need a custom key type; the clone is cheap
            // next to the I/O around a merge.
            if self
                .seen
                .contains(&(pair.source.text.clone(), pair.target.text.clone()))
            {
                self.report.duplicates_dropped += 1;
                continue;
            }
            return Some(Ok(pair));
        }
        self.synthetic_done = true;
        None
    }
}

impl<S, E> Iterator for Merged<S>
where
    S: Iterator<Item = Result<SentencePair, E>>,
    SynthesisError: From<E>,
{
    type Item = Result<SentencePair, SynthesisError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let take_synthetic = match self.strategy {
            MergeStrategy::Concat => self.originals.is_empty(),
            MergeStrategy::Interleave(r) => {
                self.originals.is_empty() || (self.report.emitted > 0 && self.since_original < r)
            }
        };
        let item = if take_synthetic {
            match self.next_synthetic() {
                Some(x) => {
                    self.since_original += 1;
                    Some(x)
                }
                None => self.originals.pop_front().map(|p| {
                    self.since_original = 0;
                    Ok(p)
                }),
            }
        } else {
            self.since_original = 0;
            self.originals.pop_front().map(Ok)
        };
        match &item {
            Some(Ok(_)) => self.report.emitted += 1,
            Some(Err(_)) => self.failed = true,
            None => {}
        }
        item
    }
}
