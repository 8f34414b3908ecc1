use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Language identity. Only `vi` and `zh` are valid pipeline languages;
/// `Other` is what the detector returns for everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageTag {
    Vi,
    Zh,
    Other,
}

impl LanguageTag {
    pub fn code(self) -> &'static str {
        match self {
            LanguageTag::Vi => "vi",
            LanguageTag::Zh => "zh",
            LanguageTag::Other => "other",
        }
    }

    pub fn is_pipeline_language(self) -> bool {
        matches!(self, LanguageTag::Vi | LanguageTag::Zh)
    }

    /// The other pipeline language (`vi` <-> `zh`).
    pub fn counterpart(self) -> Option<LanguageTag> {
        match self {
            LanguageTag::Vi => Some(LanguageTag::Zh),
            LanguageTag::Zh => Some(LanguageTag::Vi),
            LanguageTag::Other => None,
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language tag `{0}` (expected `vi` or `zh`)")]
pub struct UnknownLanguage(pub String);

impl FromStr for LanguageTag {
    type Err = UnknownLanguage;

    /// Accepts only the two pipeline languages.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vi" => Ok(LanguageTag::Vi),
            "zh" => Ok(LanguageTag::Zh),
            _ => Err(UnknownLanguage(s.to_string())),
        }
    }
}

/// One line of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// Ordinal within the corpus stream; for file readers this is the
    /// zero-based line number.
    pub id: u64,
    pub text: String,
    pub lang: LanguageTag,
}

impl Sentence {
    pub fn new(id: u64, text: impl Into<String>, lang: LanguageTag) -> Self {
        Sentence {
            id,
            text: text.into(),
            lang,
        }
    }

    pub fn is_single_line(&self) -> bool {
        !self.text.contains(['\n', '\r'])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PairError {
    #[error("pair languages must be distinct pipeline languages, got {0} / {1}")]
    Languages(LanguageTag, LanguageTag),
}

/// An aligned source/target pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
    pub origin: Origin,
}

impl SentencePair {
    pub fn new(source: Sentence, target: Sentence, origin: Origin) -> Result<Self, PairError> {
        if source.lang == target.lang
            || !source.lang.is_pipeline_language()
            || !target.lang.is_pipeline_language()
        {
            return Err(PairError::Languages(source.lang, target.lang));
        }
        Ok(SentencePair {
            source,
            target,
            origin,
        })
    }

    /// Swaps sides so that `source.lang == source_lang`.
    pub fn oriented(self, source_lang: LanguageTag) -> Self {
        if self.source.lang == source_lang {
            self
        } else {
            SentencePair {
                source: self.target,
                target: self.source,
                origin: self.origin,
            }
        }
    }

    pub fn languages(&self) -> (LanguageTag, LanguageTag) {
        (self.source.lang, self.target.lang)
    }
}
