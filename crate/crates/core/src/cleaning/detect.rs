//! Script-ratio language identification for Vietnamese and Chinese.
//!
//! Han ideographs vote for `zh`. Latin letters carrying Vietnamese
//! diacritics (tone marks, and the modified letters ă â đ ê ô ơ ư) vote for
//! `vi`. Plain ASCII letters, digits and punctuation are neutral and do not
//! enter the ratios; any other alphabetic character (other scripts, other
//! Latin diacritics) counts against both.

use serde::Serialize;

use crate::corpus_io::LanguageTag;
use crate::tokenization::is_han;

/// Lowercase Latin letters of the Vietnamese alphabet that carry a diacritic.
const VIETNAMESE_LETTERS: &str = "àáảãạăằắẳẵặâầấẩẫậ\
                                  èéẻẽẹêềếểễệ\
                                  ìíỉĩị\
                                  òóỏõọôồốổỗộơờớởỡợ\
                                  ùúủũụưừứửữự\
                                  ỳýỷỹỵđ";

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.8;

fn is_vietnamese_letter(c: char) -> bool {
    if c.is_ascii() {
        return false;
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => VIETNAMESE_LETTERS.contains(l),
        _ => false,
    }
}

/// Grave, acute, tilde, hook above, dot below, circumflex, breve, horn.
fn is_vietnamese_combining(c: char) -> bool {
    matches!(
        c,
        '\u{0300}' | '\u{0301}' | '\u{0303}' | '\u{0309}' | '\u{0323}' | '\u{0302}' | '\u{0306}' | '\u{031B}'
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LanguageVerdict {
    pub lang: LanguageTag,
    /// `max(han_ratio, viet_latin_ratio)`.
    pub confidence: f64,
    pub han_ratio: f64,
    pub viet_latin_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot detect the language of empty or whitespace-only text")]
pub struct UndecidableText;

pub trait LanguageDetector: Send + Sync {
    fn detect(&self, text: &str) -> Result<LanguageVerdict, UndecidableText>;
}

/// Character-class counts behind a verdict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScriptCounts {
    pub han: usize,
    pub vietnamese: usize,
    /// Alphabetic characters that are neither Han, Vietnamese-marked, nor ASCII.
    pub other: usize,
}

impl ScriptCounts {
    pub fn of(text: &str) -> Self {
        let mut counts = ScriptCounts::default();
        // A decomposed tone mark upgrades the plain letter before it, once.
        let mut upgradable = false;
        for c in text.chars() {
            if is_han(c) {
                counts.han += 1;
                upgradable = false;
            } else if is_vietnamese_letter(c) {
                counts.vietnamese += 1;
                upgradable = false;
            } else if c.is_ascii_alphabetic() {
                upgradable = true;
            } else if is_vietnamese_combining(c) {
                if upgradable {
                    counts.vietnamese += 1;
                    upgradable = false;
                }
            } else if c.is_alphabetic() {
                counts.other += 1;
                upgradable = false;
            } else {
                upgradable = false;
            }
        }
        counts
    }

    pub fn classifiable(&self) -> usize {
        self.han + self.vietnamese + self.other
    }
}

/// Deterministic detector over [`ScriptCounts`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptDetector {
    pub min_confidence: f64,
}

impl Default for ScriptDetector {
    fn default() -> Self {
        ScriptDetector {
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

impl ScriptDetector {
    pub fn new(min_confidence: f64) -> Self {
        ScriptDetector { min_confidence }
    }
}

impl LanguageDetector for ScriptDetector {
    fn detect(&self, text: &str) -> Result<LanguageVerdict, UndecidableText> {
        if text.trim().is_empty() {
            return Err(UndecidableText);
        }
        let counts = ScriptCounts::of(text);
        let total = counts.classifiable();
        if total == 0 {
            return Ok(LanguageVerdict {
                lang: LanguageTag::Other,
                confidence: 0.0,
                han_ratio: 0.0,
                viet_latin_ratio: 0.0,
            });
        }
        let han_ratio = counts.han as f64 / total as f64;
        let viet_latin_ratio = counts.vietnamese as f64 / total as f64;
        let (best, confidence) = if han_ratio >= viet_latin_ratio {
            (LanguageTag::Zh, han_ratio)
        } else {
            (LanguageTag::Vi, viet_latin_ratio)
        };
        let lang = if confidence >= self.min_confidence && confidence > 0.0 {
            best
        } else {
            LanguageTag::Other
        };
        Ok(LanguageVerdict {
            lang,
            confidence,
            han_ratio,
            viet_latin_ratio,
        })
    }
}

/// Detection with the default 0.8 confidence threshold.
pub fn detect_language(text: &str) -> Result<LanguageVerdict, UndecidableText> {
    ScriptDetector::default().detect(text)
}
