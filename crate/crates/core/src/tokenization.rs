//! Deterministic tokenization for Vietnamese and Chinese.
//!
//! Vietnamese is split at syllable (whitespace) level with leading and
//! trailing punctuation peeled off as separate tokens. Chinese yields one
//! token per Han ideograph; runs of Latin letters or digits stay together.
//! Latin text is lowercased unless [`CaseMode::Preserve`] is requested.

use crate::corpus_io::LanguageTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    HanChar,
    Number,
    Punct,
}

/// Non-empty, whitespace-free unit of text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Token {
            text: text.into(),
            kind,
        }
    }

    pub fn is_punct(&self) -> bool {
        self.kind == TokenKind::Punct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseMode {
    /// Used for TF-IDF and length counting.
    #[default]
    Lowercase,
    /// Used for BLEU.
    Preserve,
}

/// Pluggable tokenizer, so a word segmenter can replace per-character
/// Chinese tokens.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

/// The built-in script rules for one language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptTokenizer {
    pub lang: LanguageTag,
    pub case: CaseMode,
}

impl ScriptTokenizer {
    pub fn new(lang: LanguageTag, case: CaseMode) -> Self {
        ScriptTokenizer { lang, case }
    }
}

impl Tokenizer for ScriptTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        tokenize_with(text, self.lang, self.case)
    }
}

/// CJK unified ideographs, extensions A through I, and compatibility ideographs.
pub fn is_han(c: char) -> bool {
    matches!(c,
        '\u{3400}'..='\u{4DBF}'
        | '\u{4E00}'..='\u{9FFF}'
        | '\u{F900}'..='\u{FAFF}'
        | '\u{20000}'..='\u{2FA1F}'
        | '\u{30000}'..='\u{323AF}'
        | '\u{3007}')
}

/// Combining diacritical marks (decomposed tone marks and the like).
pub(crate) fn is_combining_mark(c: char) -> bool {
    matches!(c, '\u{0300}'..='\u{036F}' | '\u{1AB0}'..='\u{1AFF}' | '\u{1DC0}'..='\u{1DFF}')
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !is_combining_mark(c)
}

fn run_kind(run: &str) -> TokenKind {
    let mut digits = false;
    for c in run.chars() {
        match c {
            '0'..='9' => digits = true,
            '.' | ',' => {}
            _ => return TokenKind::Word,
        }
    }
    if digits {
        TokenKind::Number
    } else {
        TokenKind::Word
    }
}

fn cased(s: &str, case: CaseMode) -> String {
    match case {
        CaseMode::Lowercase => s.to_lowercase(),
        CaseMode::Preserve => s.to_string(),
    }
}

/// Lowercasing tokenization.
pub fn tokenize(text: &str, lang: LanguageTag) -> Vec<Token> {
    tokenize_with(text, lang, CaseMode::Lowercase)
}

pub fn tokenize_with(text: &str, lang: LanguageTag, case: CaseMode) -> Vec<Token> {
    match lang {
        LanguageTag::Zh => tokenize_zh(text, case),
        LanguageTag::Vi | LanguageTag::Other => tokenize_vi(text, case),
    }
}

fn tokenize_vi(text: &str, case: CaseMode) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let core_start = chunk
            .char_indices()
            .find(|&(_, c)| !is_punct(c))
            .map(|(i, _)| i);
        let Some(core_start) = core_start else {
            out.extend(chunk.chars().map(|c| Token::new(c, TokenKind::Punct)));
            continue;
        };
        let core_end = chunk
            .char_indices()
            .rev()
            .find(|&(_, c)| !is_punct(c))
            .map(|(i, c)| i + c.len_utf8())
            .expect("chunk has a non-punct char");
        out.extend(chunk[..core_start].chars().map(|c| Token::new(c, TokenKind::Punct)));
        let core = &chunk[core_start..core_end];
        out.push(Token::new(cased(core, case), run_kind(core)));
        out.extend(chunk[core_end..].chars().map(|c| Token::new(c, TokenKind::Punct)));
    }
    out
}

fn tokenize_zh(text: &str, case: CaseMode) -> Vec<Token> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    let flush = |out: &mut Vec<Token>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            let run = &text[s..end];
            out.push(Token::new(cased(run, case), run_kind(run)));
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            flush(&mut out, &mut run_start, i);
        } else if is_han(c) {
            flush(&mut out, &mut run_start, i);
            out.push(Token::new(c, TokenKind::HanChar));
        } else if is_punct(c) {
            flush(&mut out, &mut run_start, i);
            out.push(Token::new(c, TokenKind::Punct));
        } else if run_start.is_none() {
            run_start = Some(i);
        }
    }
    flush(&mut out, &mut run_start, text.len());
    out
}
