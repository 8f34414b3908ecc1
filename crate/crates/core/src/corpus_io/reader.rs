use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use super::{CorpusError, LanguageTag, Origin, Sentence, SentencePair};

/// Diagnostics retained per reader; the count keeps going past this.
const MAX_KEPT_DIAGNOSTICS: usize = 64;

/// A line that could not be turned into a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    pub path: PathBuf,
    /// Zero-based line number.
    pub line: u64,
    pub message: String,
}

struct LineSource {
    path: PathBuf,
    reader: BufReader<File>,
    buf: Vec<u8>,
    line: u64,
}

enum RawLine {
    Text(String),
    Invalid(LineDiagnostic),
}

impl LineSource {
    fn open(path: &Path) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(LineSource {
            path: path.to_path_buf(),
            reader: BufReader::with_capacity(1 << 16, file),
            buf: Vec::with_capacity(256),
            line: 0,
        })
    }

    fn next_line(&mut self) -> Option<Result<(u64, RawLine), CorpusError>> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(_) => {
                if self.buf.last() == Some(&b'\n') {
                    self.buf.pop();
                }
                let line = self.line;
                self.line += 1;
                let raw = match std::str::from_utf8(&self.buf) {
                    Ok(s) => RawLine::Text(s.to_owned()),
                    Err(e) => RawLine::Invalid(LineDiagnostic {
                        path: self.path.clone(),
                        line,
                        message: format!("invalid UTF-8: {e}"),
                    }),
                };
                Some(Ok((line, raw)))
            }
            Err(e) => Some(Err(CorpusError::io(&self.path, e))),
        }
    }
}

#[derive(Debug, Default)]
struct Diagnostics {
    kept: Vec<LineDiagnostic>,
    count: u64,
}

impl Diagnostics {
    fn push(&mut self, d: LineDiagnostic) {
        log::warn!("{}:{}: {}", d.path.display(), d.line + 1, d.message);
        self.count += 1;
        if self.kept.len() < MAX_KEPT_DIAGNOSTICS {
            self.kept.push(d);
        }
    }
}

/// Streams sentences from a one-sentence-per-line file.
///
/// Lines that are not valid UTF-8 are skipped and recorded as diagnostics.
/// An I/O error is yielded once and ends the stream.
pub struct MonolingualReader {
    source: LineSource,
    lang: LanguageTag,
    diagnostics: Diagnostics,
    failed: bool,
}

pub fn read_monolingual(path: &Path, lang: LanguageTag) -> Result<MonolingualReader, CorpusError> {
    Ok(MonolingualReader {
        source: LineSource::open(path)?,
        lang,
        diagnostics: Diagnostics::default(),
        failed: false,
    })
}

impl MonolingualReader {
    /// Number of lines skipped so far.
    pub fn error_count(&self) -> u64 {
        self.diagnostics.count
    }

    /// The first few skipped lines.
    pub fn diagnostics(&self) -> &[LineDiagnostic] {
        &self.diagnostics.kept
    }

    pub fn lines_read(&self) -> u64 {
        self.source.line
    }
}

impl Iterator for MonolingualReader {
    type Item = Result<Sentence, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            match self.source.next_line()? {
                Ok((id, RawLine::Text(text))) => return Some(Ok(Sentence::new(id, text, self.lang))),
                Ok((_, RawLine::Invalid(d))) => self.diagnostics.push(d),
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Counts lines the way the readers do: a final line without a trailing
/// LF still counts.
pub fn count_lines(path: &Path) -> Result<u64, CorpusError> {
    let mut file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut buf = vec![0u8; 1 << 16];
    let mut lines = 0u64;
    let mut last = None;
    loop {
        let n = file.read(&mut buf).map_err(|e| CorpusError::io(path, e))?;
        if n == 0 {
            break;
        }
        lines += buf[..n].iter().filter(|&&b| b == b'\n').count() as u64;
        last = Some(buf[n - 1]);
    }
    if matches!(last, Some(b) if b != b'\n') {
        lines += 1;
    }
    Ok(lines)
}

/// Streams aligned pairs from two line files. Both files are counted first so
/// misalignment is reported before any pair is produced.
pub struct ParallelReader {
    source: LineSource,
    target: LineSource,
    source_lang: LanguageTag,
    target_lang: LanguageTag,
    diagnostics: Diagnostics,
    failed: bool,
}

pub fn read_parallel(
    source_path: &Path,
    target_path: &Path,
    source_lang: LanguageTag,
    target_lang: LanguageTag,
) -> Result<ParallelReader, CorpusError> {
    let source_lines = count_lines(source_path)?;
    let target_lines = count_lines(target_path)?;
    if source_lines != target_lines {
        return Err(CorpusError::Alignment {
            source_lines,
            target_lines,
        });
    }
    Ok(ParallelReader {
        source: LineSource::open(source_path)?,
        target: LineSource::open(target_path)?,
        source_lang,
        target_lang,
        diagnostics: Diagnostics::default(),
        failed: false,
    })
}

impl ParallelReader {
    pub fn error_count(&self) -> u64 {
        self.diagnostics.count
    }

    pub fn diagnostics(&self) -> &[LineDiagnostic] {
        &self.diagnostics.kept
    }
}

impl Iterator for ParallelReader {
    type Item = Result<SentencePair, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let src = self.source.next_line();
            let tgt = self.target.next_line();
            let (src, tgt) = match (src, tgt) {
                (None, None) => return None,
                (Some(Err(e)), _) | (_, Some(Err(e))) => {
                    self.failed = true;
                    return Some(Err(e));
                }
                (Some(Ok(s)), Some(Ok(t))) => (s, t),
                // The files changed underneath us since they were counted.
                (s, t) => {
                    self.failed = true;
                    let extra = |x: &Option<_>| x.is_some() as u64;
                    return Some(Err(CorpusError::Alignment {
                        source_lines: self.source.line + extra(&s),
                        target_lines: self.target.line + extra(&t),
                    }));
                }
            };
            match (src, tgt) {
                ((id, RawLine::Text(s)), (_, RawLine::Text(t))) => {
                    return Some(Ok(SentencePair {
                        source: Sentence::new(id, s, self.source_lang),
                        target: Sentence::new(id, t, self.target_lang),
                        origin: Origin::Original,
                    }))
                }
                ((_, s), (_, t)) => {
                    for raw in [s, t] {
                        if let RawLine::Invalid(d) = raw {
                            self.diagnostics.push(d);
                        }
                    }
                }
            }
        }
    }
}
