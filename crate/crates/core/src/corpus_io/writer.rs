use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{CorpusError, Sentence, SentencePair};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteCounts {
    /// Lines written to each output file.
    pub written: u64,
    /// Items refused because a text contained a line break.
    pub rejected: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>, CorpusError> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 16, f))
        .map_err(|e| CorpusError::io(path, e))
}

fn put_line(w: &mut BufWriter<File>, path: &Path, text: &str) -> Result<(), CorpusError> {
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|e| CorpusError::io(path, e))
}

fn finish(w: BufWriter<File>, path: &Path) -> Result<(), CorpusError> {
    w.into_inner()
        .map_err(|e| CorpusError::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| CorpusError::io(path, e))
}

/// Writes two aligned line files. A pair where either side contains a line
/// break is skipped and logged.
pub fn write_parallel<I>(
    pairs: I,
    source_path: &Path,
    target_path: &Path,
) -> Result<WriteCounts, CorpusError>
where
    I: IntoIterator<Item = SentencePair>,
{
    let mut src = create(source_path)?;
    let mut tgt = create(target_path)?;
    let mut counts = WriteCounts::default();
    for pair in pairs {
        if !pair.source.is_single_line() || !pair.target.is_single_line() {
            log::warn!(
                "rejecting pair {} ({}): text contains a line break",
                pair.source.id,
                source_path.display()
            );
            counts.rejected += 1;
            continue;
        }
        put_line(&mut src, source_path, &pair.source.text)?;
        put_line(&mut tgt, target_path, &pair.target.text)?;
        counts.written += 1;
    }
    finish(src, source_path)?;
    finish(tgt, target_path)?;
    Ok(counts)
}

pub fn write_monolingual<I>(sentences: I, path: &Path) -> Result<WriteCounts, CorpusError>
where
    I: IntoIterator<Item = Sentence>,
{
    let mut out = create(path)?;
    let mut counts = WriteCounts::default();
    for s in sentences {
        if !s.is_single_line() {
            log::warn!("rejecting sentence {} ({}): text contains a line break", s.id, path.display());
            counts.rejected += 1;
            continue;
        }
        put_line(&mut out, path, &s.text)?;
        counts.written += 1;
    }
    finish(out, path)?;
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::{count_lines, read_parallel, LanguageTag, Origin};
    use proptest::prelude::*;

    fn pair(s: &str, t: &str) -> SentencePair {
        SentencePair {
            source: Sentence::new(0, s, LanguageTag::Vi),
            target: Sentence::new(0, t, LanguageTag::Zh),
            origin: Origin::Original,
        }
    }

    fn read_back(s: &Path, t: &Path) -> Vec<(String, String)> {
        read_parallel(s, t, LanguageTag::Vi, LanguageTag::Zh)
            .unwrap()
            .map(|p| {
                let p = p.unwrap();
                (p.source.text, p.target.text)
            })
            .collect()
    }

    #[test]
    fn three_pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (s, t) = (dir.path().join("o.vi"), dir.path().join("o.zh"));
        let input = vec![pair("một", "一"), pair("hai\tba", "二"), pair("", "三")];
        let counts = write_parallel(input.clone(), &s, &t).unwrap();
        assert_eq!(counts, WriteCounts { written: 3, rejected: 0 });
        assert_eq!(count_lines(&s).unwrap(), 3);
        let expected: Vec<_> = input
            .iter()
            .map(|p| (p.source.text.clone(), p.target.text.clone()))
            .collect();
        assert_eq!(read_back(&s, &t), expected);
    }

    #[test]
    fn empty_stream_gives_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let (s, t) = (dir.path().join("o.vi"), dir.path().join("o.zh"));
        let counts = write_parallel(Vec::new(), &s, &t).unwrap();
        assert_eq!(counts.written, 0);
        assert_eq!(std::fs::metadata(&s).unwrap().len(), 0);
        assert_eq!(std::fs::metadata(&t).unwrap().len(), 0);
    }

    #[test]
    fn newline_pair_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (s, t) = (dir.path().join("o.vi"), dir.path().join("o.zh"));
        let counts =
            write_parallel(vec![pair("a", "b"), pair("x\ny", "z"), pair("c", "d\r")], &s, &t)
                .unwrap();
        assert_eq!(counts, WriteCounts { written: 1, rejected: 2 });
        assert_eq!(read_back(&s, &t), vec![("a".into(), "b".into())]);
    }

    #[test]
    fn unwritable_destination_is_fatal() {
        let r = write_parallel(
            vec![pair("a", "b")],
            Path::new("/nonexistent/dir/o.vi"),
            Path::new("/nonexistent/dir/o.zh"),
        );
        assert!(matches!(r, Err(CorpusError::Io { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn write_then_read_is_identity(
            texts in prop::collection::vec(("[^\n\r]{0,20}", "[^\n\r]{0,20}"), 0..30)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let (s, t) = (dir.path().join("o.vi"), dir.path().join("o.zh"));
            let pairs: Vec<_> = texts.iter().map(|(a, b)| pair(a, b)).collect();
            write_parallel(pairs, &s, &t).unwrap();
            prop_assert_eq!(read_back(&s, &t), texts);
        }
    }
}
