use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};

use super::{BackendError, SynthesisError, TranslationBackend};
use crate::corpus_io::{LanguageTag, Origin, Sentence, SentencePair};

/// `mono -> translated`: the language of the selected monolingual sentences
/// and the language the backend translates them into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Direction {
    pub mono: LanguageTag,
    pub translated: LanguageTag,
}

impl Direction {
    pub fn new(mono: LanguageTag, translated: LanguageTag) -> Self {
        Direction { mono, translated }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.mono, self.translated)
    }
}

impl TryFrom<String> for Direction {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> String {
        d.to_string()
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    /// `zh-vi`, `zh->vi` or `zh:vi`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("->")
            .or_else(|| s.split_once(['-', ':']))
            .ok_or_else(|| format!("direction `{s}` is not of the form `<mono>-<translated>`"))?;
        let mono: LanguageTag = a.parse().map_err(|e| format!("{e}"))?;
        let translated: LanguageTag = b.parse().map_err(|e| format!("{e}"))?;
        if mono == translated {
            return Err(format!("direction `{s}` translates a language into itself"));
        }
        Ok(Direction { mono, translated })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub batch_size: usize,
    pub max_in_flight_batches: usize,
    pub retry_limit: u32,
    /// Delay before the first retry; doubles on each further attempt.
    pub retry_backoff: Duration,
    pub direction: Direction,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            batch_size: 16,
            max_in_flight_batches: 4,
            retry_limit: 2,
            retry_backoff: Duration::from_millis(200),
            direction: Direction::new(LanguageTag::Zh, LanguageTag::Vi),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.batch_size < 1 {
            return Err(SynthesisError::Config("batch_size must be at least 1".into()));
        }
        if self.max_in_flight_batches < 1 {
            return Err(SynthesisError::Config(
                "max_in_flight_batches must be at least 1".into(),
            ));
        }
        if !self.direction.mono.is_pipeline_language()
            || !self.direction.translated.is_pipeline_language()
            || self.direction.mono == self.direction.translated
        {
            return Err(SynthesisError::Config(format!(
                "invalid direction {}",
                self.direction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SynthesisReport {
    pub input_sentences: u64,
    pub emitted_pairs: u64,
    pub batches: u64,
    pub failed_batches: u64,
    pub failed_sentences: u64,
    pub retries: u64,
}

struct Job {
    index: u64,
    sentences: Vec<Sentence>,
}

struct Done {
    index: u64,
    sentences: Vec<Sentence>,
    outcome: Result<Vec<String>, BackendError>,
    retries: u64,
}

fn translate_with_retries(
    backend: &dyn TranslationBackend,
    texts: &[String],
    retry_limit: u32,
    backoff: Duration,
) -> (Result<Vec<String>, BackendError>, u64) {
    let mut attempt = 0u32;
    loop {
        let result = backend.translate_batch(texts).and_then(|out| {
            if out.len() == texts.len() {
                Ok(out)
            } else {
                Err(BackendError::Contract {
                    expected: texts.len(),
                    got: out.len(),
                })
            }
        });
        match result {
            Ok(out) => return (Ok(out), attempt as u64),
            Err(e) if attempt >= retry_limit => return (Err(e), attempt as u64),
            Err(e) => {
                log::debug!("batch attempt {} failed: {e}; retrying", attempt + 1);
                if !backoff.is_zero() {
                    std::thread::sleep(backoff.saturating_mul(1 << attempt.min(10)));
                }
                attempt += 1;
            }
        }
    }
}

/// Lazily back-translated pairs, in input order.
///
/// Up to `max_in_flight_batches` batches are translated concurrently on
/// worker threads; completed batches wait in a reorder buffer until every
/// earlier batch has been emitted. A batch that still fails after
/// `retry_limit` retries is dropped and tallied. An unreachable backend ends
/// the stream with [`SynthesisError::BackendUnreachable`].
pub struct BackTranslation<I> {
    input: I,
    config: SynthesisConfig,
    jobs: Option<Sender<Job>>,
    done: Receiver<Done>,
    workers: Vec<JoinHandle<()>>,
    next_send: u64,
    next_emit: u64,
    in_flight: usize,
    reorder: BTreeMap<u64, Done>,
    ready: VecDeque<SentencePair>,
    input_done: bool,
    finished: bool,
    report: SynthesisReport,
}

/// Emits `SentencePair { source: translation(m), target: m, origin: synthetic }`
/// for every selected sentence `m`.
pub fn back_translate<I>(
    selected: I,
    backend: Arc<dyn TranslationBackend>,
    config: &SynthesisConfig,
) -> Result<BackTranslation<I::IntoIter>, SynthesisError>
where
    I: IntoIterator<Item = Sentence>,
{
    config.validate()?;
    if backend.src_lang() != config.direction.mono || backend.tgt_lang() != config.direction.translated {
        return Err(SynthesisError::DirectionMismatch {
            backend: Direction::new(backend.src_lang(), backend.tgt_lang()),
            configured: config.direction,
        });
    }
    let (job_tx, job_rx) = unbounded::<Job>();
    let (done_tx, done_rx) = unbounded::<Done>();
    let workers = (0..config.max_in_flight_batches)
        .map(|_| {
            let backend = Arc::clone(&backend);
            let jobs = job_rx.clone();
            let done = done_tx.clone();
            let (retry_limit, backoff) = (config.retry_limit, config.retry_backoff);
            std::thread::spawn(move || {
                for job in jobs.iter() {
                    let texts: Vec<String> = job.sentences.iter().map(|s| s.text.clone()).collect();
                    let (outcome, retries) =
                        translate_with_retries(backend.as_ref(), &texts, retry_limit, backoff);
                    let msg = Done {
                        index: job.index,
                        sentences: job.sentences,
                        outcome,
                        retries,
                    };
                    if done.send(msg).is_err() {
                        break;
                    }
                }
            })
        })
        .collect();
    Ok(BackTranslation {
        input: selected.into_iter(),
        config: config.clone(),
        jobs: Some(job_tx),
        done: done_rx,
        workers,
        next_send: 0,
        next_emit: 0,
        in_flight: 0,
        reorder: BTreeMap::new(),
        ready: VecDeque::new(),
        input_done: false,
        finished: false,
        report: SynthesisReport::default(),
    })
}

fn one_line(s: String) -> String {
    if s.contains(['\n', '\r']) {
        s.split(['\n', '\r']).filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" ")
    } else {
        s
    }
}

impl<I> BackTranslation<I> {
    pub fn report(&self) -> &SynthesisReport {
        &self.report
    }

    fn shutdown(&mut self) {
        self.finished = true;
        self.jobs = None;
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl<I: Iterator<Item = Sentence>> BackTranslation<I> {
    fn fill(&mut self) -> Result<(), SynthesisError> {
        while !self.input_done && self.in_flight < self.config.max_in_flight_batches {
            let batch: Vec<Sentence> = self.input.by_ref().take(self.config.batch_size).collect();
            if batch.len() < self.config.batch_size {
                self.input_done = true;
            }
            if batch.is_empty() {
                break;
            }
            if let Some(s) = batch.iter().find(|s| s.lang != self.config.direction.mono) {
                return Err(SynthesisError::SentenceLanguage {
                    id: s.id,
                    found: s.lang,
                    expected: self.config.direction.mono,
                });
            }
            self.report.input_sentences += batch.len() as u64;
            let job = Job {
                index: self.next_send,
                sentences: batch,
            };
            self.next_send += 1;
            self.jobs
                .as_ref()
                .expect("sender present while running")
                .send(job)
                .expect("workers alive while running");
            self.in_flight += 1;
        }
        Ok(())
    }

    fn emit(&mut self, done: Done) -> Result<(), SynthesisError> {
        self.report.batches += 1;
        self.report.retries += done.retries;
        match done.outcome {
            Ok(translations) => {
                let translated = self.config.direction.translated;
                for (m, t) in done.sentences.into_iter().zip(translations) {
                    let source = Sentence::new(m.id, one_line(t), translated);
                    self.ready.push_back(SentencePair {
                        source,
                        target: m,
                        origin: Origin::Synthetic,
                    });
                }
            }
            Err(e) if e.is_fatal() => {
                return Err(SynthesisError::BackendUnreachable {
                    completed: self.report.emitted_pairs + self.ready.len() as u64,
                    source: e,
                })
            }
            Err(e) => {
                log::warn!(
                    "dropping batch {} ({} sentences) after {} retries: {e}",
                    done.index,
                    done.sentences.len(),
                    done.retries
                );
                self.report.failed_batches += 1;
                self.report.failed_sentences += done.sentences.len() as u64;
            }
        }
        Ok(())
    }
}

impl<I: Iterator<Item = Sentence>> Iterator for BackTranslation<I> {
    type Item = Result<SentencePair, SynthesisError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(p) = self.ready.pop_front() {
                self.report.emitted_pairs += 1;
                return Some(Ok(p));
            }
            if self.finished {
                return None;
            }
            if let Err(e) = self.fill() {
                self.shutdown();
                return Some(Err(e));
            }
            if self.in_flight == 0 && self.reorder.is_empty() {
                self.shutdown();
                return None;
            }
            while !self.reorder.contains_key(&self.next_emit) {
                let done = self.done.recv().expect("workers outlive pending batches");
                self.in_flight -= 1;
                self.reorder.insert(done.index, done);
            }
            let done = self.reorder.remove(&self.next_emit).expect("present");
            self.next_emit += 1;
            if let Err(e) = self.emit(done) {
                self.ready.clear();
                self.shutdown();
                return Some(Err(e));
            }
        }
    }
}

impl<I> Drop for BackTranslation<I> {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{stub_backend, StubKind};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    fn mono(n: usize, lang: LanguageTag) -> Vec<Sentence> {
        (0..n)
            .map(|i| Sentence::new(i as u64, format!("câu {i} số {}", i * 7), lang))
            .collect()
    }

    fn cfg(batch_size: usize, in_flight: usize, retries: u32) -> SynthesisConfig {
        SynthesisConfig {
            batch_size,
            max_in_flight_batches: in_flight,
            retry_limit: retries,
            retry_backoff: Duration::ZERO,
            direction: Direction::new(LanguageTag::Vi, LanguageTag::Zh),
        }
    }

    fn collect<I: Iterator<Item = Sentence>>(bt: &mut BackTranslation<I>) -> Vec<SentencePair> {
        bt.by_ref().map(Result::unwrap).collect()
    }

    #[test]
    fn identity_stub_three_sentences() {
        let backend = Arc::new(stub_backend(StubKind::Identity, LanguageTag::Vi, LanguageTag::Zh));
        let input = mono(3, LanguageTag::Vi);
        let mut bt = back_translate(input.clone(), backend, &cfg(16, 2, 0)).unwrap();
        let out = collect(&mut bt);
        assert_eq!(out.len(), 3);
        for (p, m) in out.iter().zip(&input) {
            assert_eq!(p.source.text, m.text);
            assert_eq!(&p.target, m);
            assert_eq!(p.origin, Origin::Synthetic);
            assert_eq!(p.source.lang, LanguageTag::Zh);
        }
    }

    #[test]
    fn reverse_stub_matches_direct_application() {
        let stub = stub_backend(StubKind::TokenReverse, LanguageTag::Vi, LanguageTag::Zh);
        let input = mono(5, LanguageTag::Vi);
        let mut bt = back_translate(input.clone(), Arc::new(stub.clone()), &cfg(2, 3, 0)).unwrap();
        let out = collect(&mut bt);
        let expected: Vec<String> = input.iter().map(|m| stub.translate_one(&m.text)).collect();
        let got: Vec<String> = out.iter().map(|p| p.source.text.clone()).collect();
        assert_eq!(got, expected);
    }

    /// Fails every call for the listed batch starts (first sentence text).
    struct Flaky {
        fail_first: Mutex<Vec<(String, usize)>>,
        calls: AtomicUsize,
    }

    impl TranslationBackend for Flaky {
        fn src_lang(&self) -> LanguageTag {
            LanguageTag::Vi
        }
        fn tgt_lang(&self) -> LanguageTag {
            LanguageTag::Zh
        }
        fn translate_batch(&self, texts: &[String]) -> Result<Vec<String>, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut fails = self.fail_first.lock().unwrap();
            if let Some(entry) = fails.iter_mut().find(|(t, n)| t == &texts[0] && *n > 0) {
                entry.1 -= 1;
                return Err(BackendError::Status { status: 500 });
            }
            Ok(texts.iter().map(|t| t.to_uppercase()).collect())
        }
    }

    #[test]
    fn failed_batch_is_dropped_and_tallied() {
        let input = mono(9, LanguageTag::Vi);
        let backend = Arc::new(Flaky {
            fail_first: Mutex::new(vec![(input[3].text.clone(), usize::MAX)]),
            calls: AtomicUsize::new(0),
        });
        let mut bt = back_translate(input.clone(), backend, &cfg(3, 2, 0)).unwrap();
        let out = collect(&mut bt);
        assert_eq!(out.len(), 6);
        assert_eq!(bt.report().failed_batches, 1);
        assert_eq!(bt.report().failed_sentences, 3);
        let ids: Vec<u64> = out.iter().map(|p| p.target.id).collect();
        assert_eq!(ids, [0, 1, 2, 6, 7, 8]);
    }

    #[test]
    fn retry_recovers_a_batch() {
        let input = mono(6, LanguageTag::Vi);
        let backend = Arc::new(Flaky {
            fail_first: Mutex::new(vec![(input[0].text.clone(), 1)]),
            calls: AtomicUsize::new(0),
        });
        let mut bt = back_translate(input, Arc::clone(&backend) as Arc<dyn TranslationBackend>, &cfg(3, 1, 1)).unwrap();
        assert_eq!(collect(&mut bt).len(), 6);
        assert_eq!(bt.report().retries, 1);
        assert_eq!(bt.report().failed_batches, 0);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    /// Returns short batches, violating the contract.
    struct Short;

    impl TranslationBackend for Short {
        fn src_lang(&self) -> LanguageTag {
            LanguageTag::Vi
        }
        fn tgt_lang(&self) -> LanguageTag {
            LanguageTag::Zh
        }
        fn translate_batch(&self, texts: &[String]) -> Result<Vec<String>, BackendError> {
            Ok(texts[1..].to_vec())
        }
    }

    #[test]
    fn length_violation_is_a_batch_error() {
        let mut bt = back_translate(mono(4, LanguageTag::Vi), Arc::new(Short), &cfg(2, 1, 0)).unwrap();
        assert!(collect(&mut bt).is_empty());
        assert_eq!(bt.report().failed_batches, 2);
    }

    /// Finishes later batches first.
    struct Slow;

    impl TranslationBackend for Slow {
        fn src_lang(&self) -> LanguageTag {
            LanguageTag::Vi
        }
        fn tgt_lang(&self) -> LanguageTag {
            LanguageTag::Zh
        }
        fn translate_batch(&self, texts: &[String]) -> Result<Vec<String>, BackendError> {
            let n: u64 = texts[0].split(' ').nth(1).unwrap().parse().unwrap();
            std::thread::sleep(Duration::from_millis(40u64.saturating_sub(n * 3)));
            Ok(texts.to_vec())
        }
    }

    #[test]
    fn order_restored_despite_completion_order() {
        let input = mono(12, LanguageTag::Vi);
        let mut bt = back_translate(input.clone(), Arc::new(Slow), &cfg(1, 6, 0)).unwrap();
        let ids: Vec<u64> = collect(&mut bt).iter().map(|p| p.target.id).collect();
        assert_eq!(ids, (0..12).collect::<Vec<_>>());
    }

    struct Down;

    impl TranslationBackend for Down {
        fn src_lang(&self) -> LanguageTag {
            LanguageTag::Vi
        }
        fn tgt_lang(&self) -> LanguageTag {
            LanguageTag::Zh
        }
        fn translate_batch(&self, _: &[String]) -> Result<Vec<String>, BackendError> {
            Err(BackendError::Unreachable("connection refused".into()))
        }
    }

    #[test]
    fn unreachable_backend_fails_the_stream() {
        let mut bt = back_translate(mono(5, LanguageTag::Vi), Arc::new(Down), &cfg(2, 1, 1)).unwrap();
        let first = bt.next().unwrap();
        assert!(matches!(first, Err(SynthesisError::BackendUnreachable { completed: 0, .. })));
        assert!(bt.next().is_none());
    }

    #[test]
    fn direction_must_match_backend() {
        let backend = Arc::new(stub_backend(StubKind::Identity, LanguageTag::Zh, LanguageTag::Vi));
        assert!(matches!(
            back_translate(mono(1, LanguageTag::Vi), backend, &cfg(1, 1, 0)),
            Err(SynthesisError::DirectionMismatch { .. })
        ));
    }

    #[test]
    fn wrong_sentence_language_is_rejected() {
        let backend = Arc::new(stub_backend(StubKind::Identity, LanguageTag::Vi, LanguageTag::Zh));
        let mut bt = back_translate(mono(2, LanguageTag::Zh), backend, &cfg(1, 1, 0)).unwrap();
        assert!(matches!(bt.next(), Some(Err(SynthesisError::SentenceLanguage { .. }))));
    }

    #[test]
    fn multiline_translations_are_flattened() {
        struct Multi;
        impl TranslationBackend for Multi {
            fn src_lang(&self) -> LanguageTag {
                LanguageTag::Vi
            }
            fn tgt_lang(&self) -> LanguageTag {
                LanguageTag::Zh
            }
            fn translate_batch(&self, t: &[String]) -> Result<Vec<String>, BackendError> {
                Ok(t.iter().map(|_| "一\n二\r\n三".to_string()).collect())
            }
        }
        let mut bt = back_translate(mono(1, LanguageTag::Vi), Arc::new(Multi), &cfg(1, 1, 0)).unwrap();
        assert_eq!(collect(&mut bt)[0].source.text, "一 二 三");
    }

    #[test]
    fn direction_parsing() {
        assert_eq!("zh-vi".parse::<Direction>().unwrap(), Direction::new(LanguageTag::Zh, LanguageTag::Vi));
        assert_eq!("vi->zh".parse::<Direction>().unwrap(), Direction::new(LanguageTag::Vi, LanguageTag::Zh));
        assert!("vi-vi".parse::<Direction>().is_err());
        assert!("en-vi".parse::<Direction>().is_err());
        assert_eq!(Direction::new(LanguageTag::Zh, LanguageTag::Vi).to_string(), "zh-vi");
        let d: Direction = serde_json::from_str("\"vi-zh\"").unwrap();
        assert_eq!(serde_json::to_string(&d).unwrap(), "\"vi-zh\"");
    }
}
