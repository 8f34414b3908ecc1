use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;

use super::config::{BackendKind, ConfigError, Diagnostic, DfSource, PipelineConfig};
use crate::cleaning::{clean_corpus, Cleaner, CleaningReport};
use crate::corpus_io::{
    append_manifest, count_lines, lang_path, read_monolingual, read_parallel, write_monolingual,
    write_parallel, CorpusError, ExperimentManifest, LanguageTag, ModelHyperparameters, Origin,
    SentencePair,
};
use crate::evaluation::{bleu, EvalError, Smoothing, MAX_ORDER};
use crate::selection::{
    build_df_table, domain_centroid, format_score_line, select_top_k, SelectionError,
};
use crate::synthesis::{
    back_translate, http_backend, load_dictionary, merge_corpora, stub_backend, StubKind,
    SynthesisError, TranslationBackend,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Clean,
    Select,
    Synthesize,
    Merge,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Clean,
        Stage::Select,
        Stage::Synthesize,
        Stage::Merge,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Clean => "clean",
            Stage::Select => "select",
            Stage::Synthesize => "synthesize",
            Stage::Merge => "merge",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: missing input {}{}", path.display(), hint(*stage))]
    MissingInput { stage: Stage, path: PathBuf },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error("cannot set up translation backend: {0}")]
    Backend(String),
}

fn hint(stage: Stage) -> &'static str {
    match stage {
        Stage::Select => " (run `clean` first)",
        Stage::Synthesize => " (run `select` first)",
        Stage::Merge => " (run `clean` and `synthesize` first)",
        _ => "",
    }
}

impl PipelineError {
    /// 2 for problems found before any work starts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::MissingInput { .. } => 2,
            _ => 1,
        }
    }
}

/// What a finished stage appended to the manifest, plus a one-line summary.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub entry: ExperimentManifest,
    pub summary: String,
}

/// Files a stage writes. Each is first written as `<name>.partial` and only
/// renamed into place once the whole stage has succeeded.
struct Outputs {
    finals: Vec<PathBuf>,
}

fn partial_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

impl Outputs {
    fn new(finals: Vec<PathBuf>) -> Result<Self, CorpusError> {
        for p in &finals {
            for stale in [p.clone(), partial_path(p)] {
                match fs::remove_file(&stale) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                    Err(e) => return Err(CorpusError::io(&stale, e)),
                }
            }
        }
        Ok(Outputs { finals })
    }

    fn partial(&self, i: usize) -> PathBuf {
        partial_path(&self.finals[i])
    }

    fn commit(self) -> Result<(), CorpusError> {
        for p in &self.finals {
            let from = partial_path(p);
            fs::rename(&from, p).map_err(|e| CorpusError::io(&from, e))?;
        }
        Ok(())
    }
}

/// Pulls `T`s out of a fallible stream, parking the first error in `slot`.
struct Shunt<'a, I, E> {
    iter: I,
    slot: &'a mut Option<E>,
}

impl<I, T, E> Iterator for Shunt<'_, I, E>
where
    I: Iterator<Item = Result<T, E>>,
{
    type Item = T;

    fn next(&mut self) -> Option<T> {
        if self.slot.is_some() {
            return None;
        }
        match self.iter.next()? {
            Ok(x) => Some(x),
            Err(e) => {
                *self.slot = Some(e);
                None
            }
        }
    }
}

fn shunt<I, T, E>(iter: I, slot: &mut Option<E>) -> Shunt<'_, I::IntoIter, E>
where
    I: IntoIterator<Item = Result<T, E>>,
{
    Shunt {
        iter: iter.into_iter(),
        slot,
    }
}

fn check<E>(slot: Option<E>) -> Result<(), PipelineError>
where
    PipelineError: From<E>,
{
    match slot {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn inputs(stage: Stage, config: &PipelineConfig) -> Vec<PathBuf> {
    let d = config.direction();
    let mono = d.mono;
    let both = [d.translated, d.mono];
    match stage {
        Stage::Clean => {
            let mut v: Vec<PathBuf> = [LanguageTag::Vi, LanguageTag::Zh]
                .iter()
                .map(|&l| lang_path(&config.paths.parallel, l))
                .collect();
            v.extend(config.paths.monolingual.values().cloned());
            v
        }
        Stage::Select => vec![
            config.output(&format!("clean.{mono}")),
            config.output(&format!("clean.bitext.{mono}")),
        ],
        Stage::Synthesize => {
            let mut v = vec![config.output(&format!("selected.{mono}"))];
            if let Some(p) = &config.synthesis.backend.dictionary {
                if config.synthesis.backend.kind == BackendKind::Dictionary {
                    v.push(p.clone());
                }
            }
            v
        }
        Stage::Merge => both
            .iter()
            .map(|l| config.output(&format!("clean.bitext.{l}")))
            .chain(both.iter().map(|l| config.output(&format!("synthetic.{l}"))))
            .collect(),
        Stage::Evaluate => config
            .evaluation
            .hyp
            .iter()
            .chain(config.evaluation.reference.iter())
            .cloned()
            .collect(),
    }
}

/// Checks that every input exists, then digests them. Nothing is read or
/// written before this succeeds.
fn open_entry(
    stage: Stage,
    run_id: &str,
    paths: &[PathBuf],
    model: &ModelHyperparameters,
) -> Result<ExperimentManifest, PipelineError> {
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        return Err(PipelineError::MissingInput {
            stage,
            path: missing.clone(),
        });
    }
    let mut entry = ExperimentManifest::new(run_id, stage.name());
    for p in paths {
        entry.add_input(p)?;
    }
    model.record(&mut entry);
    Ok(entry)
}

fn finish(
    stage: Stage,
    manifest: &Path,
    mut entry: ExperimentManifest,
    result: Result<String, PipelineError>,
) -> Result<StageOutcome, PipelineError> {
    match result {
        Ok(summary) => {
            entry.param("status", "ok");
            append_manifest(manifest, &entry)?;
            Ok(StageOutcome {
                stage,
                entry,
                summary,
            })
        }
        Err(e) => {
            entry.param("status", "failed").param("error", &e);
            if let Err(me) = append_manifest(manifest, &entry) {
                log::error!("could not record failure in {}: {me}", manifest.display());
            }
            Err(e)
        }
    }
}

/// Runs one stage against `config`'s output directory and appends exactly
/// one manifest entry. A failed stage leaves its outputs as `*.partial` and
/// records the failure (with whatever counts it reached) in the manifest.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    if stage == Stage::Evaluate && !config.evaluation_enabled() {
        return Err(ConfigError::Invalid(vec![Diagnostic {
            key: "evaluation.hyp".into(),
            message: "evaluate needs evaluation.hyp and evaluation.ref".into(),
        }])
        .into());
    }
    let ins = inputs(stage, config);
    fs::create_dir_all(&config.paths.output_dir)
        .map_err(|e| CorpusError::io(&config.paths.output_dir, e))?;
    let mut entry = open_entry(stage, config.run_id(), &ins, &config.model)?;
    let result = match stage {
        Stage::Clean => clean_stage(config, &mut entry),
        Stage::Select => select_stage(config, &mut entry),
        Stage::Synthesize => synthesize_stage(config, &mut entry),
        Stage::Merge => merge_stage(config, &mut entry),
        Stage::Evaluate => {
            let e = &config.evaluation;
            evaluate_into(
                e.hyp.as_deref().expect("checked"),
                e.reference.as_deref().expect("checked"),
                config.evaluation_lang(),
                e.smoothing,
                Some(&config.output("evaluation.bleu")),
                &mut entry,
            )
        }
    };
    finish(stage, &config.manifest_path(), entry, result)
}

/// Clean, select, synthesize, merge, and evaluate when configured.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<StageOutcome>, PipelineError> {
    let mut stages = Stage::ALL.to_vec();
    if !config.evaluation_enabled() {
        stages.pop();
    }
    stages
        .into_iter()
        .map(|s| {
            log::info!("stage {s}");
            run_stage(s, config)
        })
        .collect()
}

/// The `evaluate` stage without a run config: scores `hyp` against `ref`
/// and appends the entry to `manifest`.
pub fn run_evaluate(
    hyp: &Path,
    reference: &Path,
    lang: LanguageTag,
    smoothing: Smoothing,
    manifest: &Path,
    run_id: &str,
) -> Result<StageOutcome, PipelineError> {
    let ins = [hyp.to_path_buf(), reference.to_path_buf()];
    let mut entry = open_entry(Stage::Evaluate, run_id, &ins, &ModelHyperparameters::default())?;
    let result = evaluate_into(hyp, reference, lang, smoothing, None, &mut entry);
    finish(Stage::Evaluate, manifest, entry, result)
}

fn record_report(entry: &mut ExperimentManifest, prefix: &str, r: &CleaningReport) {
    entry
        .count(format!("{prefix}.input"), r.input_count)
        .count(format!("{prefix}.kept"), r.kept_count)
        .count(format!("{prefix}.dropped_language"), r.dropped_language)
        .count(format!("{prefix}.dropped_length"), r.dropped_length)
        .count(format!("{prefix}.dropped_empty"), r.dropped_empty_after_strip);
}

const PAIR_CHUNK: usize = 4096;

fn clean_stage(config: &PipelineConfig, entry: &mut ExperimentManifest) -> Result<String, PipelineError> {
    let c = &config.cleaning;
    entry
        .param("cleaning.min_words", c.min_words)
        .param("cleaning.max_words", c.max_words)
        .param("cleaning.min_language_confidence", c.min_language_confidence)
        .param("cleaning.strip_markup", c.strip_markup);

    let langs: Vec<LanguageTag> = config.paths.monolingual.keys().copied().collect();
    let mut finals: Vec<PathBuf> = langs.iter().map(|l| config.output(&format!("clean.{l}"))).collect();
    finals.push(config.output("clean.bitext.vi"));
    finals.push(config.output("clean.bitext.zh"));
    let outputs = Outputs::new(finals)?;
    let mut summary = Vec::new();

    for (i, (&lang, path)) in config.paths.monolingual.iter().enumerate() {
        let lines = count_lines(path)?;
        let mut cleaned = clean_corpus(read_monolingual(path, lang)?, lang, c);
        let mut err = None;
        write_monolingual(shunt(&mut cleaned, &mut err), &outputs.partial(i))?;
        let report = cleaned.report();
        record_report(entry, &format!("clean.{lang}"), &report);
        entry.count(format!("clean.{lang}.unreadable_lines"), lines.saturating_sub(report.input_count));
        check(err)?;
        summary.push(format!("{lang}: kept {} of {}", report.kept_count, report.input_count));
    }

    let n = langs.len();
    let vi = Cleaner::new(LanguageTag::Vi, c.clone());
    let zh = Cleaner::new(LanguageTag::Zh, c.clone());
    let mut reports = (CleaningReport::default(), CleaningReport::default());
    let (mut pairs_in, mut pairs_kept) = (0u64, 0u64);
    let reader = read_parallel(
        &lang_path(&config.paths.parallel, LanguageTag::Vi),
        &lang_path(&config.paths.parallel, LanguageTag::Zh),
        LanguageTag::Vi,
        LanguageTag::Zh,
    )?;
    let mut err = None;
    let mut pairs = shunt(reader, &mut err);
    let mut kept: Vec<SentencePair> = Vec::new();
    let mut chunk: Vec<SentencePair> = Vec::with_capacity(PAIR_CHUNK);
    loop {
        chunk.clear();
        chunk.extend(pairs.by_ref().take(PAIR_CHUNK));
        if chunk.is_empty() {
            break;
        }
        let results: Vec<_> = chunk
            .par_drain(..)
            .map(|p| (vi.clean_one(p.source), zh.clean_one(p.target)))
            .collect();
        for (s, t) in results {
            pairs_in += 1;
            reports.0.tally(&s);
            reports.1.tally(&t);
            if let (Ok(source), Ok(target)) = (s, t) {
                pairs_kept += 1;
                kept.push(SentencePair {
                    source,
                    target,
                    origin: Origin::Original,
                });
            }
        }
    }
    drop(pairs);
    record_report(entry, "clean.bitext.vi", &reports.0);
    record_report(entry, "clean.bitext.zh", &reports.1);
    entry.count("clean.bitext.pairs_input", pairs_in).count("clean.bitext.pairs_kept", pairs_kept);
    check(err)?;
    write_parallel(kept, &outputs.partial(n), &outputs.partial(n + 1))?;
    outputs.commit()?;
    summary.push(format!("bitext: kept {pairs_kept} of {pairs_in} pairs"));
    Ok(summary.join(", "))
}

fn select_stage(config: &PipelineConfig, entry: &mut ExperimentManifest) -> Result<String, PipelineError> {
    let lang = config.direction().mono;
    let s = &config.selection;
    entry
        .param("selection.k", s.k)
        .param("selection.df_source", s.df_source)
        .param("selection.lang", lang)
        .param("selection.domain_side", format!("clean.bitext.{lang}"));
    let mono_path = config.output(&format!("clean.{lang}"));
    let domain_path = config.output(&format!("clean.bitext.{lang}"));
    let outputs = Outputs::new(vec![
        config.output(&format!("selected.{lang}")),
        config.output("selected.scores"),
        config.output(&format!("df.{lang}.json")),
    ])?;

    let mut err = None;
    let df_path = match s.df_source {
        DfSource::Parallel => &domain_path,
        DfSource::Monolingual => &mono_path,
    };
    let table = build_df_table(
        shunt(read_monolingual(df_path, lang)?, &mut err).map(|s| s.text),
        lang,
    );
    check(err.take())?;
    let table = table?;
    table.save(&outputs.partial(2))?;
    entry.count("df.n_docs", table.n_docs()).count("df.terms", table.len() as u64);

    let centroid = domain_centroid::<f64, _>(
        shunt(read_monolingual(&domain_path, lang)?, &mut err).map(|s| s.text),
        &table,
    );
    check(err.take())?;
    let centroid = centroid?;
    entry.count("centroid.terms", centroid.len() as u64);

    let mut scanned = 0u64;
    let selected = select_top_k(
        shunt(read_monolingual(&mono_path, lang)?, &mut err).inspect(|_| scanned += 1),
        &centroid,
        &table,
        s.k,
    );
    check(err.take())?;
    let selected = selected?;
    entry.count("selection.scanned", scanned).count("selection.selected", selected.len() as u64);

    let path = outputs.partial(1);
    let mut scores = fs::File::create(&path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CorpusError::io(&path, e))?;
    for sc in &selected {
        writeln!(scores, "{}", format_score_line(sc)).map_err(|e| CorpusError::io(&path, e))?;
    }
    scores
        .into_inner()
        .map_err(|e| CorpusError::io(&path, e.into_error()))?
        .sync_all()
        .map_err(|e| CorpusError::io(&path, e))?;
    let n = selected.len();
    write_monolingual(selected.into_iter().map(|s| s.sentence), &outputs.partial(0))?;
    outputs.commit()?;
    Ok(format!("selected {n} of {scanned} {lang} sentences"))
}

fn build_backend(config: &PipelineConfig) -> Result<Arc<dyn TranslationBackend>, PipelineError> {
    let b = &config.synthesis.backend;
    let d = config.direction();
    let (src, tgt) = (d.mono, d.translated);
    Ok(match b.kind {
        BackendKind::StubIdentity => Arc::new(stub_backend(StubKind::Identity, src, tgt)),
        BackendKind::StubReverse => Arc::new(stub_backend(StubKind::TokenReverse, src, tgt)),
        BackendKind::Dictionary => {
            let path = b
                .dictionary
                .as_deref()
                .ok_or_else(|| PipelineError::Backend("no dictionary file configured".into()))?;
            let map = load_dictionary(path)
                .map_err(|e| PipelineError::Backend(format!("{}: {e}", path.display())))?;
            Arc::new(stub_backend(StubKind::Dictionary(map), src, tgt))
        }
        BackendKind::Http => {
            let endpoint = b
                .endpoint
                .as_deref()
                .ok_or_else(|| PipelineError::Backend("no endpoint configured".into()))?;
            let token = match &b.auth_token_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    PipelineError::Backend(format!("environment variable {var} is not set"))
                })?),
                None => None,
            };
            Arc::new(http_backend(endpoint, src, tgt, Duration::from_millis(b.timeout_ms), token))
        }
    })
}

fn synthesize_stage(config: &PipelineConfig, entry: &mut ExperimentManifest) -> Result<String, PipelineError> {
    let s = &config.synthesis;
    let d = s.direction;
    entry
        .param("synthesis.backend", s.backend.kind)
        .param("synthesis.batch_size", s.batch_size)
        .param("synthesis.max_in_flight_batches", s.max_in_flight_batches)
        .param("synthesis.retry_limit", s.retry_limit)
        .param("synthesis.direction", d);
    if let Some(ep) = &s.backend.endpoint {
        entry.param("synthesis.endpoint", ep);
    }
    let backend = build_backend(config)?;
    let outputs = Outputs::new(vec![
        config.output(&format!("synthetic.{}", d.translated)),
        config.output(&format!("synthetic.{}", d.mono)),
    ])?;
    let mut read_err = None;
    let selected = shunt(
        read_monolingual(&config.output(&format!("selected.{}", d.mono)), d.mono)?,
        &mut read_err,
    );
    let mut bt = back_translate(selected, backend, &s.synthesis_config())?;
    let mut err = None;
    let written = write_parallel(shunt(&mut bt, &mut err), &outputs.partial(0), &outputs.partial(1));
    let r = bt.report().clone();
    drop(bt);
    entry
        .count("synthesis.input", r.input_sentences)
        .count("synthesis.completed", r.emitted_pairs)
        .count("synthesis.batches", r.batches)
        .count("synthesis.failed_batches", r.failed_batches)
        .count("synthesis.failed_sentences", r.failed_sentences)
        .count("synthesis.retries", r.retries);
    check(err)?;
    check(read_err)?;
    let written = written?;
    entry.count("synthesis.written", written.written);
    outputs.commit()?;
    Ok(format!(
        "{} synthetic pairs from {} sentences, {} failed batches",
        written.written, r.input_sentences, r.failed_batches
    ))
}

fn merge_stage(config: &PipelineConfig, entry: &mut ExperimentManifest) -> Result<String, PipelineError> {
    let d = config.direction();
    let (src, tgt) = (d.translated, d.mono);
    entry
        .param("merge.strategy", config.merge.strategy)
        .param("merge.source_lang", src)
        .param("merge.target_lang", tgt);
    let outputs = Outputs::new(vec![
        config.output(&format!("train.merged.{src}")),
        config.output(&format!("train.merged.{tgt}")),
    ])?;
    let original = read_parallel(
        &config.output(&format!("clean.bitext.{src}")),
        &config.output(&format!("clean.bitext.{tgt}")),
        src,
        tgt,
    )?;
    let synthetic = read_parallel(
        &config.output(&format!("synthetic.{src}")),
        &config.output(&format!("synthetic.{tgt}")),
        src,
        tgt,
    )?
    .map(|p| {
        p.map(|mut p| {
            p.origin = Origin::Synthetic;
            p
        })
    });
    let mut merged = merge_corpora(original, synthetic, config.merge.strategy)?;
    let mut err = None;
    write_parallel(shunt(&mut merged, &mut err), &outputs.partial(0), &outputs.partial(1))?;
    let r = merged.report().clone();
    entry
        .count("merge.original", r.original)
        .count("merge.synthetic", r.synthetic_in)
        .count("merge.duplicates_dropped", r.duplicates_dropped)
        .count("merge.emitted", r.emitted);
    check(err)?;
    outputs.commit()?;
    Ok(format!(
        "{} pairs ({} original, {} synthetic, {} duplicates dropped)",
        r.emitted, r.original, r.synthetic_in - r.duplicates_dropped, r.duplicates_dropped
    ))
}

fn evaluate_into(
    hyp: &Path,
    reference: &Path,
    lang: LanguageTag,
    smoothing: Smoothing,
    out: Option<&Path>,
    entry: &mut ExperimentManifest,
) -> Result<String, PipelineError> {
    let tokens = match lang {
        LanguageTag::Zh => "character",
        _ => "whitespace",
    };
    entry
        .param("bleu.variant", format!("corpus BLEU-{MAX_ORDER}, single reference, case preserved"))
        .param("bleu.tokenization", format!("{lang} {tokens}"))
        .param("bleu.smoothing", smoothing)
        .param("bleu.hyp", hyp.display())
        .param("bleu.ref", reference.display());
    let outputs = out.map(|p| Outputs::new(vec![p.to_path_buf()])).transpose()?;
    let score = bleu::<f64>(hyp, reference, lang, smoothing)?;
    let line = score.to_string();
    entry
        .param("bleu.score", format!("{:.2}", score.bleu))
        .param("bleu.brevity_penalty", format!("{:.3}", score.brevity_penalty))
        .count("bleu.hyp_length", score.hyp_length)
        .count("bleu.ref_length", score.ref_length);
    for (n, p) in score.precisions.iter().enumerate() {
        entry.param(format!("bleu.p{}", n + 1), format!("{:.4}", p));
    }
    if let Some(outputs) = outputs {
        let path = outputs.partial(0);
        fs::write(&path, format!("{line}\n")).map_err(|e| CorpusError::io(&path, e))?;
        outputs.commit()?;
    }
    Ok(line)
}
