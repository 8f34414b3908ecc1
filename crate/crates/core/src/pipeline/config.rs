use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cleaning::{CleaningConfig, CleaningConfigError};
use crate::corpus_io::{file_digest, lang_path, LanguageTag, ModelHyperparameters};
use crate::evaluation::Smoothing;
use crate::selection::DEFAULT_K;
use crate::synthesis::{Direction, MergeStrategy, SynthesisConfig};

/// A run configuration, read from a single JSON file. Unknown keys anywhere
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Defaults to a digest of the config file.
    #[serde(default)]
    pub run_id: Option<String>,
    pub paths: PathsConfig,
    #[serde(default)]
    pub cleaning: CleaningConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub merge: MergeConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub model: ModelHyperparameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Stem of the bitext: `<parallel>.vi` and `<parallel>.zh`.
    pub parallel: PathBuf,
    /// Raw monolingual corpus per language.
    #[serde(default)]
    pub monolingual: BTreeMap<LanguageTag, PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DfSource {
    /// Document frequencies from the cleaned bitext side in the selection
    /// language.
    #[default]
    Parallel,
    /// Document frequencies from the cleaned monolingual corpus itself.
    Monolingual,
}

impl fmt::Display for DfSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DfSource::Parallel => "parallel",
            DfSource::Monolingual => "monolingual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub k: usize,
    pub df_source: DfSource,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: DEFAULT_K,
            df_source: DfSource::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    StubIdentity,
    StubReverse,
    /// Token lookup table from `synthesis.backend.dictionary`.
    Dictionary,
    Http,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::StubIdentity => "stub-identity",
            BackendKind::StubReverse => "stub-reverse",
            BackendKind::Dictionary => "dictionary",
            BackendKind::Http => "http",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub-identity" => Ok(BackendKind::StubIdentity),
            "stub-reverse" => Ok(BackendKind::StubReverse),
            "dictionary" => Ok(BackendKind::Dictionary),
            "http" => Ok(BackendKind::Http),
            _ => Err(format!(
                "unknown backend `{s}` (expected stub-identity, stub-reverse, dictionary or http)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    /// TSV `token<TAB>translation`, for the dictionary backend.
    pub dictionary: Option<PathBuf>,
    pub timeout_ms: u64,
    /// Name of an environment variable holding a bearer token.
    pub auth_token_env: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::StubIdentity,
            endpoint: None,
            dictionary: None,
            timeout_ms: 30_000,
            auth_token_env: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub backend: BackendConfig,
    pub batch_size: usize,
    pub max_in_flight_batches: usize,
    pub retry_limit: u32,
    pub retry_backoff_ms: u64,
    /// `<mono>-<translated>`, e.g. `zh-vi`: selected zh sentences are
    /// translated into vi and the merged corpus is vi -> zh.
    pub direction: Direction,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let d = SynthesisConfig::default();
        SynthesisSection {
            backend: BackendConfig::default(),
            batch_size: d.batch_size,
            max_in_flight_batches: d.max_in_flight_batches,
            retry_limit: d.retry_limit,
            retry_backoff_ms: d.retry_backoff.as_millis() as u64,
            direction: d.direction,
        }
    }
}

impl SynthesisSection {
    pub fn synthesis_config(&self) -> SynthesisConfig {
        SynthesisConfig {
            batch_size: self.batch_size,
            max_in_flight_batches: self.max_in_flight_batches,
            retry_limit: self.retry_limit,
            retry_backoff: Duration::from_millis(self.retry_backoff_ms),
            direction: self.direction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    pub strategy: MergeStrategy,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub hyp: Option<PathBuf>,
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    /// Defaults to the monolingual (target) side of the synthesis direction.
    pub lang: Option<LanguageTag>,
    pub smoothing: Smoothing,
}

/// One problem with a config, named by its dotted key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn diag(key: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", join(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ConfigError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ConfigError::Invalid(d) => d,
            ConfigError::Read { .. } => &[],
        }
    }
}

/// Parses JSON text strictly. Relative paths are left as written.
pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        let key = match unknown_field(&message) {
            Some(field) if path == "." || path.is_empty() => field.to_string(),
            Some(field) if !path.ends_with(field) => format!("{path}.{field}"),
            _ => path,
        };
        ConfigError::Invalid(vec![diag(&key, message)])
    })
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

/// Reads, checks and resolves a config file: defaults applied, relative paths
/// taken relative to the file's directory, every input path checked, and the
/// run id fixed.
pub fn validate_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let config = load_config(path)?;
    config.validate()?;
    Ok(config)
}

/// [`validate_config`] without the final [`PipelineConfig::validate`], for
/// callers that adjust the config first.
pub fn load_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_config(&text)?;
    let base = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
    config.resolve_paths(&base);
    if config.run_id.is_none() {
        let digest = file_digest(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
        let hex = digest.trim_start_matches("sha256:");
        config.run_id = Some(format!("run-{}", &hex[..12]));
    }
    Ok(config)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn cleaning_key(e: &CleaningConfigError) -> &'static str {
    match e {
        CleaningConfigError::MinWords(_) => "cleaning.min_words",
        CleaningConfigError::MaxWords { .. } => "cleaning.max_words",
        CleaningConfigError::Confidence(_) => "cleaning.min_language_confidence",
    }
}

impl PipelineConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.paths.parallel);
        resolve(base, &mut self.paths.output_dir);
        for p in self.paths.monolingual.values_mut() {
            resolve(base, p);
        }
        if let Some(p) = &mut self.synthesis.backend.dictionary {
            resolve(base, p);
        }
        if let Some(p) = &mut self.evaluation.hyp {
            resolve(base, p);
        }
        if let Some(p) = &mut self.evaluation.reference {
            resolve(base, p);
        }
    }

    pub fn run_id(&self) -> &str {
        self.run_id.as_deref().unwrap_or("run")
    }

    pub fn direction(&self) -> Direction {
        self.synthesis.direction
    }

    pub fn evaluation_lang(&self) -> LanguageTag {
        self.evaluation.lang.unwrap_or(self.synthesis.direction.mono)
    }

    pub fn evaluation_enabled(&self) -> bool {
        self.evaluation.hyp.is_some() && self.evaluation.reference.is_some()
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output("manifest.jsonl")
    }

    /// Checks every invariant and every referenced input path; reports all
    /// problems at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut d = Vec::new();
        let exists = |d: &mut Vec<Diagnostic>, key: &str, p: &Path| {
            if !p.is_file() {
                d.push(diag(key, format!("input file {} does not exist", p.display())));
            }
        };
        for lang in [LanguageTag::Vi, LanguageTag::Zh] {
            exists(&mut d, "paths.parallel", &lang_path(&self.paths.parallel, lang));
        }
        for (lang, p) in &self.paths.monolingual {
            let key = format!("paths.monolingual.{lang}");
            if !lang.is_pipeline_language() {
                d.push(diag(&key, "only vi and zh corpora are accepted"));
            }
            exists(&mut d, &key, p);
        }
        let mono = self.synthesis.direction.mono;
        if !self.paths.monolingual.contains_key(&mono) {
            d.push(diag(
                &format!("paths.monolingual.{mono}"),
                format!("a {mono} monolingual corpus is required by synthesis.direction {}", self.synthesis.direction),
            ));
        }
        if self.paths.output_dir.is_file() {
            d.push(diag("paths.output_dir", "is a file, not a directory"));
        }
        if let Err(e) = self.cleaning.validate() {
            d.push(diag(cleaning_key(&e), e.to_string()));
        }
        if self.selection.k < 1 {
            d.push(diag("selection.k", "must be at least 1"));
        }
        let s = &self.synthesis;
        if s.batch_size < 1 {
            d.push(diag("synthesis.batch_size", "must be at least 1"));
        }
        if s.max_in_flight_batches < 1 {
            d.push(diag("synthesis.max_in_flight_batches", "must be at least 1"));
        }
        if s.backend.timeout_ms < 1 {
            d.push(diag("synthesis.backend.timeout_ms", "must be at least 1"));
        }
        match s.backend.kind {
            BackendKind::Http if s.backend.endpoint.is_none() => {
                d.push(diag("synthesis.backend.endpoint", "required by the http backend"));
            }
            BackendKind::Dictionary => match &s.backend.dictionary {
                None => d.push(diag("synthesis.backend.dictionary", "required by the dictionary backend")),
                Some(p) => exists(&mut d, "synthesis.backend.dictionary", p),
            },
            _ => {}
        }
        if let Some(var) = &s.backend.auth_token_env {
            if std::env::var_os(var).is_none() {
                d.push(diag(
                    "synthesis.backend.auth_token_env",
                    format!("environment variable {var} is not set"),
                ));
            }
        }
        let e = &self.evaluation;
        match (&e.hyp, &e.reference) {
            (Some(h), Some(r)) => {
                exists(&mut d, "evaluation.hyp", h);
                exists(&mut d, "evaluation.ref", r);
            }
            (Some(_), None) => d.push(diag("evaluation.ref", "required when evaluation.hyp is set")),
            (None, Some(_)) => d.push(diag("evaluation.hyp", "required when evaluation.ref is set")),
            (None, None) => {}
        }
        if let Some(lang) = e.lang {
            if !lang.is_pipeline_language() {
                d.push(diag("evaluation.lang", "must be vi or zh"));
            }
        }
        if d.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(d))
        }
    }
}
