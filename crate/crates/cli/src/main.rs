use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bitext_forge::evaluation::Smoothing;
use bitext_forge::pipeline::{
    load_config, run_evaluate, run_pipeline, run_stage, BackendKind, ConfigError, DfSource,
    PipelineConfig, PipelineError, Stage, StageOutcome,
};
use bitext_forge::synthesis::{Direction, MergeStrategy};
use bitext_forge::LanguageTag;
use clap::{Args, Parser, Subcommand};

/// Corpus cleaning, TF-IDF domain selection, back-translation and BLEU.
#[derive(Parser)]
#[command(name = "bitext-forge", version)]
struct Cli {
    /// Worker threads for every parallel stage.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (JSON).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
}

#[derive(Args, Default)]
struct CleanOverrides {
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long)]
    max_words: Option<usize>,
    /// Minimum language-detector confidence.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Default)]
struct SelectOverrides {
    /// Number of sentences to select.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = ["parallel", "monolingual"])]
    df_source: Option<String>,
}

#[derive(Args, Default)]
struct SynthesizeOverrides {
    /// stub-identity, stub-reverse, dictionary or http.
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Token table for the dictionary backend.
    #[arg(long, value_name = "FILE")]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    retries: Option<u32>,
    /// `<mono>-<translated>`, e.g. zh-vi.
    #[arg(long)]
    direction: Option<Direction>,
}

#[derive(Args, Default)]
struct MergeOverrides {
    /// concat or interleave:<r>.
    #[arg(long)]
    strategy: Option<MergeStrategy>,
}

#[derive(Subcommand)]
enum Command {
    /// Strip markup, filter by language and length.
    Clean {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        overrides: CleanOverrides,
    },
    /// Rank cleaned monolingual sentences against the bitext domain.
    Select {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        overrides: SelectOverrides,
    },
    /// Back-translate the selected sentences.
    Synthesize {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        overrides: SynthesizeOverrides,
    },
    /// Combine the cleaned bitext with the synthetic pairs.
    Merge {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        overrides: MergeOverrides,
    },
    /// Corpus BLEU of a hypothesis file against a reference file.
    Evaluate {
        /// Run configuration; without it the manifest goes to --manifest.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        hyp: Option<PathBuf>,
        #[arg(long = "ref", value_name = "FILE")]
        reference: Option<PathBuf>,
        #[arg(long)]
        lang: Option<LanguageTag>,
        /// Add-one smoothing for orders 2-4.
        #[arg(long)]
        smooth: bool,
        #[arg(long, value_name = "FILE", default_value = "manifest.jsonl")]
        manifest: PathBuf,
    },
    /// All stages in order.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        clean: CleanOverrides,
        #[command(flatten)]
        select: SelectOverrides,
        #[command(flatten)]
        synthesize: SynthesizeOverrides,
        #[command(flatten)]
        merge: MergeOverrides,
    },
    /// Check a config and print it with defaults filled in.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
    },
}

impl CleanOverrides {
    fn apply(self, c: &mut PipelineConfig) {
        if let Some(v) = self.min_words {
            c.cleaning.min_words = v;
        }
        if let Some(v) = self.max_words {
            c.cleaning.max_words = v;
        }
        if let Some(v) = self.threshold {
            c.cleaning.min_language_confidence = v;
        }
    }
}

impl SelectOverrides {
    fn apply(self, c: &mut PipelineConfig) {
        if let Some(v) = self.k {
            c.selection.k = v;
        }
        match self.df_source.as_deref() {
            Some("parallel") => c.selection.df_source = DfSource::Parallel,
            Some("monolingual") => c.selection.df_source = DfSource::Monolingual,
            _ => {}
        }
    }
}

impl SynthesizeOverrides {
    fn apply(self, c: &mut PipelineConfig) {
        let s = &mut c.synthesis;
        if let Some(v) = self.backend {
            s.backend.kind = v;
        }
        if let Some(v) = self.endpoint {
            s.backend.endpoint = Some(v);
        }
        if let Some(v) = self.dictionary {
            s.backend.dictionary = Some(v);
        }
        if let Some(v) = self.batch_size {
            s.batch_size = v;
        }
        if let Some(v) = self.retries {
            s.retry_limit = v;
        }
        if let Some(v) = self.direction {
            s.direction = v;
        }
    }
}

impl MergeOverrides {
    fn apply(self, c: &mut PipelineConfig) {
        if let Some(v) = self.strategy {
            c.merge.strategy = v;
        }
    }
}

enum Failure {
    Usage(String),
    Config(ConfigError),
    Pipeline(PipelineError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => Failure::Config(c),
            other => Failure::Pipeline(other),
        }
    }
}

fn configured(
    path: &Path,
    threads: Option<u16>,
    apply: impl FnOnce(&mut PipelineConfig),
) -> Result<PipelineConfig, ConfigError> {
    let mut c = load_config(path)?;
    apply(&mut c);
    if let Some(n) = threads {
        let s = &mut c.synthesis;
        s.max_in_flight_batches = s.max_in_flight_batches.min(n as usize);
    }
    c.validate()?;
    Ok(c)
}

fn report(outcomes: &[StageOutcome]) {
    for o in outcomes {
        println!("{}: {}", o.stage, o.summary);
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = cli.threads;
    let one = |stage: Stage, c: PipelineConfig| -> Result<(), Failure> {
        report(&[run_stage(stage, &c)?]);
        Ok(())
    };
    match cli.command {
        Command::Clean { config, overrides } => {
            one(Stage::Clean, configured(&config.config, threads, |c| overrides.apply(c))?)
        }
        Command::Select { config, overrides } => {
            one(Stage::Select, configured(&config.config, threads, |c| overrides.apply(c))?)
        }
        Command::Synthesize { config, overrides } => {
            one(Stage::Synthesize, configured(&config.config, threads, |c| overrides.apply(c))?)
        }
        Command::Merge { config, overrides } => {
            one(Stage::Merge, configured(&config.config, threads, |c| overrides.apply(c))?)
        }
        Command::Pipeline {
            config,
            clean,
            select,
            synthesize,
            merge,
        } => {
            let c = configured(&config.config, threads, |c| {
                clean.apply(c);
                select.apply(c);
                synthesize.apply(c);
                merge.apply(c);
            })?;
            report(&run_pipeline(&c)?);
            Ok(())
        }
        Command::Validate { config } => {
            let c = configured(&config.config, threads, |_| {})?;
            println!("{}", serde_json::to_string_pretty(&c).expect("config serializes"));
            Ok(())
        }
        Command::Evaluate {
            config,
            hyp,
            reference,
            lang,
            smooth,
            manifest,
        } => {
            let smoothing = if smooth { Smoothing::AddOne } else { Smoothing::None };
            let outcome = match config {
                Some(path) => {
                    let c = configured(&path, threads, |c| {
                        let e = &mut c.evaluation;
                        e.hyp = hyp.or(e.hyp.take());
                        e.reference = reference.or(e.reference.take());
                        e.lang = lang.or(e.lang);
                        if smooth {
                            e.smoothing = Smoothing::AddOne;
                        }
                    })?;
                    run_stage(Stage::Evaluate, &c)?
                }
                None => {
                    let (Some(hyp), Some(reference), Some(lang)) = (hyp, reference, lang) else {
                        return Err(Failure::Usage(
                            "evaluate needs --hyp, --ref and --lang (or --config)".into(),
                        ));
                    };
                    if !lang.is_pipeline_language() {
                        return Err(Failure::Usage("--lang must be vi or zh".into()));
                    }
                    run_evaluate(&hyp, &reference, lang, smoothing, &manifest, "evaluate")?
                }
            };
            println!("{}", outcome.summary);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Config(e)) => {
            match e.diagnostics() {
                [] => eprintln!("error: {e}"),
                ds => {
                    for d in ds {
                        eprintln!("config error: {d}");
                    }
                }
            }
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
