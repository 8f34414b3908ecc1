//! Stage orchestration: a strict JSON run config and file-based handoff
//! between stages under one output directory.

mod config;
mod stages;

pub use config::{
    load_config, parse_config, validate_config, BackendConfig, BackendKind, ConfigError, DfSource, Diagnostic,
    EvaluationConfig, MergeConfig, PathsConfig, PipelineConfig, SelectionConfig, SynthesisSection,
};
pub use stages::{run_evaluate, run_pipeline, run_stage, PipelineError, Stage, StageOutcome};
