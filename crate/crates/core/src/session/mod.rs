//! Experiment definition and the per-participant trial state machine.

mod config;
mod export;
mod journal;
mod manifest;
mod playlist;
mod state;
mod timer;

use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{Background, DisplayMode, ExperimentConfig, RenderingMode, MAX_RATING_CATEGORIES};
pub use export::{read_csv, result_rows, write_csv, ResultRow, CSV_HEADER};
pub use journal::{
    parse_journal, read_journal, FileSink, Journal, JournalContents, JournalHeader, JournalRecord, JournalSink,
    Judgment, JOURNAL_FORMAT_VERSION,
};
pub use manifest::{reference_design, Manifest, Ordinal, StimulusMeta, REFERENCE_COMBINATIONS, REFERENCE_SOURCES};
pub use playlist::{build_playlist, select_traps, Playlist, Trial, MAX_ATTEMPTS, MIN_TRAP_GAP};
pub use state::{journal_path_for, SessionState};
pub use timer::{timer_contract, TimerEvent, TimerRules, TrialTimer};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("manifest has no source with an impaired stimulus")]
    EmptyManifest,
    #[error("source {source_id:?} has {available} impaired stimuli but {traps} traps were requested")]
    TrapsExceedStimuli {
        source_id: String,
        traps: usize,
        available: usize,
    },
    #[error("cannot place trap repeats {gap} trials apart in a {trials}-trial playlist")]
    TrapSeparationInfeasible { trials: usize, gap: usize },
    #[error("schema violations: {}", .0.join("; "))]
    Schema(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("result path {path} is not writable: {source}")]
    ResultPathNotWritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("judgment for trial {got} but the current trial is {expected:?}")]
    OutOfOrderTrial { expected: Option<u32>, got: u32 },
    #[error("trial {trial_index} already has a judgment")]
    DuplicateJudgment { trial_index: u32 },
    #[error("score {score} outside 1..={categories}")]
    ScoreOutOfRange { score: u32, categories: u32 },
    #[error("trial {trial_index} shows {expected:?}, judgment names {got:?}")]
    StimulusMismatch {
        trial_index: u32,
        expected: String,
        got: String,
    },
    #[error("journal write failed: {0}")]
    JournalWriteFailure(#[source] std::io::Error),
    #[error("session halted after a journal write failure")]
    SessionHalted,
    #[error("journal was written for configuration {journal}, current configuration is {expected}")]
    DigestMismatch { journal: String, expected: String },
    #[error("corrupt journal at line {line}: {message}")]
    CorruptJournal { line: usize, message: String },
    #[error("journal {0} already exists")]
    JournalExists(PathBuf),
    #[error("export: {0}")]
    Export(String),
}

/// JSON with object keys in sorted order and no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes");
    serde_json::to_string(&v).expect("value serializes")
}

/// SHA-256 over the canonical JSON of the manifest entries and every config
/// field except `result_path`, so relocating the results directory does not
/// invalidate a journal.
pub fn config_digest(manifest: &Manifest, config: &ExperimentConfig) -> String {
    let mut cfg = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = cfg.as_object_mut() {
        obj.remove("result_path");
    }
    let doc = serde_json::json!({
        "config": cfg,
        "manifest": manifest.entries(),
    });
    hex::encode(Sha256::digest(canonical_json(&doc).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_result_path_only() {
        let m = reference_design(&["a"]);
        let c = ExperimentConfig::new("p");
        let mut moved = c.clone();
        moved.result_path = "/elsewhere".into();
        assert_eq!(config_digest(&m, &c), config_digest(&m, &moved));
        let mut changed = c.clone();
        changed.traps_per_source = 1;
        assert_ne!(config_digest(&m, &c), config_digest(&m, &changed));
        assert_ne!(config_digest(&reference_design(&["b"]), &c), config_digest(&m, &c));
    }

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            b: u8,
            a: u8,
        }
        assert_eq!(canonical_json(&S { b: 1, a: 2 }), r#"{"a":2,"b":1}"#);
    }
}
