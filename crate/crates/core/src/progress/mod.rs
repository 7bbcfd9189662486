//! Append-only event log of classroom activity, the state folded from it,
//! and per-student progress reports.

pub mod event;
mod log;
mod report;
mod world;

pub use event::{Event, EventKind};
pub use log::{log_file_name, read_events, EventLog};
pub use report::{format_report_table, progress_report, progress_report_from_events, ProgressReport};
pub use world::{replay, replay_onto, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("unknown {0}")]
    UnknownEntity(String),
    #[error("{0} already exists")]
    Duplicate(String),
    #[error("event {seq} does not fit the current state: {reason}")]
    InvalidEvent { seq: u64, reason: String },
    #[error("corrupt log{}{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), seq.map(|s| format!(" (seq {s})")).unwrap_or_default())]
    CorruptLog {
        line: Option<usize>,
        seq: Option<u64>,
        reason: String,
    },
    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),
}
