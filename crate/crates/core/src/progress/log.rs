use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};

use super::event::{Event, EventKind};
use super::world::WorldState;
use super::StoreError;
use crate::game::{ClassId, QuestionBank};

/// Conventional log file name for one class.
pub fn log_file_name(class_id: &ClassId) -> String {
    format!("events-{class_id}.jsonl")
}

/// Reads a JSON Lines log. Parse failures carry the 1-based line number.
/// Blank lines are skipped.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<Event>, StoreError> {
    let file = File::open(path.as_ref())?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| StoreError::CorruptLog {
            line: Some(i + 1),
            seq: None,
            reason: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Append-only event log with its folded state kept current.
///
/// When backed by a file, each accepted event is written as a single line
/// before `append` returns. Bytes already in the file are never rewritten.
#[derive(Debug)]
pub struct EventLog {
    world: WorldState,
    events: Vec<Event>,
    file: Option<File>,
    path: Option<PathBuf>,
    poisoned: bool,
}

impl EventLog {
    pub fn in_memory(bank: Arc<QuestionBank>) -> Self {
        Self {
            world: WorldState::new(bank),
            events: Vec::new(),
            file: None,
            path: None,
            poisoned: false,
        }
    }

    /// Opens (or creates) a log file, replaying what it already holds.
    pub fn open(path: impl AsRef<Path>, bank: Arc<QuestionBank>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let events = if path.exists() { read_events(&path)? } else { Vec::new() };
        let mut world = WorldState::new(bank);
        for (i, event) in events.iter().enumerate() {
            world.apply(event).map_err(|e| StoreError::CorruptLog {
                line: Some(i + 1),
                seq: Some(event.seq),
                reason: e.to_string(),
            })?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            world,
            events,
            file: Some(file),
            path: Some(path),
            poisoned: false,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn next_seq(&self) -> u64 {
        self.world.last_seq() + 1
    }

    /// Validates `event` against the current state and persists it.
    pub fn append_event(&mut self, event: Event) -> Result<&Event, StoreError> {
        if self.poisoned {
            return Err(StoreError::Storage(std::io::Error::other(
                "log is unusable after an earlier write failure",
            )));
        }
        let line = event.to_line();
        self.world.apply(&event)?;
        if let Some(file) = self.file.as_mut() {
            if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.flush()) {
                // The in-memory fold now runs ahead of the file.
                self.poisoned = true;
                return Err(StoreError::Storage(e));
            }
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    /// Appends `kind` with the next sequence number.
    pub fn record(&mut self, kind: EventKind, ts: DateTime<Utc>) -> Result<&Event, StoreError> {
        let seq = self.next_seq();
        self.append_event(Event { seq, ts, kind })
    }
}
