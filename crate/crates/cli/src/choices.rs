//! Two-phase choice events and their append-only log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Recommendations shown with one reason for each item.
    ForOnly,
    /// The same recommendations with one reason for and one against.
    ForAndAgainst,
}

impl Phase {
    fn index(self) -> usize {
        match self {
            Phase::ForOnly => 0,
            Phase::ForAndAgainst => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceEvent {
    pub session_id: String,
    pub phase: Phase,
    pub chosen_item: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum ChoiceError {
    #[error("session_id and chosen_item must be non-empty")]
    Empty,
    #[error("session {0:?} already recorded a choice for this phase")]
    Duplicate(String),
    #[error("session {0:?} has no for-only choice yet")]
    OutOfOrder(String),
    #[error("choice log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Per-session choices, indexed by phase.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChoiceBook {
    sessions: BTreeMap<String, [Option<String>; 2]>,
}

impl ChoiceBook {
    pub fn check(&self, ev: &ChoiceEvent) -> Result<(), ChoiceError> {
        if ev.session_id.is_empty() || ev.chosen_item.is_empty() {
            return Err(ChoiceError::Empty);
        }
        let slots = self.sessions.get(&ev.session_id);
        if slots.is_some_and(|s| s[ev.phase.index()].is_some()) {
            return Err(ChoiceError::Duplicate(ev.session_id.clone()));
        }
        if ev.phase == Phase::ForAndAgainst && slots.is_none_or(|s| s[0].is_none()) {
            return Err(ChoiceError::OutOfOrder(ev.session_id.clone()));
        }
        Ok(())
    }

    fn apply(&mut self, ev: &ChoiceEvent) {
        self.sessions.entry(ev.session_id.clone()).or_default()[ev.phase.index()] =
            Some(ev.chosen_item.clone());
    }

    pub fn stats(&self) -> ChoiceStats {
        let completed: Vec<_> = self
            .sessions
            .values()
            .filter_map(|s| Some((s[0].as_ref()?, s[1].as_ref()?)))
            .collect();
        ChoiceStats {
            sessions: self.sessions.len(),
            completed: completed.len(),
            changed: completed.iter().filter(|(a, b)| a != b).count(),
        }
    }
}

/// Replays a log, enforcing the same rules as live recording.
pub fn replay<R: BufRead>(source: R) -> Result<ChoiceBook, ChoiceError> {
    let mut book = ChoiceBook::default();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| ChoiceError::Corrupt {
            line: idx + 1,
            message,
        };
        let ev: ChoiceEvent = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        book.check(&ev).map_err(|e| corrupt(e.to_string()))?;
        book.apply(&ev);
    }
    Ok(book)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChoiceStats {
    pub sessions: usize,
    /// Sessions with both phases recorded.
    pub completed: usize,
    /// Completed sessions whose second choice differs from the first.
    pub changed: usize,
}

impl ChoiceStats {
    /// `None` when no session is complete.
    pub fn change_rate(&self) -> Option<f64> {
        (self.completed > 0).then(|| self.changed as f64 / self.completed as f64)
    }
}

impl Serialize for ChoiceStats {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(untagged)]
        enum Rate {
            Value(f64),
            Undefined(&'static str),
        }
        #[derive(Serialize)]
        struct View {
            sessions: usize,
            completed: usize,
            changed: usize,
            choice_change_rate: Rate,
        }
        View {
            sessions: self.sessions,
            completed: self.completed,
            changed: self.changed,
            choice_change_rate: match self.change_rate() {
                Some(r) => Rate::Value(r),
                None => Rate::Undefined("n/a"),
            },
        }
        .serialize(s)
    }
}

/// Validated events, optionally mirrored to a newline-delimited JSON file.
#[derive(Debug, Default)]
pub struct ChoiceLog {
    book: ChoiceBook,
    file: Option<File>,
}

impl ChoiceLog {
    pub fn in_memory() -> Self {
        ChoiceLog::default()
    }

    /// Replays `path` if it exists, then appends to it.
    pub fn open(path: &Path) -> Result<Self, ChoiceError> {
        let book = match File::open(path) {
            Ok(f) => replay(BufReader::new(f))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => ChoiceBook::default(),
            Err(e) => return Err(e.into()),
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ChoiceLog {
            book,
            file: Some(file),
        })
    }

    /// The event is durable in the file before it counts.
    pub fn record(&mut self, ev: &ChoiceEvent) -> Result<(), ChoiceError> {
        self.book.check(ev)?;
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_string(ev).map_err(io::Error::other)?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        self.book.apply(ev);
        Ok(())
    }

    pub fn stats(&self) -> ChoiceStats {
        self.book.stats()
    }
}
