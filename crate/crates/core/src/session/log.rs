//! Append-only session logs, one JSON object per accepted event.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{step, Event, SearchContext, SessionState};
use crate::error::{parse_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub ts: u64,
    pub session: String,
    #[serde(flatten)]
    pub event: Event,
}

impl LogLine {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log line serializes")
    }
}

/// Writer for one session's log file.
pub struct SessionLog {
    session: String,
    path: PathBuf,
    out: BufWriter<File>,
}

impl SessionLog {
    pub fn create(path: impl AsRef<Path>, session: &str) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            session: session.to_string(),
            path,
            out: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and flushes one event.
    pub fn append(&mut self, ts: u64, event: &Event) -> Result<()> {
        let line = LogLine {
            ts,
            session: self.session.clone(),
            event: event.clone(),
        };
        writeln!(self.out, "{}", line.to_json())?;
        self.out.flush()?;
        Ok(())
    }

    /// Writes every event of `state` not yet on disk (those after `already`).
    pub fn append_new(&mut self, state: &SessionState, already: usize) -> Result<()> {
        for e in &state.event_log[already..] {
            self.append(e.ts_ms, &e.event)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub state: SessionState,
    pub warnings: Vec<String>,
}

/// Rebuilds a session by re-applying its logged events. A malformed final
/// line (an interrupted write) ends the replay with a warning; malformed
/// lines elsewhere, or events the state machine rejects, are errors.
pub fn replay(text: &str, ctx: &SearchContext) -> Result<Replay> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let mut state = SessionState::default();
    let mut warnings = Vec::new();
    for (pos, (i, line)) in lines.iter().enumerate() {
        let parsed: LogLine = match serde_json::from_str(line) {
            Ok(l) => l,
            Err(e) if pos + 1 == lines.len() => {
                let msg = format!("line {}: incomplete final event ignored ({e})", i + 1);
                warn!("{msg}");
                warnings.push(msg);
                break;
            }
            Err(e) => return Err(parse_err(i + 1, e.to_string())),
        };
        state = step(&state, ctx, parsed.event, parsed.ts)
            .map_err(|e| parse_err(i + 1, format!("logged event rejected on replay: {e}")))?
            .0;
    }
    Ok(Replay { state, warnings })
}

pub fn replay_file(path: impl AsRef<Path>, ctx: &SearchContext) -> Result<Replay> {
    let text = std::fs::read_to_string(path)?;
    replay(&text, ctx)
}
