//! The attempt/social-learning event record shared by simulated agents,
//! bots and live sessions, serialized as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Combination, ItemId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// An innovation attempt with 1–3 items.
    Attempt,
    /// Copied an item from a demonstrator.
    SocialCopy,
    /// Looked for something to copy and found nothing new.
    SocialNoop,
    /// Opened another player's inventory.
    Inspect,
    /// Opened the recipe of one item in another player's inventory.
    InspectItem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptEvent {
    /// Ordering key: a per-run sequence number in simulations, milliseconds
    /// since the clock started in live sessions.
    pub t: u64,
    pub actor_id: u64,
    pub kind: EventKind,
    pub combination: Vec<ItemId>,
    pub outcome: Option<ItemId>,
    pub score_after: i64,
    /// Fingerprint of the actor's inventory before the event.
    pub state_hash: String,
    #[serde(default)]
    pub inventory_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_score: Option<i64>,
}

impl AttemptEvent {
    pub fn combination(&self) -> Option<Combination> {
        Combination::new(&self.combination).ok()
    }

    pub fn is_attempt(&self) -> bool {
        self.kind == EventKind::Attempt
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_jsonl<W: Write>(mut w: W, events: &[AttemptEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines log; blank lines are skipped, line numbers are 1-based.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<AttemptEvent>, LogError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: AttemptEvent =
            serde_json::from_str(&line).map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(ev);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AttemptEvent {
        AttemptEvent {
            t: 3,
            actor_id: 7,
            kind: EventKind::Attempt,
            combination: vec![ItemId(1), ItemId(2)],
            outcome: Some(ItemId(6)),
            score_after: 2,
            state_hash: "00000000000000ff".into(),
            inventory_size: 6,
            target: None,
            target_score: None,
        }
    }

    #[test]
    fn wire_format() {
        let line = serde_json::to_string(&sample()).unwrap();
        assert_eq!(
            line,
            r#"{"t":3,"actor_id":7,"kind":"attempt","combination":[1,2],"outcome":6,"score_after":2,"state_hash":"00000000000000ff","inventory_size":6}"#
        );
        let noop = AttemptEvent { kind: EventKind::SocialNoop, outcome: None, combination: vec![], target: Some(2), ..sample() };
        let s = serde_json::to_string(&noop).unwrap();
        assert!(s.contains(r#""kind":"social_noop""#) && s.contains(r#""outcome":null"#) && s.contains(r#""target":2"#));
    }

    #[test]
    fn malformed_line_number() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[sample(), sample()]).unwrap();
        buf.extend_from_slice(b"\n{\"t\": oops}\n");
        match read_jsonl(buf.as_slice()) {
            Err(LogError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reads_back() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[sample()]).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), vec![sample()]);
    }
}
