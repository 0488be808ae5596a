//! JSON Lines trace files: one event per line, keys in a fixed order.

use std::io::{self, Write};

use thiserror::Error;

use crate::kernel::{Trace, TraceEvent};

/// Kind of the closing record every complete, non-empty trace ends with.
pub const RUN_END: &str = "run_end";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceReadError {
    #[error("truncated_trace: {0}")]
    Truncated(String),
    #[error("malformed trace line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl TraceReadError {
    pub fn code(&self) -> &'static str {
        match self {
            TraceReadError::Truncated(_) => "truncated_trace",
            TraceReadError::Malformed { .. } => "malformed_trace",
        }
    }
}

pub fn event_line(ev: &TraceEvent) -> String {
    serde_json::to_string(ev).expect("trace events serialize")
}

pub fn emit_trace<W: Write>(trace: &Trace, out: &mut W) -> io::Result<()> {
    for ev in trace.events() {
        out.write_all(event_line(ev).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl(trace: &Trace) -> String {
    let mut s = String::new();
    for ev in trace.events() {
        s.push_str(&event_line(ev));
        s.push('\n');
    }
    s
}

/// Parses a trace file. A non-empty trace must end with a newline and a
/// `run_end` record, otherwise it was cut short.
pub fn parse_trace(text: &str) -> Result<Trace, TraceReadError> {
    if text.is_empty() {
        return Ok(Trace::new());
    }
    if !text.ends_with('\n') {
        return Err(TraceReadError::Truncated("last line is incomplete".into()));
    }
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ev: TraceEvent = serde_json::from_str(line).map_err(|e| TraceReadError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(ev);
    }
    match events.last() {
        Some(ev) if ev.kind == RUN_END => {}
        _ => return Err(TraceReadError::Truncated(format!("no {RUN_END} record"))),
    }
    if events.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(TraceReadError::Malformed {
            line: events.windows(2).position(|w| w[1].t < w[0].t).unwrap_or(0) + 2,
            message: "time goes backwards".into(),
        });
    }
    Ok(Trace::from_events(events))
}
