use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One line of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub turn: usize,
    pub action_type: String,
    pub action_ids: Vec<u32>,
    pub accepted: Vec<u32>,
    pub reward: f64,
    pub rank_of_target: usize,
    pub done: bool,
    pub success: bool,
}

/// Writes `records` as JSON Lines.
pub fn write_trace_jsonl<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
