//! Per-cycle event stream and its line-delimited JSON encoding.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Fetch,
    Dispatch,
    Issue,
    Execute,
    Forward,
    MshrAlloc,
    Fill,
    Squash,
    Retire,
    Fault,
    Resteer,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Fetch => "fetch",
            TraceKind::Dispatch => "dispatch",
            TraceKind::Issue => "issue",
            TraceKind::Execute => "execute",
            TraceKind::Forward => "forward",
            TraceKind::MshrAlloc => "mshr_alloc",
            TraceKind::Fill => "fill",
            TraceKind::Squash => "squash",
            TraceKind::Retire => "retire",
            TraceKind::Fault => "fault",
            TraceKind::Resteer => "resteer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub kind: TraceKind,
    pub seq: u64,
    pub pc: u64,
    pub detail: String,
}

impl TraceEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace events serialize")
    }
}

/// One JSON record per line.
pub fn to_json_lines(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

pub fn parse_json_lines(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Human-readable rendering, one aligned row per event.
pub fn pretty(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        writeln!(
            out,
            "{:>8}  {:<10} seq={:<7} pc={:#07x}  {}",
            e.cycle,
            e.kind.name(),
            e.seq,
            e.pc,
            e.detail
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_lines_round_trip() {
        let events = vec![
            TraceEvent {
                cycle: 1,
                kind: TraceKind::MshrAlloc,
                seq: 4,
                pc: 0x40,
                detail: "line 0x40".into(),
            },
            TraceEvent {
                cycle: 2,
                kind: TraceKind::Resteer,
                seq: 9,
                pc: 0x44,
                detail: String::new(),
            },
        ];
        let text = to_json_lines(&events);
        assert!(text.contains("\"kind\":\"mshr_alloc\""));
        assert_eq!(parse_json_lines(&text).unwrap(), events);
        assert_eq!(pretty(&events).lines().count(), 2);
    }
}
