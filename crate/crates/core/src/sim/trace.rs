use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::sim::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Create,
    Enter,
    Capture,
    Release,
    Preempt,
    Resume,
    Branch,
    Batch,
    Unbatch,
    Consolidate,
    ValveOpen,
    ValveClose,
    Count,
    Destroy,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Create => "create",
            Action::Enter => "enter",
            Action::Capture => "capture",
            Action::Release => "release",
            Action::Preempt => "preempt",
            Action::Resume => "resume",
            Action::Branch => "branch",
            Action::Batch => "batch",
            Action::Unbatch => "unbatch",
            Action::Consolidate => "consolidate",
            Action::ValveOpen => "valve_open",
            Action::ValveClose => "valve_close",
            Action::Count => "count",
            Action::Destroy => "destroy",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of a run trace.
///
/// `resources` lists the `(resource, servers)` moved by capture, release,
/// preempt and resume records; it is kept in memory for replay checks and is
/// not part of the CSV form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub seq: u64,
    pub element: String,
    pub entity: Option<EntityId>,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resources: Vec<(String, u32)>,
    /// `(busy, preempted)` per resource, in declaration order, after a
    /// resource-moving record. Empty for other records.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<(u32, u32)>,
}

pub const TRACE_CSV_HEADER: &str = "time,seq,element_id,entity_id,action";

pub fn write_csv<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for r in records {
        let entity = r.entity.map(|e| e.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.time, r.seq, r.element, entity, r.action)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_fixed_header_and_columns() {
        let recs = vec![TraceRecord {
            time: 2.5,
            seq: 7,
            element: "t01.work".into(),
            entity: Some(EntityId(3)),
            action: Action::ValveClose,
            resources: vec![],
            levels: vec![],
        }];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "time,seq,element_id,entity_id,action\n2.5,7,t01.work,3,valve_close\n"
        );
    }
}
