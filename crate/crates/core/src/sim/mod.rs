//! Event-calendar kernel: clock, event ordering, entities, state variables
//! and run traces.

mod calendar;
mod state;
mod time;
mod trace;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use calendar::{Calendar, Event, EventId};
pub use state::{StateTable, Value};
pub use time::SimTime;
pub use trace::{write_csv, Action, TraceRecord, TRACE_CSV_HEADER};

/// Default ceiling on executed events per run.
pub const DEFAULT_EVENT_CEILING: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unit of flow through the element graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub created_at: SimTime,
    pub attributes: BTreeMap<String, f64>,
    /// Non-empty only for entities produced by a batch element.
    pub contents: Vec<Entity>,
    pub background: bool,
}

impl Entity {
    pub fn new(id: EntityId, created_at: SimTime, background: bool) -> Self {
        Entity {
            id,
            created_at,
            attributes: BTreeMap::new(),
            contents: Vec::new(),
            background,
        }
    }
}

/// Outcome of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub end_time: f64,
    pub events: u64,
    pub counters: BTreeMap<String, u64>,
    /// Time-averaged busy fraction per resource over `[0, end_time]`.
    pub utilization: BTreeMap<String, f64>,
    pub created: u64,
    pub destroyed: u64,
    pub in_system: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}
