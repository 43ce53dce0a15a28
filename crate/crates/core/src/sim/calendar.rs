use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::SimError;
use crate::sim::{EntityId, SimTime};

/// Identifier handed out by [`Calendar::schedule`]; equal to the event's `seq`.
pub type EventId = u64;

/// A pending event. `P` is the dispatch payload interpreted by the element
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: usize,
    pub subject: Option<EntityId>,
    /// Background events (disruption daemons) do not keep a run alive.
    pub background: bool,
    pub payload: P,
}

struct Slot<P>(Event<P>);

impl<P> PartialEq for Slot<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl<P> Eq for Slot<P> {}

impl<P> PartialOrd for Slot<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Slot<P> {
    // BinaryHeap is a max-heap; invert so the smallest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_at, other.0.seq).cmp(&(self.0.fire_at, self.0.seq))
    }
}

/// Future event list plus simulation clock.
pub struct Calendar<P> {
    clock: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Slot<P>>,
    /// Live event ids mapped to their background flag.
    pending: HashMap<EventId, bool>,
    live_foreground: usize,
    live_background: usize,
}

impl<P> Default for Calendar<P> {
    fn default() -> Self {
        Calendar {
            clock: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashMap::new(),
            live_foreground: 0,
            live_background: 0,
        }
    }
}

impl<P> Calendar<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    /// Number of live (not cancelled) events.
    pub fn len(&self) -> usize {
        self.live_foreground + self.live_background
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn foreground_pending(&self) -> usize {
        self.live_foreground
    }

    /// Inserts an event; its `seq` is assigned here.
    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: usize,
        subject: Option<EntityId>,
        background: bool,
        payload: P,
    ) -> Result<EventId, SimError> {
        if fire_at < self.clock {
            return Err(SimError::PastTime {
                at: fire_at.days(),
                clock: self.clock.days(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        if background {
            self.live_background += 1;
        } else {
            self.live_foreground += 1;
        }
        self.pending.insert(seq, background);
        self.heap.push(Slot(Event {
            fire_at,
            seq,
            target,
            subject,
            background,
            payload,
        }));
        Ok(seq)
    }

    /// Marks a pending event as dead. Cancelling an unknown or already fired
    /// id is a no-op.
    pub fn cancel(&mut self, id: EventId) {
        if let Some(background) = self.pending.remove(&id) {
            if background {
                self.live_background -= 1;
            } else {
                self.live_foreground -= 1;
            }
        }
    }

    /// Pops the live event with minimal `(fire_at, seq)` and moves the clock
    /// to its fire time. Returns `None` (clock untouched) when empty.
    pub fn advance(&mut self) -> Option<Event<P>> {
        while let Some(Slot(ev)) = self.heap.pop() {
            if self.pending.remove(&ev.seq).is_none() {
                continue;
            }
            if ev.background {
                self.live_background -= 1;
            } else {
                self.live_foreground -= 1;
            }
            debug_assert!(ev.fire_at >= self.clock);
            self.clock = ev.fire_at;
            return Some(ev);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(x: f64) -> SimTime {
        SimTime::new(x).unwrap()
    }

    #[test]
    fn single_event_is_held() {
        let mut c: Calendar<()> = Calendar::new();
        c.schedule(t(5.0), 0, None, false, ()).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn earliest_fires_first() {
        let mut c: Calendar<&str> = Calendar::new();
        c.schedule(t(7.0), 0, None, false, "late").unwrap();
        c.schedule(t(2.0), 0, None, false, "early").unwrap();
        let ev = c.advance().unwrap();
        assert_eq!(ev.payload, "early");
        assert_eq!(c.clock(), t(2.0));
    }

    #[test]
    fn ties_fire_in_insertion_order() {
        let mut c: Calendar<u32> = Calendar::new();
        for i in 0..11 {
            c.schedule(t(1.0), 0, None, false, 100 + i).unwrap();
        }
        let a = c.schedule(t(4.0), 0, None, false, 11).unwrap();
        let b = c.schedule(t(4.0), 0, None, false, 12).unwrap();
        assert!(a < b);
        let fired: Vec<u32> = std::iter::from_fn(|| c.advance()).map(|e| e.payload).collect();
        assert_eq!(&fired[11..], &[11, 12]);
    }

    #[test]
    fn empty_calendar_leaves_clock() {
        let mut c: Calendar<()> = Calendar::new();
        c.schedule(t(3.0), 0, None, false, ()).unwrap();
        c.advance();
        assert!(c.advance().is_none());
        assert_eq!(c.clock(), t(3.0));
    }

    #[test]
    fn past_time_is_rejected() {
        let mut c: Calendar<()> = Calendar::new();
        c.schedule(t(10.0), 0, None, false, ()).unwrap();
        c.advance();
        let err = c.schedule(t(3.0), 0, None, false, ()).unwrap_err();
        assert!(matches!(err, SimError::PastTime { .. }));
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut c: Calendar<u8> = Calendar::new();
        let a = c.schedule(t(1.0), 0, None, false, 1).unwrap();
        c.schedule(t(2.0), 0, None, true, 2).unwrap();
        c.cancel(a);
        c.cancel(a);
        assert_eq!(c.foreground_pending(), 0);
        assert_eq!(c.len(), 1);
        assert_eq!(c.advance().unwrap().payload, 2);
        assert_eq!(c.clock(), t(2.0));
    }
}
