// SPDX-License-Identifier: Apache-2.0

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{CompId, Logic, NetId, SimError, Ticks};

/// What an event acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    /// Apply a level to a net.
    Net(NetId),
    /// Re-evaluate a component with the given tag.
    Wake(CompId, u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time: Ticks,
    pub seq: u64,
    pub target: Target,
    pub level: Logic,
}

/// Priority queue ordered by `(time, seq)`; `seq` is assigned at insertion, so
/// same-time events pop in insertion order.
#[derive(Debug, Default, Clone)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    now: Ticks,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> EventQueue {
        EventQueue::default()
    }

    pub fn now(&self) -> Ticks {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues an event and returns its sequence number.
    pub fn schedule(&mut self, time: Ticks, target: Target, level: Logic) -> Result<u64, SimError> {
        if time < self.now {
            return Err(SimError::Causality { now: self.now, at: time });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, seq, target, level }));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<Ticks> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    /// Removes the earliest event and advances the current time to it.
    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(e) = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(Ticks(10), Target::Net(NetId(1)), Logic::L1).unwrap();
        q.schedule(Ticks(10), Target::Net(NetId(0)), Logic::L0).unwrap();
        assert_eq!(q.pop().unwrap().target, Target::Net(NetId(1)));
        assert_eq!(q.pop().unwrap().target, Target::Net(NetId(0)));
    }

    #[test]
    fn past_event_rejected() {
        let mut q = EventQueue::new();
        q.schedule(Ticks(7), Target::Net(NetId(0)), Logic::L1).unwrap();
        q.pop();
        assert!(matches!(
            q.schedule(Ticks(5), Target::Net(NetId(0)), Logic::L0),
            Err(SimError::Causality { .. })
        ));
    }
}
