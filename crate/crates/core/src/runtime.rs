//! Virtual time for deterministic runs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

struct Entry<E> {
    time: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed, so that the max-heap pops the earliest entry
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// A clock that jumps from event to event. Events with equal timestamps
/// fire in scheduling order.
pub struct VirtualClock<E> {
    now: f64,
    seq: u64,
    queue: BinaryHeap<Entry<E>>,
}

impl<E> Default for VirtualClock<E> {
    fn default() -> Self {
        VirtualClock::new()
    }
}

impl<E> VirtualClock<E> {
    pub fn new() -> Self {
        VirtualClock { now: 0.0, seq: 0, queue: BinaryHeap::new() }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Schedules `event` at `time`; times in the past fire now.
    pub fn schedule(&mut self, time: f64, event: E) {
        let time = if time.is_nan() { self.now } else { time.max(self.now) };
        self.seq += 1;
        self.queue.push(Entry { time, seq: self.seq, event });
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.queue.peek().map(|e| e.time)
    }

    /// Advances to the next event and returns it.
    pub fn pop(&mut self) -> Option<(f64, E)> {
        let e = self.queue.pop()?;
        self.now = e.time;
        Some((e.time, e.event))
    }
}
