//! Discrete-event kernel.
//!
//! Virtual time is kept in whole nanoseconds. The CPU and the accelerator both
//! run at 1 GHz, so one cycle and one nanosecond are the same unit throughout
//! the crate. Events are totally ordered by `(fire_time, sequence)`, where the
//! sequence number is handed out when the event is scheduled.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// Largest time the engine accepts. Leaves three orders of magnitude of
/// headroom below `u64::MAX` for additions performed by components.
pub const HORIZON_NS: u64 = 1_000_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ns(self) -> u64 {
        self.0
    }

    /// Rounds a fractional duration up to the next whole nanosecond.
    pub fn from_ns_ceil(ns: f64) -> SimTime {
        assert!(ns.is_finite() && ns >= 0.0, "invalid duration {ns}");
        SimTime(ns.ceil() as u64)
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        let t = self.0.checked_add(rhs.0).expect("simulation time overflow");
        assert!(t <= HORIZON_NS, "simulation time {t} ns beyond horizon");
        SimTime(t)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("negative time difference"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ns", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(pub u32);

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub target: ComponentId,
    pub payload: P,
}

struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl<P> Eq for Queued<P> {}
impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}
impl<P> Queued<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.0.fire_time, self.0.sequence)
    }
}

/// Single-threaded event queue and clock.
pub struct Engine<P> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Reverse<Queued<P>>>,
    dispatched: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Enqueues `payload` for `target` at absolute time `at`.
    ///
    /// Panics when `at` lies in the past: that is a bug in the calling
    /// component, not a recoverable condition.
    pub fn schedule(&mut self, at: SimTime, target: ComponentId, payload: P) -> u64 {
        assert!(
            at >= self.now,
            "event scheduled in the past: {at} < now {}",
            self.now
        );
        assert!(at.0 <= HORIZON_NS, "event time {at} beyond horizon");
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Reverse(Queued(Event {
            fire_time: at,
            sequence,
            target,
            payload,
        })));
        sequence
    }

    pub fn schedule_in(&mut self, delay: SimTime, target: ComponentId, payload: P) -> u64 {
        let at = self.now + delay;
        self.schedule(at, target, payload)
    }

    /// Pops the next event if it fires at or before `deadline`, advancing the
    /// clock to its fire time.
    pub fn next_event(&mut self, deadline: SimTime) -> Option<Event<P>> {
        let fire = self.queue.peek()?.0 .0.fire_time;
        if fire > deadline {
            return None;
        }
        let Reverse(Queued(ev)) = self.queue.pop()?;
        debug_assert!(ev.fire_time >= self.now);
        self.now = ev.fire_time;
        self.dispatched += 1;
        Some(ev)
    }

    /// Dispatches every event with `fire_time <= deadline` to `handler`.
    /// Returns the time of the last processed event, or `deadline` when the
    /// queue was already empty.
    pub fn run_until<F>(&mut self, deadline: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Engine<P>, Event<P>),
    {
        let mut last = None;
        while let Some(ev) = self.next_event(deadline) {
            last = Some(ev.fire_time);
            handler(self, ev);
        }
        match last {
            Some(t) => t,
            None if self.queue.is_empty() => {
                if deadline > self.now && deadline.0 <= HORIZON_NS {
                    self.now = deadline;
                }
                deadline
            }
            None => self.now,
        }
    }

    /// Runs until the queue drains.
    pub fn run<F>(&mut self, handler: F) -> SimTime
    where
        F: FnMut(&mut Engine<P>, Event<P>),
    {
        self.run_until(SimTime(HORIZON_NS), handler)
    }
}

/// Point-to-point connection with a fixed delay and FIFO delivery.
#[derive(Debug, Clone)]
pub struct Port {
    pub source: ComponentId,
    pub sink: ComponentId,
    pub fixed_delay: SimTime,
    last_delivery: SimTime,
}

impl Port {
    pub fn new(source: ComponentId, sink: ComponentId, fixed_delay: SimTime) -> Self {
        Port {
            source,
            sink,
            fixed_delay,
            last_delivery: SimTime::ZERO,
        }
    }

    /// Sends `payload` now; it arrives no earlier than `now + fixed_delay` and
    /// never before a message sent earlier on the same port.
    pub fn send<P>(&mut self, engine: &mut Engine<P>, payload: P) -> SimTime {
        let at = (engine.now() + self.fixed_delay).max(self.last_delivery);
        self.last_delivery = at;
        engine.schedule(at, self.sink, payload);
        at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: ComponentId = ComponentId(0);

    fn drain(engine: &mut Engine<u32>) -> Vec<(u64, u32)> {
        let mut out = Vec::new();
        engine.run(|_, ev| out.push((ev.fire_time.0, ev.payload)));
        out
    }

    #[test]
    fn event_at_time_zero_is_dispatched_first() {
        let mut e = Engine::new();
        e.schedule(SimTime(4), T, 1);
        e.schedule(SimTime(0), T, 0);
        assert_eq!(drain(&mut e)[0], (0, 0));
    }

    #[test]
    fn equal_times_dispatch_in_scheduling_order() {
        let mut e = Engine::new();
        for p in 0..5 {
            e.schedule(SimTime(10), T, p);
        }
        let got: Vec<u32> = drain(&mut e).into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn later_scheduled_earlier_time_goes_first() {
        let mut e = Engine::new();
        e.schedule(SimTime(5), T, 5);
        e.schedule(SimTime(3), T, 3);
        assert_eq!(drain(&mut e), vec![(3, 3), (5, 5)]);
    }

    #[test]
    fn run_until_on_empty_queue_returns_deadline() {
        let mut e: Engine<u32> = Engine::new();
        assert_eq!(e.run_until(SimTime(100), |_, _| {}), SimTime(100));
    }

    #[test]
    fn run_until_returns_last_event_time() {
        let mut e = Engine::new();
        e.schedule(SimTime(7), T, 0u32);
        assert_eq!(e.run_until(SimTime(100), |_, _| {}), SimTime(7));
    }

    #[test]
    fn run_until_leaves_later_events_queued() {
        let mut e = Engine::new();
        e.schedule(SimTime(7), T, 0u32);
        e.schedule(SimTime(200), T, 1u32);
        e.run_until(SimTime(100), |_, _| {});
        assert_eq!(e.pending(), 1);
        assert_eq!(drain(&mut e), vec![(200, 1)]);
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn scheduling_in_the_past_is_a_fault() {
        let mut e = Engine::new();
        e.schedule(SimTime(10), T, 0u32);
        e.run(|eng, _| {
            eng.schedule(SimTime(5), T, 1);
        });
    }

    #[test]
    fn handlers_can_schedule_follow_ups() {
        let mut e = Engine::new();
        e.schedule(SimTime(1), T, 3u32);
        let mut seen = Vec::new();
        e.run(|eng, ev| {
            seen.push(ev.fire_time.0);
            if ev.payload > 0 {
                eng.schedule_in(SimTime(2), T, ev.payload - 1);
            }
        });
        assert_eq!(seen, vec![1, 3, 5, 7]);
        assert_eq!(e.dispatched(), 4);
    }

    #[test]
    fn port_preserves_fifo_and_delay() {
        let mut e = Engine::new();
        let mut port = Port::new(ComponentId(0), ComponentId(1), SimTime(10));
        let a = port.send(&mut e, 1u32);
        let b = port.send(&mut e, 2u32);
        assert_eq!(a, SimTime(10));
        assert!(b >= a);
        let got: Vec<u32> = drain(&mut e).into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    #[should_panic(expected = "beyond horizon")]
    fn horizon_is_enforced() {
        let _ = SimTime(HORIZON_NS) + SimTime(1);
    }
}
