use accesim::sim::{ComponentId, Engine, Port};
use accesim::SimTime;
use proptest::prelude::*;

proptest! {
    #[test]
    fn events_dispatch_once_in_time_order(times in prop::collection::vec(0u64..10_000, 1..200)) {
        let mut e: Engine<usize> = Engine::new();
        for (i, t) in times.iter().enumerate() {
            e.schedule(SimTime(*t), ComponentId(0), i);
        }
        let mut seen = Vec::new();
        e.run(|_, ev| seen.push((ev.fire_time, ev.sequence, ev.payload)));
        prop_assert_eq!(seen.len(), times.len());
        prop_assert!(seen.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        let mut ids: Vec<usize> = seen.iter().map(|s| s.2).collect();
        ids.sort();
        prop_assert_eq!(ids, (0..times.len()).collect::<Vec<_>>());
        prop_assert_eq!(e.pending(), 0);
    }

    #[test]
    fn run_until_leaves_later_events(times in prop::collection::vec(0u64..1_000, 1..100), cut in 0u64..1_000) {
        let mut e: Engine<u64> = Engine::new();
        for t in &times {
            e.schedule(SimTime(*t), ComponentId(0), *t);
        }
        let mut n = 0;
        e.run_until(SimTime(cut), |_, ev| {
            assert!(ev.fire_time.0 <= cut);
            n += 1;
        });
        prop_assert_eq!(n, times.iter().filter(|t| **t <= cut).count());
        prop_assert_eq!(e.pending(), times.len() - n);
    }

    #[test]
    fn port_delivery_respects_delay(delay in 0u64..500, sends in prop::collection::vec(0u64..300, 1..50)) {
        let mut e: Engine<u64> = Engine::new();
        let mut port = Port::new(ComponentId(0), ComponentId(1), SimTime(delay));
        // Each send is triggered by a timer event at its own time.
        for t in &sends {
            e.schedule(SimTime(*t), ComponentId(0), u64::MAX);
        }
        let mut deliveries = Vec::new();
        e.run(|eng, ev| {
            if ev.target == ComponentId(0) {
                let sent = eng.now().0;
                port.send(eng, sent);
            } else {
                deliveries.push((ev.payload, eng.now().0));
            }
        });
        prop_assert_eq!(deliveries.len(), sends.len());
        for (sent, at) in &deliveries {
            prop_assert!(*at >= sent + delay);
        }
        prop_assert!(deliveries.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}
