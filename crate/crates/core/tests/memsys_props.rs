use accesim::memsys::{AccessMode, CacheSpec, MemRequest, MemoryDevice, MemoryDeviceSpec, MemorySystem, Placement, LINE_BYTES};
use accesim::SimTime;
use proptest::prelude::*;

fn system(mode: AccessMode) -> MemorySystem {
    MemorySystem::new(
        mode,
        MemoryDeviceSpec::preset("ddr4", Placement::Host).unwrap(),
        None,
        CacheSpec::iocache(),
        CacheSpec::llc(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn dc_read_after_write_hits(addrs in prop::collection::vec(0u64..1 << 30, 1..40), t in 0u64..10_000) {
        let mut m = system(AccessMode::Dc);
        let hit = m.iocache.spec().hit_latency_ns;
        for a in addrs {
            let line = a - a % LINE_BYTES;
            m.access(SimTime(t), MemRequest::write(line, LINE_BYTES)).unwrap();
            prop_assert!(m.iocache.contains(line));
            let done = m.access(SimTime(t + 1), MemRequest::read(line, LINE_BYTES)).unwrap();
            prop_assert_eq!(done, SimTime(t + 1 + hit));
        }
    }

    #[test]
    fn dm_never_allocates(reqs in prop::collection::vec((0u64..1 << 30, 1u64..4096, prop::bool::ANY), 1..50)) {
        let mut m = system(AccessMode::Dm);
        for (i, (a, b, w)) in reqs.into_iter().enumerate() {
            let r = if w { MemRequest::write(a, b) } else { MemRequest::read(a, b) };
            m.access(SimTime(i as u64), r).unwrap();
        }
        prop_assert_eq!(m.iocache.resident_lines() + m.llc.resident_lines(), 0);
    }

    #[test]
    fn channels_never_exceed_bandwidth(
        preset in prop::sample::select(vec!["ddr3", "ddr4", "ddr5", "hbm2", "gddr6"]),
        reqs in prop::collection::vec((0u64..1 << 32, 64u64..65536), 1..200),
    ) {
        let spec = MemoryDeviceSpec::preset(preset, Placement::Host).unwrap();
        let bw = spec.bandwidth_gbps;
        let mut dev = MemoryDevice::new(spec).unwrap();
        let mut last = 0.0f64;
        let mut total = 0u64;
        for (a, b) in reqs {
            last = last.max(dev.service_exact(0.0, MemRequest::read(a, b)).unwrap());
            total += b;
        }
        prop_assert!(total as f64 / last <= bw * (1.0 + 1e-9), "{} B in {} ns at {} GB/s", total, last, bw);
    }
}
