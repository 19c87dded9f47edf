//! PCIe-like interconnect between host memory and the accelerator.
//!
//! Data moves in packets of `packet_payload_bytes` plus a fixed header. Each
//! packet is stored and forwarded through the Root Complex and the Switch, so
//! every hop serializes the whole packet before passing it on. Read requests
//! carry no data and only pay fixed latencies. The requester keeps at most
//! `inflight_window_bytes` of completion data outstanding; with large packets
//! the window holds few of them and the pipeline drains between round trips,
//! which is what makes very large packets slower than mid-sized ones.
//!
//! Steady-state throughput for payload `p`, header `H`, window `W`, link
//! bandwidth `BW` and fixed latency `F`:
//!
//! ```text
//! TP(p)  = min(BW * p / (p + H), floor(W / p) * p / RTT(p))
//! RTT(p) = F + hops * (p + H) / BW
//! ```
//!
//! A transfer costs one pipeline fill (`RTT` of the first packet) plus the
//! remaining bytes at `TP`, counted in whole window rounds when the window is
//! the bottleneck. [`PacketSim`] replays the same path one packet
//! at a time on the event engine.

use crate::error::{Error, Result};
use crate::sim::{ComponentId, Engine, SimTime};

pub const VALID_LANES: [u32; 5] = [1, 2, 4, 8, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct PcieConfig {
    pub lanes: u32,
    /// Effective (post-encoding) rate per lane in Gb/s.
    pub lane_rate_gbps: f64,
    pub packet_payload_bytes: u32,
    pub header_bytes: u32,
    pub rc_latency_ns: u64,
    pub switch_latency_ns: u64,
    /// Endpoint turnaround added to every round trip.
    pub turnaround_ns: u64,
    pub inflight_window_bytes: u32,
    pub hops: u32,
}

impl Default for PcieConfig {
    /// PCIe 2.0 link with 4 lanes at 4 Gb/s, 150 ns Root Complex, 50 ns Switch.
    fn default() -> Self {
        PcieConfig {
            lanes: 4,
            lane_rate_gbps: 4.0,
            packet_payload_bytes: 256,
            header_bytes: 24,
            rc_latency_ns: 150,
            switch_latency_ns: 50,
            turnaround_ns: 100,
            inflight_window_bytes: 8192,
            hops: 2,
        }
    }
}

impl PcieConfig {
    pub fn validate(&self) -> Result<()> {
        if !VALID_LANES.contains(&self.lanes) {
            return Err(Error::config(
                "pcie.lanes",
                format!("{} not in {{1,2,4,8,16}}", self.lanes),
            ));
        }
        if !(self.lane_rate_gbps.is_finite() && self.lane_rate_gbps > 0.0) {
            return Err(Error::config(
                "pcie.lane_rate_gbps",
                format!("must be positive, got {}", self.lane_rate_gbps),
            ));
        }
        let p = self.packet_payload_bytes;
        if !(64..=4096).contains(&p) || !p.is_power_of_two() {
            return Err(Error::config(
                "pcie.packet_bytes",
                format!("{p} is not a power of two in [64, 4096]"),
            ));
        }
        if self.inflight_window_bytes < p {
            return Err(Error::config(
                "pcie.window_bytes",
                format!(
                    "window {} smaller than packet payload {p}",
                    self.inflight_window_bytes
                ),
            ));
        }
        if self.hops == 0 {
            return Err(Error::config("pcie.hops", "at least one hop required"));
        }
        Ok(())
    }

    /// Link bandwidth in GB/s, which is numerically bytes per nanosecond.
    pub fn effective_bandwidth(&self) -> Result<f64> {
        if self.lanes == 0 {
            return Err(Error::config("pcie.lanes", "zero lanes"));
        }
        if !(self.lane_rate_gbps > 0.0) {
            return Err(Error::config("pcie.lane_rate_gbps", "zero lane rate"));
        }
        Ok(self.lanes as f64 * self.lane_rate_gbps / 8.0)
    }

    pub fn fixed_latency_ns(&self) -> u64 {
        self.rc_latency_ns + self.switch_latency_ns + self.turnaround_ns
    }

    /// Timing view of the link. `extra_latency_ns` is added to the fixed part
    /// of every round trip (memory access time at the far end, for example).
    pub fn timing(&self, extra_latency_ns: f64) -> Result<LinkTiming> {
        self.validate()?;
        Ok(LinkTiming {
            bandwidth: self.effective_bandwidth()?,
            payload: self.packet_payload_bytes as f64,
            header: self.header_bytes as f64,
            window_packets: (self.inflight_window_bytes / self.packet_payload_bytes) as u64,
            fixed_ns: self.fixed_latency_ns() as f64 + extra_latency_ns,
            hops: self.hops,
            rate_cap: None,
        })
    }

    /// Closed-form duration of a transfer of `total_bytes` over this link.
    pub fn transfer_time(&self, total_bytes: u64) -> Result<SimTime> {
        Ok(SimTime::from_ns_ceil(self.timing(0.0)?.transfer_ns(total_bytes)?))
    }
}

/// Precomputed timing of one data path. All times in ns, sizes in bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTiming {
    pub bandwidth: f64,
    pub payload: f64,
    pub header: f64,
    pub window_packets: u64,
    pub fixed_ns: f64,
    pub hops: u32,
    /// Upper bound on streaming rate imposed outside the link (memory side).
    pub rate_cap: Option<f64>,
}

impl LinkTiming {
    pub fn serialization_ns(&self, payload: f64) -> f64 {
        (payload + self.header) / self.bandwidth
    }

    pub fn round_trip_ns(&self) -> f64 {
        self.fixed_ns + self.hops as f64 * self.serialization_ns(self.payload)
    }

    /// Steady-state payload throughput in bytes/ns.
    pub fn throughput(&self) -> f64 {
        let link = self.bandwidth * self.payload / (self.payload + self.header);
        let window = self.window_packets as f64 * self.payload / self.round_trip_ns();
        let tp = link.min(window);
        match self.rate_cap {
            Some(cap) => tp.min(cap),
            None => tp,
        }
    }

    /// Latency until the first packet of a transfer has fully arrived.
    pub fn fill_ns(&self, first_payload: f64) -> f64 {
        self.fixed_ns + self.hops as f64 * self.serialization_ns(first_payload)
    }

    /// First-packet fill plus the remaining bytes at steady-state rate. When
    /// the window bounds throughput the remainder is counted in whole window
    /// rounds, which matters once a window holds only a handful of packets.
    pub fn transfer_ns(&self, total_bytes: u64) -> Result<f64> {
        if total_bytes == 0 {
            return Err(Error::InvalidArgument("zero-byte transfer".into()));
        }
        let first = (total_bytes as f64).min(self.payload);
        let rest = total_bytes as f64 - first;
        let link_tp = self.bandwidth * self.payload / (self.payload + self.header);
        let mut steady = rest / link_tp;
        if let Some(cap) = self.rate_cap {
            steady = steady.max(rest / cap);
        }
        let n = (total_bytes as f64 / self.payload).ceil() as u64;
        let link_end = self.fill_ns(first) + steady;
        if n == 1 {
            return Ok(link_end);
        }
        // Window-bound schedule: each group of `w` packets is issued one round
        // trip after the previous group, packets of a group trail by one
        // serialization.
        let w = self.window_packets.max(1);
        let rtt = self.round_trip_ns();
        let s_full = self.serialization_ns(self.payload);
        let arrival = |k: u64| rtt + (k / w) as f64 * rtt + (k % w) as f64 * s_full;
        let last = total_bytes as f64 - self.payload * (n - 1) as f64;
        let issue = if n > w { arrival(n - 1 - w) } else { 0.0 };
        let window_end =
            (issue + self.fill_ns(last)).max(arrival(n - 2) + self.serialization_ns(last));
        Ok(link_end.max(window_end))
    }
}

pub fn effective_bandwidth(cfg: &PcieConfig) -> Result<f64> {
    cfg.effective_bandwidth()
}

pub fn transfer_time(total_bytes: u64, cfg: &PcieConfig) -> Result<SimTime> {
    cfg.transfer_time(total_bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HostToDevice,
    DeviceToHost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub direction: Direction,
    pub total_bytes: u64,
    pub issue_time: SimTime,
    pub completion_time: SimTime,
}

impl Transfer {
    pub fn duration(&self) -> SimTime {
        self.completion_time - self.issue_time
    }
}

/// Per-packet outcome of a [`PacketSim`] run; times are exact (fractional) ns.
#[derive(Debug, Clone)]
pub struct PacketTrace {
    pub transfer: Transfer,
    pub arrivals_ns: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum PacketEvent {
    Issue { packet: usize },
    HopReady { packet: usize, hop: usize },
    HopDone { packet: usize, hop: usize },
}

struct Hop {
    latency_ns: f64,
    link_free_ns: f64,
}

/// Event-driven replay of a transfer: one request per packet, endpoint
/// turnaround, then store-and-forward through each hop in path order.
pub struct PacketSim {
    timing: LinkTiming,
    hops: Vec<Hop>,
    turnaround_ns: f64,
}

const REQUESTER: ComponentId = ComponentId(0);

impl PacketSim {
    pub fn new(cfg: &PcieConfig, direction: Direction) -> Result<Self> {
        Self::with_extra_latency(cfg, direction, 0.0)
    }

    pub fn with_extra_latency(
        cfg: &PcieConfig,
        direction: Direction,
        extra_latency_ns: f64,
    ) -> Result<Self> {
        let timing = cfg.timing(extra_latency_ns)?;
        // Fixed latency not attributed to RC or Switch is split evenly across
        // the remaining hops when hops > 2.
        let mut lat = vec![cfg.rc_latency_ns as f64, cfg.switch_latency_ns as f64];
        lat.resize(cfg.hops as usize, 0.0);
        lat.truncate(cfg.hops as usize);
        let attributed: f64 = lat.iter().sum();
        let turnaround_ns = timing.fixed_ns - attributed;
        if direction == Direction::DeviceToHost {
            lat.reverse();
        }
        Ok(PacketSim {
            timing,
            hops: lat
                .into_iter()
                .map(|latency_ns| Hop {
                    latency_ns,
                    link_free_ns: 0.0,
                })
                .collect(),
            turnaround_ns,
        })
    }

    pub fn run(mut self, direction: Direction, total_bytes: u64) -> Result<PacketTrace> {
        if total_bytes == 0 {
            return Err(Error::InvalidArgument("zero-byte transfer".into()));
        }
        let p = self.timing.payload as u64;
        let n = total_bytes.div_ceil(p) as usize;
        let payload_of = |i: usize| -> f64 {
            if i + 1 == n {
                (total_bytes - p * (n as u64 - 1)) as f64
            } else {
                p as f64
            }
        };
        let window = self.timing.window_packets.max(1) as usize;

        let mut engine: Engine<PacketEvent> = Engine::new();
        let mut exact = vec![0.0f64; n];
        let mut arrivals = vec![0.0f64; n];
        let mut next_issue = 0usize;
        let n_hops = self.hops.len();

        while next_issue < n.min(window) {
            engine.schedule(SimTime::ZERO, REQUESTER, PacketEvent::Issue { packet: next_issue });
            next_issue += 1;
        }

        engine.run(|eng, ev| match ev.payload {
            PacketEvent::Issue { packet } => {
                let issue = if packet < window { 0.0 } else { arrivals[packet - window] };
                let ready = issue + self.turnaround_ns + self.hops[0].latency_ns;
                exact[packet] = ready;
                eng.schedule(
                    SimTime::from_ns_ceil(ready).max(eng.now()),
                    REQUESTER,
                    PacketEvent::HopReady { packet, hop: 0 },
                );
            }
            PacketEvent::HopReady { packet, hop } => {
                let h = &mut self.hops[hop];
                let start = exact[packet].max(h.link_free_ns);
                let done = start + self.timing.serialization_ns(payload_of(packet));
                h.link_free_ns = done;
                exact[packet] = done;
                eng.schedule(
                    SimTime::from_ns_ceil(done).max(eng.now()),
                    REQUESTER,
                    PacketEvent::HopDone { packet, hop },
                );
            }
            PacketEvent::HopDone { packet, hop } => {
                if hop + 1 < n_hops {
                    let ready = exact[packet] + self.hops[hop + 1].latency_ns;
                    exact[packet] = ready;
                    eng.schedule(
                        SimTime::from_ns_ceil(ready).max(eng.now()),
                        REQUESTER,
                        PacketEvent::HopReady { packet, hop: hop + 1 },
                    );
                } else {
                    arrivals[packet] = exact[packet];
                    if next_issue < n {
                        eng.schedule(eng.now(), REQUESTER, PacketEvent::Issue { packet: next_issue });
                        next_issue += 1;
                    }
                }
            }
        });

        let last = arrivals.iter().cloned().fold(0.0, f64::max);
        Ok(PacketTrace {
            transfer: Transfer {
                direction,
                total_bytes,
                issue_time: SimTime::ZERO,
                completion_time: SimTime::from_ns_ceil(last),
            },
            arrivals_ns: arrivals,
        })
    }
}

/// Runs the packet-level model for one transfer.
pub fn route(cfg: &PcieConfig, direction: Direction, total_bytes: u64) -> Result<PacketTrace> {
    PacketSim::new(cfg, direction)?.run(direction, total_bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lanes: u32, rate: f64) -> PcieConfig {
        PcieConfig {
            lanes,
            lane_rate_gbps: rate,
            ..PcieConfig::default()
        }
    }

    #[test]
    fn bandwidth_from_lanes_and_rate() {
        assert_eq!(cfg(4, 4.0).effective_bandwidth().unwrap(), 2.0);
        assert_eq!(cfg(8, 8.0).effective_bandwidth().unwrap(), 8.0);
        assert!(cfg(0, 8.0).effective_bandwidth().is_err());
    }

    #[test]
    fn validation_rejects_bad_packets_and_windows() {
        let mut c = PcieConfig::default();
        c.packet_payload_bytes = 96;
        assert!(c.validate().is_err());
        c.packet_payload_bytes = 8192;
        assert!(c.validate().is_err());
        c.packet_payload_bytes = 4096;
        c.inflight_window_bytes = 2048;
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "pcie.window_bytes"));
        assert!(cfg(3, 4.0).validate().is_err());
    }

    #[test]
    fn zero_byte_transfer_is_rejected() {
        assert!(PcieConfig::default().transfer_time(0).is_err());
        assert!(route(&PcieConfig::default(), Direction::HostToDevice, 0).is_err());
    }

    #[test]
    fn header_free_wide_window_is_an_ideal_pipe() {
        let c = PcieConfig {
            header_bytes: 0,
            inflight_window_bytes: 1 << 30,
            ..cfg(8, 8.0)
        };
        let t = c.timing(0.0).unwrap();
        let bytes = 1u64 << 20;
        let expect = t.fill_ns(256.0) + (bytes - 256) as f64 / 8.0;
        assert!((t.transfer_ns(bytes).unwrap() - expect).abs() < 1e-6);
        assert_eq!(t.throughput(), 8.0);
    }

    #[test]
    fn single_packet_latency_is_fixed_plus_two_serializations() {
        let c = cfg(8, 8.0);
        let trace = route(&c, Direction::HostToDevice, 256).unwrap();
        let s = (256.0 + 24.0) / 8.0;
        let expect = c.fixed_latency_ns() as f64 + 2.0 * s;
        assert!((trace.arrivals_ns[0] - expect).abs() < 1e-9);
    }

    #[test]
    fn back_to_back_packets_arrive_one_serialization_apart() {
        let c = PcieConfig {
            inflight_window_bytes: 1 << 20,
            ..cfg(8, 8.0)
        };
        let trace = route(&c, Direction::HostToDevice, 512).unwrap();
        let s = (256.0 + 24.0) / 8.0;
        assert!((trace.arrivals_ns[1] - trace.arrivals_ns[0] - s).abs() < 1e-9);
    }

    #[test]
    fn reverse_direction_is_symmetric() {
        let c = cfg(4, 8.0);
        let a = route(&c, Direction::HostToDevice, 100_000).unwrap();
        let b = route(&c, Direction::DeviceToHost, 100_000).unwrap();
        assert_eq!(a.transfer.duration(), b.transfer.duration());
    }

    #[test]
    fn closed_form_matches_packet_model() {
        for p in [64u32, 128, 256, 512, 1024, 2048, 4096] {
            for (l, r) in [(1, 2.0), (4, 4.0), (8, 8.0), (16, 32.0)] {
                for bytes in [64u64 << 10, 100_000, 1 << 20, 3 << 20] {
                    let c = PcieConfig {
                        packet_payload_bytes: p,
                        ..cfg(l, r)
                    };
                    let closed = c.timing(0.0).unwrap().transfer_ns(bytes).unwrap();
                    let ev = route(&c, Direction::HostToDevice, bytes).unwrap();
                    let rel = (ev.transfer.duration().0 as f64 - closed).abs() / closed;
                    assert!(rel < 0.01, "p={p} lanes={l} bytes={bytes} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn throughput_never_exceeds_bandwidth() {
        for p in [64u32, 256, 4096] {
            for (l, r) in [(1, 2.0), (4, 4.0), (16, 64.0)] {
                let c = PcieConfig {
                    packet_payload_bytes: p,
                    ..cfg(l, r)
                };
                let t = c.timing(0.0).unwrap();
                assert!(t.throughput() <= c.effective_bandwidth().unwrap());
            }
        }
    }
}
