//! Memory hierarchy: DRAM device presets, the host LLC and accelerator-side
//! IOCache, and the DC / DM / DevMem access paths.
//!
//! DRAM is a fixed first-word latency followed by a bandwidth pipe. Lines are
//! interleaved round-robin across channels, so a request spanning several
//! lines spreads over channels while requests hitting the same channel queue.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::SimTime;

pub const LINE_BYTES: u64 = 64;
/// Coherence snoop charged on every DC miss.
pub const SNOOP_NS: u64 = 20;
/// Crossbar delay between the IO path and the memory controller.
pub const MEMBUS_NS: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Host,
    Device,
}

impl FromStr for Placement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "host" => Ok(Placement::Host),
            "device" => Ok(Placement::Device),
            _ => Err(Error::config("mem.placement", format!("unknown placement '{s}'"))),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Host => "host",
            Placement::Device => "device",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryDeviceSpec {
    pub name: String,
    pub channels: u32,
    pub data_width_bits: u32,
    /// Aggregate bandwidth in GB/s (bytes/ns).
    pub bandwidth_gbps: f64,
    pub data_rate_mts: u32,
    pub fixed_latency_ns: u64,
    pub placement: Placement,
}

pub const PRESET_NAMES: [&str; 5] = ["ddr3", "ddr4", "ddr5", "hbm2", "gddr6"];

impl MemoryDeviceSpec {
    pub fn preset(name: &str, placement: Placement) -> Result<Self> {
        let (label, channels, width, bw, rate, lat) = match name.to_ascii_lowercase().as_str() {
            "ddr3" => ("DDR3", 1, 64, 12.8, 1600, 14),
            "ddr4" => ("DDR4", 1, 64, 19.2, 2400, 14),
            "ddr5" => ("DDR5", 2, 32, 25.6, 3200, 14),
            "hbm2" => ("HBM2", 2, 128, 64.0, 2000, 12),
            "gddr6" => ("GDDR6", 2, 64, 32.0, 2000, 12),
            _ => return Err(Error::config("mem.preset", format!("unknown preset '{name}'"))),
        };
        Ok(MemoryDeviceSpec {
            name: label.to_string(),
            channels,
            data_width_bits: width,
            bandwidth_gbps: bw,
            data_rate_mts: rate,
            fixed_latency_ns: lat,
            placement,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_gbps.is_finite() && self.bandwidth_gbps > 0.0) {
            return Err(Error::config(
                "mem.bandwidth_gbps",
                format!("must be positive, got {}", self.bandwidth_gbps),
            ));
        }
        if self.channels == 0 {
            return Err(Error::config("mem.channels", "at least one channel required"));
        }
        Ok(())
    }

    pub fn channel_bandwidth(&self) -> f64 {
        self.bandwidth_gbps / self.channels as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheSpec {
    pub capacity_bytes: u64,
    pub line_bytes: u64,
    pub associativity: u32,
    pub hit_latency_ns: u64,
}

impl CacheSpec {
    pub fn llc() -> Self {
        CacheSpec {
            capacity_bytes: 2 << 20,
            line_bytes: LINE_BYTES,
            associativity: 16,
            hit_latency_ns: 20,
        }
    }

    pub fn iocache() -> Self {
        CacheSpec {
            capacity_bytes: 32 << 10,
            line_bytes: LINE_BYTES,
            associativity: 8,
            hit_latency_ns: 50,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let way = self.line_bytes * self.associativity as u64;
        if self.line_bytes == 0 || way == 0 || self.capacity_bytes == 0 || !self.capacity_bytes.is_multiple_of(way)
        {
            return Err(Error::config(
                key,
                format!(
                    "capacity {} not divisible by line {} x associativity {}",
                    self.capacity_bytes, self.line_bytes, self.associativity
                ),
            ));
        }
        Ok(())
    }

    pub fn sets(&self) -> u64 {
        self.capacity_bytes / (self.line_bytes * self.associativity as u64)
    }
}

/// Set-associative LRU tag store. Each set keeps its tags most-recent first.
#[derive(Debug, Clone)]
pub struct Cache {
    spec: CacheSpec,
    sets: Vec<Vec<u64>>,
    pub hits: u64,
    pub misses: u64,
}

impl Cache {
    pub fn new(spec: CacheSpec) -> Self {
        let n = spec.sets() as usize;
        Cache {
            sets: vec![Vec::with_capacity(spec.associativity as usize); n],
            spec,
            hits: 0,
            misses: 0,
        }
    }

    pub fn spec(&self) -> &CacheSpec {
        &self.spec
    }

    fn locate(&self, addr: u64) -> (usize, u64) {
        let line = addr / self.spec.line_bytes;
        let n = self.sets.len() as u64;
        ((line % n) as usize, line / n)
    }

    pub fn contains(&self, addr: u64) -> bool {
        let (set, tag) = self.locate(addr);
        self.sets[set].contains(&tag)
    }

    /// Looks up `addr`, allocating on miss. Returns true on hit.
    pub fn access(&mut self, addr: u64) -> bool {
        let (set, tag) = self.locate(addr);
        let ways = self.spec.associativity as usize;
        let s = &mut self.sets[set];
        if let Some(pos) = s.iter().position(|&t| t == tag) {
            s.remove(pos);
            s.insert(0, tag);
            self.hits += 1;
            true
        } else {
            if s.len() == ways {
                s.pop();
            }
            s.insert(0, tag);
            self.misses += 1;
            false
        }
    }

    pub fn resident_lines(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Dc,
    Dm,
    DevMem,
}

impl FromStr for AccessMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dc" => Ok(AccessMode::Dc),
            "dm" => Ok(AccessMode::Dm),
            "devmem" => Ok(AccessMode::DevMem),
            _ => Err(Error::config("mode", format!("unknown access mode '{s}'"))),
        }
    }
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessMode::Dc => "dc",
            AccessMode::Dm => "dm",
            AccessMode::DevMem => "devmem",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRequest {
    pub address: u64,
    pub bytes: u64,
    pub write: bool,
}

impl MemRequest {
    pub fn read(address: u64, bytes: u64) -> Self {
        MemRequest {
            address,
            bytes,
            write: false,
        }
    }

    pub fn write(address: u64, bytes: u64) -> Self {
        MemRequest {
            address,
            bytes,
            write: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub name: String,
    pub base: u64,
    pub size: u64,
}

impl Region {
    pub fn contains(&self, addr: u64, bytes: u64) -> bool {
        addr >= self.base && addr.saturating_add(bytes) <= self.base + self.size
    }
}

/// One DRAM device with per-channel busy tracking.
#[derive(Debug, Clone)]
pub struct MemoryDevice {
    spec: MemoryDeviceSpec,
    regions: Vec<Region>,
    channel_free_ns: Vec<f64>,
    pub bytes_served: u64,
}

impl MemoryDevice {
    pub fn new(spec: MemoryDeviceSpec) -> Result<Self> {
        spec.validate()?;
        Ok(MemoryDevice {
            channel_free_ns: vec![0.0; spec.channels as usize],
            regions: vec![Region {
                name: format!("{}-all", spec.name),
                base: 0,
                size: u64::MAX,
            }],
            spec,
            bytes_served: 0,
        })
    }

    pub fn with_regions(mut self, regions: Vec<Region>) -> Self {
        self.regions = regions;
        self
    }

    pub fn spec(&self) -> &MemoryDeviceSpec {
        &self.spec
    }

    fn region_map(&self) -> String {
        self.regions
            .iter()
            .map(|r| format!("{}:{:#x}+{:#x}", r.name, r.base, r.size))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Serves `req` arriving at `arrival`; returns its completion time.
    pub fn service(&mut self, arrival: SimTime, req: MemRequest) -> Result<SimTime> {
        Ok(SimTime::from_ns_ceil(self.service_exact(arrival.0 as f64, req)?))
    }

    pub fn service_exact(&mut self, arrival_ns: f64, req: MemRequest) -> Result<f64> {
        if req.bytes == 0 {
            return Err(Error::InvalidArgument("zero-byte memory request".into()));
        }
        if !self.regions.iter().any(|r| r.contains(req.address, req.bytes)) {
            return Err(Error::AddressFault {
                addr: req.address,
                regions: self.region_map(),
            });
        }
        let ch_bw = self.spec.channel_bandwidth();
        let n = self.channel_free_ns.len() as u64;
        let mut per_channel = vec![0u64; n as usize];
        let first_line = req.address / LINE_BYTES;
        let last_line = (req.address + req.bytes - 1) / LINE_BYTES;
        if last_line - first_line + 1 >= n * 4 {
            // Long bursts spread evenly; skip the per-line walk.
            for c in per_channel.iter_mut() {
                *c = req.bytes / n;
            }
            per_channel[(first_line % n) as usize] += req.bytes % n;
        } else {
            let mut addr = req.address;
            let end = req.address + req.bytes;
            while addr < end {
                let line = addr / LINE_BYTES;
                let chunk = ((line + 1) * LINE_BYTES).min(end) - addr;
                per_channel[(line % n) as usize] += chunk;
                addr += chunk;
            }
        }
        let mut done: f64 = arrival_ns;
        for (c, &b) in per_channel.iter().enumerate() {
            if b == 0 {
                continue;
            }
            let start = arrival_ns.max(self.channel_free_ns[c]);
            let end = start + b as f64 / ch_bw;
            self.channel_free_ns[c] = end;
            done = done.max(end);
        }
        self.bytes_served += req.bytes;
        Ok(done + self.spec.fixed_latency_ns as f64)
    }
}

/// Host DRAM with LLC, accelerator IOCache, and optional device DRAM.
#[derive(Debug, Clone)]
pub struct MemorySystem {
    pub mode: AccessMode,
    pub host: MemoryDevice,
    pub device: Option<MemoryDevice>,
    pub iocache: Cache,
    pub llc: Cache,
    pub snoop_ns: u64,
    pub membus_ns: u64,
}

impl MemorySystem {
    pub fn new(
        mode: AccessMode,
        host: MemoryDeviceSpec,
        device: Option<MemoryDeviceSpec>,
        iocache: CacheSpec,
        llc: CacheSpec,
    ) -> Result<Self> {
        iocache.validate("cache.iocache_bytes")?;
        llc.validate("cache.llc_bytes")?;
        if mode == AccessMode::DevMem && device.is_none() {
            return Err(Error::config(
                "mode",
                "devmem access requires a device-side memory",
            ));
        }
        Ok(MemorySystem {
            mode,
            host: MemoryDevice::new(host)?,
            device: device.map(MemoryDevice::new).transpose()?,
            iocache: Cache::new(iocache),
            llc: Cache::new(llc),
            snoop_ns: SNOOP_NS,
            membus_ns: MEMBUS_NS,
        })
    }

    /// Single request through the configured access path.
    pub fn access(&mut self, arrival: SimTime, req: MemRequest) -> Result<SimTime> {
        self.access_as(arrival, req, self.mode)
    }

    pub fn access_as(&mut self, arrival: SimTime, req: MemRequest, mode: AccessMode) -> Result<SimTime> {
        if req.bytes == 0 {
            return Err(Error::InvalidArgument("zero-byte memory request".into()));
        }
        match mode {
            AccessMode::DevMem => match self.device.as_mut() {
                Some(dev) => dev.service(arrival, req),
                None => Err(Error::config("mode", "devmem access requires a device-side memory")),
            },
            AccessMode::Dm => {
                let t = arrival + SimTime(self.membus_ns);
                self.host.service(t, req)
            }
            AccessMode::Dc => {
                let io_lat = self.iocache.spec().hit_latency_ns;
                let llc_lat = self.llc.spec().hit_latency_ns;
                let mut all_io = true;
                let mut all_llc = true;
                let mut line = req.address / LINE_BYTES;
                let last = (req.address + req.bytes - 1) / LINE_BYTES;
                while line <= last {
                    let a = line * LINE_BYTES;
                    if !self.iocache.access(a) {
                        all_io = false;
                        if !self.llc.access(a) {
                            all_llc = false;
                        }
                    }
                    line += 1;
                }
                if all_io {
                    return Ok(arrival + SimTime(io_lat));
                }
                if all_llc {
                    return Ok(arrival + SimTime(io_lat + llc_lat));
                }
                let t = arrival + SimTime(io_lat + llc_lat + self.snoop_ns + self.membus_ns);
                self.host.service(t, req)
            }
        }
    }

    /// Latency seen by the first byte of a streamed host transfer, before any
    /// queueing: cache lookups and snoop for DC, the bus hop for DM.
    pub fn stream_latency_ns(&self, mode: AccessMode) -> u64 {
        let dram = self.host.spec().fixed_latency_ns;
        match mode {
            AccessMode::Dc => {
                self.iocache.spec().hit_latency_ns
                    + self.llc.spec().hit_latency_ns
                    + self.snoop_ns
                    + self.membus_ns
                    + dram
            }
            AccessMode::Dm => self.membus_ns + dram,
            AccessMode::DevMem => self.device.as_ref().map_or(0, |d| d.spec().fixed_latency_ns),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Bandwidth,
    Latency,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandwidth" => Ok(SweepAxis::Bandwidth),
            "latency" => Ok(SweepAxis::Latency),
            _ => Err(Error::InvalidArgument(format!("unknown memory axis '{s}'"))),
        }
    }
}

/// Runs `run` once per value with the given spec field replaced and returns
/// execution times normalized to the first value.
pub fn sweep_bandwidth_latency<F>(
    spec: &MemoryDeviceSpec,
    axis: SweepAxis,
    values: &[f64],
    mut run: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&MemoryDeviceSpec) -> Result<f64>,
{
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sweep".into()));
    }
    let mut times = Vec::with_capacity(values.len());
    for &v in values {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("sweep value {v} must be positive")));
        }
        let mut s = spec.clone();
        match axis {
            SweepAxis::Bandwidth => s.bandwidth_gbps = v,
            SweepAxis::Latency => s.fixed_latency_ns = v.round() as u64,
        }
        times.push(run(&s)?);
    }
    let base = times[0];
    Ok(times.into_iter().map(|t| t / base).collect())
}
