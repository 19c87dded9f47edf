//! Whole-system run: builds the components from a [`RunConfig`], executes the
//! workload graph op by op, and reports the time split.
//!
//! GEMMs run on the accelerator. Their operands stream either over PCIe from
//! host memory (DC or DM mode, translated by the SMMU) or straight from
//! device memory (DevMem). Non-GEMM ops run on the host CPU; when tensors
//! live in device memory, CPU loads cross the PCIe hierarchy.

use crate::accel::{run_gemm, DmaPath, GemmLayout, GemmTiming, SystolicConfig};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::memsys::{
    AccessMode, CacheSpec, MemRequest, MemoryDevice, MemoryDeviceSpec, MemorySystem, Placement, LINE_BYTES,
};
use crate::pcie::{Direction, LinkTiming, PcieConfig};
use crate::sim::SimTime;
use crate::smmu::{Smmu, SmmuConfig, TranslationReport, TranslationStats};
use crate::workload::{
    build_gemm, build_vit, nongemm_time, NonGemmCost, OpKind, Residency, VitSpec, WorkloadGraph, WorkloadKind,
};

/// Virtual base of the accelerator's operand arena.
const ARENA_BASE: u64 = 0x1_0000_0000;

#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub mode: AccessMode,
    pub pcie: PcieConfig,
    pub host_mem: MemoryDeviceSpec,
    pub device_mem: Option<MemoryDeviceSpec>,
    pub iocache: CacheSpec,
    pub llc: CacheSpec,
    pub smmu: SmmuConfig,
    pub accel: SystolicConfig,
    pub dma_chunk_bytes: u64,
    pub launch_ns: u64,
    pub nongemm: NonGemmCost,
    pub workload: WorkloadKind,
    pub gemm_n: u64,
    pub vit: VitSpec,
}

impl SystemConfig {
    pub fn from_run(cfg: &RunConfig) -> Result<Self> {
        let mode: AccessMode = cfg.get("mode").parse()?;
        let placement: Placement = cfg.get("mem.placement").parse()?;
        let preset = cfg.get("mem.preset");
        let mut mem = if preset == "custom" {
            let bw = cfg
                .f64_or_preset("mem.bandwidth_gbps")
                .ok_or_else(|| Error::config("mem.bandwidth_gbps", "custom memory needs an explicit bandwidth"))?;
            let lat = cfg
                .f64_or_preset("mem.latency_ns")
                .ok_or_else(|| Error::config("mem.latency_ns", "custom memory needs an explicit latency"))?;
            MemoryDeviceSpec {
                name: "custom".into(),
                channels: 1,
                data_width_bits: 64,
                bandwidth_gbps: bw,
                data_rate_mts: 0,
                fixed_latency_ns: lat.round() as u64,
                placement,
            }
        } else {
            MemoryDeviceSpec::preset(preset, placement)?
        };
        if let Some(bw) = cfg.f64_or_preset("mem.bandwidth_gbps") {
            mem.bandwidth_gbps = bw;
        }
        if let Some(lat) = cfg.f64_or_preset("mem.latency_ns") {
            mem.fixed_latency_ns = lat.round() as u64;
        }
        mem.validate()?;

        let (host_mem, device_mem) = match placement {
            Placement::Host => (mem, None),
            Placement::Device => (MemoryDeviceSpec::preset("ddr3", Placement::Host)?, Some(mem)),
        };
        if mode == AccessMode::DevMem && device_mem.is_none() {
            return Err(Error::config(
                "mem.placement",
                "mode = devmem requires mem.placement = device",
            ));
        }
        if mode != AccessMode::DevMem && device_mem.is_some() {
            return Err(Error::config(
                "mode",
                "device-side memory is only reachable with mode = devmem",
            ));
        }

        let pcie = PcieConfig {
            lanes: cfg.u32("pcie.lanes")?,
            lane_rate_gbps: cfg.f64("pcie.lane_rate_gbps"),
            packet_payload_bytes: cfg.u32("pcie.packet_bytes")?,
            header_bytes: cfg.u32("pcie.header_bytes")?,
            rc_latency_ns: cfg.u64("pcie.rc_latency_ns"),
            switch_latency_ns: cfg.u64("pcie.switch_latency_ns"),
            turnaround_ns: cfg.u64("pcie.turnaround_ns"),
            inflight_window_bytes: cfg.u32("pcie.window_bytes")?,
            hops: 2,
        };
        pcie.validate()?;

        let iocache = CacheSpec {
            capacity_bytes: cfg.u64("cache.iocache_bytes"),
            hit_latency_ns: cfg.u64("cache.iocache_latency_ns"),
            ..CacheSpec::iocache()
        };
        let llc = CacheSpec {
            capacity_bytes: cfg.u64("cache.llc_bytes"),
            ..CacheSpec::llc()
        };
        iocache.validate("cache.iocache_bytes")?;
        llc.validate("cache.llc_bytes")?;

        let smmu = SmmuConfig {
            enabled: cfg.bool("smmu.enabled"),
            utlb_entries: cfg.u32("smmu.utlb_entries")?,
            tlb_entries: cfg.u32("smmu.tlb_entries")?,
            levels: cfg.u32("smmu.levels")?,
            ..SmmuConfig::default()
        };

        let accel = SystolicConfig {
            rows: cfg.u32("accel.rows")?,
            cols: cfg.u32("accel.cols")?,
            clock_ghz: 1.0,
            tile_fill_cycles: cfg.u64("accel.fill_cycles"),
            compute_scale: cfg.f64("accel.compute_scale"),
            buffer_bytes: cfg.u64("accel.buffer_bytes"),
            block_rows: cfg.u64("accel.block_rows"),
        };
        accel.validate()?;
        let dma_chunk_bytes = cfg.u64("accel.dma_chunk_bytes");
        if dma_chunk_bytes == 0 {
            return Err(Error::config("accel.dma_chunk_bytes", "must be positive"));
        }

        // CPU access to device memory crosses the PCIe hierarchy one cache
        // line at a time.
        let link = pcie.timing(0.0)?;
        let dev_lat = device_mem.as_ref().map_or(0, |d| d.fixed_latency_ns) as f64;
        let nongemm = NonGemmCost {
            softmax_ns: cfg.f64("nongemm.softmax_ns"),
            layernorm_ns: cfg.f64("nongemm.layernorm_ns"),
            gelu_ns: cfg.f64("nongemm.gelu_ns"),
            residual_ns: cfg.f64("nongemm.residual_ns"),
            host_bandwidth: host_mem.bandwidth_gbps,
            numa_bandwidth: link.bandwidth * LINE_BYTES as f64 / (LINE_BYTES as f64 + link.header),
            numa_latency_ns: link.fill_ns(LINE_BYTES as f64) + dev_lat,
            numa_parallelism: cfg.f64("nongemm.numa_parallelism"),
        };
        for (k, v) in [
            ("nongemm.softmax_ns", nongemm.softmax_ns),
            ("nongemm.layernorm_ns", nongemm.layernorm_ns),
            ("nongemm.gelu_ns", nongemm.gelu_ns),
            ("nongemm.residual_ns", nongemm.residual_ns),
        ] {
            if v < 0.0 {
                return Err(Error::config(k, "must be non-negative"));
            }
        }
        if nongemm.numa_parallelism < 1.0 {
            return Err(Error::config("nongemm.numa_parallelism", "must be at least 1"));
        }

        let mut vit = VitSpec::preset(cfg.get("workload.vit"))?;
        vit.seq_len = cfg.u64("workload.seq_len");
        let gemm_n = cfg.u64("workload.n");
        if gemm_n == 0 {
            return Err(Error::config("workload.n", "must be at least 1"));
        }

        Ok(SystemConfig {
            mode,
            pcie,
            host_mem,
            device_mem,
            iocache,
            llc,
            smmu,
            accel,
            dma_chunk_bytes,
            launch_ns: cfg.u64("host.launch_ns"),
            nongemm,
            workload: cfg.get("workload.kind").parse()?,
            gemm_n,
            vit,
        })
    }

    pub fn residency(&self) -> Residency {
        if self.mode == AccessMode::DevMem {
            Residency::Device
        } else {
            Residency::Host
        }
    }

    pub fn build_workload(&self) -> Result<WorkloadGraph> {
        match self.workload {
            WorkloadKind::Gemm => build_gemm(self.gemm_n, self.residency()),
            WorkloadKind::Vit => build_vit(&self.vit, self.residency()),
        }
    }
}

/// DMA from host memory over PCIe, translated by the SMMU.
struct HostPath<'a> {
    link: LinkTiming,
    packet: u64,
    chunk: u64,
    mode: AccessMode,
    mem: &'a mut MemorySystem,
    smmu: &'a mut Smmu,
}

impl DmaPath for HostPath<'_> {
    fn transfer_ns(&mut self, start: SimTime, _dir: Direction, vaddr: u64, bytes: u64) -> Result<f64> {
        let stall = self
            .smmu
            .translate_burst(start, vaddr, bytes, self.packet, self.mem, self.mode)?;
        let full = bytes / self.chunk;
        let rest = bytes % self.chunk;
        let mut t = 0.0;
        if full > 0 {
            t += full as f64 * self.link.transfer_ns(self.chunk)?;
        }
        if rest > 0 {
            t += self.link.transfer_ns(rest)?;
        }
        Ok(t + stall.0 as f64)
    }
}

/// DMA between the local buffer and device-side DRAM.
struct DevicePath<'a> {
    dev: &'a mut MemoryDevice,
    chunk: u64,
}

impl DmaPath for DevicePath<'_> {
    fn transfer_ns(&mut self, start: SimTime, dir: Direction, vaddr: u64, bytes: u64) -> Result<f64> {
        let t0 = start.0 as f64;
        let mut t = t0;
        let mut off = 0;
        while off < bytes {
            let n = self.chunk.min(bytes - off);
            let req = match dir {
                Direction::HostToDevice => MemRequest::read(vaddr + off, n),
                Direction::DeviceToHost => MemRequest::write(vaddr + off, n),
            };
            t = self.dev.service_exact(t, req)?;
            off += n;
        }
        Ok(t - t0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub total_ns: u64,
    pub gemm_ns: u64,
    pub nongemm_ns: u64,
    /// Launch and completion overheads outside both op classes.
    pub other_ns: u64,
    pub compute_ns: u64,
    pub transfer_ns: u64,
    pub bytes_h2d: u64,
    pub bytes_d2h: u64,
    pub gemm_count: u64,
    pub nongemm_count: u64,
    pub translation: TranslationStats,
    pub config: RunConfig,
}

impl SimReport {
    pub fn translation_report(&self) -> TranslationReport {
        crate::smmu::report(&self.translation, self.total_ns)
    }

    pub fn summary(&self) -> String {
        let tr = self.translation_report();
        format!(
            "total {} ns (gemm {} ns, non-gemm {} ns, other {} ns)\n\
             bytes h2d {} d2h {}\n\
             translation: {} lookups, {} uTLB misses, {} walks, overhead {:.3}%",
            self.total_ns,
            self.gemm_ns,
            self.nongemm_ns,
            self.other_ns,
            self.bytes_h2d,
            self.bytes_d2h,
            tr.utlb_lookups,
            tr.utlb_misses,
            tr.ptw_count,
            tr.overhead_percent
        )
    }
}

/// Runs one configuration to completion.
pub fn simulate(cfg: &RunConfig) -> Result<SimReport> {
    let sys = SystemConfig::from_run(cfg)?;
    let graph = sys.build_workload()?;
    simulate_graph(&sys, &graph, cfg.clone())
}

pub fn simulate_graph(sys: &SystemConfig, graph: &WorkloadGraph, config: RunConfig) -> Result<SimReport> {
    let mut mem = MemorySystem::new(
        sys.mode,
        sys.host_mem.clone(),
        sys.device_mem.clone(),
        sys.iocache.clone(),
        sys.llc.clone(),
    )?;
    let mut smmu = Smmu::new(sys.smmu.clone())?;
    let mut link = sys.pcie.timing(mem.stream_latency_ns(sys.mode) as f64)?;
    link.rate_cap = Some(sys.host_mem.bandwidth_gbps);
    let residency = sys.residency();

    let mut now = SimTime::ZERO;
    let mut rep = SimReport {
        total_ns: 0,
        gemm_ns: 0,
        nongemm_ns: 0,
        other_ns: 0,
        compute_ns: 0,
        transfer_ns: 0,
        bytes_h2d: 0,
        bytes_d2h: 0,
        gemm_count: 0,
        nongemm_count: 0,
        translation: TranslationStats::default(),
        config,
    };

    for op in &graph.ops {
        match &op.kind {
            OpKind::Gemm(g) => {
                now += SimTime(sys.launch_ns);
                rep.other_ns += sys.launch_ns;
                let layout = GemmLayout::packed(g, ARENA_BASE);
                let t: GemmTiming = match sys.mode {
                    AccessMode::DevMem => {
                        let dev = mem.device.as_mut().ok_or_else(|| {
                            Error::config("mem.placement", "mode = devmem requires mem.placement = device")
                        })?;
                        let mut path = DevicePath {
                            dev,
                            chunk: sys.dma_chunk_bytes,
                        };
                        run_gemm(g, &sys.accel, &layout, &mut path, now)?
                    }
                    AccessMode::Dc | AccessMode::Dm => {
                        smmu.map_region(layout.a_base, layout.end(g) - layout.a_base);
                        let mut path = HostPath {
                            link: link.clone(),
                            packet: sys.pcie.packet_payload_bytes as u64,
                            chunk: sys.dma_chunk_bytes,
                            mode: sys.mode,
                            mem: &mut mem,
                            smmu: &mut smmu,
                        };
                        run_gemm(g, &sys.accel, &layout, &mut path, now)?
                    }
                };
                now += t.total;
                rep.gemm_ns += t.total.0;
                rep.compute_ns += t.compute_ns;
                rep.transfer_ns += t.transfer_ns;
                rep.bytes_h2d += t.bytes_h2d();
                rep.bytes_d2h += t.bytes_d2h();
                rep.gemm_count += 1;
            }
            OpKind::NonGemm(n) => {
                let d = nongemm_time(n, residency, &sys.nongemm);
                now += d;
                rep.nongemm_ns += d.0;
                rep.nongemm_count += 1;
            }
        }
    }
    rep.total_ns = now.0;
    rep.translation = smmu.stats.clone();
    debug_assert!(rep.gemm_ns + rep.nongemm_ns <= rep.total_ns);
    Ok(rep)
}
