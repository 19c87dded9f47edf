//! Address translation on the accelerator's DMA path.
//!
//! A 32-entry fully associative micro-TLB sits in front of a larger
//! set-associative main TLB; misses in both trigger a page-table walk of
//! `levels` dependent 64-byte reads through the host memory path. Transfers
//! translate once per packet, so every packet after the first in a page hits
//! the micro-TLB. The first translation also fetches the stream table entry
//! and context descriptor.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::memsys::{AccessMode, MemRequest, MemorySystem};
use crate::sim::SimTime;

pub const PAGE_BYTES: u64 = 4096;
const PTE_BYTES: u64 = 8;
const PT_BASE: u64 = 0x80_0000_0000;
const PT_LEVEL_STRIDE: u64 = 1 << 32;
/// Stream table entry, followed by the context descriptor one line later.
const STREAM_TABLE_BASE: u64 = PT_BASE - PAGE_BYTES;
const PHYS_BASE_PPN: u64 = 0x10_0000;

/// Pages needed for the A, B and C operands of an `n x n` int32 GEMM.
pub fn footprint_pages(matrix_n: u64) -> u64 {
    (3 * matrix_n * matrix_n * 4).div_ceil(PAGE_BYTES).max(1)
}

#[derive(Debug, Clone)]
pub struct PageTable {
    pub levels: u32,
    map: HashMap<u64, u64>,
    next_ppn: u64,
}

impl PageTable {
    pub fn new(levels: u32) -> Self {
        PageTable {
            levels: levels.max(1),
            map: HashMap::new(),
            next_ppn: PHYS_BASE_PPN,
        }
    }

    /// Maps every page overlapping `[vbase, vbase + bytes)` not already mapped.
    pub fn map_region(&mut self, vbase: u64, bytes: u64) {
        if bytes == 0 {
            return;
        }
        let first = vbase / PAGE_BYTES;
        let last = (vbase + bytes - 1) / PAGE_BYTES;
        for vpn in first..=last {
            if let std::collections::hash_map::Entry::Vacant(e) = self.map.entry(vpn) {
                e.insert(self.next_ppn);
                self.next_ppn += 1;
            }
        }
    }

    pub fn mapped_pages(&self) -> usize {
        self.map.len()
    }

    pub fn lookup(&self, vaddr: u64) -> Result<u64> {
        let vpn = vaddr / PAGE_BYTES;
        match self.map.get(&vpn) {
            Some(ppn) => Ok(ppn * PAGE_BYTES + vaddr % PAGE_BYTES),
            None => Err(Error::TranslationFault {
                vaddr,
                detail: format!("page {vpn:#x} unmapped ({} pages mapped)", self.map.len()),
            }),
        }
    }

    /// Physical address of the level-`level` entry for `vpn`, level 0 being
    /// the root. Each level indexes 9 bits of the page number.
    pub fn pte_address(&self, vpn: u64, level: u32) -> u64 {
        let shift = 9 * (self.levels - 1 - level);
        PT_BASE + level as u64 * PT_LEVEL_STRIDE + (vpn >> shift) * PTE_BYTES
    }
}

/// Set-associative LRU TLB over virtual page numbers.
#[derive(Debug, Clone)]
pub struct Tlb {
    ways: usize,
    sets: Vec<Vec<u64>>,
}

impl Tlb {
    pub fn new(entries: u32, ways: u32) -> Result<Self> {
        if entries == 0 || ways == 0 || !entries.is_multiple_of(ways) {
            return Err(Error::config(
                "smmu.tlb_entries",
                format!("{entries} entries not divisible into {ways} ways"),
            ));
        }
        Ok(Tlb {
            ways: ways as usize,
            sets: vec![Vec::new(); (entries / ways) as usize],
        })
    }

    pub fn fully_associative(entries: u32) -> Result<Self> {
        Self::new(entries, entries)
    }

    /// True on hit; always leaves `vpn` most recently used.
    pub fn access(&mut self, vpn: u64) -> bool {
        let n = self.sets.len() as u64;
        let s = &mut self.sets[(vpn % n) as usize];
        if let Some(pos) = s.iter().position(|&v| v == vpn) {
            s.remove(pos);
            s.insert(0, vpn);
            true
        } else {
            if s.len() == self.ways {
                s.pop();
            }
            s.insert(0, vpn);
            false
        }
    }

    pub fn flush(&mut self) {
        self.sets.iter_mut().for_each(Vec::clear);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmmuConfig {
    pub enabled: bool,
    pub utlb_entries: u32,
    pub tlb_entries: u32,
    pub tlb_ways: u32,
    pub levels: u32,
    pub utlb_hit_ns: u64,
    pub tlb_hit_ns: u64,
}

impl Default for SmmuConfig {
    fn default() -> Self {
        SmmuConfig {
            enabled: true,
            utlb_entries: 32,
            tlb_entries: 4096,
            tlb_ways: 8,
            levels: 3,
            utlb_hit_ns: 1,
            tlb_hit_ns: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationStats {
    pub footprint_pages: u64,
    pub translation_count: u64,
    pub translation_ns: u64,
    pub ptw_count: u64,
    pub ptw_ns: u64,
    pub utlb_lookups: u64,
    pub utlb_misses: u64,
}

impl TranslationStats {
    pub fn translation_mean_cycles(&self) -> f64 {
        mean(self.translation_ns, self.translation_count)
    }

    pub fn ptw_mean_cycles(&self) -> f64 {
        mean(self.ptw_ns, self.ptw_count)
    }

    pub fn overhead_percent(&self, total_ns: u64) -> f64 {
        if total_ns == 0 {
            0.0
        } else {
            self.translation_ns as f64 / total_ns as f64 * 100.0
        }
    }
}

fn mean(sum: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// The eight per-run metrics of the translation table.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReport {
    pub footprint_pages: u64,
    pub translation_count: u64,
    pub translation_mean_cycles: f64,
    pub ptw_count: u64,
    pub ptw_mean_cycles: f64,
    pub utlb_lookups: u64,
    pub utlb_misses: u64,
    pub overhead_percent: f64,
}

impl TranslationReport {
    pub const COLUMNS: [&'static str; 8] = [
        "Memory Footprint (Pages)",
        "Translation Times",
        "Trans Mean Time",
        "PTW Times",
        "PTW Mean Time",
        "uTLB Lookup times",
        "uTLB Misses times",
        "Trans Overhead",
    ];

    pub fn values(&self) -> [String; 8] {
        [
            self.footprint_pages.to_string(),
            self.translation_count.to_string(),
            format!("{:.6}", self.translation_mean_cycles),
            self.ptw_count.to_string(),
            format!("{:.6}", self.ptw_mean_cycles),
            self.utlb_lookups.to_string(),
            self.utlb_misses.to_string(),
            format!("{:.4}", self.overhead_percent),
        ]
    }
}

pub fn report(stats: &TranslationStats, total_ns: u64) -> TranslationReport {
    TranslationReport {
        footprint_pages: stats.footprint_pages,
        translation_count: stats.translation_count,
        translation_mean_cycles: stats.translation_mean_cycles(),
        ptw_count: stats.ptw_count,
        ptw_mean_cycles: stats.ptw_mean_cycles(),
        utlb_lookups: stats.utlb_lookups,
        utlb_misses: stats.utlb_misses,
        overhead_percent: stats.overhead_percent(total_ns),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Translation {
    pub paddr: u64,
    pub stall: SimTime,
}

#[derive(Debug, Clone)]
pub struct Smmu {
    pub config: SmmuConfig,
    pub page_table: PageTable,
    utlb: Tlb,
    tlb: Tlb,
    configured: bool,
    pub stats: TranslationStats,
}

impl Smmu {
    pub fn new(config: SmmuConfig) -> Result<Self> {
        if config.utlb_entries == 0 {
            return Err(Error::config("smmu.utlb_entries", "must be at least 1"));
        }
        if !(1..=5).contains(&config.levels) {
            return Err(Error::config("smmu.levels", "must be in 1..=5"));
        }
        Ok(Smmu {
            utlb: Tlb::fully_associative(config.utlb_entries)?,
            tlb: Tlb::new(config.tlb_entries, config.tlb_ways.min(config.tlb_entries))?,
            page_table: PageTable::new(config.levels),
            configured: false,
            config,
            stats: TranslationStats::default(),
        })
    }

    /// Maps a buffer and counts it toward the footprint.
    pub fn map_region(&mut self, vbase: u64, bytes: u64) {
        self.page_table.map_region(vbase, bytes);
        self.stats.footprint_pages = self.page_table.mapped_pages() as u64;
    }

    /// Translates `vaddr` at time `now`, walking through `mem` on a miss.
    pub fn translate(
        &mut self,
        now: SimTime,
        vaddr: u64,
        mem: &mut MemorySystem,
        mode: AccessMode,
    ) -> Result<Translation> {
        let paddr = self.page_table.lookup(vaddr)?;
        if !self.config.enabled {
            return Ok(Translation {
                paddr,
                stall: SimTime::ZERO,
            });
        }
        let vpn = vaddr / PAGE_BYTES;
        let mut stall = 0;
        if !self.configured {
            stall += self.fetch_context(now, mem, mode)?;
            self.configured = true;
        }
        stall += self.config.utlb_hit_ns;
        self.stats.utlb_lookups += 1;
        if !self.utlb.access(vpn) {
            self.stats.utlb_misses += 1;
            stall += self.config.tlb_hit_ns;
            if !self.tlb.access(vpn) {
                let start = now + SimTime(stall);
                let walk = self.walk(start, vpn, mem, mode)?;
                self.stats.ptw_count += 1;
                self.stats.ptw_ns += walk;
                stall += walk;
            }
        }
        self.stats.translation_count += 1;
        self.stats.translation_ns += stall;
        Ok(Translation {
            paddr,
            stall: SimTime(stall),
        })
    }

    fn fetch_context(&mut self, start: SimTime, mem: &mut MemorySystem, mode: AccessMode) -> Result<u64> {
        let path = if mode == AccessMode::DevMem { AccessMode::Dc } else { mode };
        let mut t = start;
        for line in 0..2 {
            t = mem.access_as(t, MemRequest::read(STREAM_TABLE_BASE + 64 * line, 64), path)?;
        }
        Ok((t - start).0)
    }

    fn walk(&mut self, start: SimTime, vpn: u64, mem: &mut MemorySystem, mode: AccessMode) -> Result<u64> {
        let path = if mode == AccessMode::DevMem { AccessMode::Dc } else { mode };
        let mut t = start;
        for level in 0..self.page_table.levels {
            let pte = self.page_table.pte_address(vpn, level);
            t = mem.access_as(t, MemRequest::read(pte - pte % 64, 64), path)?;
        }
        Ok((t - start).0)
    }

    /// Translates every packet of a burst `[vaddr, vaddr + bytes)` and returns
    /// the summed stall. Only the first packet in each page can miss.
    pub fn translate_burst(
        &mut self,
        now: SimTime,
        vaddr: u64,
        bytes: u64,
        packet_bytes: u64,
        mem: &mut MemorySystem,
        mode: AccessMode,
    ) -> Result<SimTime> {
        if bytes == 0 {
            return Ok(SimTime::ZERO);
        }
        let packet_bytes = packet_bytes.max(1);
        let end = vaddr + bytes;
        let mut stall = SimTime::ZERO;
        let mut page_start = vaddr;
        while page_start < end {
            let page_end = ((page_start / PAGE_BYTES + 1) * PAGE_BYTES).min(end);
            let first = self.translate(now + stall, page_start, mem, mode)?;
            stall += first.stall;
            // Packets starting inside this page beyond the first.
            let off0 = page_start - vaddr;
            let off1 = page_end - vaddr;
            let packets = off1.div_ceil(packet_bytes) - off0.div_ceil(packet_bytes);
            let extra = packets.saturating_sub(if off0.is_multiple_of(packet_bytes) { 1 } else { 0 });
            if extra > 0 && self.config.enabled {
                self.page_table.lookup(page_end - 1)?;
                let hit = self.config.utlb_hit_ns * extra;
                self.stats.utlb_lookups += extra;
                self.stats.translation_count += extra;
                self.stats.translation_ns += hit;
                stall += SimTime(hit);
            }
            page_start = page_end;
        }
        Ok(stall)
    }

    pub fn report(&self, total_ns: u64) -> TranslationReport {
        report(&self.stats, total_ns)
    }
}
