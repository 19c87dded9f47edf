//! Flat `key = value` run configuration.
//!
//! Every key has a default in the embedded `defaults.cfg`. Parsing starts from
//! those defaults and applies the lines of the given text, rejecting unknown
//! keys and values of the wrong type. Values are kept as written so that an
//! echoed config re-parses to the same map.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULTS: &str = include_str!("../defaults.cfg");

#[derive(Debug, Clone, Copy)]
enum Kind {
    Uint,
    Float,
    Bool,
    Choice(&'static [&'static str]),
    /// A number, or `preset` to take the value from `mem.preset`.
    FloatOrPreset,
}

const SCHEMA: &[(&str, Kind)] = &[
    ("accel.block_rows", Kind::Uint),
    ("accel.buffer_bytes", Kind::Uint),
    ("accel.cols", Kind::Uint),
    ("accel.compute_scale", Kind::Float),
    ("accel.dma_chunk_bytes", Kind::Uint),
    ("accel.fill_cycles", Kind::Uint),
    ("accel.rows", Kind::Uint),
    ("cache.iocache_bytes", Kind::Uint),
    ("cache.iocache_latency_ns", Kind::Uint),
    ("cache.llc_bytes", Kind::Uint),
    ("host.launch_ns", Kind::Uint),
    ("mem.bandwidth_gbps", Kind::FloatOrPreset),
    ("mem.latency_ns", Kind::FloatOrPreset),
    ("mem.placement", Kind::Choice(&["host", "device"])),
    ("mem.preset", Kind::Choice(&["ddr3", "ddr4", "ddr5", "hbm2", "gddr6", "custom"])),
    ("mode", Kind::Choice(&["dc", "dm", "devmem"])),
    ("nongemm.gelu_ns", Kind::Float),
    ("nongemm.layernorm_ns", Kind::Float),
    ("nongemm.numa_parallelism", Kind::Float),
    ("nongemm.residual_ns", Kind::Float),
    ("nongemm.softmax_ns", Kind::Float),
    ("pcie.header_bytes", Kind::Uint),
    ("pcie.lane_rate_gbps", Kind::Float),
    ("pcie.lanes", Kind::Uint),
    ("pcie.packet_bytes", Kind::Uint),
    ("pcie.rc_latency_ns", Kind::Uint),
    ("pcie.switch_latency_ns", Kind::Uint),
    ("pcie.turnaround_ns", Kind::Uint),
    ("pcie.window_bytes", Kind::Uint),
    ("smmu.enabled", Kind::Bool),
    ("smmu.levels", Kind::Uint),
    ("smmu.tlb_entries", Kind::Uint),
    ("smmu.utlb_entries", Kind::Uint),
    ("workload.kind", Kind::Choice(&["gemm", "vit"])),
    ("workload.n", Kind::Uint),
    ("workload.seq_len", Kind::Uint),
    ("workload.vit", Kind::Choice(&["base", "large", "huge"])),
];

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|(_, t)| *t)
}

fn check(key: &str, value: &str) -> Result<()> {
    let kind = kind_of(key).ok_or_else(|| Error::config(key, "unknown configuration key"))?;
    let bad = |what: &str| Error::config(key, format!("expected {what}, got '{value}'"));
    match kind {
        Kind::Uint => {
            value.parse::<u64>().map_err(|_| bad("a non-negative integer"))?;
        }
        Kind::Float => {
            let v: f64 = value.parse().map_err(|_| bad("a number"))?;
            if !v.is_finite() {
                return Err(bad("a finite number"));
            }
        }
        Kind::FloatOrPreset => {
            if value != "preset" {
                let v: f64 = value.parse().map_err(|_| bad("a number or 'preset'"))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad("a positive number"));
                }
            }
        }
        Kind::Bool => {
            value.parse::<bool>().map_err(|_| bad("true or false"))?;
        }
        Kind::Choice(opts) => {
            if !opts.contains(&value) {
                return Err(bad(&format!("one of {}", opts.join("|"))));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            values: BTreeMap::new(),
        };
        cfg.apply_text(DEFAULTS).expect("embedded defaults are valid");
        assert_eq!(cfg.values.len(), SCHEMA.len(), "defaults must cover every key");
        cfg
    }
}

impl RunConfig {
    /// Defaults overridden by the lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected 'key = value', got '{line}'"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            self.set(k, v).map_err(|e| match e {
                Error::Config { key, reason } => Error::Parse {
                    line: i + 1,
                    reason: format!("{key}: {reason}"),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        check(key, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn is_known_key(key: &str) -> bool {
        kind_of(key).is_some()
    }

    /// All keys in lexicographic order.
    pub fn keys() -> impl Iterator<Item = &'static str> {
        SCHEMA.iter().map(|(k, _)| *k)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unknown configuration key {key}"))
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated on set")
    }

    pub fn u32(&self, key: &str) -> Result<u32> {
        u32::try_from(self.u64(key)).map_err(|_| Error::config(key, "value out of range"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated on set")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).parse().expect("validated on set")
    }

    /// `None` when the key is set to `preset`.
    pub fn f64_or_preset(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            "preset" => None,
            v => Some(v.parse().expect("validated on set")),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text form; parses back to an equal config.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        self.set(key, value)?;
        Ok(self)
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.echo())
    }
}
