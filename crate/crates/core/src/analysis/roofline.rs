//! Runtime against per-tile compute time at a fixed link.

use std::fmt;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::system::{simulate, SimReport, SystemConfig};

/// Halving compute must cut total time by more than this for a point to
/// count as compute-bound.
pub const SENSITIVITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    MemoryBound,
    ComputeBound,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::MemoryBound => "memory-bound",
            Region::ComputeBound => "compute-bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RooflinePoint {
    pub compute_scale: f64,
    pub compute_time_ns: f64,
    pub total_ns: u64,
    /// Pure compute time of the whole run.
    pub compute_ns: u64,
    /// Pure transfer time of the whole run.
    pub transfer_ns: u64,
    pub normalized_exec_time: f64,
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roofline {
    pub points: Vec<RooflinePoint>,
    /// Geometric midpoint of the first memory-bound/compute-bound pair.
    pub crossover_ns: Option<f64>,
}

impl Roofline {
    pub fn crossover_report(&self) -> String {
        match self.crossover_ns {
            Some(c) => format!("crossover at {c:.0} ns per tile"),
            None => "no crossover in range".to_string(),
        }
    }
}

/// Per-tile compute time of the configured GEMM workload.
pub fn tile_compute_ns(cfg: &RunConfig) -> Result<f64> {
    let sys = SystemConfig::from_run(cfg)?;
    Ok(sys.accel.tile_compute_ns(sys.gemm_n))
}

/// Scales from `lo` to `hi` inclusive in steps of `sqrt(2)`.
pub fn sqrt2_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut s = lo;
    while s <= hi * (1.0 + 1e-9) {
        v.push(s);
        s *= std::f64::consts::SQRT_2;
    }
    v
}

/// Simulates `base` at every compute scale (and at half of each) and labels
/// the points.
pub fn roofline_sweep(base: &RunConfig, scales: &[f64]) -> Result<Roofline> {
    if scales.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "roofline needs at least 5 compute scales, got {}",
            scales.len()
        )));
    }
    if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::InvalidArgument(format!("compute scale {s} must be positive")));
    }
    let mut scales = scales.to_vec();
    scales.sort_by(f64::total_cmp);
    scales.dedup();

    let mut needed: Vec<f64> = scales.iter().flat_map(|&s| [s, s / 2.0]).collect();
    needed.sort_by(f64::total_cmp);
    needed.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let runs: Vec<(f64, SimReport, f64)> = needed
        .par_iter()
        .map(|&s| {
            let cfg = base.clone().with("accel.compute_scale", &s.to_string())?;
            Ok((s, simulate(&cfg)?, tile_compute_ns(&cfg)?))
        })
        .collect::<Result<_>>()?;
    let find = |s: f64| {
        runs.iter()
            .find(|(x, _, _)| (x - s).abs() <= 1e-12 * s)
            .map(|(_, r, c)| (r, c))
            .expect("every scale and its half were simulated")
    };

    let fastest = scales
        .iter()
        .map(|&s| find(s).0.total_ns)
        .min()
        .expect("at least five scales");
    let points: Vec<RooflinePoint> = scales
        .iter()
        .map(|&s| {
            let (r, c) = find(s);
            let half = find(s / 2.0).0.total_ns as f64;
            let region = if half < (1.0 - SENSITIVITY) * r.total_ns as f64 {
                Region::ComputeBound
            } else {
                Region::MemoryBound
            };
            RooflinePoint {
                compute_scale: s,
                compute_time_ns: *c,
                total_ns: r.total_ns,
                compute_ns: r.compute_ns,
                transfer_ns: r.transfer_ns,
                normalized_exec_time: r.total_ns as f64 / fastest as f64,
                region,
            }
        })
        .collect();
    let crossover_ns = points
        .windows(2)
        .find(|w| w[0].region == Region::MemoryBound && w[1].region == Region::ComputeBound)
        .map(|w| (w[0].compute_time_ns * w[1].compute_time_ns).sqrt());
    Ok(Roofline { points, crossover_ns })
}
