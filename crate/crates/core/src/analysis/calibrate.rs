//! Coordinate-descent fitting of model constants against target bands.
//!
//! Each target maps a configuration to a scalar and carries an acceptance
//! band. The residual of a target is zero inside the band and otherwise the
//! distance to the nearest edge divided by the band width. The search
//! minimizes the largest residual, breaking ties on the sum.

use std::fmt;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::figures::{packet_sweep, roofline, translation_table, PACKET_SIZES};

/// A tunable constant and its search range.
#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub integer: bool,
}

pub const PARAMS: [Param; 8] = [
    Param { key: "pcie.header_bytes", lo: 12.0, hi: 64.0, integer: true },
    Param { key: "pcie.window_bytes", lo: 1024.0, hi: 16384.0, integer: true },
    Param { key: "pcie.turnaround_ns", lo: 0.0, hi: 1000.0, integer: true },
    Param { key: "cache.iocache_latency_ns", lo: 5.0, hi: 200.0, integer: true },
    Param { key: "nongemm.softmax_ns", lo: 0.1, hi: 10.0, integer: false },
    Param { key: "nongemm.layernorm_ns", lo: 0.1, hi: 10.0, integer: false },
    Param { key: "nongemm.gelu_ns", lo: 0.1, hi: 10.0, integer: false },
    Param { key: "nongemm.numa_parallelism", lo: 1.0, hi: 128.0, integer: false },
];

type Metric = Box<dyn Fn(&RunConfig) -> Result<f64> + Send + Sync>;

pub struct Target {
    pub name: String,
    pub goal: f64,
    pub lo: f64,
    pub hi: f64,
    pub metric: Metric,
}

impl Target {
    pub fn new(
        name: &str,
        goal: f64,
        lo: f64,
        hi: f64,
        metric: impl Fn(&RunConfig) -> Result<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lo <= goal && goal <= hi) {
            return Err(Error::InvalidArgument(format!("target {name}: goal outside [{lo}, {hi}]")));
        }
        Ok(Target {
            name: name.to_string(),
            goal,
            lo,
            hi,
            metric: Box::new(metric),
        })
    }

    pub fn residual(&self, value: f64) -> f64 {
        let width = (self.hi - self.lo).max(self.goal.abs() * 0.05).max(1e-12);
        if value.is_nan() {
            f64::INFINITY
        } else if value < self.lo {
            (self.lo - value) / width
        } else if value > self.hi {
            (value - self.hi) / width
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub goal: f64,
    pub lo: f64,
    pub hi: f64,
    pub residual: f64,
}

impl Residual {
    pub fn passed(&self) -> bool {
        self.residual == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub config: RunConfig,
    pub residuals: Vec<Residual>,
    pub evaluations: usize,
}

impl Calibration {
    pub fn failing(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| !r.passed())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    /// `key = value` lines for the tuned constants.
    pub fn constants_file(&self, params: &[Param]) -> String {
        let mut s = String::from("# fitted by accesim calibrate\n");
        for p in params {
            s.push_str(&format!("{} = {}\n", p.key, self.config.get(p.key)));
        }
        s
    }
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<32}{:>12}{:>12}{:>22}{:>10}", "target", "value", "goal", "band", "residual")?;
        for r in &self.residuals {
            writeln!(
                f,
                "{:<32}{:>12.4}{:>12.4}{:>22}{:>10.3}{}",
                r.name,
                r.value,
                r.goal,
                format!("[{:.4}, {:.4}]", r.lo, r.hi),
                r.residual,
                if r.passed() { "" } else { "  FAIL" }
            )?;
        }
        Ok(())
    }
}

fn evaluate(cfg: &RunConfig, targets: &[Target]) -> Result<Vec<Residual>> {
    targets
        .iter()
        .map(|t| {
            let value = (t.metric)(cfg)?;
            Ok(Residual {
                name: t.name.clone(),
                value,
                goal: t.goal,
                lo: t.lo,
                hi: t.hi,
                residual: t.residual(value),
            })
        })
        .collect()
}

fn score(r: &[Residual]) -> (f64, f64) {
    let max = r.iter().map(|x| x.residual).fold(0.0, f64::max);
    (max, r.iter().map(|x| x.residual).sum())
}

fn candidates(p: &Param, current: f64) -> Vec<String> {
    let mut out = Vec::new();
    for f in [0.25, 0.5, 0.8, 1.25, 2.0, 4.0] {
        let mut v = if current == 0.0 { p.lo + (p.hi - p.lo) * (f - 0.5) / 4.0 } else { current * f };
        v = v.clamp(p.lo, p.hi);
        if p.integer {
            v = v.round();
        }
        let s = if p.integer { format!("{}", v as u64) } else { format!("{v}") };
        if v != current && !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Runs up to `rounds` passes of coordinate descent over `params`.
pub fn calibrate(base: &RunConfig, params: &[Param], targets: &[Target], rounds: usize) -> Result<Calibration> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("calibration needs at least one target".into()));
    }
    for p in params {
        if !RunConfig::is_known_key(p.key) {
            return Err(Error::config(p.key, "unknown configuration key"));
        }
    }
    let mut cfg = base.clone();
    let mut best = evaluate(&cfg, targets)?;
    let mut evaluations = 1;
    for _ in 0..rounds {
        if score(&best).0 == 0.0 {
            break;
        }
        let mut improved = false;
        for p in params {
            let current = cfg.f64(p.key);
            let mut pick = None;
            for v in candidates(p, current) {
                let trial = cfg.clone().with(p.key, &v)?;
                let Ok(r) = evaluate(&trial, targets) else { continue };
                evaluations += 1;
                let bar = pick.as_ref().map_or(&best, |(_, b)| b);
                if score(&r) < score(bar) {
                    pick = Some((trial, r));
                }
            }
            if let Some((trial, r)) = pick {
                cfg = trial;
                best = r;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(Calibration {
        config: cfg,
        residuals: best,
        evaluations,
    })
}

/// Packet size with the lowest total time at the given link.
pub fn best_packet(cfg: &RunConfig, gbytes: u32) -> Result<f64> {
    let rows = packet_sweep(cfg, gbytes)?;
    let best = rows.iter().min_by_key(|r| r.report.total_ns).expect("non-empty sweep");
    Ok(best.config.u64("pcie.packet_bytes") as f64)
}

/// Relative slowdown of `packet` against the best packet size at 8 GB/s.
pub fn packet_penalty(cfg: &RunConfig, packet: u32) -> Result<f64> {
    let rows = packet_sweep(cfg, 8)?;
    let best = rows.iter().map(|r| r.report.total_ns).min().unwrap_or(1) as f64;
    let i = PACKET_SIZES.iter().position(|p| *p == packet).ok_or_else(|| {
        Error::InvalidArgument(format!("packet size {packet} not in sweep"))
    })?;
    Ok(rows[i].report.total_ns as f64 / best - 1.0)
}

/// Targets covering the transfer-path constants. They are cheap enough for
/// repeated evaluation; the transformer targets are left to the figures.
pub fn default_targets() -> Result<Vec<Target>> {
    Ok(vec![
        Target::new("log2 best packet at 8 GB/s", 8.0, 8.0, 8.0, |c| Ok(best_packet(c, 8)?.log2()))?,
        Target::new("64 B penalty at 8 GB/s", 0.12, 0.06, 0.18, |c| packet_penalty(c, 64))?,
        Target::new("4096 B penalty at 8 GB/s", 0.36, 0.21, 0.51, |c| packet_penalty(c, 4096))?,
        Target::new("roofline crossover ns", 1500.0, 750.0, 2250.0, |c| {
            roofline(c, true)?.crossover_ns.ok_or_else(|| Error::InvalidArgument("no crossover".into()))
        })?,
        Target::new("translation overhead n=2048 %", 6.49, 3.0, 10.0, |c| {
            let rows = translation_table(c, &[2048])?;
            Ok(rows[0].report.translation.overhead_percent(rows[0].report.total_ns))
        })?,
    ])
}
