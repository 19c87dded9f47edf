//! Cartesian sweeps over configuration keys, written as CSV.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::smmu::TranslationReport;
use crate::system::{simulate, SimReport};

pub const DEFAULT_CAP: usize = 10_000;

/// One swept key and its values, in the order given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    pub fn new(key: &str, values: &[&str]) -> Self {
        Axis {
            key: key.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// Parses `key=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (key, vals) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("axis '{s}' is not key=v1,v2,...")))?;
        let values: Vec<String> = vals
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        Ok(Axis {
            key: key.trim().to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub cap: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            cap: DEFAULT_CAP,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub run_id: usize,
    pub config: RunConfig,
    pub report: SimReport,
    /// Total time over the fastest row of the sweep.
    pub normalized_exec_time: f64,
}

/// Every point of the product, first axis varying slowest.
pub fn expand(base: &RunConfig, axes: &[Axis], cap: usize) -> Result<Vec<RunConfig>> {
    let mut count: usize = 1;
    for (i, a) in axes.iter().enumerate() {
        if !RunConfig::is_known_key(&a.key) {
            return Err(Error::config(&a.key, "unknown configuration key"));
        }
        if axes[..i].iter().any(|b| b.key == a.key) {
            return Err(Error::config(&a.key, "axis given more than once"));
        }
        if a.values.is_empty() {
            return Err(Error::config(&a.key, "axis has no values"));
        }
        count = count
            .checked_mul(a.values.len())
            .filter(|c| *c <= cap)
            .ok_or_else(|| Error::InvalidArgument(format!("sweep exceeds the cap of {cap} runs")))?;
    }
    let mut points = vec![base.clone()];
    for a in axes {
        let mut next = Vec::with_capacity(points.len() * a.values.len());
        for p in &points {
            for v in &a.values {
                next.push(p.clone().with(&a.key, v)?);
            }
        }
        points = next;
    }
    Ok(points)
}

pub fn sweep(base: &RunConfig, axes: &[Axis], opts: SweepOptions) -> Result<Vec<SweepRow>> {
    let points = expand(base, axes, opts.cap)?;
    let run = || -> Result<Vec<SimReport>> { points.par_iter().map(simulate).collect() };
    let reports = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let fastest = reports.iter().map(|r| r.total_ns).min().unwrap_or(0).max(1);
    Ok(points
        .into_iter()
        .zip(reports)
        .enumerate()
        .map(|(run_id, (config, report))| SweepRow {
            run_id,
            normalized_exec_time: report.total_ns as f64 / fastest as f64,
            config,
            report,
        })
        .collect())
}

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["run_id".to_string()];
    h.extend(RunConfig::keys().map(str::to_string));
    h.extend(["total_ns", "gemm_ns", "nongemm_ns", "bytes_h2d", "bytes_d2h"].map(String::from));
    h.extend(TranslationReport::COLUMNS.map(String::from));
    h.push("normalized_exec_time".to_string());
    h
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for row in rows {
        let r = &row.report;
        let mut rec = vec![row.run_id.to_string()];
        rec.extend(row.config.iter().map(|(_, v)| v.to_string()));
        rec.extend([r.total_ns, r.gemm_ns, r.nongemm_ns, r.bytes_h2d, r.bytes_d2h].map(|x| x.to_string()));
        rec.extend(r.translation_report().values());
        rec.push(format!("{:.6}", row.normalized_exec_time));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}
