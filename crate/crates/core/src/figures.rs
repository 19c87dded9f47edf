//! Canned experiment recipes, addressed by figure name. Each recipe starts
//! from a base configuration (normally the calibrated defaults) and overlays
//! the workload and system keys it needs.

use rayon::prelude::*;

use crate::analysis::mix::{devmem_threshold, gemm_fraction, mix_curve, MixModel, Threshold};
use crate::analysis::roofline::{roofline_sweep, sqrt2_grid, Roofline};
use crate::analysis::sweep::{sweep, Axis, SweepOptions, SweepRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::smmu::TranslationReport;
use crate::system::{simulate, SimReport};

pub const FIGURES: [&str; 9] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "table5"];

/// A two-column series for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    /// Whitespace-separated `x y` lines under a comment header.
    pub fn to_plot_data(&self, x_label: &str, y_label: &str) -> String {
        let mut s = format!("# {x_label} {y_label}\n");
        for (x, y) in &self.points {
            s.push_str(&format!("{x} {y:.6}\n"));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    /// Every simulation the recipe ran, for the CSV.
    pub rows: Vec<SweepRow>,
    pub series: Vec<Series>,
    pub summary: Vec<String>,
}

/// Link presets named by their nominal bandwidth.
pub fn link(gbytes: u32) -> Result<[(&'static str, &'static str); 2]> {
    Ok(match gbytes {
        1 => [("pcie.lanes", "2"), ("pcie.lane_rate_gbps", "4")],
        2 => [("pcie.lanes", "4"), ("pcie.lane_rate_gbps", "4")],
        4 => [("pcie.lanes", "4"), ("pcie.lane_rate_gbps", "8")],
        8 => [("pcie.lanes", "8"), ("pcie.lane_rate_gbps", "8")],
        16 => [("pcie.lanes", "8"), ("pcie.lane_rate_gbps", "16")],
        32 => [("pcie.lanes", "16"), ("pcie.lane_rate_gbps", "16")],
        64 => [("pcie.lanes", "16"), ("pcie.lane_rate_gbps", "32")],
        _ => return Err(Error::InvalidArgument(format!("no link preset for {gbytes} GB/s"))),
    })
}

fn overlay(base: &RunConfig, kv: &[(&str, &str)]) -> Result<RunConfig> {
    let mut c = base.clone();
    for (k, v) in kv {
        c.set(k, v)?;
    }
    Ok(c)
}

fn with_link(base: &RunConfig, gbytes: u32, kv: &[(&str, &str)]) -> Result<RunConfig> {
    overlay(&overlay(base, &link(gbytes)?)?, kv)
}

/// Simulates every config, keeping input order, and wraps them as rows
/// normalized to the fastest.
pub fn run_all(configs: Vec<RunConfig>) -> Result<Vec<SweepRow>> {
    let reports: Vec<SimReport> = configs.par_iter().map(simulate).collect::<Result<_>>()?;
    let fastest = reports.iter().map(|r| r.total_ns).min().unwrap_or(1).max(1);
    Ok(configs
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

// Roofline ------------------------------------------------------------------

pub fn roofline(base: &RunConfig, quick: bool) -> Result<Roofline> {
    let cfg = with_link(base, 8, &[("workload.kind", "gemm"), ("workload.n", "1024")])?;
    let grid = if quick { sqrt2_grid(0.25, 8.0) } else { sqrt2_grid(0.125, 16.0) };
    roofline_sweep(&cfg, &grid)
}

fn fig2(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let r = roofline(base, quick)?;
    let cfg = with_link(base, 8, &[("workload.n", "1024")])?;
    let rows = run_all(
        r.points
            .iter()
            .map(|p| cfg.clone().with("accel.compute_scale", &p.compute_scale.to_string()))
            .collect::<Result<_>>()?,
    )?;
    let mut summary: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("compute {:.0} ns: {:.3} ({})", p.compute_time_ns, p.normalized_exec_time, p.region))
        .collect();
    summary.push(r.crossover_report());
    Ok(FigureOutput {
        name: "fig2".into(),
        x_label: "compute_ns".into(),
        y_label: "normalized_exec_time".into(),
        rows,
        series: vec![Series {
            label: "gemm1024_8GBps".into(),
            points: r.points.iter().map(|p| (p.compute_time_ns, p.normalized_exec_time)).collect(),
        }],
        summary,
    })
}

// Link bandwidth -------------------------------------------------------------

pub const FIG3_LANES: [u32; 4] = [2, 4, 8, 16];
pub const FIG3_RATES: [u32; 6] = [2, 4, 8, 16, 32, 64];

pub fn bandwidth_grid(base: &RunConfig, quick: bool) -> Result<Vec<SweepRow>> {
    let cfg = overlay(base, &[("workload.kind", "gemm"), ("workload.n", "2048")])?;
    let (lanes, rates): (Vec<u32>, Vec<u32>) = if quick {
        (vec![2, 16], vec![2, 16, 64])
    } else {
        (FIG3_LANES.to_vec(), FIG3_RATES.to_vec())
    };
    let s = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>();
    let axes = [
        Axis {
            key: "pcie.lanes".into(),
            values: s(&lanes),
        },
        Axis {
            key: "pcie.lane_rate_gbps".into(),
            values: s(&rates),
        },
    ];
    sweep(&cfg, &axes, SweepOptions::default())
}

pub fn link_gbytes(cfg: &RunConfig) -> f64 {
    cfg.u64("pcie.lanes") as f64 * cfg.f64("pcie.lane_rate_gbps") / 8.0
}

fn fig3(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let rows = bandwidth_grid(base, quick)?;
    let mut series = Vec::new();
    for lanes in FIG3_LANES {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.config.u64("pcie.lanes") == lanes as u64)
            .map(|r| (link_gbytes(&r.config), r.normalized_exec_time))
            .collect();
        if !points.is_empty() {
            series.push(Series {
                label: format!("lanes{lanes}"),
                points,
            });
        }
    }
    let max = rows.iter().map(|r| r.normalized_exec_time).fold(0.0, f64::max);
    Ok(FigureOutput {
        name: "fig3".into(),
        x_label: "link_GBps".into(),
        y_label: "normalized_exec_time".into(),
        rows,
        series,
        summary: vec![format!("slowest/fastest = {max:.2}x")],
    })
}

// Packet size -----------------------------------------------------------------

pub const PACKET_SIZES: [u32; 7] = [64, 128, 256, 512, 1024, 2048, 4096];

/// Total time per packet size for GEMM-1024 at the given link.
pub fn packet_sweep(base: &RunConfig, gbytes: u32) -> Result<Vec<SweepRow>> {
    let cfg = with_link(base, gbytes, &[("workload.kind", "gemm"), ("workload.n", "1024")])?;
    let values = PACKET_SIZES.iter().map(u32::to_string).collect();
    sweep(
        &cfg,
        &[Axis {
            key: "pcie.packet_bytes".into(),
            values,
        }],
        SweepOptions::default(),
    )
}

fn fig4(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let bws: &[u32] = if quick { &[8] } else { &[4, 8, 16, 32, 64] };
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut summary = Vec::new();
    for &bw in bws {
        let r = packet_sweep(base, bw)?;
        let best = r.iter().map(|x| x.report.total_ns).min().unwrap_or(1) as f64;
        let pts: Vec<(f64, f64)> = r
            .iter()
            .map(|x| (x.config.u64("pcie.packet_bytes") as f64, x.report.total_ns as f64 / best))
            .collect();
        let argmin = pts.iter().find(|p| p.1 == 1.0).map_or(0.0, |p| p.0);
        summary.push(format!(
            "{bw} GB/s: best {argmin} B, 64 B +{:.1}%, 4096 B +{:.1}%",
            (pts[0].1 - 1.0) * 100.0,
            (pts[pts.len() - 1].1 - 1.0) * 100.0
        ));
        series.push(Series {
            label: format!("{bw}GBps"),
            points: pts,
        });
        rows.extend(r);
    }
    renumber(&mut rows);
    Ok(FigureOutput {
        name: "fig4".into(),
        x_label: "packet_bytes".into(),
        y_label: "time_over_best".into(),
        rows,
        series,
        summary,
    })
}

fn renumber(rows: &mut [SweepRow]) {
    let fastest = rows.iter().map(|r| r.report.total_ns).min().unwrap_or(1).max(1) as f64;
    for (i, r) in rows.iter_mut().enumerate() {
        r.run_id = i;
        r.normalized_exec_time = r.report.total_ns as f64 / fastest;
    }
}

// Memory type and location ------------------------------------------------------

pub const PRESETS: [&str; 5] = ["ddr3", "ddr4", "ddr5", "hbm2", "gddr6"];

#[derive(Debug, Clone)]
pub struct LocationResult {
    pub preset: &'static str,
    pub host_2: SimReport,
    pub host_64: SimReport,
    pub devmem: SimReport,
}

impl LocationResult {
    /// DevMem speedup over the slowest of the three configurations.
    pub fn devmem_speedup(&self) -> f64 {
        let slowest = self.host_2.total_ns.max(self.host_64.total_ns);
        slowest as f64 / self.devmem.total_ns as f64
    }

    /// Host at 64 GB/s as a fraction of DevMem performance.
    pub fn host64_fraction(&self) -> f64 {
        self.devmem.total_ns as f64 / self.host_64.total_ns as f64
    }
}

pub fn memory_location(base: &RunConfig, presets: &[&'static str]) -> Result<Vec<LocationResult>> {
    let mut configs = Vec::new();
    for p in presets {
        let w = [("workload.kind", "gemm"), ("workload.n", "1024"), ("mem.preset", *p)];
        configs.push(with_link(base, 2, &w)?);
        configs.push(with_link(base, 64, &w)?);
        configs.push(with_link(
            base,
            2,
            &[w[0], w[1], w[2], ("mode", "devmem"), ("mem.placement", "device")],
        )?);
    }
    let reps: Vec<SimReport> = configs.par_iter().map(simulate).collect::<Result<_>>()?;
    Ok(presets
        .iter()
        .zip(reps.chunks(3))
        .map(|(p, r)| LocationResult {
            preset: p,
            host_2: r[0].clone(),
            host_64: r[1].clone(),
            devmem: r[2].clone(),
        })
        .collect())
}

fn fig5(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let presets: &[&'static str] = if quick { &["ddr4", "hbm2"] } else { &PRESETS };
    let res = memory_location(base, presets)?;
    let reference = res
        .iter()
        .find(|r| r.preset == "ddr4")
        .map(|r| r.devmem.total_ns)
        .unwrap_or(res[0].devmem.total_ns) as f64;
    let mut series = Vec::new();
    for (label, pick) in [
        ("host_2GBps", 0usize),
        ("host_64GBps", 1),
        ("devmem", 2),
    ] {
        series.push(Series {
            label: label.into(),
            points: res
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let t = [&r.host_2, &r.host_64, &r.devmem][pick].total_ns as f64;
                    (i as f64, reference / t)
                })
                .collect(),
        });
    }
    let summary = res
        .iter()
        .map(|r| {
            format!(
                "{}: devmem speedup {:.2}x over slowest, host@64 at {:.0}% of devmem",
                r.preset,
                r.devmem_speedup(),
                r.host64_fraction() * 100.0
            )
        })
        .collect();
    let mut rows = Vec::new();
    for r in &res {
        for rep in [&r.host_2, &r.host_64, &r.devmem] {
            rows.push(SweepRow {
                run_id: 0,
                config: rep.config.clone(),
                report: rep.clone(),
                normalized_exec_time: 0.0,
            });
        }
    }
    renumber(&mut rows);
    Ok(FigureOutput {
        name: "fig5".into(),
        x_label: "preset_index".into(),
        y_label: "speedup_vs_ddr4_devmem".into(),
        rows,
        series,
        summary,
    })
}

// Device memory bandwidth and latency -------------------------------------------

pub const FIG6_BANDWIDTHS: [u32; 8] = [8, 16, 32, 50, 64, 100, 128, 256];
pub const FIG6_LATENCIES: [u32; 8] = [1, 2, 4, 8, 12, 16, 24, 36];

#[derive(Debug, Clone)]
pub struct MemorySweep {
    pub bandwidth: Vec<(u32, SimReport)>,
    pub latency: Vec<(u32, SimReport)>,
}

impl MemorySweep {
    fn at(v: &[(u32, SimReport)], x: u32) -> Option<&SimReport> {
        v.iter().find(|(k, _)| *k == x).map(|(_, r)| r)
    }

    /// `time(from) / time(to) - 1` along the bandwidth axis.
    pub fn bandwidth_gain(&self, from: u32, to: u32) -> Option<f64> {
        let a = Self::at(&self.bandwidth, from)?.total_ns as f64;
        let b = Self::at(&self.bandwidth, to)?.total_ns as f64;
        Some(a / b - 1.0)
    }

    /// `time(hi) / time(lo) - 1` along the latency axis.
    pub fn latency_overhead(&self, lo: u32, hi: u32) -> Option<f64> {
        let a = Self::at(&self.latency, lo)?.total_ns as f64;
        let b = Self::at(&self.latency, hi)?.total_ns as f64;
        Some(b / a - 1.0)
    }
}

pub fn memory_sweep(base: &RunConfig, quick: bool) -> Result<MemorySweep> {
    let cfg = overlay(
        base,
        &[
            ("workload.kind", "gemm"),
            ("workload.n", if quick { "1024" } else { "2048" }),
            ("mode", "devmem"),
            ("mem.placement", "device"),
            ("mem.preset", "hbm2"),
        ],
    )?;
    let bws: Vec<u32> = if quick { vec![8, 50, 256] } else { FIG6_BANDWIDTHS.to_vec() };
    let lats: Vec<u32> = if quick { vec![1, 12, 36] } else { FIG6_LATENCIES.to_vec() };
    let mut configs = Vec::new();
    for b in &bws {
        configs.push(cfg.clone().with("mem.bandwidth_gbps", &b.to_string())?);
    }
    for l in &lats {
        configs.push(cfg.clone().with("mem.latency_ns", &l.to_string())?);
    }
    let mut reps: Vec<SimReport> = configs.par_iter().map(simulate).collect::<Result<_>>()?;
    let latency = lats.into_iter().zip(reps.split_off(bws.len())).collect();
    Ok(MemorySweep {
        bandwidth: bws.into_iter().zip(reps).collect(),
        latency,
    })
}

fn fig6(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let m = memory_sweep(base, quick)?;
    let norm = |v: &[(u32, SimReport)]| {
        let best = v.iter().map(|(_, r)| r.total_ns).min().unwrap_or(1) as f64;
        v.iter().map(|(x, r)| (*x as f64, r.total_ns as f64 / best)).collect::<Vec<_>>()
    };
    let mut summary = Vec::new();
    if let (Some(a), Some(b)) = (m.bandwidth_gain(8, 50), m.bandwidth_gain(50, 256)) {
        summary.push(format!("8->50 GB/s: {:.1}% faster; 50->256 GB/s: {:.1}%", a * 100.0, b * 100.0));
    }
    if let Some(l) = m.latency_overhead(1, 36) {
        summary.push(format!("latency 1->36 ns: +{:.1}%", l * 100.0));
    }
    let mut rows = Vec::new();
    for (_, r) in m.bandwidth.iter().chain(&m.latency) {
        rows.push(SweepRow {
            run_id: 0,
            config: r.config.clone(),
            report: r.clone(),
            normalized_exec_time: 0.0,
        });
    }
    renumber(&mut rows);
    Ok(FigureOutput {
        name: "fig6".into(),
        x_label: "bandwidth_GBps_or_latency_ns".into(),
        y_label: "normalized_exec_time".into(),
        rows,
        series: vec![
            Series {
                label: "bandwidth".into(),
                points: norm(&m.bandwidth),
            },
            Series {
                label: "latency".into(),
                points: norm(&m.latency),
            },
        ],
        summary,
    })
}

// Address translation -------------------------------------------------------------

pub const TABLE5_SIZES: [u32; 6] = [64, 128, 256, 512, 1024, 2048];

pub fn translation_table(base: &RunConfig, sizes: &[u32]) -> Result<Vec<SweepRow>> {
    let cfg = overlay(base, &[("workload.kind", "gemm"), ("mode", "dc")])?;
    sweep(
        &cfg,
        &[Axis {
            key: "workload.n".into(),
            values: sizes.iter().map(u32::to_string).collect(),
        }],
        SweepOptions::default(),
    )
}

fn table5(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let sizes: &[u32] = if quick { &TABLE5_SIZES[..5] } else { &TABLE5_SIZES };
    let rows = translation_table(base, sizes)?;
    let reports: Vec<TranslationReport> = rows.iter().map(|r| r.report.translation_report()).collect();
    let mut series = Vec::new();
    for (i, col) in TranslationReport::COLUMNS.iter().enumerate() {
        series.push(Series {
            label: col.to_lowercase().replace(['(', ')'], "").replace(' ', "_"),
            points: sizes
                .iter()
                .zip(&reports)
                .map(|(n, t)| (*n as f64, t.values()[i].parse::<f64>().unwrap_or(f64::NAN)))
                .collect(),
        });
    }
    let mut summary = vec![format!("{:<26}{}", "metric", sizes.iter().map(|n| format!("{n:>14}")).collect::<String>())];
    for (i, col) in TranslationReport::COLUMNS.iter().enumerate() {
        summary.push(format!(
            "{col:<26}{}",
            reports.iter().map(|t| format!("{:>14}", t.values()[i])).collect::<String>()
        ));
    }
    Ok(FigureOutput {
        name: "table5".into(),
        x_label: "matrix_n".into(),
        y_label: "value".into(),
        rows,
        series,
        summary,
    })
}

// Transformer systems ---------------------------------------------------------------

pub const VIT_MODELS: [&str; 3] = ["base", "large", "huge"];
pub const SYSTEMS: [&str; 4] = ["pcie2", "pcie8", "pcie64", "devmem"];

/// Overlay for one of the four transformer systems.
pub fn system_config(base: &RunConfig, system: &str) -> Result<RunConfig> {
    match system {
        "pcie2" => with_link(base, 2, &[("mem.preset", "ddr4"), ("pcie.packet_bytes", "256")]),
        "pcie8" => with_link(base, 8, &[("mem.preset", "ddr4"), ("pcie.packet_bytes", "256")]),
        "pcie64" => with_link(base, 64, &[("mem.preset", "hbm2"), ("pcie.packet_bytes", "256")]),
        "devmem" => with_link(
            base,
            64,
            &[
                ("mem.preset", "hbm2"),
                ("mem.placement", "device"),
                ("mode", "devmem"),
                ("pcie.packet_bytes", "64"),
            ],
        ),
        other => Err(Error::InvalidArgument(format!(
            "unknown system '{other}', expected one of {}",
            SYSTEMS.join("|")
        ))),
    }
}

/// Reports for the four systems, in [`SYSTEMS`] order.
#[derive(Debug, Clone)]
pub struct SystemComparison {
    pub model: &'static str,
    pub reports: [SimReport; 4],
}

impl SystemComparison {
    pub fn get(&self, system: &str) -> &SimReport {
        let i = SYSTEMS.iter().position(|s| *s == system).expect("known system");
        &self.reports[i]
    }

    pub fn speedup_64_over_2(&self) -> f64 {
        self.get("pcie2").total_ns as f64 / self.get("pcie64").total_ns as f64
    }

    pub fn devmem_over_pcie64(&self) -> f64 {
        self.get("devmem").total_ns as f64 / self.get("pcie64").total_ns as f64
    }

    /// DevMem Non-GEMM time over the best PCIe system's.
    pub fn nongemm_overhead(&self) -> f64 {
        let best = self.reports[..3].iter().map(|r| r.nongemm_ns).min().unwrap_or(1).max(1);
        self.get("devmem").nongemm_ns as f64 / best as f64
    }

    pub fn devmem_nongemm_share(&self) -> f64 {
        let d = self.get("devmem");
        d.nongemm_ns as f64 / d.total_ns as f64
    }
}

pub fn compare_systems(base: &RunConfig, models: &[&'static str]) -> Result<Vec<SystemComparison>> {
    let mut configs = Vec::new();
    for m in models {
        let w = overlay(base, &[("workload.kind", "vit"), ("workload.vit", m)])?;
        for s in SYSTEMS {
            configs.push(system_config(&w, s)?);
        }
    }
    let reps: Vec<SimReport> = configs.par_iter().map(simulate).collect::<Result<_>>()?;
    Ok(models
        .iter()
        .zip(reps.chunks(4))
        .map(|(m, r)| SystemComparison {
            model: m,
            reports: [r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone()],
        })
        .collect())
}

fn comparison_rows(cmp: &[SystemComparison]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = cmp
        .iter()
        .flat_map(|c| c.reports.iter())
        .map(|r| SweepRow {
            run_id: 0,
            config: r.config.clone(),
            report: r.clone(),
            normalized_exec_time: 0.0,
        })
        .collect();
    renumber(&mut rows);
    rows
}

fn fig7(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let models: &[&'static str] = if quick { &VIT_MODELS[..1] } else { &VIT_MODELS };
    let cmp = compare_systems(base, models)?;
    let series = SYSTEMS
        .iter()
        .map(|s| Series {
            label: s.to_string(),
            points: cmp
                .iter()
                .enumerate()
                .map(|(i, c)| (i as f64, c.get("pcie2").total_ns as f64 / c.get(s).total_ns as f64))
                .collect(),
        })
        .collect();
    let summary = cmp
        .iter()
        .map(|c| {
            format!(
                "vit_{}: pcie64 {:.2}x over pcie2; devmem/pcie64 time {:.2}",
                c.model,
                c.speedup_64_over_2(),
                c.devmem_over_pcie64()
            )
        })
        .collect();
    Ok(FigureOutput {
        name: "fig7".into(),
        x_label: "model_index".into(),
        y_label: "speedup_vs_pcie2".into(),
        rows: comparison_rows(&cmp),
        series,
        summary,
    })
}

fn fig8(base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    let models: &[&'static str] = if quick { &VIT_MODELS[..1] } else { &VIT_MODELS };
    let cmp = compare_systems(base, models)?;
    let mut series = Vec::new();
    for s in SYSTEMS {
        for (part, pick) in [("gemm", true), ("nongemm", false)] {
            series.push(Series {
                label: format!("{s}_{part}"),
                points: cmp
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let r = c.get(s);
                        (i as f64, if pick { r.gemm_ns } else { r.nongemm_ns } as f64 * 1e-6)
                    })
                    .collect(),
            });
        }
    }
    let summary = cmp
        .iter()
        .map(|c| {
            format!(
                "vit_{}: devmem non-gemm {:.2}x best pcie, {:.0}% of devmem total",
                c.model,
                c.nongemm_overhead(),
                c.devmem_nongemm_share() * 100.0
            )
        })
        .collect();
    Ok(FigureOutput {
        name: "fig8".into(),
        x_label: "model_index".into(),
        y_label: "time_ms".into(),
        rows: comparison_rows(&cmp),
        series,
        summary,
    })
}

// Workload mix --------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MixStudy {
    pub comparison: SystemComparison,
    /// Models in [`SYSTEMS`] order, all sharing the PCIe-2GB workload split.
    pub models: [MixModel; 4],
    /// DevMem against PCIe at 2, 8 and 64 GB/s.
    pub thresholds: [Threshold; 3],
}

pub fn mix_study(base: &RunConfig, model: &'static str) -> Result<MixStudy> {
    let comparison = compare_systems(base, &[model])?.remove(0);
    let w_ref = gemm_fraction(comparison.get("pcie2"));
    let mut models = Vec::new();
    for r in &comparison.reports {
        models.push(MixModel::from_report(r, w_ref)?);
    }
    let models: [MixModel; 4] = models.try_into().expect("four systems");
    let dev = &models[3];
    let thresholds = [
        devmem_threshold(dev, &models[0])?,
        devmem_threshold(dev, &models[1])?,
        devmem_threshold(dev, &models[2])?,
    ];
    Ok(MixStudy {
        comparison,
        models,
        thresholds,
    })
}

fn fig9(base: &RunConfig, _quick: bool) -> Result<FigureOutput> {
    let st = mix_study(base, "large")?;
    let series = SYSTEMS
        .iter()
        .zip(&st.models)
        .map(|(s, m)| {
            Ok(Series {
                label: s.to_string(),
                points: mix_curve(m, 101)?.into_iter().map(|(w, t)| (w * 100.0, t)).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let summary = ["2 GB/s", "8 GB/s", "64 GB/s"]
        .iter()
        .zip(&st.thresholds)
        .map(|(l, t)| match t.w_nongemm() {
            Some(w) => format!("devmem preferred below {:.2}% non-gemm vs pcie {l}", w * 100.0),
            None => format!("no crossing vs pcie {l}: {t:?}"),
        })
        .collect();
    Ok(FigureOutput {
        name: "fig9".into(),
        x_label: "nongemm_percent".into(),
        y_label: "time_s".into(),
        rows: comparison_rows(std::slice::from_ref(&st.comparison)),
        series,
        summary,
    })
}

pub fn run_figure(name: &str, base: &RunConfig, quick: bool) -> Result<FigureOutput> {
    match name {
        "fig2" => fig2(base, quick),
        "fig3" => fig3(base, quick),
        "fig4" => fig4(base, quick),
        "fig5" => fig5(base, quick),
        "fig6" => fig6(base, quick),
        "fig7" => fig7(base, quick),
        "fig8" => fig8(base, quick),
        "fig9" => fig9(base, quick),
        "table5" => table5(base, quick),
        other => Err(Error::InvalidArgument(format!(
            "unknown figure '{other}', expected one of {}",
            FIGURES.join("|")
        ))),
    }
}
