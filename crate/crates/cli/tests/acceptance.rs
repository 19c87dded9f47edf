//! Acceptance suite. Prints one line per criterion and exits nonzero when a
//! criterion outside `KNOWN_FAILING` fails, or when one inside it passes.

use std::process::Command;

use accesim::accel::{gemm_systolic, Matrix, SystolicConfig};
use accesim::analysis::mix::Threshold;
use accesim::analysis::sweep::csv_header;
use accesim::config::RunConfig;
use accesim::figures::{
    bandwidth_grid, compare_systems, memory_location, memory_sweep, mix_study, packet_sweep, roofline,
    translation_table, PRESETS, TABLE5_SIZES, VIT_MODELS,
};
use accesim::smmu::footprint_pages;
use accesim::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose bands the model cannot meet together with the others.
const KNOWN_FAILING: [usize; 2] = [6, 9];

type Outcome = (bool, String);
type Check = Result<Outcome, Error>;

fn naive(a: &Matrix, b: &Matrix) -> Vec<i32> {
    let mut c = vec![0i32; a.rows * b.cols];
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut s = 0i32;
            for p in 0..a.cols {
                s = s.wrapping_add(a.get(i, p).wrapping_mul(b.get(p, j)));
            }
            c[i * b.cols + j] = s;
        }
    }
    c
}

fn c1_gemm() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = SystolicConfig::default();
    let mut bad = 0;
    for _ in 0..50 {
        let (m, n, k) = (rng.gen_range(1..=128), rng.gen_range(1..=128), rng.gen_range(1..=128));
        let a = Matrix::new(m, k, (0..m * k).map(|_| rng.gen_range(-1000..=1000)).collect())?;
        let b = Matrix::new(k, n, (0..k * n).map(|_| rng.gen_range(-1000..=1000)).collect())?;
        if gemm_systolic(&a, &b, &cfg)?.0.data != naive(&a, &b) {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{} of 50 random cases match", 50 - bad)))
}

fn c2_footprint() -> Check {
    let expect = [12, 48, 192, 768, 3072, 12288];
    let got: Vec<u64> = TABLE5_SIZES.iter().map(|n| footprint_pages(*n as u64)).collect();
    Ok((got == expect, format!("{got:?}")))
}

fn c3_packet(cfg: &RunConfig) -> Check {
    let t: Vec<f64> = packet_sweep(cfg, 8)?.iter().map(|r| r.report.total_ns as f64).collect();
    let best = t.iter().cloned().fold(f64::INFINITY, f64::min);
    let argmin = [64, 128, 256, 512, 1024, 2048, 4096][t.iter().position(|x| *x == best).unwrap()];
    let o64 = (t[0] / best - 1.0) * 100.0;
    let o4096 = (t[6] / best - 1.0) * 100.0;
    let shape = t[0] > t[1] && t[1] > t[2] && t[2] < t[4] && t[4] < t[6];
    let ok = argmin == 256 && (o64 - 12.0).abs() <= 6.0 && (o4096 - 36.0).abs() <= 15.0 && shape;
    Ok((ok, format!("argmin {argmin} B, 64 B +{o64:.1}%, 4096 B +{o4096:.1}%, shape {shape}")))
}

fn c4_bandwidth(cfg: &RunConfig) -> Check {
    let rows = bandwidth_grid(cfg, false)?;
    let t = |l: u64, r: f64| {
        rows.iter()
            .find(|x| x.config.u64("pcie.lanes") == l && x.config.f64("pcie.lane_rate_gbps") == r)
            .map(|x| x.report.total_ns as f64)
            .expect("grid point")
    };
    let lanes = [2u64, 4, 8, 16];
    let rates = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let mut monotone = true;
    for l in lanes {
        for w in rates.windows(2) {
            monotone &= t(l, w[1]) <= t(l, w[0]);
        }
    }
    for r in rates {
        for w in lanes.windows(2) {
            monotone &= t(w[1], r) <= t(w[0], r);
        }
    }
    let all: Vec<f64> = rows.iter().map(|x| x.report.total_ns as f64).collect();
    let ratio = all.iter().cloned().fold(0.0, f64::max) / all.iter().cloned().fold(f64::INFINITY, f64::min);
    let gain = (t(16, 32.0) / t(16, 64.0) - 1.0).max(t(8, 64.0) / t(16, 64.0) - 1.0) * 100.0;
    let ok = rows.len() == 24 && monotone && (9.0..=14.0).contains(&ratio) && gain <= 2.0;
    Ok((ok, format!("{} points, monotone {monotone}, ratio {ratio:.2}x, top gain {gain:.2}%", rows.len())))
}

fn c5_roofline(cfg: &RunConfig) -> Check {
    let r = roofline(cfg, false)?;
    let Some(x) = r.crossover_ns else {
        return Ok((false, "no crossover".into()));
    };
    let flat = r.points.iter().filter(|p| p.compute_time_ns < x).all(|p| p.normalized_exec_time <= 1.02);
    let tail: Vec<_> = r.points.iter().rev().take(3).collect();
    let slope = |a: &accesim::analysis::roofline::RooflinePoint, b: &accesim::analysis::roofline::RooflinePoint| {
        (a.total_ns as f64 - b.total_ns as f64) / (a.compute_time_ns - b.compute_time_ns)
    };
    let (s1, s2) = (slope(tail[0], tail[1]), slope(tail[1], tail[2]));
    let linear = (s1 / s2 - 1.0).abs() <= 0.1;
    let sandwich = r
        .points
        .iter()
        .all(|p| p.compute_ns.max(p.transfer_ns) <= p.total_ns && p.total_ns <= p.compute_ns + p.transfer_ns);
    let ok = (750.0..=2250.0).contains(&x) && flat && linear && sandwich;
    Ok((ok, format!("crossover {x:.0} ns, plateau {flat}, linear tail {linear}, sandwich {sandwich}")))
}

fn c6_location(cfg: &RunConfig) -> Check {
    let res = memory_location(cfg, &PRESETS)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for r in &res {
        let dev_wins = r.devmem.total_ns <= r.host_2.total_ns && r.devmem.total_ns <= r.host_64.total_ns;
        let frac = r.host64_fraction() * 100.0;
        let sp = r.devmem_speedup();
        ok &= dev_wins && (frac - 78.0).abs() <= 10.0 && (1.6..=2.4).contains(&sp);
        detail.push(format!("{} {dev_wins}/{frac:.0}%/{sp:.2}x", r.preset));
    }
    Ok((ok, detail.join(", ")))
}

fn c7_memory(cfg: &RunConfig) -> Check {
    let m = memory_sweep(cfg, false)?;
    let g1 = m.bandwidth_gain(8, 50).unwrap() * 100.0;
    let g2 = m.bandwidth_gain(50, 256).unwrap() * 100.0;
    let l = m.latency_overhead(1, 36).unwrap() * 100.0;
    Ok((g1 >= 50.0 && g2 <= 5.0 && l <= 10.0, format!("8->50 {g1:.1}%, 50->256 {g2:.1}%, latency {l:.1}%")))
}

fn c8_translation(cfg: &RunConfig) -> Check {
    let rows = translation_table(cfg, &TABLE5_SIZES)?;
    let t: Vec<_> = rows.iter().map(|r| r.report.translation_report()).collect();
    let o: Vec<f64> = t.iter().map(|x| x.overhead_percent).collect();
    let compulsory = t.iter().all(|x| x.ptw_count >= x.footprint_pages && x.utlb_misses >= x.footprint_pages);
    let ok = o[0] > o[2] && o[5] > o[4] && (3.0..=10.0).contains(&o[5]) && compulsory;
    Ok((ok, format!("overhead {o:.2?}, compulsory bound {compulsory}")))
}

fn c9_c10_systems(cfg: &RunConfig) -> Result<(Outcome, Outcome), Error> {
    let cmp = compare_systems(cfg, &VIT_MODELS)?;
    let mut ok9 = true;
    let mut d9 = Vec::new();
    let mut ok10 = true;
    let mut d10 = Vec::new();
    for c in &cmp {
        let sp = c.speedup_64_over_2();
        let dev = c.devmem_over_pcie64();
        ok9 &= (2.0..=4.0).contains(&sp) && (dev - 1.0).abs() <= 0.15;
        d9.push(format!("{} {sp:.2}x dev/p64 {dev:.2}", c.model));

        let gemm_win = c.reports[..3].iter().all(|r| c.get("devmem").gemm_ns < r.gemm_ns);
        let over = c.nongemm_overhead();
        ok10 &= gemm_win && (2.0..=6.0).contains(&over);
        if c.model == "large" {
            let share = c.devmem_nongemm_share();
            ok10 &= (0.25..=0.55).contains(&share);
            d10.push(format!("large share {:.0}%", share * 100.0));
        }
        d10.push(format!("{} gemm win {gemm_win}, non-gemm {over:.2}x", c.model));
    }
    Ok(((ok9, d9.join(", ")), (ok10, d10.join(", "))))
}

fn c11_mix(cfg: &RunConfig) -> Check {
    let st = mix_study(cfg, "large")?;
    let target = [34.31, 10.16, 4.27];
    let mut ok = true;
    let mut got = Vec::new();
    for (t, p) in st.thresholds.iter().zip(target) {
        match t {
            Threshold::Crossing { w_gemm, w_gemm_grid, .. } => {
                ok &= ((w_gemm - w_gemm_grid) * 100.0).abs() <= 0.01;
                let w = t.w_nongemm().unwrap() * 100.0;
                ok &= (w - p).abs() <= 10.0;
                got.push(w);
            }
            _ => {
                ok = false;
                got.push(f64::NAN);
            }
        }
    }
    ok &= got[0] > got[1] && got[1] > got[2];
    Ok((ok, format!("thresholds {got:.2?}%")))
}

fn cli(args: &[&str], dir: &std::path::Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_accesim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn cli");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn c12_determinism() -> Check {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), "workload.n = 128\n")?;
    std::fs::write(d.join("bad.cfg"), "workload.n = 128\npcie.nope = 1\n")?;
    let sweep = ["--config", "run.cfg", "sweep", "--axis", "pcie.lanes=2,4,8", "--axis", "pcie.packet_bytes=64,256"];
    let (c1, _) = cli(&[&sweep[..], &["--out", "a.csv"]].concat(), d);
    let (c2, _) = cli(&[&sweep[..], &["--out", "b.csv"]].concat(), d);
    let a = std::fs::read(d.join("a.csv"))?;
    let identical = c1 == 0 && c2 == 0 && a == std::fs::read(d.join("b.csv"))?;
    let text = String::from_utf8_lossy(&a);
    let header = text.lines().next().unwrap_or("") == csv_header().join(",");
    let rows = text.lines().count() == 7;
    let codes = [
        cli(&["--config", "run.cfg", "run", "--out", "r.csv"], d).0,
        cli(&["--config", "bad.cfg", "run"], d).0,
        cli(&["figure", "fig1"], d).0,
        cli(&["sweep", "--axis", "pcie.lanes=2,x"], d).0,
        cli(&["--bogus-flag"], d).0,
    ];
    let internal = Error::AddressFault { addr: 0, regions: String::new() }.is_internal()
        && !Error::config("k", "r").is_internal();
    let ok = identical && header && rows && codes == [0, 1, 1, 1, 1] && internal;
    Ok((ok, format!("byte-identical {identical}, header {header}, rows {rows}, exit codes {codes:?}")))
}

fn main() {
    let cfg = RunConfig::default();
    let mut results: Vec<(usize, &str, Check)> = vec![
        (1, "GEMM functional oracle", c1_gemm()),
        (2, "footprint formula", c2_footprint()),
        (3, "packet-size curve", c3_packet(&cfg)),
        (4, "bandwidth sweep", c4_bandwidth(&cfg)),
        (5, "roofline", c5_roofline(&cfg)),
        (6, "memory location", c6_location(&cfg)),
        (7, "memory bandwidth/latency", c7_memory(&cfg)),
        (8, "translation overhead", c8_translation(&cfg)),
    ];
    match c9_c10_systems(&cfg) {
        Ok((a, b)) => {
            results.push((9, "transformer configs", Ok(a)));
            results.push((10, "gemm/non-gemm split", Ok(b)));
        }
        Err(e) => {
            let msg = e.to_string();
            results.push((9, "transformer configs", Err(Error::InvalidArgument(msg.clone()))));
            results.push((10, "gemm/non-gemm split", Err(Error::InvalidArgument(msg))));
        }
    }
    results.push((11, "mix model", c11_mix(&cfg)));
    results.push((12, "determinism and schema", c12_determinism()));

    let mut unexpected = Vec::new();
    for (id, name, r) in &results {
        let (pass, detail) = match r {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = KNOWN_FAILING.contains(id);
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {name:<26} {tag:<13} {detail}");
        if pass == known {
            unexpected.push(*id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
