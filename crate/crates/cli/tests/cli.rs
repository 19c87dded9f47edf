use std::path::Path;
use std::process::{Command, Output};

fn accesim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_accesim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn run_appends_rows_deterministically() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.cfg"), "workload.n = 64\n").unwrap();
    for _ in 0..2 {
        let o = accesim(d.path(), &["--config", "c.cfg", "run", "--out", "r.csv"]);
        assert!(o.status.success(), "{}", text(&o.stderr));
        assert!(text(&o.stdout).contains("total "));
    }
    let csv = std::fs::read_to_string(d.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("run_id,"));
    assert_eq!(lines[1], lines[2]);
    let total_col = lines[0].split(',').position(|c| c == "total_ns").unwrap();
    let total: u64 = lines[1].split(',').nth(total_col).unwrap().parse().unwrap();
    assert!(total > 0);
}

#[test]
fn devmem_without_device_memory_names_key() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.cfg"), "workload.n = 64\nmode = devmem\n").unwrap();
    let o = accesim(d.path(), &["--config", "c.cfg", "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("mem.placement"));
}

#[test]
fn parse_errors_report_line_and_key() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.cfg"), "mode = dc\n\npcie.lanez = 4\n").unwrap();
    let o = accesim(d.path(), &["--config", "c.cfg", "run"]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("line 3") && err.contains("pcie.lanez"), "{err}");
    let o = accesim(d.path(), &["--config", "missing.cfg", "run"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_without_axes_is_one_row() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.cfg"), "workload.n = 64\n").unwrap();
    let o = accesim(d.path(), &["--config", "c.cfg", "sweep", "--out", "s.csv"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).starts_with("1 points in "));
    assert_eq!(std::fs::read_to_string(d.path().join("s.csv")).unwrap().lines().count(), 2);
}

#[test]
fn sweep_grid_and_bad_token() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.cfg"), "workload.n = 64\n").unwrap();
    let o = accesim(
        d.path(),
        &["--config", "c.cfg", "--jobs", "2", "sweep", "--axis", "pcie.lanes=2,4", "--axis", "pcie.lane_rate_gbps=2,8,32"],
    );
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert_eq!(std::fs::read_to_string(d.path().join("sweep.csv")).unwrap().lines().count(), 7);

    let o = accesim(d.path(), &["sweep", "--axis", "pcie.lanes=2,four"]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("pcie.lanes") && err.contains("four"), "{err}");
    let o = accesim(d.path(), &["sweep", "--axis", "pcie.lanes"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_figure_lists_names() {
    let d = tempfile::tempdir().unwrap();
    let o = accesim(d.path(), &["figure", "fig10"]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    for name in ["fig3", "fig9", "table5"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn quick_figure_keeps_schema() {
    let d = tempfile::tempdir().unwrap();
    let o = accesim(d.path(), &["figure", "fig3", "--quick", "--out", "q"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let quick = std::fs::read_to_string(d.path().join("q/fig3.csv")).unwrap();
    let o = accesim(d.path(), &["sweep", "--out", "one.csv"]);
    assert!(o.status.success());
    let one = std::fs::read_to_string(d.path().join("one.csv")).unwrap();
    assert_eq!(quick.lines().next(), one.lines().next());
    assert_eq!(quick.lines().count(), 7);
    let series = std::fs::read_to_string(d.path().join("q/fig3_lanes2.dat")).unwrap();
    assert!(series.starts_with('#'));
    for line in series.lines().skip(1) {
        assert_eq!(line.split_whitespace().count(), 2);
    }
}

#[test]
fn fig9_and_table5_series() {
    let d = tempfile::tempdir().unwrap();
    let o = accesim(d.path(), &["figure", "fig9", "--out", "f"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    for s in ["pcie2", "pcie8", "pcie64", "devmem"] {
        let data = std::fs::read_to_string(d.path().join(format!("f/fig9_{s}.dat"))).unwrap();
        let xs: Vec<f64> = data.lines().skip(1).map(|l| l.split_whitespace().next().unwrap().parse().unwrap()).collect();
        assert_eq!(xs.first(), Some(&0.0));
        assert_eq!(xs.last(), Some(&100.0));
    }
    assert_eq!(text(&o.stdout).matches("devmem preferred below").count(), 3);

    let o = accesim(d.path(), &["figure", "table5", "--out", "t"]);
    assert!(o.status.success());
    let n = std::fs::read_dir(d.path().join("t"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "dat"))
        .count();
    assert_eq!(n, 8);
    assert_eq!(std::fs::read_to_string(d.path().join("t/table5.csv")).unwrap().lines().count(), 7);
}

#[test]
fn calibrate_writes_constants() {
    let d = tempfile::tempdir().unwrap();
    let o = accesim(d.path(), &["calibrate", "--rounds", "0", "--out", "k.cfg"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("best packet at 8 GB/s"));
    let k = std::fs::read_to_string(d.path().join("k.cfg")).unwrap();
    assert!(k.contains("pcie.header_bytes = 32"));
    std::fs::write(d.path().join("c.cfg"), format!("{k}workload.n = 64\n")).unwrap();
    assert!(accesim(d.path(), &["--config", "c.cfg", "run"]).status.success());
}

#[test]
fn help_exits_zero() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(accesim(d.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(accesim(d.path(), &["frobnicate"]).status.code(), Some(1));
}
