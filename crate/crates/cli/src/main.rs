use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use accesim::analysis::calibrate::{calibrate, default_targets, PARAMS};
use accesim::analysis::sweep::{sweep, write_csv, Axis, SweepOptions, SweepRow, DEFAULT_CAP};
use accesim::config::RunConfig;
use accesim::figures::{run_figure, FIGURES};
use accesim::system::simulate;
use accesim::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "accesim", version, about = "PCIe-attached accelerator system simulator")]
struct Cli {
    /// Configuration file; keys not given keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one simulation and append a CSV row.
    Run {
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Run the cartesian product of the given axes.
    Sweep {
        /// key=v1,v2,... (repeatable).
        #[arg(long)]
        axis: Vec<Axis>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Reproduce a figure: CSV plus one plot-data file per series.
    Figure {
        name: String,
        /// Output directory.
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        quick: bool,
    },
    /// Fit model constants and report residuals.
    Calibrate {
        /// Constants file to write.
        #[arg(long, default_value = "calibrated.cfg")]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        rounds: usize,
    },
}

fn load(path: &Option<PathBuf>) -> accesim::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn create_parent(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => fs::create_dir_all(d),
        _ => Ok(()),
    }
}

fn append_rows(path: &Path, rows: &[SweepRow]) -> accesim::Result<()> {
    create_parent(path)?;
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    let body = if fresh {
        &buf[..]
    } else {
        let header_end = buf.iter().position(|b| *b == b'\n').map_or(buf.len(), |i| i + 1);
        &buf[header_end..]
    };
    OpenOptions::new().create(true).append(true).open(path)?.write_all(body)?;
    Ok(())
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> accesim::Result<()> {
    create_parent(path)?;
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    write_csv(rows, &mut f)?;
    f.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> accesim::Result<()> {
    let base = load(&cli.config)?;
    match cli.cmd {
        Cmd::Run { out } => {
            let report = simulate(&base)?;
            println!("{}", report.summary());
            let row = SweepRow {
                run_id: 0,
                config: base,
                normalized_exec_time: 1.0,
                report,
            };
            append_rows(&out, &[row])?;
            println!("appended row to {}", out.display());
        }
        Cmd::Sweep { axis, out } => {
            let start = Instant::now();
            let opts = SweepOptions {
                cap: DEFAULT_CAP,
                jobs: cli.jobs,
            };
            let rows = sweep(&base, &axis, opts)?;
            write_rows(&out, &rows)?;
            println!(
                "{} points in {:.2} s, written to {}",
                rows.len(),
                start.elapsed().as_secs_f64(),
                out.display()
            );
        }
        Cmd::Figure { name, out, quick } => {
            if !FIGURES.contains(&name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown figure '{name}', valid names: {}",
                    FIGURES.join(", ")
                )));
            }
            let fig = match cli.jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
                    .install(|| run_figure(&name, &base, quick))?,
                None => run_figure(&name, &base, quick)?,
            };
            fs::create_dir_all(&out)?;
            write_rows(&out.join(format!("{name}.csv")), &fig.rows)?;
            for s in &fig.series {
                let path = out.join(format!("{name}_{}.dat", s.label));
                fs::write(&path, s.to_plot_data(&fig.x_label, &fig.y_label))?;
            }
            for line in &fig.summary {
                println!("{line}");
            }
            println!(
                "{}: {} runs, {} series written to {}",
                name,
                fig.rows.len(),
                fig.series.len(),
                out.display()
            );
        }
        Cmd::Calibrate { out, rounds } => {
            let cal = calibrate(&base, &PARAMS, &default_targets()?, rounds)?;
            print!("{cal}");
            println!("{} evaluations, max residual {:.3}", cal.evaluations, cal.max_residual());
            create_parent(&out)?;
            fs::write(&out, cal.constants_file(&PARAMS))?;
            println!("constants written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
        Err(_) => ExitCode::from(2),
    }
}
