mod config;
mod output;
mod tasks;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;

use config::{Args, Config, Task};
use output::{header, manifest_path, sort_rows, write_csv, write_manifest, Manifest, Tolerances, SCHEMA_VERSION};
use tasks::{num, Row};

fn check_rows(seed: u64) -> (Vec<String>, Vec<Row>) {
    let cols = ["check", "detail", "value", "tolerance", "pass"].map(String::from).to_vec();
    let rows = qebath::checks::suite(seed)
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            println!("{:<16} {:<44} {:>12.3e} < {:<8.0e} {}", c.name, c.detail, c.value, c.tolerance, if c.pass { "PASS" } else { "FAIL" });
            Row {
                key: vec![i as f64],
                cells: vec![c.name, c.detail.clone(), num(c.value), num(c.tolerance), c.pass.to_string()],
                error: (!c.pass).then(|| format!("check failed: {}", c.detail)),
            }
        })
        .collect();
    (cols, rows)
}

fn run(cfg: &Config) -> std::io::Result<usize> {
    let start = Instant::now();
    let (columns, leading, mut rows): (Vec<String>, &[&str], Vec<Row>) = if cfg.task == Task::CheckSuite {
        let (c, r) = check_rows(cfg.seed);
        (c, &[], r)
    } else {
        let points = cfg.points();
        let rows = points.par_iter().enumerate().flat_map_iter(|(i, &(d, o))| tasks::compute(cfg, i, d, o)).collect();
        (tasks::columns(cfg), &["delta", "omega"], rows)
    };
    sort_rows(&mut rows);
    let head = header(leading, &columns);
    let n_lead = leading.len();
    write_csv(&cfg.out, &head, &rows, |r| r.key.iter().take(n_lead).map(|&x| num(x)).collect())?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION"),
        task: cfg.task.name(),
        config: cfg,
        columns: &head,
        rows: rows.len(),
        errors,
        wall_seconds: start.elapsed().as_secs_f64(),
        tolerances: Tolerances::default(),
        csv: cfg.out.display().to_string(),
    };
    write_manifest(&manifest_path(&cfg.out), &manifest)?;
    eprintln!("{}: {} rows, {} errors, {:.2}s", cfg.task.name(), rows.len(), errors, manifest.wall_seconds);
    Ok(errors)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match Config::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cfg)) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {}: {e}", cfg.out.display());
            ExitCode::from(2)
        }
    }
}
