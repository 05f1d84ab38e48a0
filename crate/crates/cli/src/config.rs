use clap::{Parser, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

/// Environment variable that overrides the default worker count.
pub const JOBS_ENV: &str = "QEBATH_JOBS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
pub enum Task {
    #[value(name = "teff-2qe")]
    #[serde(rename = "teff-2qe")]
    Teff2qe,
    #[value(name = "wannier-hoppings")]
    #[serde(rename = "wannier-hoppings")]
    WannierHoppings,
    #[value(name = "pair-ground")]
    #[serde(rename = "pair-ground")]
    PairGround,
    #[value(name = "ueff")]
    #[serde(rename = "ueff")]
    Ueff,
    #[value(name = "doublon-band")]
    #[serde(rename = "doublon-band")]
    DoublonBand,
    #[value(name = "triplon-band")]
    #[serde(rename = "triplon-band")]
    TriplonBand,
    #[value(name = "dmrg-point")]
    #[serde(rename = "dmrg-point")]
    DmrgPoint,
    #[value(name = "check-suite")]
    #[serde(rename = "check-suite")]
    CheckSuite,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Teff2qe => "teff-2qe",
            Task::WannierHoppings => "wannier-hoppings",
            Task::PairGround => "pair-ground",
            Task::Ueff => "ueff",
            Task::DoublonBand => "doublon-band",
            Task::TriplonBand => "triplon-band",
            Task::DmrgPoint => "dmrg-point",
            Task::CheckSuite => "check-suite",
        }
    }

    /// Tasks that map a (delta, omega) plane and need at least a 2x2 grid.
    pub fn is_plane(self) -> bool {
        matches!(self, Task::Teff2qe | Task::WannierHoppings | Task::PairGround | Task::Ueff)
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "qebath", version, about = "Parameter sweeps for emitters in a tight-binding bath")]
pub struct Args {
    #[arg(long, value_enum)]
    pub task: Task,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    pub dmin: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub dmax: f64,
    #[arg(long, default_value_t = 9)]
    pub dsteps: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub omin: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub omax: f64,
    #[arg(long, default_value_t = 8)]
    pub osteps: usize,
    /// Emitter separation (two-emitter tasks) or array period (wannier-hoppings).
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Bath sites per unit cell for array tasks.
    #[arg(long, default_value_t = 1)]
    pub z: usize,
    /// Unit cells of the periodic array.
    #[arg(long)]
    pub nb: Option<usize>,
    /// Ring size for two-emitter tasks, chain length for dmrg-point.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Validated run configuration, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub task: Task,
    pub deltas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub d: usize,
    pub z: usize,
    pub nb: usize,
    pub n: Option<usize>,
    pub jobs: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps).map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 }).collect()
}

fn default_nb(task: Task) -> usize {
    match task {
        Task::TriplonBand => 16,
        Task::WannierHoppings => 128,
        _ => 64,
    }
}

fn default_jobs() -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&j: &usize| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl Config {
    pub fn from_args(a: Args) -> Result<Self, String> {
        for (name, v) in [("dmin", a.dmin), ("dmax", a.dmax), ("omin", a.omin), ("omax", a.omax)] {
            if !v.is_finite() {
                return Err(format!("--{name} must be finite"));
            }
        }
        if (a.dsteps > 1 && a.dmin > a.dmax) || (a.osteps > 1 && a.omin > a.omax) {
            return Err("range minimum exceeds maximum".into());
        }
        if a.dsteps == 0 || a.osteps == 0 {
            return Err("grid sizes must be positive".into());
        }
        if a.task.is_plane() && (a.dsteps < 2 || a.osteps < 2) {
            return Err(format!("{} needs at least a 2x2 grid", a.task.name()));
        }
        if a.omin < 0.0 {
            return Err("coupling must be non-negative".into());
        }
        if a.d == 0 || a.z == 0 {
            return Err("--d and --z must be positive".into());
        }
        let jobs = a.jobs.unwrap_or_else(default_jobs);
        if jobs == 0 {
            return Err("--jobs must be positive".into());
        }
        Ok(Self {
            task: a.task,
            deltas: linspace(a.dmin, a.dmax, a.dsteps),
            omegas: linspace(a.omin, a.omax, a.osteps),
            d: a.d,
            z: a.z,
            nb: a.nb.unwrap_or(default_nb(a.task)),
            n: a.n,
            jobs,
            seed: a.seed,
            out: a.out,
        })
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut p = Vec::with_capacity(self.deltas.len() * self.omegas.len());
        for &d in &self.deltas {
            for &o in &self.omegas {
                p.push((d, o));
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Result<Args, clap::Error> {
        let mut v = vec!["qebath", "--out", "x.csv"];
        v.extend_from_slice(extra);
        Args::try_parse_from(v)
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = linspace(-4.0, 4.0, 9);
        assert_eq!(g.first(), Some(&-4.0));
        assert_eq!(g.last(), Some(&4.0));
        assert_eq!(g[4], 0.0);
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(args(&["--task", "ueff", "--bogus", "1"]).is_err());
        assert!(args(&["--task", "nothing"]).is_err());
    }

    #[test]
    fn plane_tasks_need_a_real_grid() {
        let a = args(&["--task", "teff-2qe", "--dsteps", "1"]).unwrap();
        assert!(Config::from_args(a).is_err());
        let a = args(&["--task", "doublon-band", "--dsteps", "1", "--osteps", "1"]).unwrap();
        assert!(Config::from_args(a).is_ok());
        let a = args(&["--task", "ueff", "--dmin", "1", "--dmax", "-1"]).unwrap();
        assert!(Config::from_args(a).is_err());
        let a = args(&["--task", "triplon-band", "--osteps", "1", "--omin", "5"]).unwrap();
        assert_eq!(Config::from_args(a).unwrap().omegas, vec![5.0]);
    }

    #[test]
    fn negative_bounds_parse() {
        let a = args(&["--task", "ueff", "--dmin", "-3.5", "--dmax", "-1"]).unwrap();
        assert_eq!(a.dmin, -3.5);
    }
}
