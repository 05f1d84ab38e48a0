use std::path::PathBuf;

use qebath::array_pair::{doublon_band, gap_window, pair_continuum, u_eff};
use qebath::mps::{self, checkpoint, ChainSpec, DmrgOptions};
use qebath::single::{effective_hopping_two_qe, in_arc_region, polariton_bands, solve_two_qe, wannier_hoppings};
use qebath::triplon::TriplonContext;
use qebath::two_qe::{doublon_hopping_two_qe, solve_pair_poles, variational_from};
use qebath::{BathSpec, CouplingSpec, ModeSum};

use crate::config::{Config, Task};

/// Photon cap used by dmrg-point.
pub const DMRG_CAP: usize = 4;
/// Default chain length for dmrg-point.
pub const DMRG_CELLS: usize = 16;
/// Default ring size for pair-ground.
pub const PAIR_RING: usize = 128;

#[derive(Debug, Clone)]
pub struct Row {
    pub key: Vec<f64>,
    pub cells: Vec<String>,
    pub error: Option<String>,
}

/// Shortest round-trip form, in exponent notation for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag(b: bool) -> String {
    b.to_string()
}

fn ok(key: Vec<f64>, cells: Vec<String>) -> Row {
    Row { key, cells, error: None }
}

fn failed(key: Vec<f64>, width: usize, e: impl ToString) -> Row {
    Row { key, cells: vec![String::new(); width], error: Some(e.to_string()) }
}

fn pairs(bands: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for l in 0..bands {
        for lp in l..bands {
            v.push((l, lp));
        }
    }
    v
}

/// Task-specific columns; `delta`, `omega` lead and `status`, `message` close every row.
pub fn columns(cfg: &Config) -> Vec<String> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    match cfg.task {
        Task::Teff2qe => s(&["d", "n", "e_plus", "e_minus", "exists_minus", "e0", "t_eff", "in_arc"]),
        Task::WannierHoppings => s(&["d", "nb", "t0", "t1", "t2", "t3", "max_imag"]),
        Task::PairGround => s(&[
            "d",
            "n",
            "e_ground",
            "z2_ground",
            "exists_doublon_plus",
            "e_doublon_plus",
            "exists_doublon_minus",
            "e_doublon_minus",
            "t_d",
            "e_variational",
            "p_v",
            "p",
        ]),
        Task::Ueff => s(&["z", "nb", "u_eff", "u_int", "z1", "e0"]),
        Task::DoublonBand => {
            let mut c = s(&["z", "nb", "q_index", "q"]);
            for (l, lp) in pairs(cfg.z + 1) {
                c.push(format!("continuum_{l}{lp}_lo"));
                c.push(format!("continuum_{l}{lp}_hi"));
            }
            c.extend(s(&["gap_open", "band_defined", "e_2b"]));
            c
        }
        Task::TriplonBand => s(&[
            "z",
            "nb",
            "q_index",
            "q",
            "three_polariton_lo",
            "three_polariton_hi",
            "doublon_continuum_defined",
            "polariton_doublon_lo",
            "polariton_doublon_hi",
            "band_defined",
            "e_3b",
            "sigma_min",
        ]),
        Task::DmrgPoint => s(&[
            "n_imp",
            "z",
            "cap",
            "bond_max",
            "energy",
            "converged",
            "max_truncation",
            "max_bond",
            "lambda1",
            "lambda2",
            "exponent",
            "central_charge",
            "entropy_flatness",
            "phase",
            "checkpoint",
        ]),
        Task::CheckSuite => Vec::new(),
    }
}

/// Rows for one grid point.
pub fn compute(cfg: &Config, index: usize, delta: f64, omega: f64) -> Vec<Row> {
    let width = columns(cfg).len();
    let key = vec![delta, omega];
    let coupling = match CouplingSpec::new(delta, omega) {
        Ok(c) => c,
        Err(e) => return vec![failed(key, width, e)],
    };
    let res = match cfg.task {
        Task::Teff2qe => teff(cfg, &coupling).map(|c| vec![ok(key.clone(), c)]),
        Task::WannierHoppings => wannier(cfg, &coupling).map(|c| vec![ok(key.clone(), c)]),
        Task::PairGround => pair_ground(cfg, &coupling).map(|c| vec![ok(key.clone(), c)]),
        Task::Ueff => ueff(cfg, &coupling).map(|c| vec![ok(key.clone(), c)]),
        Task::DoublonBand => doublon(cfg, &coupling),
        Task::TriplonBand => triplon(cfg, &coupling),
        Task::DmrgPoint => dmrg(cfg, index, &coupling).map(|c| vec![ok(key.clone(), c)]),
        Task::CheckSuite => Ok(Vec::new()),
    };
    res.unwrap_or_else(|e| vec![failed(key, width, e)])
}

fn teff(cfg: &Config, c: &CouplingSpec) -> qebath::Result<Vec<String>> {
    let (n, modes) = match cfg.n {
        Some(n) => (n, ModeSum::Finite),
        None => (1 << 20, ModeSum::Continuum),
    };
    let bath = BathSpec::new(1.0, n, cfg.d)?;
    let s = solve_two_qe(&bath, c, modes)?;
    let hop = effective_hopping_two_qe(&s).ok();
    Ok(vec![
        cfg.d.to_string(),
        cfg.n.map(|n| n.to_string()).unwrap_or_else(|| "inf".into()),
        opt(s.e_plus),
        opt(s.e_minus),
        flag(s.exists_minus),
        opt(hop.map(|h| h.0)),
        opt(hop.map(|h| h.1)),
        hop.map(|(e0, t)| flag(in_arc_region(e0, t))).unwrap_or_default(),
    ])
}

fn wannier(cfg: &Config, c: &CouplingSpec) -> qebath::Result<Vec<String>> {
    let spec = polariton_bands(&BathSpec::array(1.0, cfg.nb, cfg.d)?, c)?;
    let h = wannier_hoppings(&spec)?;
    Ok(vec![
        cfg.d.to_string(),
        cfg.nb.to_string(),
        num(h.get(0)),
        num(h.get(1)),
        num(h.get(2)),
        num(h.get(3)),
        num(h.max_imag),
    ])
}

fn pair_ground(cfg: &Config, c: &CouplingSpec) -> qebath::Result<Vec<String>> {
    let n = cfg.n.unwrap_or(PAIR_RING);
    let p = solve_pair_poles(&BathSpec::new(1.0, n, cfg.d)?, c)?;
    let t_d = doublon_hopping_two_qe(&p).ok().map(|h| h.1);
    let v = variational_from(&p)?;
    Ok(vec![
        cfg.d.to_string(),
        n.to_string(),
        num(p.ground.energy),
        num(p.ground.z2),
        flag(p.doublon_plus.is_some()),
        opt(p.e_doublon_plus()),
        flag(p.doublon_minus.is_some()),
        opt(p.e_doublon_minus()),
        opt(t_d),
        num(v.energy),
        num(v.overlap_pv),
        num(v.p),
    ])
}

fn ueff(cfg: &Config, c: &CouplingSpec) -> qebath::Result<Vec<String>> {
    let spec = polariton_bands(&BathSpec::array(1.0, cfg.nb, cfg.z)?, c)?;
    let u = u_eff(&spec)?;
    Ok(vec![cfg.z.to_string(), cfg.nb.to_string(), num(u.u_eff), num(u.u_int), num(u.z1), num(u.e0)])
}

fn doublon(cfg: &Config, c: &CouplingSpec) -> qebath::Result<Vec<Row>> {
    let spec = polariton_bands(&BathSpec::array(1.0, cfg.nb, cfg.z)?, c)?;
    let bands = spec.band_count();
    Ok((0..cfg.nb)
        .map(|q| {
            let mut cells = vec![cfg.z.to_string(), cfg.nb.to_string(), q.to_string(), num(spec.momenta[q])];
            for (l, lp) in pairs(bands) {
                let (lo, hi) = pair_continuum(&spec, q, l, lp);
                cells.push(num(lo));
                cells.push(num(hi));
            }
            let e = doublon_band(&spec, q);
            cells.push(flag(gap_window(&spec, q).is_some()));
            cells.push(flag(e.is_some()));
            cells.push(opt(e));
            ok(vec![c.delta, c.omega, q as f64], cells)
        })
        .collect())
}

fn triplon(cfg: &Config, c: &CouplingSpec) -> qebath::Result<Vec<Row>> {
    let spec = polariton_bands(&BathSpec::array(1.0, cfg.nb, cfg.z)?, c)?;
    let ctx = TriplonContext::new(&spec);
    Ok((0..cfg.nb)
        .map(|q| {
            let cont = ctx.continua(q);
            let root = ctx.triplon_energy(q);
            let cells = vec![
                cfg.z.to_string(),
                cfg.nb.to_string(),
                q.to_string(),
                num(spec.momenta[q]),
                num(cont.three_polariton.0),
                num(cont.three_polariton.1),
                flag(cont.polariton_doublon.is_some()),
                opt(cont.polariton_doublon.map(|p| p.0)),
                opt(cont.polariton_doublon.map(|p| p.1)),
                flag(root.is_some()),
                opt(root.as_ref().map(|r| r.energy)),
                opt(root.as_ref().map(|r| r.sigma_min)),
            ];
            ok(vec![c.delta, c.omega, q as f64], cells)
        })
        .collect())
}

pub fn checkpoint_path(cfg: &Config, index: usize) -> PathBuf {
    let stem = cfg.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dmrg".into());
    cfg.out.with_file_name(format!("{stem}.{index:04}.qmps"))
}

fn dmrg(cfg: &Config, index: usize, c: &CouplingSpec) -> qebath::Result<Vec<String>> {
    let chain = ChainSpec::new(cfg.n.unwrap_or(DMRG_CELLS), cfg.z, DMRG_CAP)?;
    let opts = DmrgOptions { seed: cfg.seed, ..DmrgOptions::default() };
    let state = mps::solve(&chain, 1.0, c, &opts)?;
    let diag = mps::diagnose(&state);
    let path = checkpoint_path(cfg, index);
    checkpoint::save(&state, &path)?;
    Ok(vec![
        chain.n_imp.to_string(),
        chain.z.to_string(),
        chain.cap.to_string(),
        chain.bond_max.to_string(),
        num(state.energy),
        flag(state.converged),
        num(state.max_truncation()),
        state.max_bond_dim().to_string(),
        opt(diag.corr_eigs.first().copied()),
        opt(diag.corr_eigs.get(1).copied()),
        opt(diag.exponent.map(|f| f.exponent)),
        opt(diag.central.map(|f| f.c)),
        num(diag.flatness),
        diag.phase.to_string(),
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    ])
}
