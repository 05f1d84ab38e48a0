//! Two-site DMRG on charge-labelled tensors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::block::{self, Bond, SiteTensor, Theta};
use super::mpo::Mpo;

/// Environment: one block map per automaton state, keyed by ket charge.
/// The bra charge is the ket charge plus the state's charge.
pub type Env = Vec<BTreeMap<i32, DMatrix<f64>>>;

fn add_into(map: &mut BTreeMap<i32, DMatrix<f64>>, q: i32, m: DMatrix<f64>) {
    match map.get_mut(&q) {
        Some(acc) => *acc += m,
        None => {
            map.insert(q, m);
        }
    }
}

pub fn left_edge() -> Env {
    let mut m = BTreeMap::new();
    m.insert(0, DMatrix::from_element(1, 1, 1.0));
    vec![m]
}

pub fn right_edge(n: i32) -> Env {
    let mut m = BTreeMap::new();
    m.insert(n, DMatrix::from_element(1, 1, 1.0));
    vec![m]
}

/// Absorb site `s` into a left environment.
pub fn grow_left(env: &Env, a: &SiteTensor, mpo: &Mpo, s: usize) -> Env {
    let site = &mpo.sites[s];
    let dl = &mpo.deltas[s];
    let dr = &mpo.deltas[s + 1];
    let mut cache: BTreeMap<(usize, i32, usize), DMatrix<f64>> = BTreeMap::new();
    let mut out: Env = vec![BTreeMap::new(); site.wr];
    for (ia, ib, op) in &site.terms {
        for (&qk, lm) in &env[*ia] {
            for &(so, si, v) in op {
                let Some(ket) = a.block(qk, si) else { continue };
                let Some(bra) = a.block(qk + dl[*ia], so) else { continue };
                let t = cache.entry((*ia, qk, si)).or_insert_with(|| lm * ket);
                let m = bra.tr_mul(t) * v;
                debug_assert_eq!(qk + si as i32 + dr[*ib], qk + dl[*ia] + so as i32);
                add_into(&mut out[*ib], qk + si as i32, m);
            }
        }
    }
    out
}

/// Absorb site `s` into a right environment.
pub fn grow_right(env: &Env, b: &SiteTensor, mpo: &Mpo, s: usize) -> Env {
    let site = &mpo.sites[s];
    let dl = &mpo.deltas[s];
    let mut cache: BTreeMap<(usize, i32, usize), DMatrix<f64>> = BTreeMap::new();
    let mut out: Env = vec![BTreeMap::new(); site.wl];
    for (ia, ib, op) in &site.terms {
        for (&qr, rm) in &env[*ib] {
            for &(so, si, v) in op {
                let qk = qr - si as i32;
                let Some(ket) = b.block(qk, si) else { continue };
                let Some(bra) = b.block(qk + dl[*ia], so) else { continue };
                let t = cache.entry((*ib, qr, si)).or_insert_with(|| rm * ket.transpose());
                let m = bra * &*t * v;
                add_into(&mut out[*ia], qk, m);
            }
        }
    }
    out
}

fn lookup(op: &[(usize, usize, f64)], d: usize) -> Vec<Option<(usize, f64)>> {
    let mut out = vec![None; d];
    for &(o, i, v) in op {
        debug_assert!(out[i].is_none());
        out[i] = Some((o, v));
    }
    out
}

fn accumulate<K: Ord>(map: &mut BTreeMap<K, DMatrix<f64>>, key: K, m: &DMatrix<f64>, v: f64) {
    match map.get_mut(&key) {
        Some(acc) => acc.zip_apply(m, |a, b| *a += v * b),
        None => {
            map.insert(key, m * v);
        }
    }
}

/// Effective two-site Hamiltonian on sites `s, s+1`.
pub struct Effective<'a> {
    pub left: &'a Env,
    pub right: &'a Env,
    pub mpo: &'a Mpo,
    pub s: usize,
}

impl Effective<'_> {
    pub fn apply(&self, theta: &Theta) -> Theta {
        let w1 = &self.mpo.sites[self.s];
        let w2 = &self.mpo.sites[self.s + 1];
        let d0 = &self.mpo.deltas[self.s];
        let d2 = &self.mpo.deltas[self.s + 2];
        // left environment times theta
        let x: Vec<BTreeMap<(i32, usize, usize), DMatrix<f64>>> = self
            .left
            .par_iter()
            .map(|la| {
                theta
                    .iter()
                    .filter_map(|(&(qk, s1, s2), t)| la.get(&qk).map(|lm| ((qk, s1, s2), lm * t)))
                    .collect()
            })
            .collect();
        // first site operator
        let mut z: Vec<BTreeMap<(i32, usize, usize), DMatrix<f64>>> = vec![BTreeMap::new(); w1.wr];
        for (ia, ib, op) in &w1.terms {
            let look = lookup(op, self.mpo.dims[self.s]);
            for (&(qk, s1, s2), m) in &x[*ia] {
                if let Some((so, v)) = look[s1] {
                    accumulate(&mut z[*ib], (qk + d0[*ia], so, s2), m, v);
                }
            }
        }
        // second site operator
        let mut y: BTreeMap<(usize, i32, usize, usize), DMatrix<f64>> = BTreeMap::new();
        for (ib, ic, op) in &w2.terms {
            let look = lookup(op, self.mpo.dims[self.s + 1]);
            for (&(qb, so1, s2), m) in &z[*ib] {
                if let Some((so, v)) = look[s2] {
                    accumulate(&mut y, (*ic, qb, so1, so), m, v);
                }
            }
        }
        // right environment
        let mut out = block::zeros_like(theta);
        let parts: Vec<((i32, usize, usize), DMatrix<f64>)> = y
            .par_iter()
            .filter_map(|(&(ic, qb, so1, so2), m)| {
                let qkr = qb + (so1 + so2) as i32 - d2[ic];
                self.right[ic].get(&qkr).map(|rm| ((qb, so1, so2), m * rm.transpose()))
            })
            .collect();
        for (k, m) in parts {
            if let Some(acc) = out.get_mut(&k) {
                *acc += m;
            }
        }
        out
    }
}

/// Relative Ritz-value change at which Lanczos stops early.
const RITZ_TOL: f64 = 1e-13;

/// Lowest eigenpair by Lanczos with full reorthogonalization and restarts.
/// Krylov space counts as exhausted below this relative residual.
const BREAKDOWN_TOL: f64 = 1e-10;

pub fn lanczos(h: &Effective, start: &Theta, max_iter: usize, tol: f64) -> (f64, Theta) {
    let mut x = start.clone();
    let n0 = block::norm(&x);
    block::scale(&mut x, 1.0 / n0);
    let mut energy = f64::NAN;
    for _restart in 0..4 {
        let mut basis: Vec<Theta> = vec![x.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut done = false;
        let mut coeffs = vec![1.0];
        for j in 0..max_iter {
            let mut w = h.apply(&basis[j]);
            let a = block::dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = block::dot(&w, v);
                    block::axpy(&mut w, -c, v);
                }
            }
            let b = block::norm(&w);
            let exhausted = b < BREAKDOWN_TOL * a.abs().max(1.0);
            let k = alpha.len();
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &emin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            let stalled = k > 2 && (energy - emin).abs() < RITZ_TOL * emin.abs().max(1.0);
            energy = emin;
            coeffs = eig.eigenvectors.column(imin).iter().copied().collect();
            let residual = b * coeffs[k - 1].abs();
            if residual < tol || exhausted || stalled || j + 1 == max_iter {
                done = residual < tol || exhausted || stalled;
                break;
            }
            block::scale(&mut w, 1.0 / b);
            beta.push(b);
            basis.push(w);
        }
        let mut y = block::zeros_like(&x);
        for (c, v) in coeffs.iter().zip(&basis) {
            block::axpy(&mut y, *c, v);
        }
        let ny = block::norm(&y);
        block::scale(&mut y, 1.0 / ny);
        x = y;
        if done {
            break;
        }
    }
    (energy, x)
}

/// Allowed charge window on every bond for `n` excitations.
pub fn charge_windows(dims: &[usize], n: i32) -> Vec<(i32, i32)> {
    let l = dims.len();
    let mut left = vec![0i32; l + 1];
    for s in 0..l {
        left[s + 1] = left[s] + (dims[s] - 1) as i32;
    }
    let total = left[l];
    (0..=l)
        .map(|b| {
            let right_cap = total - left[b];
            ((n - right_cap).max(0), n.min(left[b]))
        })
        .collect()
}

/// Charge fluctuation kept around uniform filling in the initial state.
const INITIAL_SPREAD: i32 = 2;

/// Random state in the `n`-excitation sector, right-canonical with the
/// orthogonality centre on site 0. Bond charges stay within
/// `INITIAL_SPREAD` of a uniform density profile.
pub fn random_state(dims: &[usize], n: i32, seed: u64) -> Vec<SiteTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let win = charge_windows(dims, n);
    let l = dims.len() as f64;
    let mut bonds: Vec<Bond> = win
        .iter()
        .enumerate()
        .map(|(b, &(lo, hi))| {
            let mid = (n as f64 * b as f64 / l).round() as i32;
            let charges: Vec<i32> = (lo.max(mid - INITIAL_SPREAD)..=hi.min(mid + INITIAL_SPREAD)).collect();
            let dims = vec![1; charges.len()];
            Bond { charges, dims }
        })
        .collect();
    // drop sectors that cannot reach both edges
    for b in 1..bonds.len() {
        let prev = bonds[b - 1].charges.clone();
        let s = b - 1;
        bonds[b].charges.retain(|&q| prev.iter().any(|&p| q - p >= 0 && q - p < dims[s] as i32));
        bonds[b].dims = vec![1; bonds[b].charges.len()];
    }
    for b in (0..bonds.len() - 1).rev() {
        let next = bonds[b + 1].charges.clone();
        bonds[b].charges.retain(|&q| next.iter().any(|&p| p - q >= 0 && p - q < dims[b] as i32));
        bonds[b].dims = vec![1; bonds[b].charges.len()];
    }
    let mut tensors: Vec<SiteTensor> = (0..dims.len())
        .map(|s| {
            let mut blocks = BTreeMap::new();
            for (ql, _) in bonds[s].sectors() {
                for sig in 0..dims[s] {
                    if bonds[s + 1].dim(ql + sig as i32) > 0 {
                        blocks.insert((ql, sig), DMatrix::from_element(1, 1, rng.gen_range(0.5..1.5)));
                    }
                }
            }
            SiteTensor { phys: dims[s], left: bonds[s].clone(), right: bonds[s + 1].clone(), blocks }
        })
        .collect();
    for s in (1..dims.len()).rev() {
        let (b, carry) = right_orthonormalize(&tensors[s]);
        tensors[s] = b;
        absorb_right(&mut tensors[s - 1], &carry);
    }
    let nrm: f64 = tensors[0].blocks.values().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    for m in tensors[0].blocks.values_mut() {
        *m /= nrm;
    }
    tensors
}

/// Split `a = carry * b` with `b` right-orthonormal; `carry` maps the old
/// left bond (per charge) onto the new one.
pub fn right_orthonormalize(a: &SiteTensor) -> (SiteTensor, BTreeMap<i32, DMatrix<f64>>) {
    let mut carry = BTreeMap::new();
    let mut blocks = BTreeMap::new();
    let mut bond = Bond { charges: Vec::new(), dims: Vec::new() };
    for (ql, dl) in a.left.sectors() {
        let cols: Vec<(usize, usize)> = (0..a.phys)
            .filter(|&s| a.block(ql, s).is_some())
            .scan(0, |off, s| {
                let o = *off;
                *off += a.right.dim(ql + s as i32);
                Some((s, o))
            })
            .collect();
        let nc: usize = cols.iter().map(|&(s, _)| a.right.dim(ql + s as i32)).sum();
        if nc == 0 {
            continue;
        }
        let mut m = DMatrix::zeros(dl, nc);
        for &(s, o) in &cols {
            let b = a.block(ql, s).unwrap();
            m.view_mut((0, o), (dl, b.ncols())).copy_from(b);
        }
        let svd = m.svd(true, true);
        let k = svd.singular_values.len();
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let us = DMatrix::from_fn(dl, k, |r, c| u[(r, c)] * svd.singular_values[c]);
        bond.charges.push(ql);
        bond.dims.push(k);
        carry.insert(ql, us);
        for &(s, o) in &cols {
            let w = a.right.dim(ql + s as i32);
            blocks.insert((ql, s), vt.view((0, o), (k, w)).into_owned());
        }
    }
    (SiteTensor { phys: a.phys, left: bond, right: a.right.clone(), blocks }, carry)
}

/// Replace every block `A(ql, s)` by `A(ql, s) * carry[ql + s]`.
pub fn absorb_right(a: &mut SiteTensor, carry: &BTreeMap<i32, DMatrix<f64>>) {
    let mut bond = Bond { charges: Vec::new(), dims: Vec::new() };
    for (q, m) in carry {
        bond.charges.push(*q);
        bond.dims.push(m.ncols());
    }
    let mut blocks = BTreeMap::new();
    for (&(ql, s), m) in &a.blocks {
        if let Some(c) = carry.get(&(ql + s as i32)) {
            blocks.insert((ql, s), m * c);
        }
    }
    a.blocks = blocks;
    a.right = bond;
}

/// Replace every block `B(q, s)` by `carry[q] * B(q, s)`.
pub fn absorb_left(b: &mut SiteTensor, carry: &BTreeMap<i32, DMatrix<f64>>) {
    let mut bond = Bond { charges: Vec::new(), dims: Vec::new() };
    for (q, m) in carry {
        bond.charges.push(*q);
        bond.dims.push(m.nrows());
    }
    let mut blocks = BTreeMap::new();
    for (&(q, s), m) in &b.blocks {
        if let Some(c) = carry.get(&q) {
            blocks.insert((q, s), c * m);
        }
    }
    b.blocks = blocks;
    b.left = bond;
}

/// Split `a = u * carry` with `u` left-orthonormal; returns `u`, the carry
/// per right charge and the Schmidt values of the right bond.
pub fn left_orthonormalize(a: &SiteTensor) -> (SiteTensor, BTreeMap<i32, DMatrix<f64>>, Vec<f64>) {
    let mut rows_by_q: BTreeMap<i32, Vec<(i32, usize)>> = BTreeMap::new();
    for &(ql, s) in a.blocks.keys() {
        rows_by_q.entry(ql + s as i32).or_default().push((ql, s));
    }
    let mut carry = BTreeMap::new();
    let mut blocks = BTreeMap::new();
    let mut schmidt = Vec::new();
    let mut bond = Bond { charges: Vec::new(), dims: Vec::new() };
    for (qr, rows) in rows_by_q {
        let dr = a.right.dim(qr);
        let nr: usize = rows.iter().map(|&(ql, _)| a.left.dim(ql)).sum();
        let mut m = DMatrix::zeros(nr, dr);
        let mut off = 0;
        for &(ql, s) in &rows {
            let b = a.block(ql, s).unwrap();
            m.view_mut((off, 0), (b.nrows(), dr)).copy_from(b);
            off += b.nrows();
        }
        let svd = m.svd(true, true);
        let k = svd.singular_values.len();
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        schmidt.extend(svd.singular_values.iter().copied());
        carry.insert(qr, DMatrix::from_fn(k, dr, |r, c| svd.singular_values[r] * vt[(r, c)]));
        bond.charges.push(qr);
        bond.dims.push(k);
        off = 0;
        for &(ql, s) in &rows {
            let dl = a.left.dim(ql);
            blocks.insert((ql, s), u.view((off, 0), (dl, k)).into_owned());
            off += dl;
        }
    }
    (SiteTensor { phys: a.phys, left: a.left.clone(), right: bond, blocks }, carry, schmidt)
}

/// Sweep controls.
#[derive(Debug, Clone)]
pub struct SweepParams {
    pub bond_max: usize,
    pub min_sweeps: usize,
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub truncation_tol: f64,
    pub cutoff: f64,
    pub seed: u64,
}

pub struct SweepOutcome {
    pub tensors: Vec<SiteTensor>,
    pub energies: Vec<f64>,
    pub truncation: Vec<f64>,
    pub converged: bool,
    pub last_delta: f64,
}

fn schedule(sweep: usize, bond_max: usize) -> usize {
    let d = match sweep {
        0 | 1 => 32,
        2 | 3 => 64,
        _ => usize::MAX,
    };
    d.min(bond_max)
}

pub fn run(mpo: &Mpo, n: i32, p: &SweepParams) -> SweepOutcome {
    let l = mpo.dims.len();
    let mut t = random_state(&mpo.dims, n, p.seed);
    let mut lenv: Vec<Env> = vec![Vec::new(); l + 1];
    let mut renv: Vec<Env> = vec![Vec::new(); l + 1];
    lenv[0] = left_edge();
    renv[l] = right_edge(n);
    for s in (2..l).rev() {
        renv[s] = grow_right(&renv[s + 1], &t[s], mpo, s);
    }
    let mut energies: Vec<f64> = Vec::new();
    let mut truncation = vec![0.0; l + 1];
    let mut converged = false;
    let mut last_delta = f64::INFINITY;
    for sweep in 0..p.max_sweeps {
        let dmax = schedule(sweep, p.bond_max);
        let mut energy = f64::NAN;
        let mut sweep_trunc = vec![0.0f64; l + 1];
        for right_moving in [true, false] {
            let sites: Vec<usize> = if right_moving { (0..l - 1).collect() } else { (0..l - 1).rev().collect() };
            for s in sites {
                let structure = block::theta_structure(&t[s].left, t[s].phys, t[s + 1].phys, &t[s + 1].right);
                let theta0 = block::merge(&t[s], &t[s + 1], Some(&structure));
                let h = Effective { left: &lenv[s], right: &renv[s + 2], mpo, s };
                let (e, theta) = lanczos(&h, &theta0, 30, 1e-7);
                energy = e;
                let sp = block::split(&theta, &t[s].left, &t[s + 1].right, t[s].phys, t[s + 1].phys, dmax, p.cutoff, right_moving);
                sweep_trunc[s + 1] = sweep_trunc[s + 1].max(sp.truncation);
                t[s] = sp.left;
                t[s + 1] = sp.right;
                if right_moving {
                    lenv[s + 1] = grow_left(&lenv[s], &t[s], mpo, s);
                } else {
                    renv[s + 1] = grow_right(&renv[s + 2], &t[s + 1], mpo, s + 1);
                }
            }
        }
        if let Some(&prev) = energies.last() {
            last_delta = (energy - prev).abs();
        }
        energies.push(energy);
        truncation = sweep_trunc;
        let tmax = truncation.iter().cloned().fold(0.0, f64::max);
        if sweep + 1 >= p.min_sweeps && last_delta < p.energy_tol && tmax < p.truncation_tol {
            converged = true;
            break;
        }
    }
    SweepOutcome { tensors: t, energies, truncation, converged, last_delta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ed::{build_sector, sector_spectrum, Lattice};
    use crate::CouplingSpec;

    #[test]
    fn charge_windows_respect_capacities() {
        let w = charge_windows(&[2, 3, 2], 2);
        assert_eq!(w, vec![(0, 0), (0, 1), (1, 2), (2, 2)]);
    }

    #[test]
    fn random_state_is_normalized_and_right_canonical() {
        let t = random_state(&[2, 4, 2, 4, 2], 3, 7);
        let theta = block::merge(&t[0], &t[1], None);
        assert!((block::norm(&theta) - 1.0).abs() < 1e-12);
        for b in &t[1..] {
            for (q, d) in b.left.sectors() {
                let mut acc = DMatrix::<f64>::zeros(d, d);
                for s in 0..b.phys {
                    if let Some(m) = b.block(q, s) {
                        acc += m * m.transpose();
                    }
                }
                assert!((acc - DMatrix::identity(d, d)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn small_chain_matches_dense_sector() {
        let c = CouplingSpec::new(-0.5, 0.8).unwrap();
        let lat = Lattice::open_array(3, 1, 1.0, &c);
        let mpo = Mpo::from_lattice(&lat, 2);
        let p = SweepParams {
            bond_max: 64,
            min_sweeps: 4,
            max_sweeps: 20,
            energy_tol: 1e-11,
            truncation_tol: 1e-10,
            cutoff: 1e-12,
            seed: 1,
        };
        let out = run(&mpo, 3, &p);
        let basis = build_sector(&lat, 3, 2, None).unwrap();
        let ed = sector_spectrum(&lat, &basis, 1, false).unwrap();
        assert!((out.energies.last().unwrap() - ed.eigenvalues[0]).abs() < 1e-9);
    }
}

