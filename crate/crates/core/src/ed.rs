//! Exact diagonalization in fixed-excitation sectors.
//!
//! A lattice is a list of typed sites (hard-core emitters or capped bosons)
//! with on-site energies and hopping bonds. Sectors conserve the total
//! excitation number and may additionally be resolved by the momentum of a
//! unit-cell translation.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{BathSpec, CouplingSpec};
use crate::error::{Error, Result};

pub const MAX_DIMENSION: usize = 5_000_000;
pub const DENSE_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteKind {
    Emitter,
    Boson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice {
    pub kinds: Vec<SiteKind>,
    pub onsite: Vec<f64>,
    /// `(i, j, t)` adds `t (c_i^dag c_j + h.c.)`.
    pub bonds: Vec<(usize, usize, f64)>,
    /// Image of every site under a one-cell translation, if the lattice is periodic.
    pub translation: Option<Vec<usize>>,
    pub cells: usize,
}

impl Lattice {
    /// Ring of `N` bath sites with emitters on sites `0` and `d`. Emitters are
    /// sites 0 and 1, bath site `n` is site `2 + n`.
    pub fn emitter_pair(bath: &BathSpec, c: &CouplingSpec) -> Self {
        let n = bath.n;
        let mut kinds = vec![SiteKind::Emitter, SiteKind::Emitter];
        kinds.extend(std::iter::repeat_n(SiteKind::Boson, n));
        let mut onsite = vec![c.delta, c.delta];
        onsite.extend(std::iter::repeat_n(2.0 * bath.j, n));
        let mut bonds: Vec<_> = (0..n).map(|s| (2 + s, 2 + (s + 1) % n, -bath.j)).collect();
        bonds.push((0, 2, c.omega));
        bonds.push((1, 2 + bath.spacing % n, c.omega));
        Self { kinds, onsite, bonds, translation: None, cells: 1 }
    }

    /// Periodic array, one emitter every `z` bath sites. Cell `c` occupies
    /// sites `c (z+1) .. (c+1)(z+1)` as `[emitter, b_0, .., b_{z-1}]`.
    pub fn periodic_array(bath: &BathSpec, c: &CouplingSpec) -> Self {
        let (kinds, onsite, mut bonds) = cell_chain(bath.cells(), bath.spacing, bath.j, c);
        let z = bath.spacing;
        let cells = bath.cells();
        let w = z + 1;
        // close the ring
        bonds.push(((cells - 1) * w + z, 1, -bath.j));
        let total = cells * w;
        let translation = Some((0..total).map(|s| (s + w) % total).collect());
        Self { kinds, onsite, bonds, translation, cells }
    }

    /// Open chain of `cells` unit cells with the same layout as the periodic array.
    pub fn open_array(cells: usize, z: usize, j: f64, c: &CouplingSpec) -> Self {
        let (kinds, onsite, bonds) = cell_chain(cells, z, j, c);
        Self { kinds, onsite, bonds, translation: None, cells }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

type Chain = (Vec<SiteKind>, Vec<f64>, Vec<(usize, usize, f64)>);

fn cell_chain(cells: usize, z: usize, j: f64, c: &CouplingSpec) -> Chain {
    let w = z + 1;
    let mut kinds = Vec::with_capacity(cells * w);
    let mut onsite = Vec::with_capacity(cells * w);
    let mut bonds = Vec::new();
    for cell in 0..cells {
        let base = cell * w;
        kinds.push(SiteKind::Emitter);
        onsite.push(c.delta);
        for _ in 0..z {
            kinds.push(SiteKind::Boson);
            onsite.push(2.0 * j);
        }
        bonds.push((base, base + 1, c.omega));
        for n in 0..z.saturating_sub(1) {
            bonds.push((base + 1 + n, base + 2 + n, -j));
        }
        if cell + 1 < cells {
            bonds.push((base + z, base + w + 1, -j));
        }
    }
    (kinds, onsite, bonds)
}

/// Bits per site needed to store occupations up to `cap`.
fn bits_for(cap: usize) -> u32 {
    (usize::BITS - cap.max(1).leading_zeros()).max(1)
}

fn get(cfg: u128, s: usize, bits: u32) -> u32 {
    let mask = (1u128 << bits) - 1;
    ((cfg >> (bits as usize * s)) & mask) as u32
}

fn set(cfg: u128, s: usize, v: u32, bits: u32) -> u128 {
    let sh = bits as usize * s;
    let mask = (1u128 << bits) - 1;
    (cfg & !(mask << sh)) | ((v as u128) << sh)
}

/// Enumerated configurations of one sector.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub sites: usize,
    pub n_exc: usize,
    pub cap: usize,
    bits: u32,
    /// `Some(kappa)` for momentum `2 pi kappa / cells`.
    pub momentum: Option<usize>,
    /// Representative configurations.
    pub states: Vec<u128>,
    /// Orbit length of each representative under translation.
    pub periods: Vec<usize>,
    index: HashMap<u128, usize>,
    /// For momentum sectors: map from any configuration to (representative, shift).
    orbit: HashMap<u128, (u128, usize)>,
}

impl SectorBasis {
    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn occupation(&self, state: usize, site: usize) -> u32 {
        get(self.states[state], site, self.bits)
    }

    pub fn occupations(&self, state: usize) -> Vec<u32> {
        (0..self.sites).map(|s| get(self.states[state], s, self.bits)).collect()
    }

    /// Index of a configuration given as a site-occupation list.
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        let cfg = occ.iter().enumerate().fold(0u128, |acc, (s, &v)| set(acc, s, v, self.bits));
        self.index.get(&cfg).copied()
    }
}

fn count_configs(kinds: &[SiteKind], n_exc: usize, cap: usize) -> usize {
    // dp over sites of the number of ways to place excitations
    let mut ways = vec![0usize; n_exc + 1];
    ways[0] = 1;
    for k in kinds {
        let m = match k {
            SiteKind::Emitter => 1,
            SiteKind::Boson => cap,
        };
        let mut next = vec![0usize; n_exc + 1];
        for (have, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for add in 0..=m.min(n_exc - have) {
                next[have + add] = next[have + add].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[n_exc]
}

fn enumerate(kinds: &[SiteKind], n_exc: usize, cap: usize) -> Vec<u128> {
    let mut out = Vec::new();
    fn rec(kinds: &[SiteKind], s: usize, left: usize, cap: usize, cfg: u128, out: &mut Vec<u128>) {
        let bits = bits_for(cap);
        if s == kinds.len() {
            if left == 0 {
                out.push(cfg);
            }
            return;
        }
        let m = match kinds[s] {
            SiteKind::Emitter => 1,
            SiteKind::Boson => cap,
        };
        for v in 0..=m.min(left) {
            rec(kinds, s + 1, left - v, cap, set(cfg, s, v as u32, bits), out);
        }
    }
    rec(kinds, 0, n_exc, cap, 0, &mut out);
    out
}

fn translate(cfg: u128, perm: &[usize], bits: u32) -> u128 {
    let mut out = 0u128;
    for (s, &t) in perm.iter().enumerate() {
        let v = get(cfg, s, bits);
        if v != 0 {
            out = set(out, t, v, bits);
        }
    }
    out
}

/// Enumerate a sector, optionally momentum resolved.
pub fn build_sector(lattice: &Lattice, n_exc: usize, cap: usize, momentum: Option<usize>) -> Result<SectorBasis> {
    let bits = bits_for(cap);
    if lattice.len() * bits as usize > 128 {
        return Err(Error::InvalidParameter(format!(
            "{} sites at {bits} bits each do not fit a 128-bit configuration",
            lattice.len()
        )));
    }
    let dimension = count_configs(&lattice.kinds, n_exc, cap);
    if dimension > MAX_DIMENSION {
        return Err(Error::SectorTooLarge { dimension, bound: MAX_DIMENSION });
    }
    let all = enumerate(&lattice.kinds, n_exc, cap);
    let sites = lattice.len();
    match momentum {
        None => {
            let index = all.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            let periods = vec![1; all.len()];
            Ok(SectorBasis {
                sites,
                n_exc,
                cap,
                bits,
                momentum,
                states: all,
                periods,
                index,
                orbit: HashMap::new(),
            })
        }
        Some(kappa) => {
            let perm = lattice
                .translation
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("lattice has no translation symmetry".into()))?;
            let cells = lattice.cells;
            let mut orbit = HashMap::with_capacity(all.len());
            let mut states = Vec::new();
            let mut periods = Vec::new();
            for &c in &all {
                if orbit.contains_key(&c) {
                    continue;
                }
                let mut cur = c;
                let mut period = 0;
                loop {
                    orbit.insert(cur, (c, period));
                    period += 1;
                    cur = translate(cur, perm, bits);
                    if cur == c {
                        break;
                    }
                }
                // compatible iff kappa * period is a multiple of cells
                if (kappa * period) % cells == 0 {
                    states.push(c);
                    periods.push(period);
                }
            }
            // orbit maps T^shift |rep> = |cfg>
            let index = states.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            Ok(SectorBasis { sites, n_exc, cap, bits, momentum, states, periods, index, orbit })
        }
    }
}

/// Sparse Hermitian matrix in coordinate form, rows sorted.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    pub dimension: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SectorHamiltonian {
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
    }

    pub fn dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest `|H_rc - conj(H_cr)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut map: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(r, c, v) in &self.entries {
            *map.entry((r, c)).or_default() += v;
        }
        map.iter()
            .map(|(&(r, c), v)| {
                let t = map.get(&(c, r)).copied().unwrap_or_default();
                (v - t.conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Result of acting with the Hamiltonian on one configuration.
fn act(lattice: &Lattice, cap: usize, cfg: u128, out: &mut Vec<(u128, f64)>) {
    out.clear();
    let bits = bits_for(cap);
    let diag: f64 = (0..lattice.len()).map(|s| lattice.onsite[s] * get(cfg, s, bits) as f64).sum();
    out.push((cfg, diag));
    let max_occ = |s: usize| match lattice.kinds[s] {
        SiteKind::Emitter => 1,
        SiteKind::Boson => cap as u32,
    };
    for &(a, b, t) in &lattice.bonds {
        for (i, j) in [(a, b), (b, a)] {
            // c_i^dag c_j
            let (ni, nj) = (get(cfg, i, bits), get(cfg, j, bits));
            if nj == 0 || ni >= max_occ(i) {
                continue;
            }
            let amp = t * (((ni + 1) * nj) as f64).sqrt();
            let next = set(set(cfg, i, ni + 1, bits), j, nj - 1, bits);
            out.push((next, amp));
        }
    }
}

pub fn sector_hamiltonian(lattice: &Lattice, basis: &SectorBasis) -> Result<SectorHamiltonian> {
    let dim = basis.dimension();
    let mut entries = Vec::new();
    let mut buf = Vec::new();
    let cells = lattice.cells.max(1);
    for (col, &cfg) in basis.states.iter().enumerate() {
        act(lattice, basis.cap, cfg, &mut buf);
        for &(next, amp) in &buf {
            if amp == 0.0 {
                continue;
            }
            match basis.momentum {
                None => {
                    let row = *basis.index.get(&next).ok_or_else(|| {
                        Error::InvalidParameter("Hamiltonian left the excitation sector".into())
                    })?;
                    entries.push((row, col, Complex64::new(amp, 0.0)));
                }
                Some(kappa) => {
                    let &(rep, shift) = basis.orbit.get(&next).ok_or_else(|| {
                        Error::InvalidParameter("Hamiltonian left the excitation sector".into())
                    })?;
                    let Some(&row) = basis.index.get(&rep) else { continue };
                    let q = 2.0 * PI * kappa as f64 / cells as f64;
                    let ratio = (basis.periods[col] as f64 / basis.periods[row] as f64).sqrt();
                    let phase = Complex64::from_polar(ratio, q * shift as f64);
                    entries.push((row, col, amp * phase));
                }
            }
        }
    }
    entries.sort_by_key(|e| (e.0, e.1));
    // merge duplicates
    let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(entries.len());
    for e in entries {
        match merged.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => merged.push(e),
        }
    }
    Ok(SectorHamiltonian { dimension: dim, entries: merged })
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    pub hermiticity_residual: f64,
}

/// Lowest `count` levels of a sector.
pub fn sector_spectrum(lattice: &Lattice, basis: &SectorBasis, count: usize, vectors: bool) -> Result<SpectrumReport> {
    let h = sector_hamiltonian(lattice, basis)?;
    let residual = h.hermiticity_residual();
    if residual > 1e-12 {
        return Err(Error::NotHermitian(residual));
    }
    let dim = h.dimension;
    if dim == 0 {
        return Ok(SpectrumReport { eigenvalues: vec![], eigenvectors: vectors.then(Vec::new), hermiticity_residual: 0.0 });
    }
    if dim < DENSE_LIMIT {
        let (vals, vecs) = dense_eigh(&h.dense());
        let take = count.min(dim);
        let eigenvectors = vectors.then(|| vecs.into_iter().take(take).collect());
        Ok(SpectrumReport { eigenvalues: vals[..take].to_vec(), eigenvectors, hermiticity_residual: residual })
    } else {
        let (vals, vecs) = lanczos(&h, count.min(dim), vectors, 1e-11, 3000)?;
        Ok(SpectrumReport { eigenvalues: vals, eigenvectors: vecs, hermiticity_residual: residual })
    }
}

/// Eigen-decomposition of a Hermitian matrix, ascending.
pub fn dense_eigh(m: &DMatrix<Complex64>) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let all_real = m.iter().all(|v| v.im == 0.0);
    let n = m.nrows();
    if all_real {
        let r = DMatrix::from_fn(n, n, |i, j| m[(i, j)].re);
        let eig = nalgebra::SymmetricEigen::new(r);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        (vals, vecs)
    } else {
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
        (vals, vecs)
    }
}

/// Lowest eigenpairs one at a time: Lanczos with full reorthogonalization,
/// deflated against the pairs already found so degenerate levels resolve.
fn lanczos(
    h: &SectorHamiltonian,
    count: usize,
    vectors: bool,
    tol: f64,
    budget: usize,
) -> Result<(Vec<f64>, Option<Vec<Vec<Complex64>>>)> {
    use rand::{Rng, SeedableRng};
    let n = h.dimension;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut found: Vec<Vec<Complex64>> = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..count {
        let start: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0)).collect();
        let (e, v) = lowest_pair(h, start, &found, tol, budget)?;
        vals.push(e);
        found.push(v);
    }
    Ok((vals, vectors.then_some(found)))
}

fn project_out(w: &mut [Complex64], against: &[Vec<Complex64>]) {
    for b in against {
        let ov: Complex64 = b.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum();
        w.iter_mut().zip(b).for_each(|(y, x)| *y -= ov * x);
    }
}

fn lowest_pair(
    h: &SectorHamiltonian,
    mut v: Vec<Complex64>,
    deflate: &[Vec<Complex64>],
    tol: f64,
    budget: usize,
) -> Result<(f64, Vec<Complex64>)> {
    let n = h.dimension;
    project_out(&mut v, deflate);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut prev = f64::INFINITY;
    let limit = budget.min(n - deflate.len());
    loop {
        basis.push(v.clone());
        h.apply(&v, &mut w);
        alpha.push(v.iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum::<f64>());
        project_out(&mut w, deflate);
        project_out(&mut w, &basis);
        project_out(&mut w, &basis);
        let bnorm = norm(&w);
        let m = alpha.len();
        let done = bnorm < 1e-12 || m >= limit;
        if m % 8 == 0 || done {
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = nalgebra::SymmetricEigen::new(t);
            let k = (0..m)
                .min_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap())
                .unwrap();
            let e = eig.eigenvalues[k];
            // residual norm of the Ritz pair
            let res = bnorm * eig.eigenvectors[(m - 1, k)].abs();
            if res < tol * (1.0 + e.abs()) || (e - prev).abs() < 1e-15 || done {
                if !done && res > 1e-6 {
                    return Err(Error::EigensolverNotConverged(budget));
                }
                let y = eig.eigenvectors.column(k);
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for (i, b) in basis.iter().enumerate() {
                    out.iter_mut().zip(b).for_each(|(o, x)| *o += y[i] * x);
                }
                let on = norm(&out);
                out.iter_mut().for_each(|x| *x /= on);
                return Ok((e, out));
            }
            prev = e;
        }
        if done {
            return Err(Error::EigensolverNotConverged(budget));
        }
        beta.push(bnorm);
        v = w.iter().map(|x| x / bnorm).collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub analytic: f64,
    pub numeric: f64,
    pub deviation: f64,
    pub isolated: bool,
    pub pass: bool,
}

/// Match every analytic level to the nearest numerical level. Levels inside
/// any of the given continua are classified as not isolated and always pass.
pub fn compare(analytic: &[f64], numeric: &[f64], tolerance: f64, continua: &[(f64, f64)]) -> Vec<ComparisonRow> {
    analytic
        .iter()
        .map(|&a| {
            let numeric_near = numeric
                .iter()
                .copied()
                .min_by(|x, y| (x - a).abs().partial_cmp(&(y - a).abs()).unwrap())
                .unwrap_or(f64::NAN);
            let deviation = (numeric_near - a).abs();
            let isolated = !continua.iter().any(|&(lo, hi)| a >= lo && a <= hi);
            let pass = !isolated || deviation <= tolerance;
            ComparisonRow { analytic: a, numeric: numeric_near, deviation, isolated, pass }
        })
        .collect()
}

/// Norm of a state vector.
pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|<a|b>|` for normalized inputs.
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

/// Largest overlap of `state` with the span of eigenvectors whose energies lie
/// within `window` of `energy`.
pub fn subspace_overlap(state: &[Complex64], report: &SpectrumReport, energy: f64, window: f64) -> f64 {
    let Some(vecs) = &report.eigenvectors else { return 0.0 };
    let n = norm(state);
    let w2: f64 = report
        .eigenvalues
        .iter()
        .zip(vecs)
        .filter(|(e, _)| (*e - energy).abs() <= window)
        .map(|(_, v)| overlap(v, state).powi(2))
        .sum();
    w2.sqrt() / n
}

/// Apply `H` to a state, for residual checks.
pub fn apply_dense(lattice: &Lattice, basis: &SectorBasis, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let h = sector_hamiltonian(lattice, basis)?;
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    h.apply(x, &mut y);
    Ok(y)
}

pub fn to_dvector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cs(d: f64, o: f64) -> CouplingSpec {
        CouplingSpec::new(d, o).unwrap()
    }

    #[test]
    fn counting() {
        let bath = BathSpec::new(1.0, 4, 1).unwrap();
        let lat = Lattice::emitter_pair(&bath, &cs(0.0, 1.0));
        assert_eq!(build_sector(&lat, 1, 1, None).unwrap().dimension(), 6);
        // one emitter, two bath sites, two excitations
        let lat = Lattice {
            kinds: vec![SiteKind::Emitter, SiteKind::Boson, SiteKind::Boson],
            onsite: vec![0.0; 3],
            bonds: vec![],
            translation: None,
            cells: 1,
        };
        assert_eq!(build_sector(&lat, 2, 2, None).unwrap().dimension(), 5);
        let arr = Lattice::periodic_array(&BathSpec::array(1.0, 8, 1).unwrap(), &cs(0.0, 1.0));
        let b = build_sector(&arr, 3, 3, None).unwrap();
        assert_eq!(b.dimension(), count_configs(&arr.kinds, 3, 3));
        assert!(b.dimension() <= MAX_DIMENSION);
    }

    #[test]
    fn too_large_sector_is_refused() {
        let arr = Lattice::periodic_array(&BathSpec::array(1.0, 10, 2).unwrap(), &cs(0.0, 1.0));
        assert!(matches!(build_sector(&arr, 8, 8, None), Err(Error::SectorTooLarge { .. })));
    }

    #[test]
    fn decoupled_single_excitation() {
        let bath = BathSpec::new(1.0, 8, 3).unwrap();
        let lat = Lattice::emitter_pair(&bath, &cs(-0.7, 0.0));
        let b = build_sector(&lat, 1, 1, None).unwrap();
        let r = sector_spectrum(&lat, &b, 10, false).unwrap();
        let mut expect: Vec<f64> = (0..8).map(|m| bath.mode_energy(m)).collect();
        expect.extend([-0.7, -0.7]);
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in expect.iter().zip(&r.eigenvalues) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_sectors_reassemble_full_spectrum() {
        let bath = BathSpec::array(1.0, 4, 2).unwrap();
        let lat = Lattice::periodic_array(&bath, &cs(0.3, 0.8));
        let full = build_sector(&lat, 2, 2, None).unwrap();
        let all = sector_spectrum(&lat, &full, usize::MAX, false).unwrap().eigenvalues;
        let mut parts = Vec::new();
        for k in 0..4 {
            let b = build_sector(&lat, 2, 2, Some(k)).unwrap();
            parts.extend(sector_spectrum(&lat, &b, usize::MAX, false).unwrap().eigenvalues);
        }
        parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(parts.len(), all.len());
        for (a, b) in parts.iter().zip(&all) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn opposite_momenta_are_degenerate() {
        let bath = BathSpec::array(1.0, 5, 1).unwrap();
        let lat = Lattice::periodic_array(&bath, &cs(-0.5, 1.1));
        let s1 = sector_spectrum(&lat, &build_sector(&lat, 2, 2, Some(1)).unwrap(), 100, false).unwrap();
        let s4 = sector_spectrum(&lat, &build_sector(&lat, 2, 2, Some(4)).unwrap(), 100, false).unwrap();
        for (a, b) in s1.eigenvalues.iter().zip(&s4.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let bath = BathSpec::array(1.0, 4, 2).unwrap();
        let lat = Lattice::periodic_array(&bath, &cs(0.1, 0.9));
        let b = build_sector(&lat, 3, 3, None).unwrap();
        let h = sector_hamiltonian(&lat, &b).unwrap();
        let (dv, _) = dense_eigh(&h.dense());
        let (lv, vecs) = lanczos(&h, 3, true, 1e-12, 2000).unwrap();
        for i in 0..3 {
            assert!((dv[i] - lv[i]).abs() < 1e-9);
        }
        let v = &vecs.unwrap()[0];
        let mut hv = vec![Complex64::new(0.0, 0.0); v.len()];
        h.apply(v, &mut hv);
        let res: f64 = hv.iter().zip(v).map(|(a, b)| (a - lv[0] * b).norm_sqr()).sum::<f64>().sqrt();
        assert!(res < 1e-6);
    }

    #[test]
    fn comparison_table() {
        let rows = compare(&[1.0, 2.0], &[1.0, 2.0], 0.0, &[]);
        assert!(rows.iter().all(|r| r.pass && r.isolated));
        let rows = compare(&[1.0, 2.0], &[1.0 + 1e-6, 2.0 + 1e-6], 1e-8, &[]);
        assert!(rows.iter().all(|r| !r.pass));
        let rows = compare(&[1.0], &[5.0], 1e-8, &[(0.5, 1.5)]);
        assert!(rows[0].pass && !rows[0].isolated);
    }

    proptest! {
        #[test]
        fn hamiltonian_conserves_excitations(delta in -2.0f64..2.0, omega in 0.0f64..2.0, n_exc in 1usize..4) {
            let bath = BathSpec::array(1.0, 3, 2).unwrap();
            let lat = Lattice::periodic_array(&bath, &cs(delta, omega));
            let basis = build_sector(&lat, n_exc, n_exc, None).unwrap();
            let mut buf = Vec::new();
            for &cfg in basis.states.iter().take(50) {
                act(&lat, n_exc, cfg, &mut buf);
                for &(next, _) in &buf {
                    let total: u32 = (0..lat.len()).map(|s| get(next, s, bits_for(n_exc))).sum();
                    prop_assert_eq!(total as usize, n_exc);
                    for s in 0..lat.len() {
                        if lat.kinds[s] == SiteKind::Emitter {
                            prop_assert!(get(next, s, bits_for(n_exc)) <= 1);
                        }
                    }
                }
            }
            let h = sector_hamiltonian(&lat, &basis).unwrap();
            prop_assert!(h.hermiticity_residual() < 1e-12);
        }
    }
}
