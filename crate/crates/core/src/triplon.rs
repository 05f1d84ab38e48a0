//! Three excitations on the periodic emitter array: the M-matrix built from
//! the two-body T-matrix, triplon roots of `det[M(E) - I]`, the triplon
//! wavefunctions and the three-excitation scattering continua.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_pair::{doublon_band_scan, DoublonBand, PairBubble, WINDOW_MARGIN};
use crate::error::{Error, Result};
use crate::fourier::{hoppings_from_band, Hoppings};
use crate::roots::bisect;
use crate::single::PolaritonSpectrum;

const DENOMINATOR_GUARD: f64 = 1e-9;
const SCAN_POINTS: usize = 200;
/// Largest smallest-singular-value accepted at a root.
pub const SIGMA_TOL: f64 = 1e-8;
/// Largest disagreement between the sign-scan root and the singular-value dip.
pub const ROOT_AGREEMENT: f64 = 1e-8;
/// Largest emitter double-occupancy amplitude accepted at a root.
pub const HARD_CORE_TOL: f64 = 1e-6;

/// Polariton spectrum plus the pair bubbles of every total momentum.
#[derive(Debug, Clone)]
pub struct TriplonContext {
    pub spec: PolaritonSpectrum,
    pub bubbles: Vec<PairBubble>,
    pub doublons: DoublonBand,
}

/// `M_{p l1, k l}(E)` at total momentum index `q`. Rows and columns are
/// indexed by `m (z + 1) + lambda`.
#[derive(Debug, Clone)]
pub struct MMatrix {
    pub q: usize,
    pub energy: f64,
    pub matrix: DMatrix<f64>,
}

impl MMatrix {
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    fn shifted(&self) -> DMatrix<f64> {
        &self.matrix - DMatrix::<f64>::identity(self.dimension(), self.dimension())
    }

    /// Sign and `ln|det|` of `M - I`, from the LU factors.
    pub fn det_minus_identity(&self) -> (f64, f64) {
        let lu = self.shifted().lu();
        let mut sign: f64 = lu.p().determinant();
        let mut log = 0.0;
        for d in lu.u().diagonal().iter() {
            if *d == 0.0 {
                return (0.0, f64::NEG_INFINITY);
            }
            sign *= d.signum();
            log += d.abs().ln();
        }
        (sign, log)
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.shifted().singular_values().iter().copied().collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s
    }

    /// Smallest singular value of `M - I` and its right singular vector.
    pub fn null_vector(&self) -> (f64, Vec<f64>) {
        let svd = self.shifted().svd(false, true);
        let vt = svd.v_t.expect("requested");
        let (i, s) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, s)| (i, *s))
            .unwrap();
        let mut v: Vec<f64> = vt.row(i).iter().copied().collect();
        // fix the overall sign by the largest component
        let big = v.iter().copied().fold(0.0, |a: f64, x| if x.abs() > a.abs() { x } else { a });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        (s, v)
    }
}

/// An accepted root of `det[M(E) - I] = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriplonRoot {
    pub q: usize,
    pub energy: f64,
    /// Location of the smallest-singular-value minimum.
    pub svd_energy: f64,
    pub sigma_min: f64,
    /// `f_{k lambda}`, unit norm.
    pub null_vector: Vec<f64>,
}

/// Three-polariton and polariton-doublon continua at one momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeContinua {
    pub three_polariton: (f64, f64),
    /// `None` when the doublon is missing at every `q - p`.
    pub polariton_doublon: Option<(f64, f64)>,
}

impl ThreeContinua {
    /// Gap between the two continua, if open.
    pub fn midgap(&self) -> Option<(f64, f64)> {
        let (_, top) = self.three_polariton;
        let (bottom, _) = self.polariton_doublon?;
        (bottom > top).then_some((top, bottom))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriplonBand {
    pub momenta: Vec<f64>,
    pub energies: Vec<Option<f64>>,
    pub continua: Vec<ThreeContinua>,
}

impl TriplonBand {
    pub fn is_complete(&self) -> bool {
        self.energies.iter().all(|e| e.is_some())
    }
}

fn wrap(spec: &PolaritonSpectrum, m: isize) -> usize {
    m.rem_euclid(spec.cells() as isize) as usize
}

fn third(spec: &PolaritonSpectrum, q: usize, m1: usize, m2: usize) -> usize {
    wrap(spec, q as isize - m1 as isize - m2 as isize)
}

/// Range of `E_1(p1) + E_1(p2) + E_1(q - p1 - p2)` and of `E_1(p) + E_2B(q - p)`.
pub fn three_excitation_continua(spec: &PolaritonSpectrum, band2: &DoublonBand, q: usize) -> ThreeContinua {
    let nb = spec.cells();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m1 in 0..nb {
        for m2 in 0..nb {
            let e = spec.energy(m1, 0) + spec.energy(m2, 0) + spec.energy(third(spec, q, m1, m2), 0);
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    let mut dlo = f64::INFINITY;
    let mut dhi = f64::NEG_INFINITY;
    for m in 0..nb {
        if let Some(e2) = band2.energies[wrap(spec, q as isize - m as isize)] {
            let e = spec.energy(m, 0) + e2;
            dlo = dlo.min(e);
            dhi = dhi.max(e);
        }
    }
    ThreeContinua { three_polariton: (lo, hi), polariton_doublon: dlo.is_finite().then_some((dlo, dhi)) }
}

impl TriplonContext {
    pub fn new(spec: &PolaritonSpectrum) -> Self {
        let bubbles = (0..spec.cells()).map(|q| PairBubble::new(spec, q)).collect();
        Self { spec: spec.clone(), bubbles, doublons: doublon_band_scan(spec) }
    }

    fn bands(&self) -> usize {
        self.spec.band_count()
    }

    fn idx(&self, m: usize, l: usize) -> usize {
        m * self.bands() + l
    }

    /// Two-body T-matrix `T(Q, w) = -1 / Pi_b(Q, w)`; zero on a free pair level.
    pub fn t_matrix(&self, qp: usize, w: f64) -> Result<f64> {
        let b = &self.bubbles[qp % self.spec.cells()];
        if b.thresholds.iter().any(|t| (w - t).abs() <= 1e-12 * (1.0 + t.abs())) {
            return Ok(0.0);
        }
        let pi = b.value(w);
        if pi.abs() < DENOMINATOR_GUARD {
            return Err(Error::MMatrixRefused {
                class: "T pole",
                detail: format!("Pi_b(q={qp}, w={w}) = {pi:e}"),
            });
        }
        Ok(-1.0 / pi)
    }

    /// Emitter-projected resolvent `G_b(p, w) = sum_l Z_l(p) / (w - E_l(p))`.
    pub fn resolvent(&self, m: usize, w: f64) -> Result<f64> {
        let mut g = 0.0;
        for l in 0..self.bands() {
            let z = self.spec.weight(m, l);
            let h = w - self.spec.energy(m, l);
            if h.abs() < DENOMINATOR_GUARD {
                if z == 0.0 {
                    continue;
                }
                return Err(Error::MMatrixRefused {
                    class: "resolvent pole",
                    detail: format!("G_b(p={m}, w={w}) at band {l}"),
                });
            }
            g += z / h;
        }
        Ok(g)
    }

    /// `T(q - k, E - E_l(k))` for every column `(k, l)`.
    fn column_t(&self, q: usize, e: f64) -> Result<Vec<f64>> {
        let nb = self.spec.cells();
        let mut out = Vec::with_capacity(nb * self.bands());
        for m in 0..nb {
            for l in 0..self.bands() {
                out.push(self.t_matrix(wrap(&self.spec, q as isize - m as isize), e - self.spec.energy(m, l))?);
            }
        }
        Ok(out)
    }

    pub fn m_matrix(&self, q: usize, e: f64) -> Result<MMatrix> {
        let nb = self.spec.cells();
        let bands = self.bands();
        let t = self.column_t(q, e)?;
        let dim = nb * bands;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        let scale = 2.0 / nb as f64;
        for p in 0..nb {
            for l1 in 0..bands {
                let row = self.idx(p, l1);
                let w1 = e - self.spec.energy(p, l1);
                for k in 0..nb {
                    let r = third(&self.spec, q, p, k);
                    for l in 0..bands {
                        let col = self.idx(k, l);
                        let zk = self.spec.weight(k, l);
                        if zk == 0.0 {
                            continue;
                        }
                        let g = self.resolvent(r, w1 - self.spec.energy(k, l))?;
                        m[(row, col)] = scale * zk * t[col] * g;
                    }
                }
            }
        }
        Ok(MMatrix { q, energy: e, matrix: m })
    }

    pub fn continua(&self, q: usize) -> ThreeContinua {
        three_excitation_continua(&self.spec, &self.doublons, q)
    }

    /// Energies inside `(lo, hi)` where an entry of `M` diverges: free
    /// three-polariton levels and polariton plus interacting-pair levels.
    pub fn singular_energies(&self, q: usize, lo: f64, hi: f64) -> Vec<f64> {
        let nb = self.spec.cells();
        let bands = self.bands();
        let mut out = Vec::new();
        for m1 in 0..nb {
            for m2 in 0..nb {
                let m3 = third(&self.spec, q, m1, m2);
                for a in 0..bands {
                    for b in 0..bands {
                        for c in 0..bands {
                            let e = self.spec.energy(m1, a) + self.spec.energy(m2, b) + self.spec.energy(m3, c);
                            if e > lo && e < hi {
                                out.push(e);
                            }
                        }
                    }
                }
            }
        }
        for k in 0..nb {
            let bubble = &self.bubbles[wrap(&self.spec, q as isize - k as isize)];
            for l in 0..bands {
                let ek = self.spec.energy(k, l);
                for w in bubble.thresholds.windows(2) {
                    let (a, b) = (w[0] + ek, w[1] + ek);
                    if b <= lo || a >= hi {
                        continue;
                    }
                    if let Some(x) = bubble.zero_in(w[0], w[1]) {
                        if x + ek > lo && x + ek < hi {
                            out.push(x + ek);
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    fn det_sign(&self, q: usize, e: f64) -> Option<f64> {
        let m = self.m_matrix(q, e).ok()?;
        let (s, _) = m.det_minus_identity();
        Some(s)
    }

    fn sigma_min(&self, q: usize, e: f64) -> f64 {
        self.m_matrix(q, e).map(|m| m.singular_values()[0]).unwrap_or(f64::INFINITY)
    }

    /// Roots of `det[M(E) - I]` in `(lo, hi)`, confirmed by the singular values.
    pub fn roots_in(&self, q: usize, lo: f64, hi: f64) -> Vec<TriplonRoot> {
        let (lo, hi) = (lo + WINDOW_MARGIN, hi - WINDOW_MARGIN);
        if lo >= hi {
            return Vec::new();
        }
        let singular = self.singular_energies(q, lo, hi);
        let mut cuts = vec![lo];
        cuts.extend(singular.iter().copied());
        cuts.push(hi);
        let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
        let mut out = Vec::new();
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let pad = DENOMINATOR_GUARD.max(1e-9 * (b - a));
            let (a, b) = (a + pad, b - pad);
            if a >= b {
                continue;
            }
            let n = (((b - a) / step).ceil() as usize).max(2);
            let grid: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
            let signs: Vec<Option<f64>> = grid.iter().map(|&x| self.det_sign(q, x)).collect();
            for i in 0..n {
                let (Some(s0), Some(s1)) = (signs[i], signs[i + 1]) else { continue };
                if s0 == 0.0 || s0 == s1 {
                    continue;
                }
                let root = bisect(|x| self.det_sign(q, x).unwrap_or(0.0) * -s0, grid[i], grid[i + 1], true);
                if let Some(r) = self.confirm(q, root, grid[i], grid[i + 1]) {
                    out.push(r);
                }
            }
        }
        out
    }

    fn confirm(&self, q: usize, root: f64, a: f64, b: f64) -> Option<TriplonRoot> {
        let m = self.m_matrix(q, root).ok()?;
        let (sigma, v) = m.null_vector();
        if sigma > SIGMA_TOL {
            return None;
        }
        let svd_energy = golden(|x| self.sigma_min(q, x), a, b);
        if (svd_energy - root).abs() > ROOT_AGREEMENT {
            return None;
        }
        let r = TriplonRoot { q, energy: root, svd_energy, sigma_min: sigma, null_vector: v };
        // null vectors that do not describe a hard-core state sit next to
        // degenerate three-polariton poles
        (self.hard_core_residual(&r) < HARD_CORE_TOL).then_some(r)
    }

    /// Triplon level inside the midgap between the three-polariton and the
    /// polariton-doublon continua.
    pub fn triplon_energy(&self, q: usize) -> Option<TriplonRoot> {
        let (lo, hi) = self.continua(q).midgap()?;
        self.roots_in(q, lo, hi).into_iter().last()
    }

    pub fn band_scan(&self) -> TriplonBand {
        let nb = self.spec.cells();
        let energies = (0..nb).into_par_iter().map(|q| self.triplon_energy(q).map(|r| r.energy)).collect();
        let continua = (0..nb).map(|q| self.continua(q)).collect();
        TriplonBand { momenta: self.spec.momenta.clone(), energies, continua }
    }

    /// `F(p, w) = (2/N_b) sum Z_l(k) G_b(q - p - k, E - w - E_l(k)) T(q - k, E - E_l(k)) f_{k l}`.
    pub fn residue_function(&self, root: &TriplonRoot, m: usize, w: f64) -> Result<f64> {
        let nb = self.spec.cells();
        let e = root.energy;
        let mut acc = 0.0;
        for k in 0..nb {
            let r = third(&self.spec, root.q, m, k);
            for l in 0..self.bands() {
                let zk = self.spec.weight(k, l);
                if zk == 0.0 {
                    continue;
                }
                let ek = self.spec.energy(k, l);
                let t = self.t_matrix(wrap(&self.spec, root.q as isize - k as isize), e - ek)?;
                let g = self.resolvent(r, e - w - ek)?;
                acc += zk * g * t * root.null_vector[self.idx(k, l)];
            }
        }
        Ok(2.0 * acc / nb as f64)
    }
}

/// Minimum of a unimodal function on `[a, b]` by golden-section search.
fn golden<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub fn m_matrix(ctx: &TriplonContext, q: usize, e: f64) -> Result<MMatrix> {
    ctx.m_matrix(q, e)
}

pub fn triplon_energy(ctx: &TriplonContext, q: usize) -> Option<TriplonRoot> {
    ctx.triplon_energy(q)
}

/// `t^T_r = (1/N_b) sum_q E_3B(q) e^{iqr}`.
pub fn triplon_hoppings(band: &TriplonBand) -> Result<Hoppings> {
    let mut e = Vec::with_capacity(band.energies.len());
    for (q, v) in band.energies.iter().enumerate() {
        e.push(v.ok_or(Error::BandIncomplete(q))?);
    }
    hoppings_from_band(&e)
}

/// Triplon amplitudes at total momentum `q`. `m1`, `m2` are the grid
/// indices of the first two momenta and the third is `q - p1 - p2`; `K`
/// labels the photon `p + 2 pi K / z` of each momentum. Flat layouts:
/// `f_b[m1 nb + m2]`, `f_bba[(m1 nb + m2) z + K]`,
/// `f_baa[((m1 nb + m2) z + K2) z + K3]`,
/// `f_a[(((m1 nb + m2) z + K1) z + K2) z + K3]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriplonWavefunctions {
    pub q: usize,
    pub energy: f64,
    pub cells: usize,
    pub z: usize,
    /// Norm of the amplitudes before normalization.
    pub raw_norm: f64,
    pub f_b: Vec<f64>,
    pub f_bba: Vec<f64>,
    pub f_baa: Vec<f64>,
    pub f_a: Vec<f64>,
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

impl TriplonWavefunctions {
    fn zeros(q: usize, energy: f64, nb: usize, z: usize) -> Self {
        let n2 = nb * nb;
        Self {
            q,
            energy,
            cells: nb,
            z,
            raw_norm: 0.0,
            f_b: vec![0.0; n2],
            f_bba: vec![0.0; n2 * z],
            f_baa: vec![0.0; n2 * z * z],
            f_a: vec![0.0; n2 * z * z * z],
        }
    }

    /// Norm of the state with the amplitudes summed over free momenta and
    /// reciprocal indices.
    pub fn norm(&self) -> f64 {
        6.0 * sq(&self.f_b) + 2.0 * sq(&self.f_bba) + 2.0 * sq(&self.f_baa) + 6.0 * sq(&self.f_a)
    }

    fn scale(&mut self, s: f64) {
        for v in [&mut self.f_b, &mut self.f_bba, &mut self.f_baa, &mut self.f_a] {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn normalize(&mut self) {
        let n = self.norm();
        self.raw_norm = n;
        let big = self.f_b.iter().copied().fold(0.0, |a: f64, x| if x.abs() > a.abs() { x } else { a });
        let s = if big < 0.0 { -1.0 } else { 1.0 };
        self.scale(s / n.sqrt());
    }

    /// Inner product with the same weights as [`norm`](Self::norm).
    pub fn dot(&self, other: &Self) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        6.0 * d(&self.f_b, &other.f_b)
            + 2.0 * d(&self.f_bba, &other.f_bba)
            + 2.0 * d(&self.f_baa, &other.f_baa)
            + 6.0 * d(&self.f_a, &other.f_a)
    }

    /// Symmetric amplitude of the ordered mode triple `(m1, c1), (m2, c2),
    /// (q - m1 - m2, c3)` with `c = 0` for the emitter and `c = 1 + K` for
    /// photon `K`.
    pub fn amplitude(&self, m1: usize, c1: usize, m2: usize, c2: usize, c3: usize) -> f64 {
        let nb = self.cells;
        let z = self.z;
        let m3 = (self.q + 2 * nb - m1 - m2) % nb;
        let mut slots = [(m1, c1), (m2, c2), (m3, c3)];
        slots.sort_by_key(|s| s.1 != 0);
        let emitters = slots.iter().filter(|s| s.1 == 0).count();
        let [(a, ca), (b, cb), (_, cc)] = slots;
        match emitters {
            3 => self.f_b[a * nb + b],
            2 => self.f_bba[(a * nb + b) * z + cc - 1] / 3.0,
            1 => self.f_baa[((a * nb + b) * z + cb - 1) * z + cc - 1] / 3.0,
            _ => self.f_a[(((a * nb + b) * z + ca - 1) * z + cb - 1) * z + cc - 1],
        }
    }

    fn orbitals(&self) -> DMatrix<Complex64> {
        // rows: lattice sites in the periodic-array layout; columns: modes m (z + 1) + c
        let nb = self.cells;
        let z = self.z;
        let w = z + 1;
        let n = nb * z;
        let mut phi = DMatrix::<Complex64>::zeros(nb * w, nb * w);
        for cell in 0..nb {
            for m in 0..nb {
                let ph = 2.0 * PI * ((m * cell) % nb) as f64 / nb as f64;
                phi[(cell * w, m * w)] = Complex64::from_polar(1.0 / (nb as f64).sqrt(), ph);
                for j in 0..z {
                    let x = cell * z + j;
                    for kk in 0..z {
                        let k = m + nb * kk;
                        let ph = 2.0 * PI * ((k * x) % n) as f64 / n as f64;
                        phi[(cell * w + 1 + j, m * w + 1 + kk)] = Complex64::from_polar(1.0 / (n as f64).sqrt(), ph);
                    }
                }
            }
        }
        phi
    }

    /// Real-space amplitude tensor contracted with site `s3`: returns the
    /// matrix `R(s1, s2, s3)` over the first two sites.
    pub fn real_slice(&self, s3: usize) -> DMatrix<Complex64> {
        let nb = self.cells;
        let w = self.z + 1;
        let phi = self.orbitals();
        let dim = nb * w;
        // A3[(m1 c1), (m2 c2)] = sum_c3 A phi(s3; m3 c3)
        let mut a3 = DMatrix::<Complex64>::zeros(dim, dim);
        for m1 in 0..nb {
            for m2 in 0..nb {
                let m3 = (self.q + 2 * nb - m1 - m2) % nb;
                for c1 in 0..w {
                    for c2 in 0..w {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for c3 in 0..w {
                            let p = phi[(s3, m3 * w + c3)];
                            if p.norm_sqr() > 0.0 {
                                acc += p * self.amplitude(m1, c1, m2, c2, c3);
                            }
                        }
                        a3[(m1 * w + c1, m2 * w + c2)] = acc;
                    }
                }
            }
        }
        &phi * a3 * phi.transpose()
    }

    /// State vector in an ED sector of the periodic array lattice.
    pub fn to_ed_vector(&self, basis: &crate::ed::SectorBasis) -> Vec<Complex64> {
        let sites = self.cells * (self.z + 1);
        let slices: Vec<DMatrix<Complex64>> = (0..sites).map(|s| self.real_slice(s)).collect();
        (0..basis.dimension())
            .map(|i| {
                let occ = basis.occupations(i);
                let mut list = Vec::with_capacity(3);
                for (s, &o) in occ.iter().enumerate() {
                    for _ in 0..o {
                        list.push(s);
                    }
                }
                let r = slices[list[2]][(list[0], list[1])];
                let f = match (list[0] == list[1], list[1] == list[2]) {
                    (true, true) => 6f64.sqrt(),
                    (false, false) => 6.0,
                    _ => 3.0 * 2f64.sqrt(),
                };
                r * f
            })
            .collect()
    }

    fn sites(&self) -> (usize, usize) {
        (self.z + 1, self.cells * self.z)
    }

    fn photon_site(&self, x: usize) -> usize {
        let (w, _) = self.sites();
        (x / self.z) * w + 1 + x % self.z
    }

    /// `|R|^2` for two emitters at cells `r1`, `r2` around an emitter at the origin.
    pub fn profile_b(&self) -> DMatrix<f64> {
        let (w, _) = self.sites();
        let s = self.real_slice(0);
        DMatrix::from_fn(self.cells, self.cells, |a, b| s[(a * w, b * w)].norm_sqr())
    }

    /// Two emitters at cells `r1`, `r2` around a photon at bath site 0.
    pub fn profile_bba(&self) -> DMatrix<f64> {
        let (w, _) = self.sites();
        let s = self.real_slice(self.photon_site(0));
        DMatrix::from_fn(self.cells, self.cells, |a, b| s[(a * w, b * w)].norm_sqr())
    }

    /// Two photons at bath sites `x`, `y` around an emitter at the origin.
    pub fn profile_baa(&self) -> DMatrix<f64> {
        let (_, n) = self.sites();
        let s = self.real_slice(0);
        DMatrix::from_fn(n, n, |x, y| s[(self.photon_site(x), self.photon_site(y))].norm_sqr())
    }

    /// Two photons at bath sites `x`, `y` around a photon at bath site 0.
    pub fn profile_a(&self) -> DMatrix<f64> {
        let (_, n) = self.sites();
        let s = self.real_slice(self.photon_site(0));
        DMatrix::from_fn(n, n, |x, y| s[(self.photon_site(x), self.photon_site(y))].norm_sqr())
    }
}

struct Guard {
    energy: f64,
}

impl Guard {
    fn check(&self, h: f64, what: impl FnOnce() -> String) -> Result<f64> {
        if h.abs() < DENOMINATOR_GUARD {
            Err(Error::DegenerateResidue { pole: self.energy, gap: h, what: what() })
        } else {
            Ok(h)
        }
    }
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl TriplonContext {
    /// Amplitudes of `sum C beta^dag beta^dag beta^dag` over polariton modes,
    /// `C = [u1 u2 chi3 + u2 u3 chi1 + u1 u3 chi2] / (E - E1 - E2 - E3)` with
    /// `chi = u T f`, projected on emitters and photons.
    pub fn mode_triple_wavefunctions(&self, root: &TriplonRoot) -> TriplonWavefunctions {
        let spec = &self.spec;
        let nb = spec.cells();
        let z = spec.z();
        let bands = self.bands();
        let e = root.energy;
        let chi: Vec<f64> = (0..nb * bands)
            .map(|i| {
                let (m, l) = (i / bands, i % bands);
                let t = self.t_matrix(wrap(spec, root.q as isize - m as isize), e - spec.energy(m, l)).unwrap_or(0.0);
                spec.vectors[m][l][0] * t * root.null_vector[i]
            })
            .collect();
        let mut wf = TriplonWavefunctions::zeros(root.q, e, nb, z);
        for m1 in 0..nb {
            for m2 in 0..nb {
                let m3 = third(spec, root.q, m1, m2);
                let ms = [m1, m2, m3];
                for l1 in 0..bands {
                    for l2 in 0..bands {
                        for l3 in 0..bands {
                            let ls = [l1, l2, l3];
                            let v: Vec<&Vec<f64>> = (0..3).map(|i| &spec.vectors[ms[i]][ls[i]]).collect();
                            let u = [v[0][0], v[1][0], v[2][0]];
                            let x = [chi[ms[0] * bands + l1], chi[ms[1] * bands + l2], chi[ms[2] * bands + l3]];
                            let h = e - spec.energy(m1, l1) - spec.energy(m2, l2) - spec.energy(m3, l3);
                            let c = (u[0] * u[1] * x[2] + u[1] * u[2] * x[0] + u[0] * u[2] * x[1]) / h;
                            let b12 = (m1 * nb + m2) * z;
                            wf.f_b[m1 * nb + m2] += c * u[0] * u[1] * u[2];
                            for k3 in 0..z {
                                wf.f_bba[b12 + k3] += 3.0 * c * u[0] * u[1] * v[2][1 + k3];
                                for k2 in 0..z {
                                    wf.f_baa[(b12 + k2) * z + k3] += 3.0 * c * u[0] * v[1][1 + k2] * v[2][1 + k3];
                                    for k1 in 0..z {
                                        wf.f_a[((b12 + k1) * z + k2) * z + k3] += c * v[0][1 + k1] * v[1][1 + k2] * v[2][1 + k3];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        wf.normalize();
        wf
    }

    /// Emitter double-occupancy amplitude of the mode-triple state, root mean
    /// square over the remaining mode. Zero for a physical eigenstate.
    pub fn hard_core_residual(&self, root: &TriplonRoot) -> f64 {
        let wf = self.mode_triple_wavefunctions(root);
        let nb = self.spec.cells();
        let w = self.spec.z() + 1;
        let mut acc = 0.0;
        for m3 in 0..nb {
            for c3 in 0..w {
                let s: f64 = (0..nb).map(|m1| wf.amplitude(m1, 0, third(&self.spec, root.q, m3, m1), 0, c3)).sum();
                acc += s * s;
            }
        }
        (acc / nb as f64).sqrt()
    }

    /// Residue amplitudes from the printed residue forms, normalized.
    pub fn wavefunctions(&self, root: &TriplonRoot) -> Result<TriplonWavefunctions> {
        let spec = &self.spec;
        let nb = spec.cells();
        let z = spec.z();
        let zf = z as f64;
        let bands = self.bands();
        let e = root.energy;
        let q = root.q;
        let omega = spec.coupling.omega;
        let bath = spec.bath;
        let g = Guard { energy: e };
        let en = |m: usize, l: usize| spec.energy(m, l);
        let zw = |m: usize, l: usize| spec.weight(m, l);
        let eps = |m: usize, k: usize| bath.mode_energy(m + nb * k);
        // on-shell T f and off-shell T(q - p, E - eps) F(p, eps)
        let mut tf = vec![0.0; nb * bands];
        for m in 0..nb {
            for l in 0..bands {
                tf[m * bands + l] = self.t_matrix(wrap(spec, q as isize - m as isize), e - en(m, l))? * root.null_vector[m * bands + l];
            }
        }
        let mut tfp = vec![0.0; nb * z];
        for m in 0..nb {
            for k in 0..z {
                let w = eps(m, k);
                tfp[m * z + k] = self.t_matrix(wrap(spec, q as isize - m as isize), e - w)? * self.residue_function(root, m, w)?;
            }
        }
        let tf = |m: usize, l: usize| tf[m * bands + l];
        let tfp = |m: usize, k: usize| tfp[m * z + k];

        let gb = |a: usize, b: usize, c: usize| -> Result<f64> {
            let mut s = 0.0;
            for l1 in 0..bands {
                for l2 in 0..bands {
                    let gr = self.resolvent(c, e - en(a, l1) - en(b, l2)).map_err(|_| Error::DegenerateResidue {
                        pole: e,
                        gap: 0.0,
                        what: format!("f_b resolvent at (p={a}, {b}, {c}; lambda={l1}, {l2})"),
                    })?;
                    s += zw(a, l1) * zw(b, l2) * tf(a, l1) * gr;
                }
            }
            Ok(s)
        };
        let gbba = |a: usize, b: usize, c: usize, k: usize| -> Result<f64> {
            let ek = eps(c, k);
            let mut s = 0.0;
            for l1 in 0..bands {
                for l2 in 0..bands {
                    for l3 in 0..bands {
                        let zz = zw(a, l1) * zw(b, l2) * zw(c, l3);
                        if zz == 0.0 {
                            continue;
                        }
                        let tag = || format!("f_bba at (p={a}, {b}, {c}; K={k}; lambda={l1}, {l2}, {l3})");
                        let d0 = g.check(ek - en(c, l3), tag)?;
                        let d1 = g.check(e - en(a, l1) - en(b, l2) - ek, tag)?;
                        let d2 = g.check(e - en(a, l1) - en(b, l2) - en(c, l3), tag)?;
                        let t1 = 2.0 * tf(a, l1);
                        s += zz / (2.0 * d0) * ((t1 + tfp(c, k)) / d1 - (t1 + tf(c, l3)) / d2);
                    }
                }
            }
            Ok(s)
        };
        let gbaa = |a: usize, b: usize, c: usize, k2: usize, k3: usize| -> Result<f64> {
            let (e2, e3) = (eps(b, k2), eps(c, k3));
            let mut s = 0.0;
            for l1 in 0..bands {
                for l2 in 0..bands {
                    for l3 in 0..bands {
                        let zz = zw(a, l1) * zw(b, l2) * zw(c, l3);
                        if zz == 0.0 {
                            continue;
                        }
                        let tag = || format!("f_baa at (p={a}, {b}, {c}; K={k2}, {k3}; lambda={l1}, {l2}, {l3})");
                        let (x1, x2, x3) = (en(a, l1), en(b, l2), en(c, l3));
                        let d0 = g.check(e2 - x2, tag)?;
                        let first = g.check(e - x1 - e2 - e3, tag)? * g.check(e - x1 - e2 - x3, tag)?;
                        let second = g.check(e - x1 - x2 - e3, tag)? * g.check(e - x1 - x2 - x3, tag)?;
                        s += zz / (2.0 * d0)
                            * ((tf(a, l1) + 2.0 * tfp(b, k2)) / first - (tf(a, l1) + 2.0 * tf(b, l2)) / second);
                    }
                }
            }
            Ok(s)
        };
        let ga = |m: [usize; 3], k: [usize; 3]| -> Result<f64> {
            let (e1, e2, e3) = (eps(m[0], k[0]), eps(m[1], k[1]), eps(m[2], k[2]));
            let mut s = 0.0;
            for l1 in 0..bands {
                for l2 in 0..bands {
                    for l3 in 0..bands {
                        let zz = zw(m[0], l1) * zw(m[1], l2) * zw(m[2], l3);
                        if zz == 0.0 {
                            continue;
                        }
                        let tag = || format!("f_a at (p={:?}; K={:?}; lambda={l1}, {l2}, {l3})", m, k);
                        let (x1, x2, x3) = (en(m[0], l1), en(m[1], l2), en(m[2], l3));
                        let d0 = g.check(e1 - x1, tag)?;
                        let a_num = 2.0 * e - 2.0 * e1 - e2 - e3 - x2 - x3;
                        let a_den = g.check(e - e1 - e2 - e3, tag)?
                            * g.check(e - e1 - e2 - x3, tag)?
                            * g.check(e - e1 - x2 - e3, tag)?
                            * g.check(e - e1 - x2 - x3, tag)?;
                        let b_num = 2.0 * e - 2.0 * x1 - e2 - e3 - x2 - x3;
                        let b_den = g.check(e - x1 - e2 - e3, tag)?
                            * g.check(e - x1 - e2 - x3, tag)?
                            * g.check(e - x1 - x2 - e3, tag)?
                            * g.check(e - x1 - x2 - x3, tag)?;
                        s += zz / d0 * (a_num * tfp(m[0], k[0]) / a_den - b_num * tf(m[0], l1) / b_den);
                    }
                }
            }
            Ok(s)
        };

        let mut wf = TriplonWavefunctions::zeros(q, e, nb, z);
        let nbf = nb as f64;
        for m1 in 0..nb {
            for m2 in 0..nb {
                let m3 = third(spec, q, m1, m2);
                let ms = [m1, m2, m3];
                let mut b = 0.0;
                for p in PERMS {
                    b += gb(ms[p[0]], ms[p[1]], ms[p[2]])?;
                }
                wf.f_b[m1 * nb + m2] = b / (6.0 * nbf);
                let b12 = (m1 * nb + m2) * z;
                for k3 in 0..z {
                    wf.f_bba[b12 + k3] =
                        omega / (nbf * zf.sqrt()) * (gbba(m1, m2, m3, k3)? + gbba(m2, m1, m3, k3)?);
                    for k2 in 0..z {
                        wf.f_baa[(b12 + k2) * z + k3] =
                            omega * omega / (nbf * zf) * (gbaa(m1, m2, m3, k2, k3)? + gbaa(m1, m3, m2, k3, k2)?);
                        for k1 in 0..z {
                            let ks = [k1, k2, k3];
                            let mut a = 0.0;
                            for p in PERMS {
                                a += ga([ms[p[0]], ms[p[1]], ms[p[2]]], [ks[p[0]], ks[p[1]], ks[p[2]]])?;
                            }
                            wf.f_a[((b12 + k1) * z + k2) * z + k3] = omega.powi(3) / (6.0 * nbf * zf * zf.sqrt()) * a;
                        }
                    }
                }
            }
        }
        wf.normalize();
        Ok(wf)
    }
}

pub fn residue_and_wavefunctions(ctx: &TriplonContext, root: &TriplonRoot) -> Result<TriplonWavefunctions> {
    ctx.wavefunctions(root)
}

/// Triplon energies at `points` momenta shared by a coarse grid and a grid
/// twice as fine: `(q, E_coarse, E_fine)`.
pub fn refinement(coarse: &TriplonContext, fine: &TriplonContext, points: usize) -> Result<Vec<(f64, f64, f64)>> {
    let nb = coarse.spec.cells();
    if fine.spec.cells() != 2 * nb {
        return Err(Error::InvalidParameter("fine grid must have twice the cells".into()));
    }
    let step = (nb / 2 / points.max(1)).max(1);
    let qs: Vec<usize> = (0..points).map(|i| (i * step).min(nb / 2)).collect();
    qs.par_iter()
        .map(|&q| {
            let c = coarse.triplon_energy(q).ok_or(Error::BandIncomplete(q))?;
            let f = fine.triplon_energy(2 * q).ok_or(Error::BandIncomplete(2 * q))?;
            Ok((coarse.spec.momenta[q], c.energy, f.energy))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathSpec, CouplingSpec};
    use crate::single::polariton_bands;

    fn ctx(nb: usize, z: usize, delta: f64, omega: f64) -> TriplonContext {
        let s = polariton_bands(&BathSpec::array(1.0, nb, z).unwrap(), &CouplingSpec::new(delta, omega).unwrap()).unwrap();
        TriplonContext::new(&s)
    }

    #[test]
    fn decoupled_emitters_have_no_triplon() {
        let c = ctx(12, 1, -1.0, 0.0);
        for q in 0..12 {
            assert!(c.continua(q).midgap().is_none());
            assert!(c.triplon_energy(q).is_none());
        }
    }

    #[test]
    fn free_three_photon_range() {
        let c = ctx(12, 1, 5.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in 0..12 {
            let (a, b) = c.continua(q).three_polariton;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        assert!(lo.abs() < 1e-12 && (hi - 12.0).abs() < 1e-12);
    }

    #[test]
    fn m_matrix_parity_and_finiteness() {
        let c = ctx(10, 1, 0.0, 5.0);
        let (lo, hi) = c.continua(3).midgap().unwrap();
        let e = 0.5 * (lo + hi);
        let a = c.m_matrix(3, e).unwrap();
        let b = c.m_matrix(7, e).unwrap();
        assert_eq!(a.dimension(), 20);
        assert!(a.matrix.iter().all(|x| x.is_finite()));
        for (x, y) in a.singular_values().iter().zip(b.singular_values()) {
            assert!((x - y).abs() < 1e-10);
        }
        let (sa, la) = a.det_minus_identity();
        let (sb, lb) = b.det_minus_identity();
        assert!(sa == sb && (la - lb).abs() < 1e-9);
    }

    #[test]
    fn determinant_changes_sign_in_midgap() {
        let c = ctx(12, 1, 0.0, 5.0);
        let (lo, hi) = c.continua(0).midgap().unwrap();
        let s = |e: f64| c.m_matrix(0, e).unwrap().det_minus_identity().0;
        assert!(s(lo + 1e-3) != s(hi - 1e-3));
        let r = c.triplon_energy(0).unwrap();
        assert!(r.energy > lo + WINDOW_MARGIN && r.energy < hi - WINDOW_MARGIN);
        assert!(r.sigma_min < SIGMA_TOL && (r.svd_energy - r.energy).abs() < ROOT_AGREEMENT);
    }

    #[test]
    fn refused_on_resolvent_pole() {
        let c = ctx(6, 1, 0.0, 5.0);
        // E - E_l(p) - E_l(k) lands on a single-polariton level of q - p - k
        let e = c.spec.energy(0, 0) + c.spec.energy(0, 0) + c.spec.energy(0, 0);
        match c.m_matrix(0, e) {
            Err(Error::MMatrixRefused { class, .. }) => assert_eq!(class, "resolvent pole"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn printed_forms_match_mode_triples() {
        for &(nb, z, omega) in &[(8usize, 1usize, 5.0), (6, 2, 5.0)] {
            let c = ctx(nb, z, 0.0, omega);
            for q in [0, 1] {
                let r = c.triplon_energy(q).unwrap();
                let a = c.wavefunctions(&r).unwrap();
                let b = c.mode_triple_wavefunctions(&r);
                assert!((a.norm() - 1.0).abs() < 1e-10);
                assert!((a.dot(&b).abs() - 1.0).abs() < 1e-8, "nb={nb} z={z} q={q}");
                assert!(c.hard_core_residual(&r) < HARD_CORE_TOL);
                // F reproduces the null vector on shell
                for m in 0..nb {
                    let f = c.residue_function(&r, m, c.spec.energy(m, 0)).unwrap();
                    assert!((f - r.null_vector[m * (z + 1)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn bosonic_symmetry() {
        let c = ctx(8, 1, 0.0, 5.0);
        let r = c.triplon_energy(2).unwrap();
        let wf = c.wavefunctions(&r).unwrap();
        for m1 in 0..8 {
            for m2 in 0..8 {
                let m3 = third(&c.spec, 2, m1, m2);
                let x = wf.amplitude(m1, 0, m2, 0, 0);
                assert!((x - wf.amplitude(m2, 0, m1, 0, 0)).abs() < 1e-12);
                assert!((x - wf.amplitude(m1, 0, m3, 0, 0)).abs() < 1e-12);
                for cc in 0..2 {
                    for cd in 0..2 {
                        let y = wf.amplitude(m1, cc, m2, cd, 1);
                        assert!((y - wf.amplitude(m2, cd, m1, cc, 1)).abs() < 1e-12);
                        assert!((y - wf.amplitude(m1, cc, m3, 1, cd)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn hoppings_of_flat_and_round_trip() {
        let flat = TriplonBand { momenta: vec![0.0; 8], energies: vec![Some(-3.0); 8], continua: vec![] };
        let h = triplon_hoppings(&flat).unwrap();
        assert!((h.onsite() + 3.0).abs() < 1e-14);
        assert!((1..=4).all(|r| h.get(r).abs() < 1e-14));
        let c = ctx(12, 1, 0.0, 5.0);
        let band = c.band_scan();
        let h = triplon_hoppings(&band).unwrap();
        for (q, e) in band.energies.iter().enumerate() {
            assert!((h.band_at(q) - e.unwrap()).abs() < 1e-10);
        }
        let mut broken = band.clone();
        broken.energies[4] = None;
        assert!(matches!(triplon_hoppings(&broken), Err(Error::BandIncomplete(4))));
    }

    proptest::proptest! {
        #[test]
        fn m_matrix_finite_and_parity_below_continuum(delta in -2.0f64..2.0, omega in 0.5f64..6.0, q in 0usize..8, gap in 0.05f64..3.0) {
            let c = ctx(8, 1, delta, omega);
            let e = 3.0 * c.spec.lowest_band().iter().copied().fold(f64::INFINITY, f64::min) - gap;
            let a = c.m_matrix(q, e).unwrap();
            let b = c.m_matrix((8 - q) % 8, e).unwrap();
            proptest::prop_assert!(a.matrix.iter().all(|x| x.is_finite()));
            for (x, y) in a.singular_values().iter().zip(b.singular_values()) {
                proptest::prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}
