//! Two excitations on the periodic emitter array: pair bubble, scattering
//! continua, doublon bands, doublon wavefunctions and the Feshbach
//! interaction of the lowest band.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{hoppings_from_band, Hoppings};
use crate::roots::bisect;
use crate::single::PolaritonSpectrum;

/// Margin kept between a doublon level and the continuum edges.
pub const WINDOW_MARGIN: f64 = 1e-9;
const DEGENERACY_GUARD: f64 = 1e-9;

fn partner(spec: &PolaritonSpectrum, q: usize, m: usize) -> usize {
    let nb = spec.cells();
    (q + nb - m % nb) % nb
}

/// Two-polariton thresholds at total momentum index `q`, with bubble weights
/// `Z Z' / N_b`. `include` filters band pairs.
#[derive(Debug, Clone)]
pub struct PairBubble {
    pub q: usize,
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PairBubble {
    pub fn new(spec: &PolaritonSpectrum, q: usize) -> Self {
        Self::filtered(spec, q, |_, _| true)
    }

    pub fn filtered<F: Fn(usize, usize) -> bool>(spec: &PolaritonSpectrum, q: usize, include: F) -> Self {
        let nb = spec.cells();
        let bands = spec.band_count();
        let mut pairs = Vec::with_capacity(nb * bands * bands);
        for m in 0..nb {
            let m2 = partner(spec, q, m);
            for l in 0..bands {
                for lp in 0..bands {
                    if !include(l, lp) {
                        continue;
                    }
                    let w = spec.weight(m, l) * spec.weight(m2, lp) / nb as f64;
                    pairs.push((spec.energy(m, l) + spec.energy(m2, lp), w));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut thresholds: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (t, w) in pairs {
            match thresholds.last() {
                Some(&last) if last == t => *weights.last_mut().unwrap() += w,
                _ => {
                    thresholds.push(t);
                    weights.push(w);
                }
            }
        }
        Self { q, thresholds, weights }
    }

    pub fn value(&self, w: f64) -> f64 {
        self.thresholds.iter().zip(&self.weights).map(|(t, c)| c / (w - t)).sum()
    }

    pub fn derivative(&self, w: f64) -> f64 {
        -self.thresholds.iter().zip(&self.weights).map(|(t, c)| c / ((w - t) * (w - t))).sum::<f64>()
    }

    fn check(&self, w: f64) -> Result<()> {
        if self.thresholds.iter().any(|t| (w - t).abs() <= 1e-12 * (1.0 + t.abs())) {
            Err(Error::AtPole(w))
        } else {
            Ok(())
        }
    }

    /// Zero of the bubble strictly inside `(lo, hi)`, which must be free of
    /// thresholds.
    pub fn zero_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let (a, b) = (lo + WINDOW_MARGIN, hi - WINDOW_MARGIN);
        if a >= b {
            return None;
        }
        let (fa, fb) = (self.value(a), self.value(b));
        if !(fa > 0.0 && fb < 0.0) {
            return None;
        }
        Some(bisect(|w| -self.value(w), a, b, true))
    }
}

/// `Pi_b(q, w) = (1/N_b) sum Z Z' / (w - E - E')`.
pub fn pair_bubble(spec: &PolaritonSpectrum, q: usize, w: f64) -> Result<f64> {
    let b = PairBubble::new(spec, q);
    b.check(w)?;
    Ok(b.value(w))
}

/// `[min, max]` of `E_l(p) + E_l'(q - p)` over the grid.
pub fn pair_continuum(spec: &PolaritonSpectrum, q: usize, l: usize, lp: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for m in 0..spec.cells() {
        let e = spec.energy(m, l) + spec.energy(partner(spec, q, m), lp);
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Lowest-lowest and lowest-second scattering continua, merged.
pub fn scattering_band_edges(spec: &PolaritonSpectrum, q: usize) -> Vec<(f64, f64)> {
    let mut iv = vec![pair_continuum(spec, q, 0, 0)];
    if spec.band_count() > 1 {
        iv.push(pair_continuum(spec, q, 0, 1));
    }
    merge(iv)
}

/// All band-pair continua, merged.
pub fn all_continua(spec: &PolaritonSpectrum, q: usize) -> Vec<(f64, f64)> {
    let b = spec.band_count();
    let mut iv = Vec::new();
    for l in 0..b {
        for lp in l..b {
            iv.push(pair_continuum(spec, q, l, lp));
            if lp != l {
                iv.push(pair_continuum(spec, q, lp, l));
            }
        }
    }
    merge(iv)
}

/// Gap between the lowest-lowest and lowest-second continua.
pub fn gap_window(spec: &PolaritonSpectrum, q: usize) -> Option<(f64, f64)> {
    if spec.band_count() < 2 {
        return None;
    }
    let (_, top) = pair_continuum(spec, q, 0, 0);
    let (bottom, _) = pair_continuum(spec, q, 0, 1);
    (bottom > top).then_some((top, bottom))
}

/// Lowest doublon level at momentum index `q`.
pub fn doublon_band(spec: &PolaritonSpectrum, q: usize) -> Option<f64> {
    let (lo, hi) = gap_window(spec, q)?;
    PairBubble::new(spec, q).zero_in(lo, hi)
}

/// Every isolated two-excitation level at `q`, one per gap between merged
/// continua of all band pairs.
pub fn isolated_levels(spec: &PolaritonSpectrum, q: usize) -> Vec<f64> {
    let bubble = PairBubble::new(spec, q);
    all_continua(spec, q)
        .windows(2)
        .filter_map(|w| bubble.zero_in(w[0].1, w[1].0))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublonBand {
    pub momenta: Vec<f64>,
    pub energies: Vec<Option<f64>>,
    pub windows: Vec<Option<(f64, f64)>>,
}

pub fn doublon_band_scan(spec: &PolaritonSpectrum) -> DoublonBand {
    let nb = spec.cells();
    let windows: Vec<_> = (0..nb).map(|q| gap_window(spec, q)).collect();
    let energies = (0..nb).map(|q| doublon_band(spec, q)).collect();
    DoublonBand { momenta: spec.momenta.clone(), energies, windows }
}

/// `t^D_r = (1/N_b) sum_q E_2B(q) e^{iqr}`.
pub fn doublon_hoppings(band: &DoublonBand) -> Result<Hoppings> {
    let mut e = Vec::with_capacity(band.energies.len());
    for (q, v) in band.energies.iter().enumerate() {
        e.push(v.ok_or(Error::BandIncomplete(q))?);
    }
    hoppings_from_band(&e)
}

/// Doublon residue amplitudes at total momentum `q`. Index conventions:
/// `m` is the grid index of the first emitter momentum `p`, its partner is
/// `q - p`; photon `n` of a polariton at index `m` has bath momentum index
/// `m + N_b n`.
#[derive(Debug, Clone)]
pub struct DoublonWavefunctions {
    pub q: usize,
    pub energy: f64,
    pub z2: f64,
    pub cells: usize,
    pub z: usize,
    /// `f_b(p)`, coefficient of `b_p^dag b_{q-p}^dag`.
    pub f_b: Vec<f64>,
    /// `f_ab[(m, n)]`, coefficient of `b_p^dag a_{k(q-p, n)}^dag`.
    pub f_ab: DMatrix<f64>,
    /// `f_a[m][(n, n')]`, coefficient of `a_{k(p, n)}^dag a_{k(q-p, n')}^dag`.
    pub f_a: Vec<DMatrix<f64>>,
}

impl DoublonWavefunctions {
    /// `2 sum |f_b|^2 + sum |f_ab|^2 + 2 sum |f_a|^2`, the norm of the state
    /// with ordered momentum sums.
    pub fn norm(&self) -> f64 {
        let b: f64 = self.f_b.iter().map(|x| x * x).sum();
        let ab: f64 = self.f_ab.iter().map(|x| x * x).sum();
        let a: f64 = self.f_a.iter().flat_map(|m| m.iter()).map(|x| x * x).sum();
        2.0 * b + ab + 2.0 * a
    }

    fn p_phase(&self, m: usize, cell: usize) -> Complex64 {
        let nb = self.cells;
        Complex64::from_polar(1.0, 2.0 * PI * ((m * cell) % nb) as f64 / nb as f64)
    }

    fn k_phase(&self, k: usize, site: usize) -> Complex64 {
        let n = self.cells * self.z;
        Complex64::from_polar(1.0, 2.0 * PI * ((k * site) % n) as f64 / n as f64)
    }

    fn partner(&self, m: usize) -> usize {
        (self.q + self.cells - m) % self.cells
    }

    /// Emitter-pair amplitude `F(c1, c2)` of `sigma_c1^dag sigma_c2^dag`.
    pub fn f_b_real(&self) -> DMatrix<Complex64> {
        let nb = self.cells;
        DMatrix::from_fn(nb, nb, |c1, c2| {
            (0..nb)
                .map(|m| self.f_b[m] * self.p_phase(m, c1) * self.p_phase(self.partner(m), c2))
                .sum::<Complex64>()
                / nb as f64
        })
    }

    /// `f_b(r)`: two excited emitters separated by `r` cells.
    pub fn f_b_of_r(&self) -> Vec<Complex64> {
        let f = self.f_b_real();
        (0..self.cells).map(|r| f[(0, r)]).collect()
    }

    /// Emitter at cell `c`, photon at bath site `x`.
    pub fn f_ab_real(&self) -> DMatrix<Complex64> {
        let nb = self.cells;
        let n = nb * self.z;
        let norm = ((nb * n) as f64).sqrt();
        DMatrix::from_fn(nb, n, |c, x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..nb {
                let m2 = self.partner(m);
                for bn in 0..self.z {
                    acc += self.f_ab[(m, bn)] * self.p_phase(m, c) * self.k_phase(m2 + nb * bn, x);
                }
            }
            acc / norm
        })
    }

    /// Two photons at bath sites `x`, `y` (ordered-pair amplitude).
    pub fn f_a_real(&self) -> DMatrix<Complex64> {
        let nb = self.cells;
        let n = nb * self.z;
        DMatrix::from_fn(n, n, |x, y| {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..nb {
                let m2 = self.partner(m);
                for a in 0..self.z {
                    for b in 0..self.z {
                        acc += self.f_a[m][(a, b)] * self.k_phase(m + nb * a, x) * self.k_phase(m2 + nb * b, y);
                    }
                }
            }
            acc / n as f64
        })
    }

    /// State vector in an ED sector of the periodic array lattice.
    pub fn to_ed_vector(&self, basis: &crate::ed::SectorBasis) -> Vec<Complex64> {
        let nb = self.cells;
        let z = self.z;
        let w = z + 1;
        let site_of = |x: usize| (x / z) * w + 1 + x % z;
        let mut v = vec![Complex64::new(0.0, 0.0); basis.dimension()];
        let sites = nb * w;
        let mut put = |a: usize, b: usize, amp: Complex64| {
            let mut occ = vec![0u32; sites];
            occ[a] += 1;
            occ[b] += 1;
            if let Some(i) = basis.index_of(&occ) {
                v[i] += amp;
            }
        };
        let fb = self.f_b_real();
        for c1 in 0..nb {
            for c2 in c1 + 1..nb {
                put(c1 * w, c2 * w, fb[(c1, c2)] + fb[(c2, c1)]);
            }
        }
        let fab = self.f_ab_real();
        for c in 0..nb {
            for x in 0..nb * z {
                put(c * w, site_of(x), fab[(c, x)]);
            }
        }
        let fa = self.f_a_real();
        for x in 0..nb * z {
            for y in x..nb * z {
                let amp = if x == y { 2f64.sqrt() * fa[(x, x)] } else { fa[(x, y)] + fa[(y, x)] };
                put(site_of(x), site_of(y), amp);
            }
        }
        v
    }
}

/// Residue amplitudes of a doublon level from the printed formulas.
pub fn doublon_wavefunctions(spec: &PolaritonSpectrum, q: usize, energy: f64) -> Result<DoublonWavefunctions> {
    let nb = spec.cells();
    let z = spec.z();
    let bands = spec.band_count();
    let bubble = PairBubble::new(spec, q);
    let residual = bubble.value(energy) / bubble.derivative(energy);
    if residual.abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("{energy} is not a root of the pair bubble")));
    }
    let z2 = -1.0 / bubble.derivative(energy);
    let omega = spec.coupling.omega;
    let bath = spec.bath;
    let eps = |m: usize, n: usize| bath.mode_energy(m + nb * n);
    let guard = |h: f64, what: &str| -> Result<f64> {
        if h.abs() < DEGENERACY_GUARD {
            Err(Error::DegenerateResidue { pole: energy, gap: h, what: what.to_string() })
        } else {
            Ok(h)
        }
    };
    let zf = z as f64;
    let mut f_b = vec![0.0; nb];
    let mut f_ab = DMatrix::<f64>::zeros(nb, z);
    let mut f_a = vec![DMatrix::<f64>::zeros(z, z); nb];
    let cb = (z2 / (2.0 * nb as f64)).sqrt();
    let cab = omega * (2.0 * z2 / (nb as f64 * zf)).sqrt();
    for m in 0..nb {
        let m2 = partner(spec, q, m);
        for l in 0..bands {
            for lp in 0..bands {
                let zz = spec.weight(m, l) * spec.weight(m2, lp);
                let h = guard(energy - spec.energy(m, l) - spec.energy(m2, lp), "pair denominator")?;
                f_b[m] += cb * zz / h;
                for n in 0..z {
                    let hk = guard(energy - spec.energy(m, l) - eps(m2, n), "polariton-photon denominator")?;
                    f_ab[(m, n)] += cab * zz / (h * hk);
                }
                for a in 0..z {
                    for b in 0..z {
                        // photon a belongs to p, photon b to q - p
                        let h_lp_a = guard(energy - spec.energy(m2, lp) - eps(m, a), "polariton-photon denominator")?;
                        let h_l_b = guard(energy - spec.energy(m, l) - eps(m2, b), "polariton-photon denominator")?;
                        let hkk = guard(energy - eps(m, a) - eps(m2, b), "two-photon denominator")?;
                        f_a[m][(a, b)] += omega * omega * cb * zz * (1.0 / h + 1.0 / hkk) / (zf * h_lp_a * h_l_b);
                    }
                }
            }
        }
    }
    Ok(DoublonWavefunctions { q, energy, z2, cells: nb, z, f_b, f_ab, f_a })
}

/// Exact mode-pair amplitudes `C(p, l, l')` of a two-excitation eigenstate,
/// normalized to `2 sum C^2 = 1`. Used as an oracle for the residue forms.
pub fn mode_pair_amplitudes(spec: &PolaritonSpectrum, q: usize, energy: f64) -> Vec<DMatrix<f64>> {
    let nb = spec.cells();
    let bands = spec.band_count();
    let mut c: Vec<DMatrix<f64>> = (0..nb)
        .map(|m| {
            let m2 = partner(spec, q, m);
            DMatrix::from_fn(bands, bands, |l, lp| {
                spec.vectors[m][l][0] * spec.vectors[m2][lp][0] / (energy - spec.energy(m, l) - spec.energy(m2, lp))
            })
        })
        .collect();
    let norm: f64 = 2.0 * c.iter().flat_map(|x| x.iter()).map(|x| x * x).sum::<f64>();
    for x in c.iter_mut() {
        *x /= norm.sqrt();
    }
    c
}

/// The same amplitudes resolved on emitter and photon momenta, in the layout
/// of [`DoublonWavefunctions`].
pub fn mode_pair_wavefunctions(spec: &PolaritonSpectrum, q: usize, energy: f64) -> DoublonWavefunctions {
    let nb = spec.cells();
    let z = spec.z();
    let bands = spec.band_count();
    let c = mode_pair_amplitudes(spec, q, energy);
    let mut f_b = vec![0.0; nb];
    let mut f_ab = DMatrix::<f64>::zeros(nb, z);
    let mut f_a = vec![DMatrix::<f64>::zeros(z, z); nb];
    for m in 0..nb {
        let m2 = partner(spec, q, m);
        for l in 0..bands {
            let v1 = &spec.vectors[m][l];
            for lp in 0..bands {
                let v2 = &spec.vectors[m2][lp];
                let cc = c[m][(l, lp)];
                f_b[m] += cc * v1[0] * v2[0];
                for n in 0..z {
                    f_ab[(m, n)] += 2.0 * cc * v1[0] * v2[1 + n];
                }
                for a in 0..z {
                    for b in 0..z {
                        f_a[m][(a, b)] += cc * v1[1 + a] * v2[1 + b];
                    }
                }
            }
        }
    }
    let bubble = PairBubble::new(spec, q);
    DoublonWavefunctions { q, energy, z2: -1.0 / bubble.derivative(energy), cells: nb, z, f_b, f_ab, f_a }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveInteraction {
    pub u_eff: f64,
    pub u_int: f64,
    pub z1: f64,
    /// Incident energy `E_0 = 2 E_1(0)`.
    pub e0: f64,
}

/// `U_int(q, E)` with the lowest-lowest band pair removed from the bubble.
pub fn feshbach_interaction(spec: &PolaritonSpectrum, q: usize, e: f64) -> Result<f64> {
    let b = PairBubble::filtered(spec, q, |l, lp| !(l == 0 && lp == 0));
    b.check(e)?;
    Ok(-1.0 / b.value(e))
}

/// `U_eff = Z_1(0)^2 U_int(0, 2 E_1(0))`.
pub fn u_eff(spec: &PolaritonSpectrum) -> Result<EffectiveInteraction> {
    let e0 = 2.0 * spec.energy(0, 0);
    let z1 = spec.weight(0, 0);
    let u_int = feshbach_interaction(spec, 0, e0)?;
    Ok(EffectiveInteraction { u_eff: z1 * z1 * u_int, u_int, z1, e0 })
}
