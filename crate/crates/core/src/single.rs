//! One-excitation sector: bound states of an emitter pair and polariton
//! bands of a periodic emitter array.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bath::{continuum_green_real, decaying_root, BathSpec, CouplingSpec, ModeSum};
use crate::error::{Error, Result};
use crate::fourier::{hoppings_from_band, Hoppings};
use crate::roots::{bisect, log_probes, scan_brackets, SecularEquation};

/// Distance from the band edge below which a root counts as merged.
pub const EDGE_MARGIN: f64 = 1e-10;
/// Closest probe to the band edge, in units of `J`.
pub const EDGE_PROBE: f64 = 1e-12;
pub const PROBE_COUNT: usize = 400;

/// All emitter-visible eigenstates of one parity channel on a finite ring.
#[derive(Debug, Clone)]
pub struct ChannelSpectrum {
    pub sigma: i8,
    pub energies: Vec<f64>,
    pub residues: Vec<f64>,
    pub equation: SecularEquation,
}

#[derive(Debug, Clone)]
pub struct TwoQeBoundStates {
    pub bath: BathSpec,
    pub coupling: CouplingSpec,
    pub modes: ModeSum,
    pub e_plus: Option<f64>,
    pub e_minus: Option<f64>,
    pub u_plus: Option<f64>,
    pub u_minus: Option<f64>,
    pub exists_minus: bool,
    /// Bound states above the band, `(plus, minus)`.
    pub above: (Option<f64>, Option<f64>),
    /// Channel spectra `[plus, minus]`; only for `ModeSum::Finite`.
    pub channels: Option<[ChannelSpectrum; 2]>,
}

impl TwoQeBoundStates {
    pub fn channel(&self, sigma: i8) -> Option<&ChannelSpectrum> {
        self.channels.as_ref().map(|c| if sigma > 0 { &c[0] } else { &c[1] })
    }
}

/// `omega - Delta - Omega^2 (G_0 + sigma G_d)` in the continuum, with its derivative.
fn continuum_channel(j: f64, c: &CouplingSpec, d: i64, sigma: f64, omega: f64) -> (f64, f64) {
    let (g0, dg0) = continuum_green_real(j, omega, 0);
    let (gd, dgd) = if d == 0 { (g0, dg0) } else { continuum_green_real(j, omega, d) };
    let w2 = c.omega * c.omega;
    (omega - c.delta - w2 * (g0 + sigma * gd), 1.0 - w2 * (dg0 + sigma * dgd))
}

fn continuum_below(j: f64, c: &CouplingSpec, d: i64, sigma: f64) -> Option<(f64, f64)> {
    let far = 40.0 * j + c.delta.abs() + 2.0 * c.omega;
    let grid = log_probes(0.0, EDGE_PROBE * j, far, PROBE_COUNT, true);
    let f = |w: f64| continuum_channel(j, c, d, sigma, w).0;
    let br = scan_brackets(f, &grid);
    let &(lo, hi, neg) = br.last()?;
    let e = bisect(f, lo, hi, neg);
    if e > -EDGE_MARGIN * j {
        return None;
    }
    let (_, df) = continuum_channel(j, c, d, sigma, e);
    Some((e, 1.0 / df))
}

fn continuum_above(j: f64, c: &CouplingSpec, d: i64, sigma: f64) -> Option<(f64, f64)> {
    let top = 4.0 * j;
    let far = 40.0 * j + c.delta.abs() + 2.0 * c.omega;
    let grid = log_probes(top, EDGE_PROBE * j, far, PROBE_COUNT, false);
    let f = |w: f64| continuum_channel(j, c, d, sigma, w).0;
    let br = scan_brackets(f, &grid);
    let &(lo, hi, neg) = br.first()?;
    let e = bisect(f, lo, hi, neg);
    if e < top + EDGE_MARGIN * j {
        return None;
    }
    let (_, df) = continuum_channel(j, c, d, sigma, e);
    Some((e, 1.0 / df))
}

/// Pole expansion of one parity channel on the finite ring. Degenerate
/// `k, -k` modes are merged exactly.
pub fn channel_equation(bath: &BathSpec, c: &CouplingSpec, sigma: f64) -> SecularEquation {
    let n = bath.n;
    let d = bath.spacing as f64;
    let w2 = c.omega * c.omega / n as f64;
    let pairs = (0..=n / 2)
        .map(|m| {
            let mult = if m == 0 || 2 * m == n { 1.0 } else { 2.0 };
            let k = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            (bath.mode_energy(m), mult * w2 * (1.0 + sigma * (k * d).cos()))
        })
        .collect();
    SecularEquation::from_pairs(c.delta, pairs, 0.0, 1e-14 * w2)
}

fn finite_channel(bath: &BathSpec, c: &CouplingSpec, sigma: i8) -> ChannelSpectrum {
    let equation = channel_equation(bath, c, sigma as f64);
    let roots = equation.roots();
    ChannelSpectrum {
        sigma,
        energies: roots.iter().map(|r| r.energy).collect(),
        residues: roots.iter().map(|r| r.residue).collect(),
        equation,
    }
}

/// Symmetric and anti-symmetric bound states of two emitters `d` sites apart.
pub fn solve_two_qe(bath: &BathSpec, coupling: &CouplingSpec, modes: ModeSum) -> Result<TwoQeBoundStates> {
    if !(coupling.omega > 0.0) {
        return Err(Error::InvalidParameter("two-emitter solve needs omega > 0".into()));
    }
    let j = bath.j;
    let d = bath.spacing as i64;
    let top = bath.band_top();
    let (plus, minus, above, channels) = match modes {
        ModeSum::Continuum => {
            let p = continuum_below(j, coupling, d, 1.0);
            let m = continuum_below(j, coupling, d, -1.0);
            let ap = continuum_above(j, coupling, d, 1.0).map(|r| r.0);
            let am = continuum_above(j, coupling, d, -1.0).map(|r| r.0);
            (p, m, (ap, am), None)
        }
        ModeSum::Finite => {
            let cp = finite_channel(bath, coupling, 1);
            let cm = finite_channel(bath, coupling, -1);
            let below = |ch: &ChannelSpectrum| {
                (ch.energies[0] < -EDGE_MARGIN * j).then(|| (ch.energies[0], ch.residues[0]))
            };
            let upper = |ch: &ChannelSpectrum| {
                let e = *ch.energies.last().unwrap();
                (e > top + EDGE_MARGIN * j).then_some(e)
            };
            let p = below(&cp);
            let m = below(&cm);
            let above = (upper(&cp), upper(&cm));
            (p, m, above, Some([cp, cm]))
        }
    };
    if plus.is_none() && coupling.delta < 0.0 {
        return Err(Error::NoSymmetricRoot { delta: coupling.delta, omega: coupling.omega });
    }
    Ok(TwoQeBoundStates {
        bath: *bath,
        coupling: *coupling,
        modes,
        e_plus: plus.map(|r| r.0),
        e_minus: minus.map(|r| r.0),
        u_plus: plus.map(|r| r.1.sqrt()),
        u_minus: minus.map(|r| r.1.sqrt()),
        exists_minus: minus.is_some(),
        above,
        channels,
    })
}

/// `(E_0, t_eff)` of the two-site hopping model built from the bound states.
pub fn effective_hopping_two_qe(states: &TwoQeBoundStates) -> Result<(f64, f64)> {
    match (states.e_plus, states.e_minus) {
        (Some(p), Some(m)) => Ok((0.5 * (p + m), 0.5 * (p - m))),
        _ => Err(Error::AntisymmetricMerged),
    }
}

/// Arc-region diagnostic: the pair is well described by two weakly coupled
/// localized modes.
pub fn in_arc_region(e0: f64, t_eff: f64) -> bool {
    t_eff.abs() < 0.05 * e0.abs()
}

/// Single-emitter bound state below the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleBound {
    pub energy: f64,
    pub residue: f64,
    /// Decay length in lattice sites.
    pub xi: f64,
}

pub fn single_bound_state(bath: &BathSpec, coupling: &CouplingSpec, modes: ModeSum) -> Result<SingleBound> {
    let j = bath.j;
    let (energy, residue) = match modes {
        ModeSum::Continuum => {
            // d = 0 with sigma = 0 is the lone-emitter equation
            continuum_below(j, coupling, 0, 0.0).ok_or(Error::NoSymmetricRoot {
                delta: coupling.delta,
                omega: coupling.omega,
            })?
        }
        ModeSum::Finite => {
            let n = bath.n;
            let w2 = coupling.omega * coupling.omega / n as f64;
            let pairs = (0..n).map(|m| (bath.mode_energy(m), w2)).collect();
            let eq = SecularEquation::from_pairs(coupling.delta, pairs, 0.0, 0.0);
            let r = eq.roots()[0];
            if r.energy >= -EDGE_MARGIN * j {
                return Err(Error::NoSymmetricRoot { delta: coupling.delta, omega: coupling.omega });
            }
            (r.energy, r.residue)
        }
    };
    let xi = -1.0 / decaying_root(j, energy).ln();
    Ok(SingleBound { energy, residue, xi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeffEstimate {
    pub e1b: f64,
    pub z1b: f64,
    pub xi: f64,
    /// `Z_1B Sigma_o(E_1B)`.
    pub t_eff: f64,
    /// `-Z_1B Omega^2 e^{-d/xi} / sqrt(E_1B (E_1B - 4J))`.
    pub t_arc: f64,
}

/// Perturbative hopping between two localized single-emitter bound states.
pub fn markovian_teff_estimate(bath: &BathSpec, coupling: &CouplingSpec) -> Result<TeffEstimate> {
    let b = single_bound_state(bath, coupling, ModeSum::Continuum)?;
    let j = bath.j;
    let d = bath.spacing as i64;
    let w2 = coupling.omega * coupling.omega;
    let (go, _) = continuum_green_real(j, b.energy, d);
    let t_eff = b.residue * w2 * go;
    let t_arc = -b.residue * w2 * (-(d as f64) / b.xi).exp() / (b.energy * (b.energy - 4.0 * j)).sqrt();
    Ok(TeffEstimate { e1b: b.energy, z1b: b.residue, xi: b.xi, t_eff, t_arc })
}

/// Polariton bands of a periodic array with `z` bath sites per emitter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolaritonSpectrum {
    pub bath: BathSpec,
    pub coupling: CouplingSpec,
    pub momenta: Vec<f64>,
    /// `bands[m][lambda]`, ascending in `lambda`.
    pub bands: Vec<Vec<f64>>,
    /// Emitter weight `Z_{1 lambda}(p)`.
    pub weights: Vec<Vec<f64>>,
    /// `vectors[m][lambda][0]` is the emitter amplitude, `[1 + n]` the
    /// amplitude on bath mode `k = (p + 2 pi n)/z`.
    pub vectors: Vec<Vec<Vec<f64>>>,
}

impl PolaritonSpectrum {
    pub fn cells(&self) -> usize {
        self.bath.cells()
    }
    pub fn z(&self) -> usize {
        self.bath.spacing
    }
    pub fn band_count(&self) -> usize {
        self.z() + 1
    }
    pub fn energy(&self, m: usize, lambda: usize) -> f64 {
        self.bands[m % self.cells()][lambda]
    }
    pub fn weight(&self, m: usize, lambda: usize) -> f64 {
        self.weights[m % self.cells()][lambda]
    }
    /// Ring index of the bath mode `n` inside cell-momentum `m`.
    pub fn mode_index(&self, m: usize, n: usize) -> usize {
        (m % self.cells()) + self.cells() * n
    }
    pub fn lowest_band(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b[0]).collect()
    }
}

fn diagonalize_cell(bath: &BathSpec, c: &CouplingSpec, m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let z = bath.spacing;
    let nb = bath.cells();
    let g = c.omega / (z as f64).sqrt();
    let mut h = DMatrix::<f64>::zeros(z + 1, z + 1);
    h[(0, 0)] = c.delta;
    for n in 0..z {
        h[(1 + n, 1 + n)] = bath.mode_energy(m + nb * n);
        h[(0, 1 + n)] = g;
        h[(1 + n, 0)] = g;
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..=z).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let col = eig.eigenvectors.column(i);
            let pivot = (0..=z).find(|&r| col[r].abs() > 1e-12).unwrap_or(0);
            let s = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            col.iter().map(|x| s * x).collect()
        })
        .collect();
    (energies, vectors)
}

pub fn polariton_bands(bath: &BathSpec, coupling: &CouplingSpec) -> Result<PolaritonSpectrum> {
    let nb = bath.cells();
    let z = bath.spacing;
    if bath.n != nb * z {
        return Err(Error::InvalidParameter(format!("N = {} not divisible by z = {z}", bath.n)));
    }
    let mut bands = vec![Vec::new(); nb];
    let mut vectors = vec![Vec::new(); nb];
    for m in 0..=nb / 2 {
        let (e, v) = diagonalize_cell(bath, coupling, m);
        if m != 0 && 2 * m != nb {
            // mirror p -> -p: bath mode n maps to z - 1 - n
            let mirrored: Vec<Vec<f64>> = v
                .iter()
                .map(|col| {
                    let mut out = vec![col[0]];
                    out.extend((0..z).map(|n| col[1 + (z - 1 - n)]));
                    out
                })
                .collect();
            bands[nb - m] = e.clone();
            vectors[nb - m] = mirrored;
        }
        bands[m] = e;
        vectors[m] = v;
    }
    let weights = vectors
        .iter()
        .map(|vs: &Vec<Vec<f64>>| vs.iter().map(|v| v[0] * v[0]).collect())
        .collect();
    let momenta = (0..nb).map(|m| 2.0 * std::f64::consts::PI * m as f64 / nb as f64).collect();
    Ok(PolaritonSpectrum { bath: *bath, coupling: *coupling, momenta, bands, weights, vectors })
}

pub type WannierHoppings = Hoppings;

/// Hoppings of the Wannier modes of the lowest polariton band.
pub fn wannier_hoppings(spec: &PolaritonSpectrum) -> Result<WannierHoppings> {
    if spec.band_count() > 1 {
        for (m, b) in spec.bands.iter().enumerate() {
            let gap = b[1] - b[0];
            if gap < 1e-9 * spec.bath.j {
                return Err(Error::AmbiguousBand { index: m, gap });
            }
        }
    }
    hoppings_from_band(&spec.lowest_band())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{self_energy_diag, self_energy_offdiag, InBand};
    use proptest::prelude::*;

    fn cs(delta: f64, omega: f64) -> CouplingSpec {
        CouplingSpec::new(delta, omega).unwrap()
    }

    #[test]
    fn isolated_emitters_share_single_bound_energy() {
        // x^3 (x + 4) = 1 with x = -E/J
        let x = bisect(|x| x * x * x * (x + 4.0) - 1.0, 0.0, 1.0, true);
        let bath = BathSpec::new(1.0, 64, 400).unwrap();
        let s = solve_two_qe(&bath, &cs(0.0, 1.0), ModeSum::Continuum).unwrap();
        assert!((s.e_plus.unwrap() + x).abs() < 1e-12);
        assert!((s.e_minus.unwrap() + x).abs() < 1e-12);
        assert!((x - 0.6011).abs() < 1e-3);
        let b = single_bound_state(&bath, &cs(0.0, 1.0), ModeSum::Continuum).unwrap();
        assert!((b.energy + x).abs() < 1e-12);
    }

    #[test]
    fn antisymmetric_absent_above_threshold() {
        let bath = BathSpec::new(1.0, 64, 1).unwrap();
        let s = solve_two_qe(&bath, &cs(1.0, 1.0), ModeSum::Continuum).unwrap();
        assert!(!s.exists_minus);
        assert!(s.e_plus.is_some());
        assert!(matches!(effective_hopping_two_qe(&s), Err(Error::AntisymmetricMerged)));
    }

    #[test]
    fn root_residuals_are_tiny() {
        let bath = BathSpec::new(1.0, 64, 2).unwrap();
        let c = cs(-0.7, 1.3);
        let s = solve_two_qe(&bath, &c, ModeSum::Continuum).unwrap();
        for (e, sg) in [(s.e_plus.unwrap(), 1.0), (s.e_minus.unwrap(), -1.0)] {
            let sd = self_energy_diag(&bath, &c, e, ModeSum::Continuum, InBand::Reject).unwrap().value.re;
            let so = self_energy_offdiag(&bath, &c, e, 2, ModeSum::Continuum, InBand::Reject).unwrap().value.re;
            assert!((e - c.delta - sd - sg * so).abs() < 1e-12);
        }
        assert!(s.e_plus.unwrap() <= s.e_minus.unwrap());
        let zp = s.u_plus.unwrap().powi(2);
        assert!(zp > 0.0 && zp <= 1.0);
    }

    #[test]
    fn finite_channels_are_normalized() {
        let bath = BathSpec::new(1.0, 30, 3).unwrap();
        let s = solve_two_qe(&bath, &cs(-0.4, 0.9), ModeSum::Finite).unwrap();
        for sg in [1, -1] {
            let ch = s.channel(sg).unwrap();
            let z: f64 = ch.residues.iter().sum();
            assert!((z - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_size_convergence_is_monotone() {
        let c = cs(-0.3, 0.8);
        let cont = solve_two_qe(&BathSpec::new(1.0, 64, 1).unwrap(), &c, ModeSum::Continuum).unwrap();
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| {
                let s = solve_two_qe(&BathSpec::new(1.0, n, 1).unwrap(), &c, ModeSum::Finite).unwrap();
                (s.e_plus.unwrap() - cont.e_plus.unwrap()).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        let big = solve_two_qe(&BathSpec::new(1.0, 1024, 1).unwrap(), &c, ModeSum::Finite).unwrap();
        assert!((big.e_plus.unwrap() - cont.e_plus.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_levels_give_zero_hopping() {
        let bath = BathSpec::new(1.0, 64, 1).unwrap();
        let mut s = solve_two_qe(&bath, &cs(-1.0, 1.0), ModeSum::Continuum).unwrap();
        s.e_minus = s.e_plus;
        assert_eq!(effective_hopping_two_qe(&s).unwrap().1, 0.0);
    }

    #[test]
    fn weak_coupling_estimate_is_accurate() {
        let bath = BathSpec::new(1.0, 64, 2).unwrap();
        let c = cs(-10.0, 0.5);
        let exact = effective_hopping_two_qe(&solve_two_qe(&bath, &c, ModeSum::Continuum).unwrap()).unwrap().1;
        let est = markovian_teff_estimate(&bath, &c).unwrap();
        assert!(((est.t_eff - exact) / exact).abs() < 0.1, "{} vs {exact}", est.t_eff);
        assert!(((est.t_arc - est.t_eff) / exact).abs() < 1e-10);
        let tiny = markovian_teff_estimate(&bath, &cs(-2.0, 1e-4)).unwrap();
        assert!(tiny.t_eff.abs() < 1e-8 && (tiny.z1b - 1.0).abs() < 1e-8);
    }

    #[test]
    fn decoupled_array_bands() {
        let bath = BathSpec::array(1.0, 8, 2).unwrap();
        let s = polariton_bands(&bath, &cs(-1.0, 0.0)).unwrap();
        for m in 0..8 {
            assert!((s.bands[m][0] + 1.0).abs() < 1e-14);
            assert!((s.weights[m][0] - 1.0).abs() < 1e-14);
            let p = s.momenta[m];
            let folded = bath.dispersion(p / 2.0).min(bath.dispersion(p / 2.0 + std::f64::consts::PI));
            assert!((s.bands[m][1] - folded).abs() < 1e-12);
        }
    }

    #[test]
    fn strong_coupling_halves_the_weight() {
        let bath = BathSpec::array(1.0, 16, 1).unwrap();
        let s = polariton_bands(&bath, &cs(-1.0, 30.0)).unwrap();
        for w in &s.weights {
            assert!((w[0] - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn flat_band_hoppings() {
        let bath = BathSpec::array(1.0, 8, 2).unwrap();
        let s = polariton_bands(&bath, &cs(-1.0, 0.0)).unwrap();
        let h = wannier_hoppings(&s).unwrap();
        assert!((h.onsite() + 1.0).abs() < 1e-14);
        assert!(h.get(1).abs() < 1e-14);
    }

    #[test]
    fn touching_bands_are_ambiguous() {
        let bath = BathSpec::array(1.0, 8, 1).unwrap();
        let s = polariton_bands(&bath, &cs(2.0, 0.0)).unwrap();
        assert!(matches!(wannier_hoppings(&s), Err(Error::AmbiguousBand { .. })));
    }

    proptest! {
        #[test]
        fn bands_are_normalized_and_even(delta in -3.0f64..3.0, omega in 0.0f64..3.0, z in 1usize..4, nb in 4usize..12) {
            let bath = BathSpec::array(1.0, nb, z).unwrap();
            let s = polariton_bands(&bath, &cs(delta, omega)).unwrap();
            for m in 0..nb {
                let zsum: f64 = s.weights[m].iter().sum();
                prop_assert!((zsum - 1.0).abs() < 1e-10);
                for l in 0..=z {
                    prop_assert_eq!(s.bands[m][l], s.bands[(nb - m) % nb][l]);
                    if l > 0 {
                        prop_assert!(s.bands[m][l] >= s.bands[m][l - 1]);
                    }
                }
            }
        }

        #[test]
        fn offdiag_bounded_by_diag(w in -20.0f64..-1e-3, d in 0i64..12) {
            let (g0, dg0) = continuum_green_real(1.0, w, 0);
            let (gd, _) = continuum_green_real(1.0, w, d);
            prop_assert!(gd.abs() <= g0.abs() * (1.0 + 1e-14));
            prop_assert!(g0 < 0.0 && dg0 < 0.0);
        }
    }
}
