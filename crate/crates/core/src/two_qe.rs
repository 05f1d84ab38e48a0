//! Two excitations on an emitter pair: channel T-matrix, ground and doublon
//! poles, residue wavefunctions and the two-mode variational ansatz.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::{BathSpec, CouplingSpec, ModeSum};
use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::single::{effective_hopping_two_qe, solve_two_qe, TwoQeBoundStates};

/// Minimum distance of a pole from any energy denominator.
pub const DEGENERACY_GUARD: f64 = 1e-9;

/// Emitter-visible single-excitation modes of one parity channel.
#[derive(Debug, Clone)]
struct Modes {
    e: Vec<f64>,
    z: Vec<f64>,
}

fn channel_modes(single: &TwoQeBoundStates, sigma: i8) -> Result<Modes> {
    let ch = single
        .channel(sigma)
        .ok_or_else(|| Error::InvalidParameter("pair solver needs finite-ring single-excitation data".into()))?;
    Ok(Modes { e: ch.energies.clone(), z: ch.residues.clone() })
}

/// Sorted two-particle thresholds of one scattering channel and the weights
/// of the bracket `B_s(w) = sum_i W_i / (w - t_i)`.
#[derive(Debug, Clone)]
pub struct PairChannelT {
    pub s: i8,
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PairChannelT {
    pub fn new(single: &TwoQeBoundStates, s: i8) -> Result<Self> {
        let plus = channel_modes(single, 1)?;
        let minus = channel_modes(single, -1)?;
        let pick = |sg: i8| if sg > 0 { &plus } else { &minus };
        let mut pairs = Vec::new();
        for sigma in [1i8, -1] {
            let a = pick(sigma);
            let b = pick(s * sigma);
            for (ea, za) in a.e.iter().zip(&a.z) {
                for (eb, zb) in b.e.iter().zip(&b.z) {
                    pairs.push((ea + eb, 0.5 * za * zb));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut thresholds: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (t, w) in pairs {
            match thresholds.last() {
                Some(&last) if t == last => *weights.last_mut().unwrap() += w,
                _ => {
                    thresholds.push(t);
                    weights.push(w);
                }
            }
        }
        Ok(Self { s, thresholds, weights })
    }

    /// `B_s(w) = (1/2) sum Z Z' / (w - E - E')`.
    pub fn bracket(&self, w: f64) -> f64 {
        self.thresholds.iter().zip(&self.weights).map(|(t, c)| c / (w - t)).sum()
    }

    pub fn bracket_derivative(&self, w: f64) -> f64 {
        -self.thresholds.iter().zip(&self.weights).map(|(t, c)| c / ((w - t) * (w - t))).sum::<f64>()
    }

    /// `T_s(w) = -1 / B_s(w)`.
    pub fn t(&self, w: f64) -> Result<f64> {
        if self.thresholds.iter().any(|t| (w - t).abs() <= 1e-12 * (1.0 + t.abs())) {
            return Err(Error::AtPole(w));
        }
        Ok(-1.0 / self.bracket(w))
    }

    /// Index of the threshold closest to `value`.
    fn index_near(&self, value: f64) -> usize {
        let i = self.thresholds.partition_point(|&t| t < value);
        if i == 0 {
            return 0;
        }
        if i == self.thresholds.len() {
            return i - 1;
        }
        if (self.thresholds[i] - value).abs() < (value - self.thresholds[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// The unique zero of the bracket between threshold `i` and `i + 1`.
    pub fn zero_in_gap(&self, i: usize) -> Option<f64> {
        if i + 1 >= self.thresholds.len() {
            return None;
        }
        let (lo, hi) = (self.thresholds[i], self.thresholds[i + 1]);
        // B runs from +inf to -inf across the gap
        Some(bisect(|w| -self.bracket(w), lo, hi, true))
    }
}

/// Stand-alone evaluation of the channel T-matrix.
pub fn channel_t(single: &TwoQeBoundStates, s: i8, w: f64) -> Result<f64> {
    PairChannelT::new(single, s)?.t(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairPole {
    Ground,
    DoublonPlus,
    DoublonMinus,
}

impl PairPole {
    pub fn channel(self) -> i8 {
        match self {
            PairPole::Ground | PairPole::DoublonPlus => 1,
            PairPole::DoublonMinus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleData {
    pub energy: f64,
    /// `Z_0^s`, residue of the channel T-matrix.
    pub z0: f64,
    /// `Z_2s`, probability of both emitters excited.
    pub z2: f64,
}

#[derive(Debug, Clone)]
pub struct PairSpectrum {
    pub single: TwoQeBoundStates,
    pub ground: PoleData,
    pub doublon_plus: Option<PoleData>,
    pub doublon_minus: Option<PoleData>,
}

impl PairSpectrum {
    pub fn e_ground(&self) -> f64 {
        self.ground.energy
    }
    pub fn e_doublon_plus(&self) -> Option<f64> {
        self.doublon_plus.map(|p| p.energy)
    }
    pub fn e_doublon_minus(&self) -> Option<f64> {
        self.doublon_minus.map(|p| p.energy)
    }
    pub fn pole(&self, which: PairPole) -> Option<&PoleData> {
        match which {
            PairPole::Ground => Some(&self.ground),
            PairPole::DoublonPlus => self.doublon_plus.as_ref(),
            PairPole::DoublonMinus => self.doublon_minus.as_ref(),
        }
    }
}

/// `sum_sigma sigma sum_{l in sigma, l' in s sigma} Z Z' / (E - E_l - E_l')`.
fn signed_sum(plus: &Modes, minus: &Modes, s: i8, e: f64) -> f64 {
    let pick = |sg: i8| if sg > 0 { plus } else { minus };
    let mut acc = 0.0;
    for sigma in [1i8, -1] {
        let a = pick(sigma);
        let b = pick(s * sigma);
        let mut part = 0.0;
        for (ea, za) in a.e.iter().zip(&a.z) {
            for (eb, zb) in b.e.iter().zip(&b.z) {
                part += za * zb / (e - ea - eb);
            }
        }
        acc += sigma as f64 * part;
    }
    acc
}

fn pole_data(t: &PairChannelT, plus: &Modes, minus: &Modes, e: f64) -> PoleData {
    let z0 = -1.0 / t.bracket_derivative(e);
    let g = signed_sum(plus, minus, t.s, e);
    PoleData { energy: e, z0, z2: 0.25 * z0 * g * g }
}

/// Ground state and doublon poles of the emitter pair on a finite ring.
pub fn solve_pair_poles(bath: &BathSpec, coupling: &CouplingSpec) -> Result<PairSpectrum> {
    let single = solve_two_qe(bath, coupling, ModeSum::Finite)?;
    pair_poles_from(single)
}

pub fn pair_poles_from(single: TwoQeBoundStates) -> Result<PairSpectrum> {
    let plus = channel_modes(&single, 1)?;
    let minus = channel_modes(&single, -1)?;
    let tp = PairChannelT::new(&single, 1)?;
    let tm = PairChannelT::new(&single, -1)?;
    let e_ground = tp.zero_in_gap(0).ok_or_else(|| Error::InvalidParameter("ring too small".into()))?;
    let ground = pole_data(&tp, &plus, &minus, e_ground);
    let e1p = plus.e[0];
    let mut doublon_plus = None;
    let mut doublon_minus = None;
    if let Some(e1m) = single.e_minus {
        if e1p > 2.0 * e1m && tp.bracket(e1p) < 0.0 {
            let i = tp.index_near(2.0 * e1m);
            if let Some(e) = tp.zero_in_gap(i) {
                doublon_plus = Some(pole_data(&tp, &plus, &minus, e));
            }
        }
        if tm.bracket(e1p) < 0.0 {
            let i = tm.index_near(e1p + e1m);
            if let Some(e) = tm.zero_in_gap(i) {
                doublon_minus = Some(pole_data(&tm, &plus, &minus, e));
            }
        }
    }
    Ok(PairSpectrum { single, ground, doublon_plus, doublon_minus })
}

/// `(mu_D, t_D)` of the doublon hopping model.
pub fn doublon_hopping_two_qe(spec: &PairSpectrum) -> Result<(f64, f64)> {
    match (spec.e_doublon_plus(), spec.e_doublon_minus()) {
        (Some(p), Some(m)) => Ok((0.5 * (p + m), 0.5 * (p - m))),
        (p, m) => Err(Error::DoublonPairIncomplete(format!(
            "plus {}, minus {}",
            if p.is_some() { "present" } else { "absent" },
            if m.is_some() { "present" } else { "absent" }
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    pub t_eff: f64,
    pub j_z: f64,
    pub e_ground: f64,
    pub e0: f64,
}

/// Effective XXZ parameters for the one- and two-excitation sectors.
pub fn spin_model_parameters(spec: &PairSpectrum, single: &TwoQeBoundStates) -> Result<SpinModel> {
    let (e0, t_eff) = effective_hopping_two_qe(single)?;
    Ok(SpinModel { t_eff, j_z: spec.e_ground() - 2.0 * e0, e_ground: spec.e_ground(), e0 })
}

/// Residue wavefunctions of one pole in momentum space. Real-space
/// transforms are available through the accessor methods.
#[derive(Debug, Clone)]
pub struct PairWavefunctions {
    pub pole: PairPole,
    pub s: i8,
    pub energy: f64,
    pub n: usize,
    pub d: usize,
    pub z2: f64,
    /// Sign of the doubly excited amplitude.
    pub amp2: f64,
    /// `phi1_k[j][k]` for emitter `j` excited and one photon `k`.
    pub phi1_k: [Vec<Complex64>; 2],
    /// `phi2_k[(k, k')]`.
    pub phi2_k: DMatrix<Complex64>,
}

impl PairWavefunctions {
    /// `Z_2s + sum |phi_js(k)|^2 + 2 sum |phi_2s(k,k')|^2`. The two-photon
    /// amplitude multiplies `a_k^dag a_k'^dag` summed over ordered pairs.
    pub fn norm(&self) -> f64 {
        let one: f64 = self.phi1_k.iter().flatten().map(|x| x.norm_sqr()).sum();
        let two: f64 = self.phi2_k.iter().map(|x| x.norm_sqr()).sum();
        self.z2 + one + 2.0 * two
    }

    /// `phi_js(n) = sum_k phi_js(k) e^{ikn} / sqrt(N)`.
    pub fn phi1_real(&self, j: usize) -> Vec<Complex64> {
        let n = self.n;
        let sq = (n as f64).sqrt();
        (0..n)
            .map(|site| {
                (0..n)
                    .map(|m| self.phi1_k[j][m] * phase(m, site, n))
                    .sum::<Complex64>()
                    / sq
            })
            .collect()
    }

    /// `phi_2s(n, m) = sum_{kk'} phi_2s(k,k') e^{ikn + ik'm} / N`.
    pub fn phi2_real(&self) -> DMatrix<Complex64> {
        let n = self.n;
        let f = DMatrix::from_fn(n, n, |site, m| phase(m, site, n));
        (&f * &self.phi2_k * f.transpose()) / Complex64::new(n as f64, 0.0)
    }

    /// State vector in the basis of an emitter-pair ED sector with two
    /// excitations (emitters on sites 0, 1; bath site `n` on `2 + n`).
    pub fn to_ed_vector(&self, basis: &crate::ed::SectorBasis) -> Vec<Complex64> {
        let n = self.n;
        let mut v = vec![Complex64::new(0.0, 0.0); basis.dimension()];
        let mut put = |occ: Vec<u32>, amp: Complex64| {
            if let Some(i) = basis.index_of(&occ) {
                v[i] += amp;
            }
        };
        let mut occ = vec![0u32; n + 2];
        occ[0] = 1;
        occ[1] = 1;
        put(occ, Complex64::new(self.amp2 * self.z2.sqrt(), 0.0));
        for j in 0..2 {
            let phi = self.phi1_real(j);
            for site in 0..n {
                let mut occ = vec![0u32; n + 2];
                occ[j] = 1;
                occ[2 + site] = 1;
                put(occ, phi[site]);
            }
        }
        let p2 = self.phi2_real();
        for a in 0..n {
            for b in a..n {
                let mut occ = vec![0u32; n + 2];
                occ[2 + a] += 1;
                occ[2 + b] += 1;
                // ordered-pair amplitude onto the normalized Fock state
                let amp = if a == b { 2f64.sqrt() * p2[(a, a)] } else { p2[(a, b)] + p2[(b, a)] };
                put(occ, amp);
            }
        }
        v
    }
}

fn phase(m: usize, site: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * ((m * site) % n) as f64 / n as f64)
}

/// Evaluate the residue wavefunctions of a pole.
pub fn pair_wavefunctions(spec: &PairSpectrum, which: PairPole) -> Result<PairWavefunctions> {
    let pole = *spec.pole(which).ok_or_else(|| Error::InvalidParameter(format!("{which:?} pole is absent")))?;
    let single = &spec.single;
    let bath = single.bath;
    let omega = single.coupling.omega;
    let s = which.channel();
    let plus = channel_modes(single, 1)?;
    let minus = channel_modes(single, -1)?;
    let pick = |sg: i8| if sg > 0 { &plus } else { &minus };
    let e = pole.energy;
    let n = bath.n;
    let d = bath.spacing;
    let eps: Vec<f64> = (0..n).map(|m| bath.mode_energy(m)).collect();

    let guard = |h: f64, what: &str| -> Result<()> {
        if h.abs() < DEGENERACY_GUARD {
            Err(Error::DegenerateResidue { pole: e, gap: h, what: what.to_string() })
        } else {
            Ok(())
        }
    };
    for sigma in [1i8, -1] {
        for &ea in &pick(sigma).e {
            for &eb in &pick(s * sigma).e {
                guard(e - ea - eb, "pair denominator")?;
            }
            for &ek in &eps {
                guard(e - ek - ea, "photon-polariton denominator")?;
            }
        }
    }
    for &a in &eps {
        for &b in &eps {
            guard(e - a - b, "two-photon denominator")?;
        }
    }

    let sq_z0 = pole.z0.sqrt();
    let nf = n as f64;
    let kd = |m: usize| 2.0 * PI * ((m * d) % n) as f64 / nf;
    let eta = |m: usize, sign: f64| Complex64::new(1.0, 0.0) + sign * Complex64::from_polar(1.0, -kd(m));

    // A_sigma(k) = sum_{l in sigma} Z_l / h_{kl}; M_sigma[k, l] = Z_l / h_{kl}
    let mut phi1 = [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]];
    let mut phi2 = DMatrix::<Complex64>::zeros(n, n);
    let m_of = |modes: &Modes| DMatrix::from_fn(n, modes.e.len(), |k, l| modes.z[l] / (e - eps[k] - modes.e[l]));
    let mut z2_sum = 0.0;
    for sigma in [1i8, -1] {
        let a = pick(sigma);
        let b = pick(s * sigma);
        let h = DMatrix::from_fn(a.e.len(), b.e.len(), |l, lp| 1.0 / (e - a.e[l] - b.e[lp]));
        // S(l) = sum_{l'} Z_l' / h_{ll'}
        let s_l: Vec<f64> = (0..a.e.len()).map(|l| (0..b.e.len()).map(|lp| b.z[lp] * h[(l, lp)]).sum()).collect();
        z2_sum += sigma as f64 * (0..a.e.len()).map(|l| a.z[l] * s_l[l]).sum::<f64>();
        let ma = m_of(a);
        let mb = m_of(b);
        for k in 0..n {
            let acc: f64 = (0..a.e.len()).map(|l| ma[(k, l)] * s_l[l]).sum();
            let factor = eta(k, (s * sigma) as f64) * (sq_z0 / nf.sqrt()) * omega * 0.5 * acc;
            phi1[0][k] += factor;
            phi1[1][k] += factor * sigma as f64;
        }
        let p = &ma * &h * mb.transpose();
        let av: Vec<f64> = (0..n).map(|k| ma.row(k).sum()).collect();
        let bv: Vec<f64> = (0..n).map(|k| mb.row(k).sum()).collect();
        let pref = sq_z0 * omega * omega / (4.0 * nf);
        for k in 0..n {
            let ek = eta(k, (s * sigma) as f64);
            for kp in 0..n {
                let val = p[(k, kp)] + av[k] * bv[kp] / (e - eps[k] - eps[kp]);
                phi2[(k, kp)] += ek * eta(kp, sigma as f64) * (pref * val);
            }
        }
    }
    let z2 = 0.25 * pole.z0 * z2_sum * z2_sum;
    Ok(PairWavefunctions {
        pole: which,
        s,
        energy: e,
        n,
        d,
        z2,
        amp2: z2_sum.signum(),
        phi1_k: phi1,
        phi2_k: phi2,
    })
}

/// Two-excitation eigenstate in the basis of pairs of single-excitation
/// modes, `Psi = sum C_{ll'} beta_l^dag beta_l'^dag |0>`. Blocks are indexed
/// `[sigma][sigma']` over the modes of each parity channel.
#[derive(Debug, Clone)]
pub struct ModePairState {
    pub s: i8,
    pub energy: f64,
    pub blocks: [[DMatrix<f64>; 2]; 2],
}

fn ci(sigma: i8) -> usize {
    if sigma > 0 {
        0
    } else {
        1
    }
}

/// Build the normalized mode-pair amplitudes of a pole from the T-matrix
/// structure. Independent of the printed residue formulas.
pub fn mode_pair_state(spec: &PairSpectrum, which: PairPole) -> Result<ModePairState> {
    let pole = spec.pole(which).ok_or_else(|| Error::InvalidParameter(format!("{which:?} pole is absent")))?;
    let s = which.channel();
    let e = pole.energy;
    let modes = [channel_modes(&spec.single, 1)?, channel_modes(&spec.single, -1)?];
    let mut blocks: [[DMatrix<f64>; 2]; 2] = Default::default();
    let mut norm = 0.0;
    for sa in [1i8, -1] {
        for sb in [1i8, -1] {
            let a = &modes[ci(sa)];
            let b = &modes[ci(sb)];
            // sum_j c_j u_{j l} u_{j l'} with c = (1, s)/sqrt 2
            let coef = (1.0 + (s * sa * sb) as f64) / (2.0 * 2f64.sqrt());
            let m = DMatrix::from_fn(a.e.len(), b.e.len(), |l, lp| {
                coef * (a.z[l] * b.z[lp]).sqrt() / (e - a.e[l] - b.e[lp])
            });
            norm += 2.0 * m.iter().map(|x| x * x).sum::<f64>();
            blocks[ci(sa)][ci(sb)] = m;
        }
    }
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::DegenerateResidue { pole: e, gap: 0.0, what: "pole coincides with a pair threshold".into() });
    }
    let scale = 1.0 / norm.sqrt();
    for row in blocks.iter_mut() {
        for m in row.iter_mut() {
            *m *= scale;
        }
    }
    Ok(ModePairState { s, energy: e, blocks })
}

impl ModePairState {
    /// State vector in an emitter-pair ED sector with two excitations.
    pub fn to_ed_vector(&self, single: &TwoQeBoundStates, basis: &crate::ed::SectorBasis) -> Result<Vec<Complex64>> {
        let bath = single.bath;
        let n = bath.n;
        let nf = n as f64;
        let omega = single.coupling.omega;
        let r2 = 2f64.sqrt();
        // (u_1, u_2, f(n)) for every mode of each channel
        let mut modes: [Vec<(f64, f64, Vec<Complex64>)>; 2] = [Vec::new(), Vec::new()];
        for sigma in [1i8, -1] {
            let m = channel_modes(single, sigma)?;
            for (&el, &zl) in m.e.iter().zip(&m.z) {
                let u = zl.sqrt();
                let fk: Vec<Complex64> = (0..n)
                    .map(|k| {
                        let kd = 2.0 * PI * ((k * bath.spacing) % n) as f64 / nf;
                        let eta = Complex64::new(1.0, 0.0) + sigma as f64 * Complex64::from_polar(1.0, -kd);
                        eta * (omega * u / ((2.0 * nf).sqrt() * (el - bath.mode_energy(k))))
                    })
                    .collect();
                let fx: Vec<Complex64> =
                    (0..n).map(|x| (0..n).map(|k| fk[k] * phase(k, x, n)).sum::<Complex64>() / nf.sqrt()).collect();
                modes[ci(sigma)].push((u / r2, sigma as f64 * u / r2, fx));
            }
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut amp11 = zero;
        let mut amp1 = vec![vec![zero; n]; 2];
        let mut amp2 = DMatrix::<Complex64>::zeros(n, n);
        for a in 0..2 {
            for b in 0..2 {
                let c = &self.blocks[a][b];
                for (l, ml) in modes[a].iter().enumerate() {
                    for (lp, mlp) in modes[b].iter().enumerate() {
                        let cc = c[(l, lp)];
                        if cc == 0.0 {
                            continue;
                        }
                        amp11 += 2.0 * cc * ml.0 * mlp.1;
                        for x in 0..n {
                            amp1[0][x] += 2.0 * cc * ml.0 * mlp.2[x];
                            amp1[1][x] += 2.0 * cc * ml.1 * mlp.2[x];
                        }
                        for x in 0..n {
                            for y in 0..n {
                                amp2[(x, y)] += cc * ml.2[x] * mlp.2[y];
                            }
                        }
                    }
                }
            }
        }
        let mut v = vec![zero; basis.dimension()];
        let mut put = |occ: Vec<u32>, amp: Complex64| {
            if let Some(i) = basis.index_of(&occ) {
                v[i] += amp;
            }
        };
        let mut occ = vec![0u32; n + 2];
        occ[0] = 1;
        occ[1] = 1;
        put(occ, amp11);
        for j in 0..2 {
            for x in 0..n {
                let mut occ = vec![0u32; n + 2];
                occ[j] = 1;
                occ[2 + x] = 1;
                put(occ, amp1[j][x]);
            }
        }
        for x in 0..n {
            for y in x..n {
                let mut occ = vec![0u32; n + 2];
                occ[2 + x] += 1;
                occ[2 + y] += 1;
                let amp = if x == y { r2 * amp2[(x, x)] } else { amp2[(x, y)] + amp2[(y, x)] };
                put(occ, amp);
            }
        }
        Ok(v)
    }

    /// Weight of `beta_sigma^dag^2 |0> / sqrt 2` summed over the bound modes,
    /// counting only channels where a bound mode exists.
    pub fn bound_pair_weight(&self, single: &TwoQeBoundStates) -> f64 {
        let mut p = 0.0;
        if single.e_plus.is_some() {
            p += 2.0 * self.blocks[0][0][(0, 0)].powi(2);
        }
        if single.e_minus.is_some() {
            p += 2.0 * self.blocks[1][1][(0, 0)].powi(2);
        }
        p
    }

    /// Probability of both emitters excited.
    pub fn doubly_excited(&self, single: &TwoQeBoundStates) -> Result<f64> {
        let u = |sg: i8| -> Result<Vec<f64>> { Ok(channel_modes(single, sg)?.z.iter().map(|z| z.sqrt()).collect()) };
        let (up, um) = (u(1)?, u(-1)?);
        // <0| b_1 b_2 |Psi> = 2 sum C_{ll'} u_{1l} u_{2l'}
        let mut amp = 0.0;
        for (sa, ua) in [(1i8, &up), (-1, &um)] {
            for (sb, ub) in [(1i8, &up), (-1, &um)] {
                let m = &self.blocks[ci(sa)][ci(sb)];
                for l in 0..ua.len() {
                    for lp in 0..ub.len() {
                        amp += 2.0 * m[(l, lp)] * (ua[l] / 2f64.sqrt()) * (sb as f64 * ub[lp] / 2f64.sqrt());
                    }
                }
            }
        }
        Ok(amp * amp)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationalState {
    pub v_plus: f64,
    pub v_minus: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub energy: f64,
    /// `|<Psi_v | Psi_G>|^2`.
    pub overlap_pv: f64,
    /// `|<0| beta_sigma gamma_{N,sigma}^dag |0>|`, absent without the bound mode.
    pub p_plus: Option<f64>,
    pub p_minus: Option<f64>,
    /// Weight of the bound-mode pairs in the exact ground state.
    pub p: f64,
    /// True when only the symmetric mode enters `p`.
    pub symmetric_only: bool,
    pub iterations: usize,
}

/// Channel sums on the finite ring, grouped by distinct mode energy.
struct VarSums {
    eps: Vec<f64>,
    w: [Vec<f64>; 2],
}

impl VarSums {
    fn new(bath: &BathSpec) -> Self {
        let n = bath.n;
        let d = bath.spacing as f64;
        let mut eps = Vec::new();
        let mut w = [Vec::new(), Vec::new()];
        for m in 0..=n / 2 {
            let mult = if m == 0 || 2 * m == n { 1.0 } else { 2.0 };
            let k = 2.0 * PI * m as f64 / n as f64;
            eps.push(bath.mode_energy(m));
            w[0].push(mult * (1.0 + (k * d).cos()) / n as f64);
            w[1].push(mult * (1.0 - (k * d).cos()) / n as f64);
        }
        Self { eps, w }
    }

    /// `(I_sigma(e), N_sigma(e))`.
    fn eval(&self, sigma: usize, e: f64) -> (f64, f64) {
        let mut i = 0.0;
        let mut nn = 0.0;
        for (ek, wk) in self.eps.iter().zip(&self.w[sigma]) {
            let h = e - ek;
            i += wk / h;
            nn += wk / (h * h);
        }
        (i, nn)
    }
}

const E_LO: f64 = -40.0;
const E_HI: f64 = -1e-9;

fn e_from(t: f64, j: f64) -> f64 {
    E_LO * j + (E_HI * j - E_LO * j) / (1.0 + (-t).exp())
}

fn t_from(e: f64, j: f64) -> f64 {
    let x = ((e - E_LO * j) / (E_HI * j - E_LO * j)).clamp(1e-12, 1.0 - 1e-12);
    (x / (1.0 - x)).ln()
}

/// Variational energy for parameters `(v_+, v_-, e_+, e_-)`.
fn variational_energy(sums: &VarSums, c: &CouplingSpec, v: [f64; 2], e: [f64; 2]) -> f64 {
    let n2: f64 = v.iter().map(|x| (1.0 + x * x).powi(2)).sum::<f64>() / 2.0;
    let mut acc = 2.0 * c.delta;
    for sg in 0..2 {
        let (i, nn) = sums.eval(sg, e[sg]);
        let vs = v[sg];
        let sq = nn.sqrt();
        acc += c.delta * vs * vs
            + vs * vs * (1.0 + vs * vs) * e[sg]
            + vs * (1.0 + vs * vs) * (2.0 * c.omega - vs / sq) * i / sq;
    }
    acc / n2
}

fn golden_min<F: FnMut(f64) -> f64>(mut f: F, x0: f64, step: f64) -> (f64, f64) {
    // downhill bracketing followed by golden-section search
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = x0;
    let mut fa = f(a);
    let mut b = x0 + step;
    let mut fb = f(b);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + (b - a) * 1.618;
    let mut fc = f(c);
    let mut guard = 0;
    while fc < fb && guard < 200 {
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + (b - a) * 1.618;
        fc = f(c);
        guard += 1;
    }
    let _ = fa;
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-12 * (1.0 + x1.abs()) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn coordinate_descent(sums: &VarSums, c: &CouplingSpec, j: f64, seed: [f64; 4]) -> Result<([f64; 4], f64, usize)> {
    let energy = |x: &[f64; 4]| variational_energy(sums, c, [x[0], x[1]], [e_from(x[2], j), e_from(x[3], j)]);
    let mut x = seed;
    let mut best = energy(&x);
    let budget = 2000;
    for it in 0..budget {
        let before = best;
        for p in 0..4 {
            let step = if p < 2 { 0.1 * (1.0 + x[p].abs()) } else { 0.5 };
            let (xp, fp) = golden_min(
                |val| {
                    let mut y = x;
                    y[p] = val;
                    energy(&y)
                },
                x[p],
                step,
            );
            if fp < best {
                x[p] = xp;
                best = fp;
            }
        }
        if (before - best).abs() < 1e-10 * j {
            return Ok((x, best, it + 1));
        }
    }
    Err(Error::OptimizerNotConverged { iterations: budget, last_change: f64::NAN })
}

/// Optimize the two-mode ansatz and compare it with the exact ground state.
pub fn variational_ground_state(bath: &BathSpec, coupling: &CouplingSpec) -> Result<VariationalState> {
    if !(coupling.omega > 0.0) {
        return Err(Error::InvalidParameter("variational state needs omega > 0".into()));
    }
    let spec = solve_pair_poles(bath, coupling)?;
    variational_from(&spec)
}

pub fn variational_from(spec: &PairSpectrum) -> Result<VariationalState> {
    let single = &spec.single;
    let bath = &single.bath;
    let coupling = &single.coupling;
    let j = bath.j;
    let sums = VarSums::new(bath);
    let e_seed = |e: Option<f64>| t_from(e.unwrap_or(-0.1 * j), j);
    let (tp, tm) = (e_seed(single.e_plus), e_seed(single.e_minus));
    let markov = if coupling.delta.abs() > 1e-3 * j { coupling.omega / coupling.delta.abs() } else { 1.0 };
    let mut best: Option<([f64; 4], f64, usize)> = None;
    for v0 in [markov, 1.0, 5.0] {
        let r = coordinate_descent(&sums, coupling, j, [v0, v0, tp, tm])?;
        if best.as_ref().is_none_or(|b| r.1 < b.1) {
            best = Some(r);
        }
    }
    let (x, energy, iterations) = best.unwrap();
    let (v, e) = ([x[0], x[1]], [e_from(x[2], j), e_from(x[3], j)]);

    // deformed modes expanded over single-excitation eigenmodes of each channel
    let exact = mode_pair_state(spec, PairPole::Ground)?;
    let mut g: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (ix, sigma) in [(0usize, 1i8), (1, -1)] {
        let modes = channel_modes(single, sigma)?;
        let (_, nn) = sums.eval(ix, e[ix]);
        g[ix] = modes
            .e
            .iter()
            .zip(&modes.z)
            .map(|(&el, &zl)| {
                let u = zl.sqrt();
                // sum_k f_l(k)^* phi_sigma(k)
                let mut acc = 0.0;
                for (ek, wk) in sums.eps.iter().zip(&sums.w[ix]) {
                    acc += wk / ((el - ek) * (e[ix] - ek));
                }
                let fphi = coupling.omega * u * acc / nn.sqrt();
                u + v[ix] * fphi
            })
            .collect();
    }
    let n2: f64 = v.iter().map(|x| (1.0 + x * x).powi(2)).sum::<f64>() / 2.0;
    let mut amp = 0.0;
    for (ix, sign) in [(0usize, 1.0), (1, -1.0)] {
        let c = &exact.blocks[ix][ix];
        let gv = nalgebra::DVector::from_vec(g[ix].clone());
        amp += sign * (gv.transpose() * c * &gv)[(0, 0)];
    }
    let overlap_pv = (amp / n2.sqrt()).powi(2);
    let p_plus = single.e_plus.map(|_| g[0][0].abs() / (1.0 + v[0] * v[0]).sqrt());
    let p_minus = single.e_minus.map(|_| g[1][0].abs() / (1.0 + v[1] * v[1]).sqrt());
    let p = exact.bound_pair_weight(single);
    Ok(VariationalState {
        v_plus: v[0],
        v_minus: v[1],
        e_plus: e[0],
        e_minus: e[1],
        energy,
        overlap_pv,
        p_plus,
        p_minus,
        p,
        symmetric_only: single.e_minus.is_none(),
        iterations,
    })
}
