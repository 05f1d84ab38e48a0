//! Superfluid and Mott diagnostics: one-body correlation matrix, power-law
//! decay of correlations and the entanglement profile with its
//! central-charge fit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::block::SiteTensor;
use super::dmrg::{absorb_left, left_orthonormalize};
use super::MpsGroundState;
use crate::error::{Error, Result};

/// Minimum `lambda_1 / lambda_2` for a superfluid.
pub const SUPERFLUID_RATIO: f64 = 3.0;
/// Maximum `lambda_1 / lambda_2` for a Mott insulator.
pub const MOTT_RATIO: f64 = 1.5;
/// Largest rms residual of an acceptable central-charge fit.
pub const FIT_RESIDUAL_TOL: f64 = 0.02;
/// Largest bulk entropy variation of a Mott insulator.
pub const FLAT_ENTROPY_TOL: f64 = 0.05;

/// Everything a single left-to-right pass of the orthogonality centre yields.
#[derive(Debug, Clone)]
pub struct CanonicalPass {
    /// `F_ij = <a_i^dag a_j>` over all sites.
    pub correlations: DMatrix<f64>,
    /// Schmidt values on bonds `1..L` (bond `b` sits left of site `b`).
    pub schmidt: Vec<Vec<f64>>,
}

fn raise_elem(s: usize) -> f64 {
    (s as f64).sqrt()
}

/// Needs the state in right-canonical form with the centre on site 0.
pub fn canonical_pass(state: &MpsGroundState) -> CanonicalPass {
    let mut t: Vec<SiteTensor> = state.tensors.clone();
    let l = t.len();
    let mut f = DMatrix::zeros(l, l);
    let mut schmidt = Vec::with_capacity(l.saturating_sub(1));
    for i in 0..l {
        let c = &t[i];
        let mut n = 0.0;
        for (&(_, s), m) in &c.blocks {
            n += s as f64 * m.norm_squared();
        }
        f[(i, i)] = n;
        // bra carries one extra excitation: E[qk] has rows dim(qk + 1)
        let mut env: BTreeMap<i32, DMatrix<f64>> = BTreeMap::new();
        for (&(ql, s), ket) in &c.blocks {
            if let Some(bra) = c.block(ql, s + 1) {
                let m = bra.tr_mul(ket) * raise_elem(s + 1);
                let q = ql + s as i32;
                match env.get_mut(&q) {
                    Some(acc) => *acc += m,
                    None => {
                        env.insert(q, m);
                    }
                }
            }
        }
        for j in i + 1..l {
            let b = &t[j];
            let mut val = 0.0;
            let mut next: BTreeMap<i32, DMatrix<f64>> = BTreeMap::new();
            for (&q, e) in &env {
                for s in 0..b.phys {
                    let Some(ket) = b.block(q, s) else { continue };
                    let eb = e * ket;
                    if s >= 1 {
                        if let Some(bra) = b.block(q + 1, s - 1) {
                            val += raise_elem(s) * bra.dot(&eb);
                        }
                    }
                    if let Some(bra) = b.block(q + 1, s) {
                        let m = bra.tr_mul(&eb);
                        let qn = q + s as i32;
                        match next.get_mut(&qn) {
                            Some(acc) => *acc += m,
                            None => {
                                next.insert(qn, m);
                            }
                        }
                    }
                }
            }
            f[(i, j)] = val;
            f[(j, i)] = val;
            env = next;
            if env.is_empty() {
                break;
            }
        }
        if i + 1 < l {
            let (a, carry, sv) = left_orthonormalize(&t[i]);
            t[i] = a;
            absorb_left(&mut t[i + 1], &carry);
            schmidt.push(sv);
        }
    }
    CanonicalPass { correlations: f, schmidt }
}

pub fn correlation_matrix(state: &MpsGroundState) -> DMatrix<f64> {
    canonical_pass(state).correlations
}

pub fn von_neumann(schmidt: &[f64]) -> f64 {
    schmidt
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum()
}

/// Entanglement entropy at every cut between unit cells, `L_A = 1..N_imp-1`.
pub fn entropy_profile(pass: &CanonicalPass, z: usize) -> Vec<f64> {
    let w = z + 1;
    let cells = (pass.schmidt.len() + 1) / w;
    (1..cells).map(|la| von_neumann(&pass.schmidt[la * w - 1])).collect()
}

/// Eigenvalues of `F`, descending.
pub fn correlation_spectrum(f: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(f.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Site-resolved correlation window: reference cell `i0` and separations
/// `r_min..=r_max`, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentWindow {
    pub i0: usize,
    pub r_min: usize,
    pub r_max: usize,
}

impl ExponentWindow {
    /// `i = 10`, `5 <= |i-j| <= 55` at 80 cells, scaled to `n_imp` cells.
    pub fn scaled(n_imp: usize) -> Self {
        let s = |x: f64| (x * n_imp as f64 / 80.0).round() as usize;
        Self { i0: s(10.0).max(1), r_min: s(5.0).max(1), r_max: s(55.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub points: usize,
    pub residual: f64,
}

/// Least squares `y = a + b x`; returns `(a, b, rms residual)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Slope of `ln|F(i0 a, j a)|` against `ln|i - j|` for site class `alpha`
/// (0 = emitter, `1..=z` = bath site) in cells of width `z + 1`.
pub fn fit_exponent(f: &DMatrix<f64>, z: usize, alpha: usize, window: ExponentWindow) -> Result<ExponentFit> {
    let w = z + 1;
    let cells = f.nrows() / w;
    if alpha > z {
        return Err(Error::InvalidParameter(format!("site class {alpha} outside a cell of width {w}")));
    }
    let i = window.i0 * w + alpha;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in window.r_min..=window.r_max {
        let cj = window.i0 + r;
        if cj >= cells {
            break;
        }
        let v = f[(i, cj * w + alpha)].abs();
        if v > 0.0 {
            x.push((r as f64).ln());
            y.push(v.ln());
        }
    }
    if x.len() < 8 {
        return Err(Error::WindowTooSmall(x.len()));
    }
    let (a, b, rms) = linear_fit(&x, &y);
    Ok(ExponentFit { exponent: b, intercept: a, points: x.len(), residual: rms })
}

/// Interior window of cuts `L_A = lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutWindow {
    pub lo: usize,
    pub hi: usize,
}

impl CutWindow {
    /// Trims an eighth of the chain from each edge.
    pub fn scaled(n_imp: usize) -> Self {
        let trim = (n_imp as f64 / 8.0).round() as usize;
        Self { lo: trim.max(1), hi: n_imp.saturating_sub(trim.max(1)) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralChargeFit {
    pub c: f64,
    pub g: f64,
    /// Amplitude of the `(-1)^{L_A}` term when requested.
    pub oscillation: Option<f64>,
    pub points: usize,
    pub residual: f64,
}

/// Fit `S = (c/6) ln[(L/pi) sin(pi L_A / L)] + g`, optionally with an extra
/// `(-1)^{L_A}` term. `profile[k]` is the entropy at `L_A = k + 1`.
pub fn fit_central_charge(profile: &[f64], n_imp: usize, window: CutWindow, oscillation: bool) -> Result<CentralChargeFit> {
    let l = n_imp as f64;
    let cuts: Vec<usize> = (window.lo..=window.hi).filter(|&la| la >= 1 && la <= profile.len()).collect();
    if cuts.len() < 10 {
        return Err(Error::WindowTooSmall(cuts.len()));
    }
    let ncol = if oscillation { 3 } else { 2 };
    let a = DMatrix::from_fn(cuts.len(), ncol, |r, c| {
        let la = cuts[r] as f64;
        match c {
            0 => ((l / PI) * (PI * la / l).sin()).ln() / 6.0,
            1 => 1.0,
            _ => if cuts[r].is_multiple_of(2) { 1.0 } else { -1.0 },
        }
    });
    let y = DVector::from_iterator(cuts.len(), cuts.iter().map(|&la| profile[la - 1]));
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("central-charge fit failed: {e}")))?;
    let res = &a * &sol - &y;
    let rms = (res.norm_squared() / cuts.len() as f64).sqrt();
    Ok(CentralChargeFit {
        c: sol[0],
        g: sol[1],
        oscillation: oscillation.then(|| sol[2]),
        points: cuts.len(),
        residual: rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Superfluid,
    Mott,
    Undetermined,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Superfluid => "superfluid",
            Phase::Mott => "mott",
            Phase::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    /// Ten largest eigenvalues of `F`.
    pub corr_eigs: Vec<f64>,
    pub exponent_window: ExponentWindow,
    /// Emitter-row exponent, absent when the window is too small.
    pub exponent: Option<ExponentFit>,
    /// Entropy at `L_A = 1..N_imp-1`.
    pub entropy: Vec<f64>,
    pub cut_window: CutWindow,
    pub central: Option<CentralChargeFit>,
    /// `max - min` of the entropy over the interior window.
    pub flatness: f64,
    pub phase: Phase,
}

impl PhaseDiagnostics {
    pub fn dominance(&self) -> f64 {
        match (self.corr_eigs.first(), self.corr_eigs.get(1)) {
            (Some(&a), Some(&b)) if b > 0.0 => a / b,
            (Some(_), _) => f64::INFINITY,
            _ => f64::NAN,
        }
    }
}

pub fn diagnose(state: &MpsGroundState) -> PhaseDiagnostics {
    let pass = canonical_pass(state);
    diagnose_pass(&pass, state.chain.n_imp, state.chain.z)
}

pub fn diagnose_pass(pass: &CanonicalPass, n_imp: usize, z: usize) -> PhaseDiagnostics {
    let spectrum = correlation_spectrum(&pass.correlations);
    let corr_eigs: Vec<f64> = spectrum.into_iter().take(10).collect();
    let exponent_window = ExponentWindow::scaled(n_imp);
    let exponent = fit_exponent(&pass.correlations, z, 0, exponent_window).ok();
    let entropy = entropy_profile(pass, z);
    let cut_window = CutWindow::scaled(n_imp);
    let central = fit_central_charge(&entropy, n_imp, cut_window, false).ok();
    let interior: Vec<f64> = (cut_window.lo..=cut_window.hi)
        .filter_map(|la| entropy.get(la.wrapping_sub(1)).copied())
        .collect();
    let flatness = if interior.is_empty() {
        0.0
    } else {
        interior.iter().cloned().fold(f64::MIN, f64::max) - interior.iter().cloned().fold(f64::MAX, f64::min)
    };
    let mut d = PhaseDiagnostics {
        corr_eigs,
        exponent_window,
        exponent,
        entropy,
        cut_window,
        central,
        flatness,
        phase: Phase::Undetermined,
    };
    d.phase = classify_phase(&d);
    d
}

pub fn classify_phase(d: &PhaseDiagnostics) -> Phase {
    let ratio = d.dominance();
    let fit_ok = d.central.is_some_and(|c| c.residual < FIT_RESIDUAL_TOL);
    if ratio > SUPERFLUID_RATIO && fit_ok {
        Phase::Superfluid
    } else if d.flatness < FLAT_ENTROPY_TOL && ratio < MOTT_RATIO {
        Phase::Mott
    } else {
        Phase::Undetermined
    }
}
