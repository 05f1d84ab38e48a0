//! Tight-binding bath: dispersion, momentum grids and the lattice Green
//! functions that enter every self-energy.
//!
//! The band is `eps(k) = 2J - 2J cos k`, so it spans `[0, 4J]`. Momentum sums
//! are evaluated either on the finite ring of `N` modes or in the continuum
//! limit, where the cosine integral has a closed form obtained by closing the
//! contour on the unit circle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regulator used for retarded in-band sums on a finite ring, in units of `J`.
pub const RETARDED_ETA: f64 = 1e-8;

/// Bath dispersion parameters and lattice geometry.
///
/// `spacing` is the emitter separation `d` in the two-emitter setting and the
/// number of bath sites per unit cell `z` for an emitter array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub j: f64,
    pub n: usize,
    pub spacing: usize,
}

impl BathSpec {
    pub fn new(j: f64, n: usize, spacing: usize) -> Result<Self> {
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidParameter(format!("hopping J must be positive, got {j}")));
        }
        if n < 4 {
            return Err(Error::InvalidParameter(format!("need at least 4 bath modes, got {n}")));
        }
        if spacing == 0 {
            return Err(Error::InvalidParameter("spacing must be a positive integer".into()));
        }
        Ok(Self { j, n, spacing })
    }

    /// Bath for a periodic array of `cells` emitters, one every `z` sites.
    pub fn array(j: f64, cells: usize, z: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 unit cells, got {cells}")));
        }
        Self::new(j, cells * z, z)
    }

    /// Number of unit cells when read as an array bath.
    pub fn cells(&self) -> usize {
        self.n / self.spacing
    }

    pub fn dispersion(&self, k: f64) -> f64 {
        dispersion(self.j, k)
    }

    pub fn band_top(&self) -> f64 {
        4.0 * self.j
    }

    /// Energy of the ring mode `k = 2 pi m / N`.
    pub fn mode_energy(&self, m: usize) -> f64 {
        // fold onto [0, N/2] so that k and -k give bit-identical energies
        let m = m % self.n;
        let m = m.min(self.n - m);
        self.dispersion(2.0 * PI * m as f64 / self.n as f64)
    }

    pub fn momenta(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |m| 2.0 * PI * m as f64 / self.n as f64)
    }
}

/// Emitter detuning from the band bottom and Rabi coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub delta: f64,
    pub omega: f64,
}

impl CouplingSpec {
    pub fn new(delta: f64, omega: f64) -> Result<Self> {
        if !(omega >= 0.0) || !omega.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling needs finite delta and omega >= 0, got ({delta}, {omega})"
            )));
        }
        Ok(Self { delta, omega })
    }
}

/// How momentum sums are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSum {
    /// Direct sum over the `N` ring modes.
    Finite,
    /// `N -> infinity`, closed-form contour result.
    Continuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    BelowBand,
    AboveBand,
    InBandRetarded,
}

/// What to do when an energy falls inside the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InBand {
    Reject,
    Retarded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergyValue {
    pub value: Complex64,
    pub branch: Branch,
}

pub fn dispersion(j: f64, k: f64) -> f64 {
    2.0 * j - 2.0 * j * k.cos()
}

/// Root of `b x^2 + 2 a x + b = 0` inside the unit circle together with
/// `1 / (b (x_in - x_out))`, which is the diagonal cosine integral.
fn contour_root(j: f64, omega: Complex64) -> (Complex64, Complex64) {
    let a = omega - 2.0 * j;
    let b = 2.0 * j;
    let disc = (a * a - b * b).sqrt();
    let z1 = (-a + disc) / b;
    let z2 = (-a - disc) / b;
    let (zin, zout) = if z1.norm() < z2.norm() { (z1, z2) } else { (z2, z1) };
    (zin, 2.0 / (b * (zin - zout)))
}

/// `int dk/2pi e^{ikd} / (omega - eps_k)` in the continuum limit. Valid for any
/// `omega` off the real segment `[0, 4J]`; for real in-band energies pass
/// `omega + i0`.
pub fn continuum_green(j: f64, omega: Complex64, d: i64) -> Complex64 {
    let (x, diag) = contour_root(j, omega);
    diag * x.powi(d.unsigned_abs() as i32)
}

/// Continuum Green function and its energy derivative for real `omega`
/// strictly outside the band.
pub fn continuum_green_real(j: f64, omega: f64, d: i64) -> (f64, f64) {
    let a = omega - 2.0 * j;
    let b = 2.0 * j;
    let r = a.signum() * (a * a - b * b).sqrt();
    let x = -(a - r) / b;
    let d = d.unsigned_abs() as i32;
    let xd = x.powi(d);
    let value = xd / r;
    let dr = a / r;
    let dx = -(1.0 - dr) / b;
    let dxd = if d == 0 { 0.0 } else { d as f64 * x.powi(d - 1) * dx };
    let deriv = dxd / r - xd * dr / (r * r);
    (value, deriv)
}

/// Decaying root `x` with `|x| < 1` for real `omega` outside the band; the
/// off-diagonal Green function is the diagonal one times `x^|d|`.
pub fn decaying_root(j: f64, omega: f64) -> f64 {
    let a = omega - 2.0 * j;
    let b = 2.0 * j;
    let r = a.signum() * (a * a - b * b).sqrt();
    -(a - r) / b
}

/// `(1/N) sum_k e^{ikd} / (omega - eps_k)` on the finite ring.
pub fn finite_green(bath: &BathSpec, omega: Complex64, d: i64) -> Complex64 {
    let n = bath.n as f64;
    bath.momenta()
        .map(|k| Complex64::from_polar(1.0, k * d as f64) / (omega - bath.dispersion(k)))
        .sum::<Complex64>()
        / n
}

/// Finite-ring Green function and derivative for real energies off the modes.
pub fn finite_green_real(bath: &BathSpec, omega: f64, d: i64) -> (f64, f64) {
    let n = bath.n as f64;
    let mut value = 0.0;
    let mut deriv = 0.0;
    for k in bath.momenta() {
        let c = (k * d as f64).cos();
        let den = omega - bath.dispersion(k);
        value += c / den;
        deriv -= c / (den * den);
    }
    (value / n, deriv / n)
}

fn classify(bath: &BathSpec, omega: f64, in_band: InBand) -> Result<Branch> {
    if omega < 0.0 {
        Ok(Branch::BelowBand)
    } else if omega > bath.band_top() {
        Ok(Branch::AboveBand)
    } else {
        match in_band {
            InBand::Reject => Err(Error::InBandWithoutBranch { omega, top: bath.band_top() }),
            InBand::Retarded => Ok(Branch::InBandRetarded),
        }
    }
}

fn green(bath: &BathSpec, omega: f64, d: i64, modes: ModeSum, branch: Branch) -> Complex64 {
    match (modes, branch) {
        (ModeSum::Continuum, Branch::InBandRetarded) => {
            continuum_green(bath.j, Complex64::new(omega, RETARDED_ETA * bath.j * 1e-6), d)
        }
        (ModeSum::Continuum, _) => Complex64::new(continuum_green_real(bath.j, omega, d).0, 0.0),
        (ModeSum::Finite, Branch::InBandRetarded) => {
            finite_green(bath, Complex64::new(omega, RETARDED_ETA * bath.j), d)
        }
        (ModeSum::Finite, _) => Complex64::new(finite_green_real(bath, omega, d).0, 0.0),
    }
}

/// `Sigma_d(omega) = (Omega^2/N) sum_k 1/(omega - eps_k)`.
pub fn self_energy_diag(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    omega: f64,
    modes: ModeSum,
    in_band: InBand,
) -> Result<SelfEnergyValue> {
    self_energy_offdiag(bath, coupling, omega, 0, modes, in_band)
}

/// `Sigma_o(omega) = (Omega^2/N) sum_k e^{ikd}/(omega - eps_k)`.
pub fn self_energy_offdiag(
    bath: &BathSpec,
    coupling: &CouplingSpec,
    omega: f64,
    d: i64,
    modes: ModeSum,
    in_band: InBand,
) -> Result<SelfEnergyValue> {
    let branch = classify(bath, omega, in_band)?;
    let g = green(bath, omega, d, modes, branch);
    let mut value = coupling.omega * coupling.omega * g;
    if branch != Branch::InBandRetarded {
        value.im = 0.0;
    }
    Ok(SelfEnergyValue { value, branch })
}

/// Asymptotic dipole-dipole exchange `-(Omega^2/|Delta|) e^{-d/xi}` with
/// `xi = 1/ln(|Delta|/J)`, valid for detunings deep in the gap.
pub fn markovian_vdd(j: f64, delta: f64, omega: f64, d: u32) -> Result<f64> {
    if !(delta < 0.0) {
        return Err(Error::DetuningNotInGap(delta));
    }
    let xi = 1.0 / (delta.abs() / j).ln();
    Ok(-(omega * omega / delta.abs()) * (-(d as f64) / xi).exp())
}

/// `Omega^2 int dk/2pi e^{ikd}/(Delta - eps_k)` by adaptive Simpson quadrature.
pub fn markovian_vdd_quadrature(j: f64, delta: f64, omega: f64, d: u32) -> Result<f64> {
    if !(delta < 0.0) {
        return Err(Error::DetuningNotInGap(delta));
    }
    let f = |k: f64| (k * d as f64).cos() / (delta - dispersion(j, k));
    let integral = adaptive_simpson(&f, 0.0, PI, 1e-13, 40);
    Ok(omega * omega * integral / PI)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bath(n: usize, d: usize) -> BathSpec {
        BathSpec::new(1.0, n, d).unwrap()
    }

    #[test]
    fn dispersion_extremes() {
        let b = bath(8, 1);
        assert_abs_diff_eq!(b.dispersion(0.0), 0.0);
        assert_abs_diff_eq!(b.dispersion(PI), 4.0);
        assert_abs_diff_eq!(b.dispersion(PI / 2.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(BathSpec::new(0.0, 8, 1).is_err());
        assert!(BathSpec::new(1.0, 3, 1).is_err());
        assert!(CouplingSpec::new(0.0, -1.0).is_err());
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let c = CouplingSpec::new(0.0, 0.0).unwrap();
        let s = self_energy_diag(&bath(8, 1), &c, -1.0, ModeSum::Continuum, InBand::Reject).unwrap();
        assert_eq!(s.value, Complex64::new(0.0, 0.0));
        let s = self_energy_offdiag(&bath(8, 1), &c, -1.0, 3, ModeSum::Finite, InBand::Reject).unwrap();
        assert_eq!(s.value.norm(), 0.0);
    }

    #[test]
    fn continuum_diagonal_closed_form() {
        let c = CouplingSpec::new(0.0, 1.0).unwrap();
        let s = self_energy_diag(&bath(8, 1), &c, -1.0, ModeSum::Continuum, InBand::Reject).unwrap();
        assert_abs_diff_eq!(s.value.re, -1.0 / 5f64.sqrt(), epsilon = 1e-14);
        assert_eq!(s.branch, Branch::BelowBand);
        // direct 4096-mode sum
        let f = self_energy_diag(&bath(4096, 1), &c, -1.0, ModeSum::Finite, InBand::Reject).unwrap();
        assert!((f.value.re - s.value.re).abs() < 1e-6);
    }

    #[test]
    fn eight_mode_sum_matches_explicit_terms() {
        let c = CouplingSpec::new(0.0, 1.0).unwrap();
        let explicit: f64 = (0..8)
            .map(|m| 1.0 / (-1.0 - (2.0 - 2.0 * (2.0 * PI * m as f64 / 8.0).cos())))
            .sum::<f64>()
            / 8.0;
        let s = self_energy_diag(&bath(8, 1), &c, -1.0, ModeSum::Finite, InBand::Reject).unwrap();
        assert_abs_diff_eq!(s.value.re, explicit, epsilon = 1e-15);
    }

    #[test]
    fn offdiag_reduces_to_diag_at_zero_distance() {
        let c = CouplingSpec::new(0.0, 0.7).unwrap();
        for &w in &[-3.0, -0.2, 5.5] {
            for modes in [ModeSum::Finite, ModeSum::Continuum] {
                let a = self_energy_diag(&bath(64, 1), &c, w, modes, InBand::Reject).unwrap();
                let b = self_energy_offdiag(&bath(64, 1), &c, w, 0, modes, InBand::Reject).unwrap();
                assert_abs_diff_eq!(a.value.re, b.value.re, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn offdiag_uses_decaying_root() {
        let c = CouplingSpec::new(0.0, 1.0).unwrap();
        let sd = self_energy_diag(&bath(8, 1), &c, -1.0, ModeSum::Continuum, InBand::Reject).unwrap();
        let x = decaying_root(1.0, -1.0);
        assert_abs_diff_eq!(x, (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-15);
        let so = self_energy_offdiag(&bath(8, 1), &c, -1.0, 3, ModeSum::Continuum, InBand::Reject).unwrap();
        assert_abs_diff_eq!(so.value.re, sd.value.re * x.powi(3), epsilon = 1e-15);
        let f = self_energy_offdiag(&bath(4096, 1), &c, -1.0, 3, ModeSum::Finite, InBand::Reject).unwrap();
        assert!((f.value.re - so.value.re).abs() < 1e-6);
    }

    #[test]
    fn in_band_requires_branch() {
        let c = CouplingSpec::new(0.0, 1.0).unwrap();
        let err = self_energy_diag(&bath(16, 1), &c, 1.0, ModeSum::Continuum, InBand::Reject);
        assert!(matches!(err, Err(Error::InBandWithoutBranch { .. })));
        let s = self_energy_diag(&bath(16, 1), &c, 1.0, ModeSum::Continuum, InBand::Retarded).unwrap();
        assert_eq!(s.branch, Branch::InBandRetarded);
        assert!(s.value.im < 0.0);
        // -i / sqrt(omega (4J - omega)) in the band
        assert_abs_diff_eq!(s.value.im, -1.0 / 3f64.sqrt(), epsilon = 1e-9);
        assert!(s.value.re.abs() < 1e-9);
        let f = self_energy_diag(&bath(16, 1), &c, 1.0, ModeSum::Finite, InBand::Retarded).unwrap();
        assert!(f.value.im <= 0.0);
    }

    #[test]
    fn above_band_is_positive_and_alternating() {
        let (g0, _) = continuum_green_real(1.0, 5.0, 0);
        let (g1, _) = continuum_green_real(1.0, 5.0, 1);
        assert!(g0 > 0.0);
        assert!(g1 < 0.0);
        assert_abs_diff_eq!(g0, 1.0 / 5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn closed_form_derivative_matches_finite_sum() {
        let b = bath(4096, 1);
        for &(w, d) in &[(-0.5, 0i64), (-2.0, 2), (4.7, 3), (-0.1, 5)] {
            let (_, dc) = continuum_green_real(1.0, w, d);
            let (_, df) = finite_green_real(&b, w, d);
            assert!((dc - df).abs() < 1e-6, "w={w} d={d}: {dc} vs {df}");
        }
    }

    #[test]
    fn markovian_asymptote() {
        assert_abs_diff_eq!(markovian_vdd(1.0, -10.0, 1.0, 1).unwrap(), -0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(markovian_vdd(1.0, -10.0, 1.0, 0).unwrap(), -0.1, epsilon = 1e-15);
        assert!(markovian_vdd(1.0, 0.5, 1.0, 1).is_err());
        assert!(markovian_vdd_quadrature(1.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn diagonal_is_negative_and_decreasing_below_band() {
        let c = CouplingSpec::new(0.0, 1.3).unwrap();
        let b = bath(8, 1);
        let vals: Vec<f64> = (0..100)
            .map(|i| -20.0 + 19.99 * i as f64 / 99.0)
            .map(|w| self_energy_diag(&b, &c, w, ModeSum::Continuum, InBand::Reject).unwrap().value.re)
            .collect();
        assert!(vals.iter().all(|&v| v < 0.0));
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn parity_of_dispersion() {
        for i in 0..50 {
            let k = 0.1 + i as f64 * 0.12;
            assert!((dispersion(1.3, k) - dispersion(1.3, 2.0 * PI - k)).abs() < 1e-14);
        }
    }

    #[test]
    fn asymptotic_form_converges_deep_in_gap() {
        let exact = |delta: f64| continuum_green_real(1.0, delta, 1).0;
        let r10 = markovian_vdd(1.0, -10.0, 1.0, 1).unwrap() / exact(-10.0);
        let r400 = markovian_vdd(1.0, -400.0, 1.0, 1).unwrap() / exact(-400.0);
        assert!((r400 - 1.0).abs() < 0.02);
        assert!((r10 - 1.0).abs() > (r400 - 1.0).abs());
    }

    proptest::proptest! {
        #[test]
        fn closed_form_matches_large_ring(w in -8.0f64..-0.05, d in 0i64..10, above in proptest::bool::ANY) {
            let w = if above { 4.0 - w } else { w };
            let b = bath(4096, 1);
            let (c, _) = continuum_green_real(1.0, w, d);
            let (f, _) = finite_green_real(&b, w, d);
            proptest::prop_assert!((c - f).abs() < 1e-6);
            let z = continuum_green(1.0, Complex64::new(w, 0.0), d);
            proptest::prop_assert!((z.re - c).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_matches_contour_result() {
        let q = markovian_vdd_quadrature(1.0, -5.0, 0.5, 2).unwrap();
        let (g, _) = continuum_green_real(1.0, -5.0, 2);
        assert!((q - 0.25 * g).abs() < 1e-8, "{q} vs {}", 0.25 * g);
    }
}
