//! Band Fourier coefficients (effective hoppings) on a uniform momentum grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real hoppings `t_l = (1/N) sum_m E(2 pi m/N) e^{i 2 pi m l/N}`, stored for
/// `l = -(N-1)/2 ..= N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hoppings {
    pub n: usize,
    pub t: BTreeMap<i64, f64>,
    /// Largest imaginary part dropped after the parity check.
    pub max_imag: f64,
}

impl Hoppings {
    pub fn get(&self, l: i64) -> f64 {
        let n = self.n as i64;
        let mut r = l.rem_euclid(n);
        if r > n / 2 {
            r -= n;
        }
        self.t.get(&r).copied().unwrap_or(0.0)
    }

    pub fn onsite(&self) -> f64 {
        self.get(0)
    }

    /// Band value at grid index `m`, rebuilt from the hoppings.
    pub fn band_at(&self, m: usize) -> f64 {
        let n = self.n as f64;
        self.t
            .iter()
            .map(|(&l, &t)| t * (2.0 * PI * m as f64 * l as f64 / n).cos())
            .sum()
    }
}

pub fn hoppings_from_band(band: &[f64]) -> Result<Hoppings> {
    let n = band.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty band".into()));
    }
    let nf = n as f64;
    let mut t = BTreeMap::new();
    let mut max_imag: f64 = 0.0;
    let lo = -((n as i64 - 1) / 2);
    let hi = n as i64 / 2;
    for l in lo..=hi {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &e) in band.iter().enumerate() {
            let phase = 2.0 * PI * ((m as i64 * l).rem_euclid(n as i64)) as f64 / nf;
            acc += e * Complex64::from_polar(1.0, phase);
        }
        acc /= nf;
        max_imag = max_imag.max(acc.im.abs());
        t.insert(l, acc.re);
    }
    let scale = band.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    if max_imag > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!(
            "band is not parity symmetric, imaginary hopping {max_imag:e}"
        )));
    }
    Ok(Hoppings { n, t, max_imag })
}
