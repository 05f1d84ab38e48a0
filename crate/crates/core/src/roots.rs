//! Bracketing and bisection, plus the pole-expansion secular equation
//! `omega - shift - sum_i W_i / (omega - p_i) = 0` that every finite-size
//! single-excitation problem reduces to.

/// Bisect `f` on the open interval `(lo, hi)` given the sign of `f` near `lo`.
/// Runs until the midpoint no longer moves, so the result is accurate to the
/// last ulp of the bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, lo_negative: bool) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Sign changes of `f` along an increasing grid.
pub fn scan_brackets<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64]) -> Vec<(f64, f64, bool)> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &x in grid {
        let v = f(x);
        if !v.is_finite() {
            prev = None;
            continue;
        }
        if let Some((px, pv)) = prev {
            if (pv < 0.0) != (v < 0.0) {
                out.push((px, x, pv < 0.0));
            }
        }
        prev = Some((x, v));
    }
    out
}

/// Grid that approaches `edge` logarithmically from one side. The returned
/// points are sorted in increasing order and span distances `[near, far]`.
pub fn log_probes(edge: f64, near: f64, far: f64, count: usize, below: bool) -> Vec<f64> {
    let (l0, l1) = (near.ln(), far.ln());
    let mut pts: Vec<f64> = (0..count)
        .map(|i| {
            let t = l0 + (l1 - l0) * i as f64 / (count - 1) as f64;
            let dist = t.exp();
            if below {
                edge - dist
            } else {
                edge + dist
            }
        })
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts
}

/// Rational function with simple poles. Poles must be sorted, distinct and
/// carry strictly positive weights.
#[derive(Debug, Clone)]
pub struct SecularEquation {
    pub shift: f64,
    pub poles: Vec<f64>,
    pub weights: Vec<f64>,
}

/// One eigenvalue of the pole expansion and its weight on the bare level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularRoot {
    pub energy: f64,
    pub residue: f64,
}

impl SecularEquation {
    /// Build from unsorted `(pole, weight)` pairs, merging poles that coincide
    /// to within `merge_tol` and dropping weights below `drop_tol`.
    pub fn from_pairs(shift: f64, mut pairs: Vec<(f64, f64)>, merge_tol: f64, drop_tol: f64) -> Self {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut poles: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            match poles.last() {
                Some(&last) if (p - last).abs() <= merge_tol => {
                    *weights.last_mut().unwrap() += w;
                }
                _ => {
                    poles.push(p);
                    weights.push(w);
                }
            }
        }
        let keep: Vec<usize> = (0..poles.len()).filter(|&i| weights[i] > drop_tol).collect();
        Self {
            shift,
            poles: keep.iter().map(|&i| poles[i]).collect(),
            weights: keep.iter().map(|&i| weights[i]).collect(),
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        omega - self.shift - self.sigma(omega)
    }

    pub fn sigma(&self, omega: f64) -> f64 {
        self.poles.iter().zip(&self.weights).map(|(p, w)| w / (omega - p)).sum()
    }

    pub fn residue(&self, omega: f64) -> f64 {
        let s: f64 = self
            .poles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w / ((omega - p) * (omega - p)))
            .sum();
        1.0 / (1.0 + s)
    }

    /// All `len(poles) + 1` roots in increasing order.
    pub fn roots(&self) -> Vec<SecularRoot> {
        let total: f64 = self.weights.iter().sum();
        let reach = self.shift.abs() + total.sqrt() + 1.0;
        let mut out = Vec::with_capacity(self.poles.len() + 1);
        if self.poles.is_empty() {
            out.push(SecularRoot { energy: self.shift, residue: 1.0 });
            return out;
        }
        let first = self.poles[0];
        let mut lo = first.min(self.shift) - reach;
        while self.eval(lo) > 0.0 {
            lo -= 2.0 * (first - lo);
        }
        out.push(self.root_in(lo, first));
        for w in self.poles.windows(2) {
            out.push(self.root_in(w[0], w[1]));
        }
        let last = *self.poles.last().unwrap();
        let mut hi = last.max(self.shift) + reach;
        while self.eval(hi) < 0.0 {
            hi += 2.0 * (hi - last);
        }
        out.push(self.root_in(last, hi));
        out
    }

    fn root_in(&self, lo: f64, hi: f64) -> SecularRoot {
        let e = bisect(|w| self.eval(w), lo, hi, true);
        SecularRoot { energy: e, residue: self.residue(e) }
    }
}
