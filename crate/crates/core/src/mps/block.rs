//! Charge-labelled block tensors. Every bond carries the number of
//! excitations to its left as a U(1) label; a site tensor block `(ql, s)`
//! connects left charge `ql` to right charge `ql + s`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Charge sectors of a bond, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub charges: Vec<i32>,
    pub dims: Vec<usize>,
}

impl Bond {
    pub fn trivial(q: i32) -> Self {
        Self { charges: vec![q], dims: vec![1] }
    }

    pub fn dim(&self, q: i32) -> usize {
        match self.charges.binary_search(&q) {
            Ok(i) => self.dims[i],
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn sectors(&self) -> impl Iterator<Item = (i32, usize)> + '_ {
        self.charges.iter().copied().zip(self.dims.iter().copied())
    }
}

/// MPS site tensor, blocks keyed by `(left charge, local state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub phys: usize,
    pub left: Bond,
    pub right: Bond,
    pub blocks: BTreeMap<(i32, usize), DMatrix<f64>>,
}

impl SiteTensor {
    pub fn block(&self, ql: i32, s: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(ql, s))
    }
}

/// Two-site wavefunction, blocks keyed by `(left charge, s1, s2)`.
pub type Theta = BTreeMap<(i32, usize, usize), DMatrix<f64>>;

pub fn dot(a: &Theta, b: &Theta) -> f64 {
    a.iter().map(|(k, x)| b.get(k).map_or(0.0, |y| x.dot(y))).sum()
}

pub fn norm(a: &Theta) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &mut Theta, s: f64) {
    for x in a.values_mut() {
        *x *= s;
    }
}

/// `a += s b` over the blocks of `a`.
pub fn axpy(a: &mut Theta, s: f64, b: &Theta) {
    for (k, x) in a.iter_mut() {
        if let Some(y) = b.get(k) {
            *x += y * s;
        }
    }
}

pub fn zeros_like(a: &Theta) -> Theta {
    a.iter().map(|(k, x)| (*k, DMatrix::zeros(x.nrows(), x.ncols()))).collect()
}

/// Contract two neighbouring site tensors into a two-site wavefunction.
pub fn merge(a: &SiteTensor, b: &SiteTensor, target: Option<&Theta>) -> Theta {
    let mut out = Theta::new();
    for (&(ql, s1), x) in &a.blocks {
        for s2 in 0..b.phys {
            if let Some(y) = b.block(ql + s1 as i32, s2) {
                let prod = x * y;
                out.entry((ql, s1, s2))
                    .and_modify(|acc: &mut DMatrix<f64>| *acc += &prod)
                    .or_insert(prod);
            }
        }
    }
    // complete the sector structure so the eigensolver can populate every block
    if let Some(t) = target {
        for (k, x) in t {
            out.entry(*k).or_insert_with(|| DMatrix::zeros(x.nrows(), x.ncols()));
        }
    }
    out
}

/// Every block allowed between two bonds for the given local dimensions.
pub fn theta_structure(left: &Bond, d1: usize, d2: usize, right: &Bond) -> Theta {
    let mut out = Theta::new();
    for (ql, dl) in left.sectors() {
        for s1 in 0..d1 {
            for s2 in 0..d2 {
                let dr = right.dim(ql + (s1 + s2) as i32);
                if dr > 0 {
                    out.insert((ql, s1, s2), DMatrix::zeros(dl, dr));
                }
            }
        }
    }
    out
}

/// Outcome of splitting a two-site wavefunction.
pub struct Split {
    pub left: SiteTensor,
    pub right: SiteTensor,
    /// Kept singular values per middle charge.
    pub spectrum: Vec<(i32, Vec<f64>)>,
    pub truncation: f64,
}

/// SVD split of `theta` with at most `max_dim` states and singular values
/// above `cutoff`. The singular values go to the right tensor when
/// `move_right`, else to the left one.
pub fn split(
    theta: &Theta,
    left: &Bond,
    right: &Bond,
    d1: usize,
    d2: usize,
    max_dim: usize,
    cutoff: f64,
    move_right: bool,
) -> Split {
    // group by middle charge
    let mut middle: BTreeMap<i32, (Vec<(i32, usize)>, Vec<(usize, i32)>)> = BTreeMap::new();
    for &(ql, s1, s2) in theta.keys() {
        let qm = ql + s1 as i32;
        let e = middle.entry(qm).or_default();
        if !e.0.contains(&(ql, s1)) {
            e.0.push((ql, s1));
        }
        let qr = qm + s2 as i32;
        if !e.1.contains(&(s2, qr)) {
            e.1.push((s2, qr));
        }
    }
    struct Sector {
        qm: i32,
        rows: Vec<(i32, usize, usize)>,
        cols: Vec<(usize, i32, usize)>,
        u: DMatrix<f64>,
        s: Vec<f64>,
        vt: DMatrix<f64>,
    }
    let mut sectors = Vec::new();
    for (qm, (mut rows_k, mut cols_k)) in middle {
        rows_k.sort();
        cols_k.sort();
        let mut rows = Vec::new();
        let mut off = 0;
        for (ql, s1) in rows_k {
            let d = left.dim(ql);
            rows.push((ql, s1, off));
            off += d;
        }
        let nr = off;
        let mut cols = Vec::new();
        off = 0;
        for (s2, qr) in cols_k {
            let d = right.dim(qr);
            cols.push((s2, qr, off));
            off += d;
        }
        let nc = off;
        let mut m = DMatrix::<f64>::zeros(nr, nc);
        for &(ql, s1, ro) in &rows {
            for &(s2, qr, co) in &cols {
                if qr != qm + s2 as i32 {
                    continue;
                }
                if let Some(b) = theta.get(&(ql, s1, s2)) {
                    m.view_mut((ro, co), (b.nrows(), b.ncols())).copy_from(b);
                }
            }
        }
        let svd = m.svd(true, true);
        let s: Vec<f64> = svd.singular_values.iter().copied().collect();
        sectors.push(Sector { qm, rows, cols, u: svd.u.unwrap(), s, vt: svd.v_t.unwrap() });
    }
    // global ranking, ties broken by sector and index for determinism
    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (i, sec) in sectors.iter().enumerate() {
        for (j, &x) in sec.s.iter().enumerate() {
            all.push((x, i, j));
        }
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let total: f64 = all.iter().map(|x| x.0 * x.0).sum();
    let mut keep = vec![Vec::new(); sectors.len()];
    let mut kept_weight = 0.0;
    for (n, &(x, i, j)) in all.iter().enumerate() {
        if n >= max_dim || x <= cutoff {
            break;
        }
        keep[i].push(j);
        kept_weight += x * x;
    }
    let truncation = ((total - kept_weight) / total.max(f64::MIN_POSITIVE)).max(0.0);
    let renorm = (total / kept_weight).sqrt();

    let mut mid = Bond { charges: Vec::new(), dims: Vec::new() };
    let mut lt = SiteTensor { phys: d1, left: left.clone(), right: mid.clone(), blocks: BTreeMap::new() };
    let mut rt = SiteTensor { phys: d2, left: mid.clone(), right: right.clone(), blocks: BTreeMap::new() };
    let mut spectrum = Vec::new();
    for (sec, idx) in sectors.iter().zip(keep.iter_mut()) {
        if idx.is_empty() {
            continue;
        }
        idx.sort();
        let k = idx.len();
        mid.charges.push(sec.qm);
        mid.dims.push(k);
        let sv: Vec<f64> = idx.iter().map(|&j| sec.s[j] * renorm).collect();
        spectrum.push((sec.qm, sv.clone()));
        for &(ql, s1, ro) in &sec.rows {
            let d = left.dim(ql);
            let blk = DMatrix::from_fn(d, k, |r, c| {
                let x = sec.u[(ro + r, idx[c])];
                if move_right {
                    x
                } else {
                    x * sv[c]
                }
            });
            lt.blocks.insert((ql, s1), blk);
        }
        for &(s2, qr, co) in &sec.cols {
            let d = right.dim(qr);
            let blk = DMatrix::from_fn(k, d, |r, c| {
                let x = sec.vt[(idx[r], co + c)];
                if move_right {
                    x * sv[r]
                } else {
                    x
                }
            });
            rt.blocks.insert((sec.qm, s2), blk);
        }
    }
    lt.right = mid.clone();
    rt.left = mid;
    Split { left: lt, right: rt, spectrum, truncation }
}
