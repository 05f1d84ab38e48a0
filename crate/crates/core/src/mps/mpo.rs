//! Matrix-product operator of a hopping Hamiltonian, built from a finite
//! automaton: every bond keeps a "start" state, a "done" state and one
//! pending state per hopping term that crosses it.

use crate::ed::{Lattice, SiteKind};

/// Sparse local operator `(out, in, value)`.
pub type LocalOp = Vec<(usize, usize, f64)>;

#[derive(Debug, Clone)]
pub struct MpoSite {
    pub wl: usize,
    pub wr: usize,
    /// `(left state, right state, operator)`.
    pub terms: Vec<(usize, usize, LocalOp)>,
}

#[derive(Debug, Clone)]
pub struct Mpo {
    pub sites: Vec<MpoSite>,
    /// Charge carried by each automaton state on each bond (`L + 1` bonds).
    pub deltas: Vec<Vec<i32>>,
    pub dims: Vec<usize>,
}

pub fn local_dim(kind: SiteKind, cap: usize) -> usize {
    match kind {
        SiteKind::Emitter => 2,
        SiteKind::Boson => cap + 1,
    }
}

fn number(d: usize) -> LocalOp {
    (1..d).map(|n| (n, n, n as f64)).collect()
}

fn raise(d: usize) -> LocalOp {
    (0..d - 1).map(|n| (n + 1, n, ((n + 1) as f64).sqrt())).collect()
}

fn lower(d: usize) -> LocalOp {
    (1..d).map(|n| (n - 1, n, (n as f64).sqrt())).collect()
}

fn identity(d: usize) -> LocalOp {
    (0..d).map(|n| (n, n, 1.0)).collect()
}

fn scaled(op: LocalOp, s: f64) -> LocalOp {
    op.into_iter().map(|(a, b, v)| (a, b, v * s)).collect()
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Start,
    Done,
    /// Bond index and direction (`true`: raising operator placed first).
    Pending(usize, bool),
}

impl Mpo {
    pub fn from_lattice(lat: &Lattice, cap: usize) -> Self {
        let l = lat.len();
        let dims: Vec<usize> = lat.kinds.iter().map(|&k| local_dim(k, cap)).collect();
        let mut bonds: Vec<(usize, usize, f64)> = lat
            .bonds
            .iter()
            .map(|&(i, j, t)| if i < j { (i, j, t) } else { (j, i, t) })
            .filter(|b| b.2 != 0.0)
            .collect();
        bonds.sort_by_key(|a| (a.0, a.1));
        // automaton states on bond k (left of site k)
        let states: Vec<Vec<State>> = (0..=l)
            .map(|k| {
                if k == 0 {
                    return vec![State::Start];
                }
                if k == l {
                    return vec![State::Done];
                }
                let mut v = vec![State::Start, State::Done];
                for (n, &(i, j, _)) in bonds.iter().enumerate() {
                    if i < k && k <= j {
                        v.push(State::Pending(n, true));
                        v.push(State::Pending(n, false));
                    }
                }
                v
            })
            .collect();
        let deltas = states
            .iter()
            .map(|v| {
                v.iter()
                    .map(|s| match s {
                        State::Pending(_, true) => 1,
                        State::Pending(_, false) => -1,
                        _ => 0,
                    })
                    .collect()
            })
            .collect();
        let pos = |k: usize, s: State| states[k].iter().position(|&x| x == s);
        let mut sites = Vec::with_capacity(l);
        for s in 0..l {
            let d = dims[s];
            let mut terms = Vec::new();
            let mut push = |a: Option<usize>, b: Option<usize>, op: LocalOp| {
                if let (Some(a), Some(b)) = (a, b) {
                    terms.push((a, b, op));
                }
            };
            push(pos(s, State::Start), pos(s + 1, State::Start), identity(d));
            push(pos(s, State::Done), pos(s + 1, State::Done), identity(d));
            if lat.onsite[s] != 0.0 {
                push(pos(s, State::Start), pos(s + 1, State::Done), scaled(number(d), lat.onsite[s]));
            }
            for (n, &(i, j, t)) in bonds.iter().enumerate() {
                for up in [true, false] {
                    let p = State::Pending(n, up);
                    if i == s {
                        push(pos(s, State::Start), pos(s + 1, p), if up { raise(d) } else { lower(d) });
                    } else if i < s && s < j {
                        push(pos(s, p), pos(s + 1, p), identity(d));
                    } else if j == s {
                        push(pos(s, p), pos(s + 1, State::Done), scaled(if up { lower(d) } else { raise(d) }, t));
                    }
                }
            }
            sites.push(MpoSite { wl: states[s].len(), wr: states[s + 1].len(), terms });
        }
        Self { sites, deltas, dims }
    }
}
