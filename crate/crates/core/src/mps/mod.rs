//! Many-body ground state of an open emitter array at fixed excitation
//! number, by two-site DMRG with U(1) charge labels.
//!
//! Sites follow [`Lattice::open_array`]: every unit cell is an emitter
//! (local dimension 2) followed by `z` bath sites holding up to `cap`
//! photons each.

pub mod block;
pub mod checkpoint;
pub mod diagnostics;
pub mod dmrg;
pub mod mpo;

use serde::{Deserialize, Serialize};

use crate::bath::CouplingSpec;
use crate::ed::Lattice;
use crate::error::{Error, Result};

pub use diagnostics::{classify_phase, correlation_matrix, diagnose, Phase, PhaseDiagnostics};

use block::SiteTensor;
use mpo::Mpo;

pub const DEFAULT_BOND_MAX: usize = 128;
/// Allowed deviation of `<N>` from the target sector.
pub const DRIFT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_imp: usize,
    pub z: usize,
    pub cap: usize,
    pub bond_max: usize,
    pub n_exc: usize,
}

impl ChainSpec {
    /// Unit filling, default bond dimension.
    pub fn new(n_imp: usize, z: usize, cap: usize) -> Result<Self> {
        Self { n_imp, z, cap, bond_max: DEFAULT_BOND_MAX, n_exc: n_imp }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_imp < 2 || self.z == 0 {
            return Err(Error::InvalidParameter(format!("need at least 2 cells with z >= 1, got ({}, {})", self.n_imp, self.z)));
        }
        if self.cap < 2 {
            return Err(Error::InvalidParameter(format!("photon cap must be at least 2, got {}", self.cap)));
        }
        if self.bond_max == 0 {
            return Err(Error::InvalidParameter("bond dimension must be positive".into()));
        }
        if self.n_exc > self.n_imp * (1 + self.z * self.cap) {
            return Err(Error::InvalidParameter(format!("{} excitations do not fit the chain", self.n_exc)));
        }
        Ok(self)
    }

    pub fn sites(&self) -> usize {
        self.n_imp * (self.z + 1)
    }

    pub fn lattice(&self, j: f64, coupling: &CouplingSpec) -> Lattice {
        Lattice::open_array(self.n_imp, self.z, j, coupling)
    }
}

/// Sweep controls. Tolerances are in units of the bath hopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmrgOptions {
    pub min_sweeps: usize,
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub truncation_tol: f64,
    /// Singular values at or below this are discarded.
    pub cutoff: f64,
    pub seed: u64,
}

impl Default for DmrgOptions {
    fn default() -> Self {
        Self { min_sweeps: 12, max_sweeps: 40, energy_tol: 1e-9, truncation_tol: 1e-8, cutoff: 1e-6, seed: 0 }
    }
}

/// Converged (or last) variational state, right-canonical with the
/// orthogonality centre on site 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsGroundState {
    pub chain: ChainSpec,
    pub j: f64,
    pub coupling: CouplingSpec,
    pub tensors: Vec<SiteTensor>,
    pub energy: f64,
    /// Energy after every sweep.
    pub energies: Vec<f64>,
    /// Truncation error of the last sweep on bonds `0..=L`.
    pub truncation: Vec<f64>,
    pub converged: bool,
    pub last_delta: f64,
}

impl MpsGroundState {
    pub fn site_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.phys).collect()
    }

    /// Dimensions of the internal bonds `1..L`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().skip(1).map(|t| t.left.total()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn max_truncation(&self) -> f64 {
        self.truncation.iter().cloned().fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.tensors[0].blocks.values().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    /// `<N>` from the local densities.
    pub fn excitation_number(&self) -> f64 {
        correlation_matrix(self).trace()
    }
}

/// Run the sweeps and report the final state whether or not it converged.
pub fn solve(chain: &ChainSpec, j: f64, coupling: &CouplingSpec, opts: &DmrgOptions) -> Result<MpsGroundState> {
    let chain = chain.validated()?;
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::InvalidParameter(format!("hopping J must be positive, got {j}")));
    }
    let lat = chain.lattice(j, coupling);
    let mpo = Mpo::from_lattice(&lat, chain.cap);
    let params = dmrg::SweepParams {
        bond_max: chain.bond_max,
        min_sweeps: opts.min_sweeps,
        max_sweeps: opts.max_sweeps.max(opts.min_sweeps),
        energy_tol: opts.energy_tol * j,
        truncation_tol: opts.truncation_tol,
        cutoff: opts.cutoff,
        seed: opts.seed,
    };
    let out = dmrg::run(&mpo, chain.n_exc as i32, &params);
    let state = MpsGroundState {
        chain,
        j,
        coupling: *coupling,
        tensors: out.tensors,
        energy: *out.energies.last().unwrap(),
        energies: out.energies,
        truncation: out.truncation,
        converged: out.converged,
        last_delta: out.last_delta,
    };
    let n = state.excitation_number();
    if (n - chain.n_exc as f64).abs() > DRIFT_TOL {
        return Err(Error::SectorDrift { found: n, target: chain.n_exc as f64 });
    }
    Ok(state)
}

/// Ground state with default sweep controls; refuses unconverged runs.
pub fn ground_state(chain: &ChainSpec, j: f64, coupling: &CouplingSpec) -> Result<MpsGroundState> {
    let state = solve(chain, j, coupling, &DmrgOptions::default())?;
    if !state.converged {
        return Err(Error::NotConverged { energy_delta: state.last_delta, truncation: state.max_truncation() });
    }
    Ok(state)
}
