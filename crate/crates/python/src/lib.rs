use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qebath::array_pair::{doublon_band_scan, u_eff};
use qebath::mps::{self, checkpoint, ChainSpec, DmrgOptions};
use qebath::single::{effective_hopping_two_qe, polariton_bands, solve_two_qe, wannier_hoppings};
use qebath::triplon::TriplonContext;
use qebath::two_qe::{doublon_hopping_two_qe, solve_pair_poles, variational_from};
use qebath::{BathSpec, CouplingSpec, Error, ModeSum};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn coupling(delta: f64, omega: f64) -> PyResult<CouplingSpec> {
    CouplingSpec::new(delta, omega).map_err(err)
}

/// Bound states of two emitters `d` sites apart.
#[pyclass(frozen)]
struct TwoEmitterStates {
    inner: qebath::single::TwoQeBoundStates,
}

#[pymethods]
impl TwoEmitterStates {
    #[getter]
    fn e_plus(&self) -> Option<f64> {
        self.inner.e_plus
    }
    #[getter]
    fn e_minus(&self) -> Option<f64> {
        self.inner.e_minus
    }
    #[getter]
    fn u_plus(&self) -> Option<f64> {
        self.inner.u_plus
    }
    #[getter]
    fn u_minus(&self) -> Option<f64> {
        self.inner.u_minus
    }
    #[getter]
    fn exists_minus(&self) -> bool {
        self.inner.exists_minus
    }
    /// `(E_0, t_eff)`, or None without the anti-symmetric state.
    fn effective_hopping(&self) -> Option<(f64, f64)> {
        effective_hopping_two_qe(&self.inner).ok()
    }
    fn __repr__(&self) -> String {
        format!("TwoEmitterStates(e_plus={:?}, e_minus={:?})", self.inner.e_plus, self.inner.e_minus)
    }
}

/// Ground and doublon poles of an emitter pair on a ring.
#[pyclass(frozen)]
struct PairSpectrum {
    inner: qebath::two_qe::PairSpectrum,
}

#[pymethods]
impl PairSpectrum {
    #[getter]
    fn e_ground(&self) -> f64 {
        self.inner.e_ground()
    }
    #[getter]
    fn z2_ground(&self) -> f64 {
        self.inner.ground.z2
    }
    #[getter]
    fn e_doublon_plus(&self) -> Option<f64> {
        self.inner.e_doublon_plus()
    }
    #[getter]
    fn e_doublon_minus(&self) -> Option<f64> {
        self.inner.e_doublon_minus()
    }
    /// `(mu_D, t_D)`, or None unless both doublons exist.
    fn doublon_hopping(&self) -> Option<(f64, f64)> {
        doublon_hopping_two_qe(&self.inner).ok()
    }
    fn variational<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let v = variational_from(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("energy", v.energy)?;
        d.set_item("v_plus", v.v_plus)?;
        d.set_item("v_minus", v.v_minus)?;
        d.set_item("e_plus", v.e_plus)?;
        d.set_item("e_minus", v.e_minus)?;
        d.set_item("p_v", v.overlap_pv)?;
        d.set_item("p", v.p)?;
        d.set_item("p_plus", v.p_plus)?;
        d.set_item("p_minus", v.p_minus)?;
        Ok(d)
    }
}

/// Polariton bands of a periodic emitter array.
#[pyclass(frozen)]
struct ArraySpectrum {
    inner: qebath::single::PolaritonSpectrum,
}

#[pymethods]
impl ArraySpectrum {
    #[getter]
    fn momenta(&self) -> Vec<f64> {
        self.inner.momenta.clone()
    }
    /// `bands[m][lambda]`, ascending in `lambda`.
    #[getter]
    fn bands(&self) -> Vec<Vec<f64>> {
        self.inner.bands.clone()
    }
    /// Wannier hoppings `t_0 .. t_lmax` of the lowest band.
    #[pyo3(signature = (lmax=3))]
    fn wannier_hoppings(&self, lmax: i64) -> PyResult<Vec<f64>> {
        let h = wannier_hoppings(&self.inner).map_err(err)?;
        Ok((0..=lmax).map(|l| h.get(l)).collect())
    }
    /// Lowest doublon level per momentum, None where it merges into a continuum.
    fn doublon_band(&self) -> Vec<Option<f64>> {
        doublon_band_scan(&self.inner).energies
    }
    fn triplon_band(&self) -> Vec<Option<f64>> {
        TriplonContext::new(&self.inner).band_scan().energies
    }
    fn u_eff<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let u = u_eff(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("u_eff", u.u_eff)?;
        d.set_item("u_int", u.u_int)?;
        d.set_item("z1", u.z1)?;
        d.set_item("e0", u.e0)?;
        Ok(d)
    }
}

/// Variational many-body ground state of an open array.
#[pyclass(frozen)]
struct GroundState {
    inner: mps::MpsGroundState,
}

#[pymethods]
impl GroundState {
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }
    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }
    #[getter]
    fn max_truncation(&self) -> f64 {
        self.inner.max_truncation()
    }
    #[getter]
    fn bond_dims(&self) -> Vec<usize> {
        self.inner.bond_dims()
    }
    fn norm(&self) -> f64 {
        self.inner.norm()
    }
    fn excitation_number(&self) -> f64 {
        self.inner.excitation_number()
    }
    /// `F[i][j] = <a_i^dag a_j>` over all sites.
    fn correlation_matrix(&self) -> Vec<Vec<f64>> {
        let f = mps::correlation_matrix(&self.inner);
        f.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
    fn diagnose<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let diag = mps::diagnose(&self.inner);
        let d = PyDict::new(py);
        d.set_item("corr_eigs", diag.corr_eigs.clone())?;
        d.set_item("dominance", diag.dominance())?;
        d.set_item("exponent", diag.exponent.map(|f| f.exponent))?;
        d.set_item("entropy", diag.entropy.clone())?;
        d.set_item("central_charge", diag.central.map(|f| f.c))?;
        d.set_item("flatness", diag.flatness)?;
        d.set_item("phase", diag.phase.to_string())?;
        Ok(d)
    }
    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, &path).map_err(err)
    }
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        checkpoint::load(&path).map(|inner| Self { inner }).map_err(err)
    }
}

/// Two-emitter bound states; `n=None` sums over the infinite bath.
#[pyfunction]
#[pyo3(signature = (delta, omega, d=1, n=None, j=1.0))]
fn two_emitter_states(delta: f64, omega: f64, d: usize, n: Option<usize>, j: f64) -> PyResult<TwoEmitterStates> {
    let (size, modes) = match n {
        Some(n) => (n, ModeSum::Finite),
        None => (1 << 20, ModeSum::Continuum),
    };
    let bath = BathSpec::new(j, size, d).map_err(err)?;
    solve_two_qe(&bath, &coupling(delta, omega)?, modes).map(|inner| TwoEmitterStates { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (delta, omega, d=1, n=128, j=1.0))]
fn pair_spectrum(delta: f64, omega: f64, d: usize, n: usize, j: f64) -> PyResult<PairSpectrum> {
    let bath = BathSpec::new(j, n, d).map_err(err)?;
    solve_pair_poles(&bath, &coupling(delta, omega)?).map(|inner| PairSpectrum { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (delta, omega, nb=64, z=1, j=1.0))]
fn array_spectrum(delta: f64, omega: f64, nb: usize, z: usize, j: f64) -> PyResult<ArraySpectrum> {
    let bath = BathSpec::array(j, nb, z).map_err(err)?;
    polariton_bands(&bath, &coupling(delta, omega)?).map(|inner| ArraySpectrum { inner }).map_err(err)
}

/// DMRG at unit filling. Unconverged runs are returned with `converged=False`.
#[pyfunction]
#[pyo3(signature = (delta, omega, n_imp, z=1, cap=4, bond_max=128, seed=0, j=1.0))]
#[allow(clippy::too_many_arguments)]
fn ground_state(
    py: Python<'_>,
    delta: f64,
    omega: f64,
    n_imp: usize,
    z: usize,
    cap: usize,
    bond_max: usize,
    seed: u64,
    j: f64,
) -> PyResult<GroundState> {
    let chain = ChainSpec { bond_max, ..ChainSpec::new(n_imp, z, cap).map_err(err)? };
    let c = coupling(delta, omega)?;
    let opts = DmrgOptions { seed, ..DmrgOptions::default() };
    py.detach(|| mps::solve(&chain, j, &c, &opts)).map(|inner| GroundState { inner }).map_err(err)
}

/// Oracle comparisons against exact diagonalization, one dict per check.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn check_suite<'py>(py: Python<'py>, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let checks = py.detach(|| qebath::checks::suite(seed));
    checks
        .into_iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("name", c.name)?;
            d.set_item("detail", c.detail)?;
            d.set_item("value", c.value)?;
            d.set_item("tolerance", c.tolerance)?;
            d.set_item("pass", c.pass)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn qebath_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TwoEmitterStates>()?;
    m.add_class::<PairSpectrum>()?;
    m.add_class::<ArraySpectrum>()?;
    m.add_class::<GroundState>()?;
    m.add_function(wrap_pyfunction!(two_emitter_states, m)?)?;
    m.add_function(wrap_pyfunction!(pair_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(array_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(check_suite, m)?)?;
    Ok(())
}
