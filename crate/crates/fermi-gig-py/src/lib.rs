//! Python bindings for the gauge-invariant Gaussian fermion toolkit.
//!
//! Matrices cross the boundary as row-major nested lists of Python complex
//! numbers; vectors as flat lists. Core errors surface as ValueError.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fermi_gig_core::car::{Conjugation, FermionRep};
use fermi_gig_core::channels::{classify, phase_align, CompatiblePair, EhkChannel};
use fermi_gig_core::condexp::{
    accardi_cecchini, petz_recover, state_condexp, tracial_condexp, vacuum_condexp, ModeSubspace,
};
use fermi_gig_core::gig::{
    gauss_moment_prediction, gibbs_density, gibbs_form, moment, rho_from_symbol, symbol_from_hamiltonian,
    symbol_of, wolfe_check, WolfeOutcome,
};
use fermi_gig_core::semigroups::{
    embed_check, evolve, hermite_basis, steady_states, EmbedOutcome, SemigroupParams,
};
use fermi_gig_core::CMatrix;

type Mat = Vec<Vec<Complex64>>;

fn err(e: fermi_gig_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat_in(m: &Mat) -> PyResult<CMatrix> {
    let rows = m.len();
    if rows == 0 {
        return Err(PyValueError::new_err("matrix must have at least one row"));
    }
    let cols = m[0].len();
    if cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("matrix rows must be equal nonzero length"));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| m[i][j]))
}

fn mat_out(m: &CMatrix) -> Mat {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Jordan-Wigner Fock representation of the CAR algebra on n modes.
#[pyclass(name = "FermionRep")]
struct PyFermionRep {
    inner: FermionRep,
}

#[pymethods]
impl PyFermionRep {
    #[new]
    fn new(n_modes: usize) -> PyResult<Self> {
        Ok(Self { inner: FermionRep::new(n_modes).map_err(err)? })
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    /// Hilbert space dimension 2^n.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Annihilator of coordinate mode k.
    fn z(&self, k: usize) -> PyResult<Mat> {
        if k >= self.inner.n_modes() {
            return Err(PyValueError::new_err(format!(
                "mode {k} out of range for {} modes",
                self.inner.n_modes()
            )));
        }
        Ok(mat_out(self.inner.z(k)))
    }

    /// Smeared annihilator Z(psi), conjugate linear in psi.
    fn field(&self, psi: Vec<Complex64>) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.field(&psi).map_err(err)?))
    }

    fn field_dag(&self, psi: Vec<Complex64>) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.field_dag(&psi).map_err(err)?))
    }

    /// Second quantization of a one-particle operator: sum_jk x_jk Z*_j Z_k.
    fn hat(&self, x: Mat) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.hat(&mat_in(&x)?).map_err(err)?))
    }

    /// Multiplicative lift of a one-particle unitary.
    fn second_quantize(&self, u: Mat) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.second_quantize(&mat_in(&u)?).map_err(err)?))
    }

    fn number_op(&self) -> Mat {
        mat_out(self.inner.number_op())
    }

    fn parity_op(&self) -> Mat {
        mat_out(self.inner.parity_op())
    }

    /// Normalized trace of an operator on the Fock space.
    fn tau(&self, a: Mat) -> PyResult<Complex64> {
        Ok(self.inner.tau(&mat_in(&a)?))
    }
}

/// Channel data (S, R) with 0 <= R <= 1 - SS*.
#[pyclass(name = "CompatiblePair")]
struct PyCompatiblePair {
    inner: CompatiblePair,
}

#[pymethods]
impl PyCompatiblePair {
    #[new]
    fn new(s: Mat, r: Mat) -> PyResult<Self> {
        Ok(Self { inner: CompatiblePair::new(mat_in(&s)?, mat_in(&r)?).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn s(&self) -> Mat {
        mat_out(self.inner.s())
    }

    #[getter]
    fn r(&self) -> Mat {
        mat_out(self.inner.r())
    }

    /// I - SS* - R, the slack available for further noise.
    fn deficiency(&self) -> Mat {
        mat_out(&self.inner.deficiency())
    }

    /// Symbol action Q -> S Q S* + R.
    fn symbol_map(&self, q: Mat) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.symbol_map(&mat_in(&q)?)))
    }
}

/// Gauge-covariant channel built from the unitary dilation of (S, R).
#[pyclass(name = "EhkChannel")]
struct PyEhkChannel {
    inner: EhkChannel,
}

#[pymethods]
impl PyEhkChannel {
    #[new]
    fn new(pair: &PyCompatiblePair) -> PyResult<Self> {
        Ok(Self { inner: EhkChannel::new(pair.inner.clone()).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// State-side action: adjoin ancilla, rotate by the dilation, compress.
    fn apply(&self, x: Mat) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.apply(&mat_in(&x)?).map_err(err)?))
    }

    /// Trace dual of `apply`.
    fn dual_apply(&self, x: Mat) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.dual_apply(&mat_in(&x)?).map_err(err)?))
    }

    fn symbol_map(&self, q: Mat) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.symbol_map(&mat_in(&q)?)))
    }

    /// Symbol of the ancilla state used by the dilation.
    fn ancilla(&self) -> Mat {
        mat_out(self.inner.ancilla())
    }
}

/// Quasi-free semigroup data (G, A) with drift G and rate A.
#[pyclass(name = "SemigroupParams")]
struct PySemigroupParams {
    inner: SemigroupParams,
}

#[pymethods]
impl PySemigroupParams {
    #[new]
    fn new(g: Mat, a: Mat) -> PyResult<Self> {
        Ok(Self { inner: SemigroupParams::new(mat_in(&g)?, mat_in(&a)?).map_err(err)? })
    }

    /// Relaxation family with commuting Hamiltonian H and target symbol T.
    #[staticmethod]
    fn mehler(h: Mat, t_sym: Mat) -> PyResult<Self> {
        Ok(Self { inner: SemigroupParams::mehler(&mat_in(&h)?, &mat_in(&t_sym)?).map_err(err)? })
    }

    #[getter]
    fn g(&self) -> Mat {
        mat_out(self.inner.g())
    }

    #[getter]
    fn a(&self) -> Mat {
        mat_out(self.inner.a())
    }

    /// Accumulated noise R_t = integral of e^{sG} A e^{sG*} ds over [0, t].
    fn noise_at(&self, t: f64) -> PyResult<Mat> {
        Ok(mat_out(&self.inner.noise_at(t).map_err(err)?))
    }

    /// Time-t member (e^{tG}, R_t).
    fn pair_at(&self, t: f64) -> PyResult<PyCompatiblePair> {
        Ok(PyCompatiblePair { inner: self.inner.pair_at(t).map_err(err)? })
    }
}

/// A mode subspace H with its conditional expectations.
#[pyclass(name = "ModeSubspace")]
struct PyModeSubspace {
    inner: ModeSubspace,
}

#[pymethods]
impl PyModeSubspace {
    #[new]
    fn new(rep: &PyFermionRep, basis: Mat) -> PyResult<Self> {
        Ok(Self { inner: ModeSubspace::new(&rep.inner, &mat_in(&basis)?).map_err(err)? })
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.inner.n_modes()
    }

    #[getter]
    fn dim_h(&self) -> usize {
        self.inner.dim_h()
    }

    fn basis(&self) -> Mat {
        mat_out(self.inner.basis())
    }

    fn complement_basis(&self) -> Mat {
        mat_out(self.inner.complement_basis())
    }

    /// Trace-preserving conditional expectation onto the H-subalgebra.
    fn tracial_condexp(&self, a: Mat) -> PyResult<Mat> {
        Ok(mat_out(&tracial_condexp(&self.inner, &mat_in(&a)?).map_err(err)?))
    }

    /// Conditional expectation adapted to the Gaussian state with symbol q.
    fn state_condexp(&self, q: Mat, a: Mat) -> PyResult<Mat> {
        Ok(mat_out(&state_condexp(&self.inner, &mat_in(&q)?, &mat_in(&a)?).map_err(err)?))
    }

    /// Vacuum-adapted conditional expectation.
    fn vacuum_condexp(&self, a: Mat) -> PyResult<Mat> {
        Ok(mat_out(&vacuum_condexp(&self.inner, &mat_in(&a)?).map_err(err)?))
    }

    /// Coarse graining adapted to the density rho (unital, rho-preserving).
    fn coarse_grain(&self, rep: &PyFermionRep, rho: Mat, a: Mat) -> PyResult<Mat> {
        let out = accardi_cecchini(&rep.inner, &mat_in(&rho)?, &self.inner, &mat_in(&a)?)
            .map_err(err)?;
        Ok(mat_out(&out))
    }

    /// Recovery map dual to `coarse_grain` on subalgebra densities.
    fn recover(&self, rep: &PyFermionRep, rho: Mat, gamma: Mat) -> PyResult<Mat> {
        let out = petz_recover(&rep.inner, &mat_in(&rho)?, &self.inner, &mat_in(&gamma)?)
            .map_err(err)?;
        Ok(mat_out(&out))
    }
}

/// Density of the gauge-invariant Gaussian state with symbol q.
#[pyfunction(name = "rho_from_symbol")]
fn py_rho_from_symbol(rep: &PyFermionRep, q: Mat) -> PyResult<Mat> {
    Ok(mat_out(&rho_from_symbol(&rep.inner, &mat_in(&q)?).map_err(err)?.rho))
}

/// Symbol Q_jk = tau(rho Z*_k Z_j) of a density.
#[pyfunction(name = "symbol_of")]
fn py_symbol_of(rep: &PyFermionRep, rho: Mat) -> PyResult<Mat> {
    Ok(mat_out(&symbol_of(&rep.inner, &mat_in(&rho)?).map_err(err)?))
}

/// Mixed moment tau(rho Z*(phi_1)...Z*(phi_p) Z(psi_q)...Z(psi_1)).
#[pyfunction(name = "moment")]
fn py_moment(rep: &PyFermionRep, rho: Mat, psis: Vec<Vec<Complex64>>, phis: Vec<Vec<Complex64>>) -> PyResult<Complex64> {
    moment(&rep.inner, &mat_in(&rho)?, &psis, &phis).map_err(err)
}

/// Determinant formula for the same moment of the Gaussian state with symbol q.
#[pyfunction(name = "gauss_moment_prediction")]
fn py_gauss_moment_prediction(q: Mat, psis: Vec<Vec<Complex64>>, phis: Vec<Vec<Complex64>>) -> PyResult<Complex64> {
    gauss_moment_prediction(&mat_in(&q)?, &psis, &phis).map_err(err)
}

/// True when mixtures of the two Gaussian states stay Gaussian
/// (their symbols differ by a signed rank-one displacement).
#[pyfunction(name = "wolfe_check")]
fn py_wolfe_check(q0: Mat, q1: Mat) -> PyResult<bool> {
    Ok(matches!(wolfe_check(&mat_in(&q0)?, &mat_in(&q1)?).map_err(err)?, WolfeOutcome::GigMixture))
}

/// One-particle Hamiltonian h with rho_Q = e^{-hat(h)}/norm, for 0 < Q < 1.
#[pyfunction(name = "gibbs_form")]
fn py_gibbs_form(q: Mat) -> PyResult<Mat> {
    Ok(mat_out(&gibbs_form(&mat_in(&q)?).map_err(err)?))
}

/// Gibbs density e^{-hat(h)}/norm for a Hermitian one-particle Hamiltonian.
#[pyfunction(name = "gibbs_density")]
fn py_gibbs_density(rep: &PyFermionRep, h: Mat) -> PyResult<Mat> {
    Ok(mat_out(&gibbs_density(&rep.inner, &mat_in(&h)?).map_err(err)?))
}

/// Thermal symbol (1 + e^{beta h})^{-1}.
#[pyfunction(name = "symbol_from_hamiltonian")]
fn py_symbol_from_hamiltonian(h: Mat, beta: f64) -> PyResult<Mat> {
    Ok(mat_out(&symbol_from_hamiltonian(&mat_in(&h)?, beta).map_err(err)?))
}

/// Evolve a density to time t under the semigroup of params.
#[pyfunction(name = "evolve")]
fn py_evolve(params: &PySemigroupParams, rep: &PyFermionRep, rho0: Mat, t: f64) -> PyResult<Mat> {
    Ok(mat_out(&evolve(&params.inner, &rep.inner, &mat_in(&rho0)?, t).map_err(err)?))
}

/// Fixed symbols of the channel of a pair: returns (P, R_inf, family) with
/// every fixed symbol of the form R_inf + P Q' P*.
#[pyfunction(name = "steady_states")]
fn py_steady_states(pair: &PyCompatiblePair, rep: &PyFermionRep) -> PyResult<(Mat, Mat, String)> {
    let ss = steady_states(&pair.inner, &rep.inner).map_err(err)?;
    Ok((mat_out(&ss.p), mat_out(&ss.r_inf), ss.family))
}

/// Decide whether (e^G, R) is the time-1 member of a semigroup with drift G.
/// Returns (embeddable, recovered_rate, min_eig); min_eig is None when
/// embeddable and the most negative bound violation otherwise.
#[pyfunction(name = "embed_check")]
fn py_embed_check(g: Mat, r: Mat) -> PyResult<(bool, Mat, Option<f64>)> {
    match embed_check(&mat_in(&g)?, &mat_in(&r)?).map_err(err)? {
        EmbedOutcome::Embeddable { a } => Ok((true, mat_out(&a), None)),
        EmbedOutcome::NotEmbeddable { a, min_eig } => Ok((false, mat_out(&a), Some(min_eig))),
    }
}

/// Eigenvalues of the time-1 relaxation channel on its product eigenbasis:
/// list of (label, eigenvalue) with label the per-mode exponents (a_j, b_j).
#[pyfunction(name = "hermite_spectrum")]
fn py_hermite_spectrum(
    rep: &PyFermionRep,
    h: Mat,
    t_sym: Mat,
) -> PyResult<Vec<(Vec<(u8, u8)>, f64)>> {
    let basis = hermite_basis(&rep.inner, &mat_in(&h)?, &mat_in(&t_sym)?).map_err(err)?;
    Ok(basis
        .elements
        .iter()
        .map(|e| (e.label.clone(), e.eigenvalue))
        .collect())
}

/// Identify the (S, R) form of the state-side action of a pair's channel.
/// Returns (branch_name, s, r) with S phase-aligned to the input.
#[pyfunction(name = "classify_pair")]
fn py_classify_pair(pair: &PyCompatiblePair) -> PyResult<(String, Mat, Mat)> {
    let rep = FermionRep::new(pair.inner.n()).map_err(err)?;
    let conj = Conjugation::new(&rep);
    let ch = EhkChannel::new(pair.inner.clone()).map_err(err)?;
    let class = classify(&rep, &conj, |x| ch.apply(x)).map_err(err)?;
    let aligned = phase_align(class.s(), pair.inner.s());
    Ok((class.name().to_string(), mat_out(&aligned), mat_out(class.r())))
}

#[pymodule]
fn fermi_gig(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFermionRep>()?;
    m.add_class::<PyCompatiblePair>()?;
    m.add_class::<PyEhkChannel>()?;
    m.add_class::<PySemigroupParams>()?;
    m.add_class::<PyModeSubspace>()?;
    m.add_function(wrap_pyfunction!(py_rho_from_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(py_symbol_of, m)?)?;
    m.add_function(wrap_pyfunction!(py_moment, m)?)?;
    m.add_function(wrap_pyfunction!(py_gauss_moment_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(py_wolfe_check, m)?)?;
    m.add_function(wrap_pyfunction!(py_gibbs_form, m)?)?;
    m.add_function(wrap_pyfunction!(py_gibbs_density, m)?)?;
    m.add_function(wrap_pyfunction!(py_symbol_from_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(py_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(py_steady_states, m)?)?;
    m.add_function(wrap_pyfunction!(py_embed_check, m)?)?;
    m.add_function(wrap_pyfunction!(py_hermite_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(py_classify_pair, m)?)?;
    Ok(())
}
