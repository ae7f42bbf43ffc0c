//! Python bindings for the anticommutator local-law toolkit.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use anticomm::freelaw::{self, UHPoint};
use anticomm::linalg::C64;
use anticomm::linearize::{self, StatsMethod};
use anticomm::locallaw::{self, GizmoConfig};
use anticomm::wigner::{self, EnsembleSpec, EntryLaw};

fn err(e: anticomm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn method(name: &str) -> PyResult<StatsMethod> {
    match name {
        "schur" => Ok(StatsMethod::Schur),
        "minor" => Ok(StatsMethod::Minor),
        other => Err(PyValueError::new_err(format!("method must be 'schur' or 'minor', got '{other}'"))),
    }
}

/// `(omega, zeta, rho_aux)`
#[pyfunction]
fn law_constants() -> (f64, f64, f64) {
    let k = freelaw::law_constants();
    (k.omega, k.zeta, k.rho_aux)
}

/// Stieltjes value of the limiting law with edge distance and cubic residual.
#[pyfunction]
fn m_ac(z: C64) -> PyResult<(C64, f64, f64)> {
    let p = freelaw::m_ac(UHPoint::new(z).map_err(err)?).map_err(err)?;
    Ok((p.m, p.h, p.residual))
}

#[pyfunction]
fn density(t: f64) -> PyResult<f64> {
    freelaw::density_ac(t, &freelaw::DensityOptions::default()).map_err(err)
}

#[pyfunction]
fn m_semicircle(z: C64) -> C64 {
    anticomm::sdcore::m_sc(z)
}

#[pyfunction]
fn solve_sigma(lam: f64, rho: f64) -> PyResult<f64> {
    locallaw::solve_sigma(lam, rho).map_err(err)
}

/// Rows `(rho, lambda, sigma)`.
#[pyfunction]
fn figure1(rho: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
    Ok(locallaw::figure1_data(&rho).map_err(err)?.into_iter().map(|r| (r.rho, r.lambda, r.sigma)).collect())
}

/// Runs the command-line front end and returns its exit code.
#[pyfunction]
fn run_cli(argv: Vec<String>) -> i32 {
    anticomm::cli::run(std::iter::once("anticomm".to_string()).chain(argv))
}

#[pyclass(name = "WignerPair", module = "anticomm_py")]
struct PyWignerPair {
    inner: wigner::WignerPair,
}

#[pymethods]
impl PyWignerPair {
    #[new]
    #[pyo3(signature = (n, ensemble = "gaussian", seed = 0))]
    fn new(n: usize, ensemble: &str, seed: u64) -> PyResult<Self> {
        let law: EntryLaw = ensemble.parse().map_err(err)?;
        let spec = EnsembleSpec::new(n, law, seed).map_err(err)?;
        Ok(PyWignerPair { inner: wigner::sample_pair(&spec) })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyWignerPair { inner: anticomm::io::pair_from_text(text).map_err(err)? })
    }

    fn to_text(&self) -> String {
        anticomm::io::pair_to_text(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn ensemble(&self) -> &'static str {
        self.inner.spec.law.tag()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.spec.seed
    }

    /// `(||U||, ||V||)`
    fn norms(&self) -> (f64, f64) {
        self.inner.norms()
    }

    fn u(&self) -> Vec<Vec<C64>> {
        rows(&self.inner.u)
    }

    fn v(&self) -> Vec<Vec<C64>> {
        rows(&self.inner.v)
    }

    /// Eigenvalues of `UV + VU`, ascending.
    fn anticommutator_eigenvalues(&self) -> Vec<f64> {
        anticomm::linalg::hermitian_eigen(&self.inner.anticommutator()).0
    }

    fn linearize(&self) -> Linearization {
        Linearization { inner: linearize::build_linearization(&self.inner) }
    }

    #[pyo3(signature = (z_grid, tau = 8.0, theta = 1.0, c_config = 1.0, spacing = 2.0, method = "schur"))]
    #[allow(clippy::too_many_arguments)]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        z_grid: Vec<C64>,
        tau: f64,
        theta: f64,
        c_config: f64,
        spacing: f64,
        method: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = GizmoConfig { tau, theta, c_config, spacing, method: self::method(method)?, lipschitz_c: 1.0 };
        let r = locallaw::verify_gizmo(&self.inner, &z_grid, &cfg).map_err(err)?;
        json_to_py(py, &r)
    }

    #[pyo3(signature = (k = None, c_config = 1.0))]
    fn delocalization<'py>(&self, py: Python<'py>, k: Option<f64>, c_config: f64) -> PyResult<Bound<'py, PyAny>> {
        let k = match k {
            Some(k) => k,
            None => {
                let lin = linearize::build_linearization(&self.inner);
                locallaw::empirical_k(&lin, &locallaw::empirical_k_grid(self.inner.n()), c_config).map_err(err)?
            }
        };
        json_to_py(py, &locallaw::delocalization_check(&self.inner, k, c_config).map_err(err)?)
    }
}

fn rows(m: &anticomm::linalg::CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(module = "anticomm_py")]
struct Linearization {
    inner: linearize::Linearization,
}

#[pymethods]
impl Linearization {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    fn factorization_residual(&self, z: C64) -> f64 {
        linearize::factorization_residual(&self.inner, z)
    }

    /// Relative residuals `(shift, derivative, imaginary, corner)` of the basic resolvent identities.
    fn basic_identities(&self, z: C64) -> PyResult<(f64, f64, f64, f64)> {
        let r = linearize::basic_identities(&self.inner, UHPoint::new(z).map_err(err)?).map_err(err)?;
        Ok((r.shift, r.derivative, r.imaginary, r.corner))
    }

    /// Per-index statistics: `G_i`, `Ghat_i`, `Q_i` as 3x3 nested lists, `kfrak_i`, `kfrak`, `r_i_frob`.
    #[pyo3(signature = (z, method = "schur"))]
    fn resolvent_stats<'py>(&self, py: Python<'py>, z: C64, method: &str) -> PyResult<Bound<'py, PyAny>> {
        let s = linearize::resolvent_stats_with(&self.inner, UHPoint::new(z).map_err(err)?, self::method(method)?)
            .map_err(err)?;
        let m3 = |a: &anticomm::linalg::Mat3| -> Vec<Vec<[f64; 2]>> {
            (0..3).map(|i| (0..3).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
        };
        #[derive(serde::Serialize)]
        struct S {
            g_i: Vec<Vec<Vec<[f64; 2]>>>,
            ghat_i: Vec<Vec<Vec<[f64; 2]>>>,
            q_i: Vec<Vec<Vec<[f64; 2]>>>,
            kfrak_i: Vec<f64>,
            kfrak: f64,
            r_i_frob: Vec<f64>,
            key_identity: f64,
        }
        let key_identity = linearize::key_identity_residual(&s).map_err(err)?;
        json_to_py(
            py,
            &S {
                g_i: s.g_i.iter().map(m3).collect(),
                ghat_i: s.ghat_i.iter().map(m3).collect(),
                q_i: s.q_i.iter().map(m3).collect(),
                kfrak_i: s.kfrak_i.clone(),
                kfrak: s.kfrak,
                r_i_frob: s.r_i_frob.clone(),
                key_identity,
            },
        )
    }

    /// `2 max 𝔎` over a net of `[-8, 8] x [1/N, tau]`.
    #[pyo3(signature = (tau = 8.0, spacing = 2.0, method = "schur"))]
    fn kfrak_sup(&self, tau: f64, spacing: f64, method: &str) -> PyResult<f64> {
        let rect = locallaw::anticomm_rectangle(self.inner.n, tau);
        Ok(linearize::kfrak_sup(&self.inner, rect, spacing, self::method(method)?, 1.0).map_err(err)?.k)
    }
}

#[pymodule]
mod anticomm_py {
    #[pymodule_export]
    use super::{
        density, figure1, law_constants, m_ac, m_semicircle, run_cli, solve_sigma, Linearization, PyWignerPair,
    };

    #[pymodule_init]
    fn init(m: &pyo3::Bound<'_, pyo3::types::PyModule>) -> pyo3::PyResult<()> {
        use pyo3::types::PyModuleMethods;
        m.add("__version__", anticomm::VERSION)?;
        Ok(())
    }
}
