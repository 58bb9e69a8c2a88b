//! Python bindings for the `fracblowup` crate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fracblowup::kernels;
use fracblowup::ko::{self, KOProfile};
use fracblowup::nonlinearity::NonlinearityModel;
use fracblowup::report::{self, Scenario};
use fracblowup::solver::{self, ProblemData, SolveConfig};
use fracblowup::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::Integrability { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn model(p: f64, alpha: Option<f64>) -> NonlinearityModel {
    match alpha {
        Some(a) if a != 0.0 => NonlinearityModel::power_log(p, a),
        _ => NonlinearityModel::power(p),
    }
}

/// `(verdict, margin)` of the L1 integral test for `t^p ln^alpha(1+t)`.
#[pyfunction]
#[pyo3(signature = (p, s, alpha=None))]
fn check_l1(p: f64, s: f64, alpha: Option<f64>) -> PyResult<(String, f64)> {
    let r = ko::check_l1(&model(p, alpha), s).map_err(err)?;
    Ok((format!("{:?}", r.verdict), r.margin))
}

/// `(verdict, margin)` of the growth integral test.
#[pyfunction]
#[pyo3(signature = (p, s, alpha=None))]
fn check_e(p: f64, s: f64, alpha: Option<f64>) -> PyResult<(String, f64)> {
    let r = ko::check_e(&model(p, alpha), s).map_err(err)?;
    Ok((format!("{:?}", r.verdict), r.margin))
}

#[pyfunction]
#[pyo3(signature = (p, s, u, alpha=None))]
fn phi(p: f64, s: f64, u: f64, alpha: Option<f64>) -> PyResult<f64> {
    KOProfile::new(&model(p, alpha), s).and_then(|k| k.phi(u)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, s, v, alpha=None))]
fn psi(p: f64, s: f64, v: f64, alpha: Option<f64>) -> PyResult<f64> {
    KOProfile::new(&model(p, alpha), s).and_then(|k| k.psi(v)).map_err(err)
}

#[pyfunction]
fn power_regime(p: f64, s: f64) -> PyResult<String> {
    Ok(format!("{:?}", ko::classify_power_regime(p, s).map_err(err)?))
}

#[pyfunction]
fn torsion_constant(dim: usize, s: f64) -> f64 {
    kernels::torsion_constant(dim, s)
}

#[pyfunction]
fn green_constant(dim: usize, s: f64) -> f64 {
    kernels::green_constant(dim, s)
}

/// Kernel constants and a seeded symmetry probe, as a JSON string.
#[pyfunction]
#[pyo3(signature = (dim, s, seed=0))]
fn info(dim: usize, s: f64, seed: u64) -> PyResult<String> {
    let v = report::run_info(dim, s, seed).map_err(err)?;
    Ok(String::from_utf8_lossy(&report::to_json_bytes(&v)).into_owned())
}

type Profile = (Vec<f64>, Vec<f64>, Vec<f64>, bool);

/// Solve with boundary trace `k`; returns `(x, delta, u, converged)` where
/// `u` includes the singular part.
#[pyfunction]
#[pyo3(signature = (p, s, k, n=128, dim=1, alpha=None))]
fn solve_k(
    py: Python<'_>,
    p: f64,
    s: f64,
    k: f64,
    n: usize,
    dim: usize,
    alpha: Option<f64>,
) -> PyResult<Profile> {
    let cfg = SolveConfig::new(s, dim, model(p, alpha), ProblemData::Trace(k)).with_mesh(n, None);
    let r = py.detach(|| solver::solve_k_problem(&cfg)).map_err(err)?;
    let m = &r.solution.mesh;
    Ok((m.x.clone(), m.delta.clone(), r.solution.totals(), r.converged))
}

/// Run a replication scenario into `out`; returns `(status, verdict_path)`.
#[pyfunction]
fn replicate(py: Python<'_>, scenario: &str, out: &str) -> PyResult<(String, String)> {
    let sc = Scenario::all()
        .into_iter()
        .find(|s| s.name() == scenario)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scenario {scenario}")))?;
    let r = py.detach(|| report::replicate(sc, std::path::Path::new(out))).map_err(err)?;
    Ok((format!("{:?}", r.status), r.verdict_path.display().to_string()))
}

#[pymodule]
fn pyfracblowup(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check_l1, m)?)?;
    m.add_function(wrap_pyfunction!(check_e, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(power_regime, m)?)?;
    m.add_function(wrap_pyfunction!(torsion_constant, m)?)?;
    m.add_function(wrap_pyfunction!(green_constant, m)?)?;
    m.add_function(wrap_pyfunction!(info, m)?)?;
    m.add_function(wrap_pyfunction!(solve_k, m)?)?;
    m.add_function(wrap_pyfunction!(replicate, m)?)?;
    Ok(())
}
