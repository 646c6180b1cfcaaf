//! Python bindings for the `hamdelay` solver.
//!
//! Matrices cross the boundary as nested lists of floats; eigenvalues come back as
//! Python `complex`.
//!
//! ```python
//! import hamdelay_py as hd
//! p = hd.Problem.example1()
//! sol = hd.solve(p, shift="0", m=21)
//! for lam, res, cls in sol.eigenvalues:
//!     print(lam, res, cls)
//! ```

use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hamdelay::arnoldi::{run, Mode, SolveResult, SolverConfig, StartFunction};
use hamdelay::examples::{make_example1, make_example2};
use hamdelay::io::{export_problem, load_problem, DEFAULT_ROD_GAMMA, DEFAULT_ROD_N};
use hamdelay::problem::DEFAULT_STRUCTURE_TOL;
use hamdelay::{build_hinf_problem, DelayHamiltonianProblem, Error, Shift};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        Error::Parse { .. }
        | Error::DimensionMismatch(_)
        | Error::OddDimension(_)
        | Error::InvalidDelays(_)
        | Error::InvalidArgument(_)
        | Error::ZeroVector => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A Hamiltonian delay eigenvalue problem
/// `M(λ) = λI - H0 - Σ (Hneg[k] e^{-λτ_k} + Hpos[k] e^{λτ_k})`.
#[pyclass(module = "hamdelay_py", frozen)]
struct Problem {
    inner: DelayHamiltonianProblem,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (h0, hneg=Vec::new(), hpos=Vec::new(), delays=Vec::new()))]
    fn new(h0: Vec<Vec<f64>>, hneg: Vec<Vec<Vec<f64>>>, hpos: Vec<Vec<Vec<f64>>>, delays: Vec<f64>) -> PyResult<Self> {
        let hneg = hneg.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let hpos = hpos.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let inner = DelayHamiltonianProblem::new(matrix(h0)?, hneg, hpos, delays).map_err(to_py)?;
        Ok(Problem { inner })
    }

    /// The 2x2 single-delay problem with eigenvalues ±jπ/2 and ±jπ.
    #[staticmethod]
    fn example1() -> Self {
        Problem { inner: make_example1() }
    }

    /// Heated rod with delayed feedback at level `gamma`, on `n` grid points.
    #[staticmethod]
    #[pyo3(signature = (n=DEFAULT_ROD_N, gamma=DEFAULT_ROD_GAMMA))]
    fn example2(n: usize, gamma: f64) -> PyResult<Self> {
        let inner = make_example2(n).and_then(|r| r.hinf_problem(gamma)).map_err(to_py)?;
        Ok(Problem { inner })
    }

    /// Level-`gamma` problem of the delay system `x' = Σ A[k] x(t - τ_k) + B u`, `y = C x`,
    /// with `a[0]` the delay-free part.
    #[staticmethod]
    #[pyo3(signature = (a, b, c, gamma, delays=Vec::new()))]
    fn hinf(a: Vec<Vec<Vec<f64>>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>>, gamma: f64, delays: Vec<f64>) -> PyResult<Self> {
        let a = a.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let inner = build_hinf_problem(&a, &matrix(b)?, &matrix(c)?, gamma, &delays).map_err(to_py)?;
        Ok(Problem { inner })
    }

    /// Reads a TOML problem file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, _) = load_problem(&path).map_err(to_py)?;
        Ok(Problem { inner })
    }

    /// Writes Matrix Market files and a `problem.toml` into `dir`; returns the TOML path.
    fn export(&self, dir: PathBuf) -> PyResult<PathBuf> {
        export_problem(&dir, &self.inner).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn delays(&self) -> Vec<f64> {
        self.inner.delays().to_vec()
    }

    #[getter]
    fn h0(&self) -> Vec<Vec<f64>> {
        rows(self.inner.h0())
    }

    /// Structure check. Returns `(passed, [(name, deviation, passed), ...])`.
    #[pyo3(signature = (tol=DEFAULT_STRUCTURE_TOL))]
    fn validate(&self, tol: f64) -> (bool, Vec<(String, f64, bool)>) {
        let report = self.inner.validate_structure(tol);
        let checks = report
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.deviation, c.passed))
            .collect();
        (report.passed, checks)
    }

    /// `M(λ)` as a nested list of complex numbers.
    fn char_matrix(&self, lam: Complex64) -> Vec<Vec<Complex64>> {
        rows(&self.inner.eval_char_matrix(lam))
    }

    fn __repr__(&self) -> String {
        format!("Problem(dim={}, delays={:?})", self.inner.dim(), self.inner.delays())
    }
}

/// Result of one solver run.
#[pyclass(module = "hamdelay_py", frozen)]
struct Solution {
    inner: SolveResult,
}

#[pymethods]
impl Solution {
    /// `(λ, residual, symmetry class)` triples, best converged first.
    #[getter]
    fn eigenvalues(&self) -> Vec<(Complex64, f64, String)> {
        self.inner
            .eigenvalues()
            .into_iter()
            .map(|(l, r, c)| (l, r, c.to_string()))
            .collect()
    }

    /// Eigenvalues with residual at most `tol`.
    #[pyo3(signature = (tol=1e-8))]
    fn converged(&self, tol: f64) -> Vec<Complex64> {
        self.inner
            .eigenvalues()
            .into_iter()
            .filter(|(_, r, _)| *r <= tol)
            .map(|(l, _, _)| l)
            .collect()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn shift(&self) -> String {
        self.inner.shift.to_string()
    }

    #[getter]
    fn breakdown(&self) -> Option<usize> {
        self.inner.breakdown
    }

    #[getter]
    fn final_degree(&self) -> usize {
        self.inner.final_degree()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.diagnostics.len()
    }

    /// Per-iteration neutrality of the basis (zero for the baseline).
    #[getter]
    fn neutrality(&self) -> Vec<f64> {
        self.inner.diagnostics.iter().map(|d| d.neutrality).collect()
    }

    #[getter]
    fn elapsed(&self) -> f64 {
        self.inner.elapsed.as_secs_f64()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(mode={}, shift={}, pairs={})",
            self.inner.mode,
            self.inner.shift,
            self.inner.ritz.len()
        )
    }
}

/// Runs `m` Arnoldi steps around `shift` ("0", "r:<x>" or "i:<x>").
///
/// `mode` is "baseline", "plain-r" or "j-enforced"; `start` a constant vector, or
/// `seed` for a random one (all ones when neither is given).
#[pyfunction]
#[pyo3(signature = (problem, shift="0", m=20, mode="j-enforced", start=None, seed=None))]
fn solve(
    py: Python<'_>,
    problem: &Problem,
    shift: &str,
    m: usize,
    mode: &str,
    start: Option<Vec<f64>>,
    seed: Option<u64>,
) -> PyResult<Solution> {
    let shift: Shift = shift.parse().map_err(to_py)?;
    let mode: Mode = mode.parse().map_err(to_py)?;
    let start = match (start, seed) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("give either start or seed, not both")),
        (Some(v), None) => StartFunction::Constant(v),
        (None, Some(s)) => StartFunction::Random(s),
        (None, None) => StartFunction::ConstantOnes,
    };
    let cfg = SolverConfig::new(shift, m).with_mode(mode).with_start(start);
    let p = problem.inner.clone();
    let inner = py.detach(move || run(&p, &cfg)).map_err(to_py)?;
    Ok(Solution { inner })
}

#[pymodule]
fn hamdelay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
