//! Python bindings: bases, symbols, quantized operators, ladder runs and the check suite.

use gauss_weyl::checks::{self, Scale};
use gauss_weyl::heat_semigroup::{heat_full, CoordinateSplit};
use gauss_weyl::hermite_space::{coherent_state, FunctionRep, HermiteBasis};
use gauss_weyl::linalg::{operator_norm, OperatorMatrix};
use gauss_weyl::quantizer::{
    antiwick_matrix_with_order, cv_bound as core_cv_bound, hybrid_matrix_with_order, ladder_run, oracle_u as core_oracle_u, site_order,
    weyl_matrix_kernel, weyl_matrix_with_order, wick_symbol, IndexLadder,
};
use gauss_weyl::symbol_library::{SymbolDescriptor, SymbolSpec};
use gauss_weyl::wigner::{wigner_gauss, wigner_hermite};
use gauss_weyl::{GwError, PhasePoint};
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: GwError) -> PyErr {
    match e {
        GwError::Input(m) => PyValueError::new_err(m),
        GwError::Numerical(m) => PyArithmeticError::new_err(m),
        GwError::Resource(m) => PyRuntimeError::new_err(m),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for gauss_weyl::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn point(flat: &[f64], dim: usize) -> PyResult<PhasePoint> {
    if flat.len() != 2 * dim {
        return Err(PyValueError::new_err(format!("phase point needs {} coordinates", 2 * dim)));
    }
    Ok(PhasePoint::from_flat(flat))
}

/// Hermite basis of `L²(μ_{h/2})` on `ℝ^dim`, per-coordinate degree at most `degree`.
#[pyclass(name = "Basis", frozen)]
#[derive(Clone)]
struct PyBasis(HermiteBasis);

#[pymethods]
impl PyBasis {
    #[new]
    fn new(dim: usize, h: f64, degree: usize) -> PyResult<Self> {
        HermiteBasis::new(dim, h, degree).py().map(Self)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.max_degree
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn multis(&self) -> Vec<Vec<usize>> {
        self.0.multis().to_vec()
    }

    /// Hermite coefficients of the truncated coherent state at `x = [x.., ξ..]`.
    fn coherent(&self, x: Vec<f64>) -> PyResult<Vec<Complex64>> {
        let p = point(&x, self.0.dim)?;
        Ok(coherent_state(&p, self.0.h, &self.0).py()?.rep.coeffs)
    }

    fn __repr__(&self) -> String {
        format!("Basis(dim={}, h={}, degree={}, size={})", self.0.dim, self.0.h, self.0.max_degree, self.0.len())
    }
}

/// A symbol built from its JSON specification.
#[pyclass(name = "Symbol", frozen)]
struct PySymbol(SymbolDescriptor);

#[pymethods]
impl PySymbol {
    #[new]
    #[pyo3(signature = (spec, dim = 1))]
    fn new(spec: &str, dim: usize) -> PyResult<Self> {
        SymbolSpec::from_json(spec).and_then(|s| s.build(dim)).py().map(Self)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    /// `(M, ε)` when the symbol declares a class.
    #[getter]
    fn class_data(&self) -> Option<(f64, Vec<f64>)> {
        self.0.class.as_ref().map(|c| (c.big_m, c.eps.clone()))
    }

    fn __call__(&self, x: Vec<f64>, xi: Vec<f64>) -> PyResult<Complex64> {
        if x.len() != self.0.dim || xi.len() != self.0.dim {
            return Err(PyValueError::new_err("argument dimension differs from the symbol"));
        }
        Ok(self.0.eval(&x, &xi))
    }

    /// Heat semigroup at time `t` evaluated at `z = [x.., ξ..]`.
    fn heat(&self, t: f64, z: Vec<f64>) -> PyResult<Complex64> {
        heat_full(&self.0, t, &point(&z, self.0.dim)?).py()
    }

    fn __repr__(&self) -> String {
        format!("Symbol(name={:?}, dim={})", self.0.name, self.0.dim)
    }
}

/// Operator matrix `A_{lk} = ⟨A e_k, e_l⟩`.
#[pyclass(name = "Operator", frozen)]
struct PyOperator(OperatorMatrix);

#[pymethods]
impl PyOperator {
    #[getter]
    fn size(&self) -> usize {
        self.0.size()
    }

    #[getter]
    fn method(&self) -> String {
        self.0.meta.method.clone()
    }

    /// Row-major nested lists.
    fn entries(&self) -> Vec<Vec<Complex64>> {
        let n = self.0.size();
        (0..n).map(|r| (0..n).map(|c| self.0.entries[(r, c)]).collect()).collect()
    }

    fn norm(&self) -> PyResult<f64> {
        operator_norm(&self.0).py()
    }

    fn hermitian_defect(&self) -> f64 {
        self.0.hermitian_defect()
    }

    fn max_abs_diff(&self, other: &PyOperator) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// `⟨A f, g⟩` for coefficient vectors.
    fn form(&self, f: Vec<Complex64>, g: Vec<Complex64>) -> PyResult<Complex64> {
        let b = &self.0.basis;
        self.0.form(&FunctionRep::new(b.clone(), f).py()?, &FunctionRep::new(b.clone(), g).py()?).py()
    }

    /// Wick symbol at `x = [x.., ξ..]`; returns `(value, low_confidence)`.
    fn wick(&self, x: Vec<f64>) -> PyResult<(Complex64, bool)> {
        let w = wick_symbol(&self.0, &point(&x, self.0.basis.dim)?).py()?;
        Ok((w.value, w.low_confidence))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0.to_json()).expect("matrix serializes")
    }
}

/// Quantizes `symbol` by `method` in `weyl`, `antiwick`, `hybrid` (Weyl on `selected`) or `kernel`.
#[pyfunction]
#[pyo3(signature = (symbol, basis, method = "weyl", selected = None, order = None))]
fn quantize(symbol: &PySymbol, basis: &PyBasis, method: &str, selected: Option<Vec<usize>>, order: Option<usize>) -> PyResult<PyOperator> {
    let (f, b) = (&symbol.0, &basis.0);
    let q = order.unwrap_or_else(|| site_order(b.dim, b.max_degree));
    let m = match method {
        "weyl" => weyl_matrix_with_order(f, b, q),
        "antiwick" => antiwick_matrix_with_order(f, b, q),
        "hybrid" => CoordinateSplit::new(b.dim, selected.unwrap_or_default()).and_then(|s| hybrid_matrix_with_order(f, &s, b, q)),
        "kernel" => weyl_matrix_kernel(f, b, q),
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    m.py().map(PyOperator)
}

/// Closed-form matrix of the Weyl operator of `e^{i(a·x + b·ξ)}`.
#[pyfunction]
fn oracle_u(a: Vec<f64>, b: Vec<f64>, basis: &PyBasis) -> PyResult<PyOperator> {
    core_oracle_u(&a, &b, &basis.0).py().map(PyOperator)
}

#[pyfunction]
fn cv_bound(m: f64, eps: Vec<f64>, h: f64) -> PyResult<f64> {
    core_cv_bound(m, &eps, h).py()
}

/// Wigner-Gauss transform of two coefficient vectors at `z`.
#[pyfunction]
#[pyo3(signature = (basis, f, g, z, quadrature = false))]
fn wigner(basis: &PyBasis, f: Vec<Complex64>, g: Vec<Complex64>, z: Vec<f64>, quadrature: bool) -> PyResult<Complex64> {
    let b = &basis.0;
    let (f, g) = (FunctionRep::new(b.clone(), f).py()?, FunctionRep::new(b.clone(), g).py()?);
    let z = point(&z, b.dim)?;
    if quadrature { wigner_gauss(&f, &g, &z) } else { wigner_hermite(&f, &g, &z) }.py()
}

/// Dimension ladder along `order` (default `0..D`); returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (symbol, basis, order = None, error_bar = false))]
fn ladder<'py>(py: Python<'py>, symbol: &PySymbol, basis: &PyBasis, order: Option<Vec<usize>>, error_bar: bool) -> PyResult<Bound<'py, PyDict>> {
    let ord = order.unwrap_or_else(|| (0..basis.0.dim).collect());
    let lad = IndexLadder::from_order(&ord).py()?;
    let r = ladder_run(&symbol.0, &lad, &basis.0, error_bar).py()?;
    let d = PyDict::new(py);
    d.set_item("final_norm", r.final_norm)?;
    d.set_item("cv_bound", r.cv_bound)?;
    d.set_item("error_bar", r.error_bar)?;
    d.set_item("within_bounds", r.within_bounds())?;
    d.set_item("diff_norms", r.steps.iter().map(|s| s.diff_norm).collect::<Vec<_>>())?;
    d.set_item("diff_bounds", r.steps.iter().map(|s| s.diff_bound).collect::<Vec<_>>())?;
    d.set_item("tails", r.steps.iter().map(|s| s.tail).collect::<Vec<_>>())?;
    d.set_item("final_matrix", PyOperator(r.final_matrix).into_pyobject(py)?)?;
    Ok(d)
}

/// Runs the invariant suite; each result is `(id, criterion, passed, measured, tolerance, detail)`.
#[pyfunction]
#[pyo3(signature = (filter = None, quick = true))]
#[allow(clippy::type_complexity)]
fn run_checks(py: Python<'_>, filter: Option<String>, quick: bool) -> Vec<(String, u32, bool, f64, f64, String)> {
    let scale = if quick { Scale::Quick } else { Scale::Full };
    py.allow_threads(|| checks::run_checks(filter.as_deref(), scale))
        .into_iter()
        .map(|o| (o.id.to_string(), o.criterion, o.passed, o.measured, o.tolerance, o.detail))
        .collect()
}

#[pymodule]
fn gauss_weyl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", gauss_weyl::VERSION)?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PySymbol>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_u, m)?)?;
    m.add_function(wrap_pyfunction!(cv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(wigner, m)?)?;
    m.add_function(wrap_pyfunction!(ladder, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
