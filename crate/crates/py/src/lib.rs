//! Python bindings: tensors, potentials, the return map, scenario configs, evolutions, the property suite and snapshots.

use plastiplate::check::{run_all, CheckConfig};
use plastiplate::grid::snapshot::{read_meta, Snapshot};
use plastiplate::material::{return_map as core_return_map, Elasticity};
use plastiplate::potentials::{self as pot, TruncationParams};
use plastiplate::scenario::{builtin_config, Config as CoreConfig, BUILTIN_NAMES};
use plastiplate::solver::{evolve_with, SolverOptions};
use plastiplate::tensor::{self, Sym2 as CoreSym2, YieldSurface};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn err(e: plastiplate::Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Symmetric 2×2 tensor (a11, a22, a12).
#[pyclass(frozen, from_py_object)]
#[derive(Clone, Copy)]
struct Sym2 {
    inner: CoreSym2,
}

impl From<CoreSym2> for Sym2 {
    fn from(inner: CoreSym2) -> Self {
        Sym2 { inner }
    }
}

#[pymethods]
impl Sym2 {
    #[new]
    fn new(a11: f64, a22: f64, a12: f64) -> Self {
        CoreSym2::new(a11, a22, a12).into()
    }

    #[getter]
    fn a11(&self) -> f64 {
        self.inner.a11
    }

    #[getter]
    fn a22(&self) -> f64 {
        self.inner.a22
    }

    #[getter]
    fn a12(&self) -> f64 {
        self.inner.a12
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn ddot(&self, other: &Sym2) -> f64 {
        self.inner.ddot(&other.inner)
    }

    fn frob(&self) -> f64 {
        self.inner.frob()
    }

    fn norm_r(&self) -> f64 {
        tensor::norm_r(&self.inner)
    }

    fn norm_dual(&self) -> f64 {
        tensor::norm_dual(&self.inner)
    }

    fn dev_r(&self) -> Sym2 {
        tensor::dev_r(&self.inner).into()
    }

    fn lift_dual(&self) -> Sym2 {
        tensor::lift_dual(&self.inner).into()
    }

    /// Support function of the reduced yield set of radius alpha0.
    fn support_hr(&self, alpha0: f64) -> PyResult<f64> {
        Ok(tensor::support_hr(&self.inner, &YieldSurface::new(alpha0).map_err(err)?))
    }

    fn to_tuple(&self) -> (f64, f64, f64) {
        (self.inner.a11, self.inner.a22, self.inner.a12)
    }

    fn __add__(&self, o: &Sym2) -> Sym2 {
        (self.inner + o.inner).into()
    }

    fn __sub__(&self, o: &Sym2) -> Sym2 {
        (self.inner - o.inner).into()
    }

    fn __mul__(&self, c: f64) -> Sym2 {
        (self.inner * c).into()
    }

    fn __rmul__(&self, c: f64) -> Sym2 {
        (self.inner * c).into()
    }

    fn __eq__(&self, o: &Sym2) -> bool {
        self.inner == o.inner
    }

    fn __repr__(&self) -> String {
        format!("Sym2({}, {}, {})", self.inner.a11, self.inner.a22, self.inner.a12)
    }
}

/// Truncated Norton–Hoff potential ψ_λ with exponent n and yield radius alpha0.
#[pyclass(frozen)]
struct Potential {
    p: TruncationParams,
}

#[pymethods]
impl Potential {
    #[new]
    #[pyo3(signature = (n, alpha0, lam))]
    fn new(n: u32, alpha0: f64, lam: f64) -> PyResult<Self> {
        Ok(Potential { p: TruncationParams::from_parts(n, alpha0, lam).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> u32 {
        self.p.n()
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.p.alpha0()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.p.lambda()
    }

    /// Untruncated φ_N.
    fn phi(&self, xi: &Sym2) -> f64 {
        pot::phi_n(&xi.inner, &self.p.base())
    }

    fn psi(&self, xi: &Sym2) -> f64 {
        pot::psi_lambda(&xi.inner, &self.p)
    }

    fn dpsi(&self, xi: &Sym2) -> Sym2 {
        pot::dpsi_lambda(&xi.inner, &self.p).into()
    }

    /// Closed-form conjugate F_λ.
    fn conjugate(&self, y: &Sym2) -> f64 {
        pot::f_lambda(&y.inner, &self.p)
    }

    fn dconjugate(&self, y: &Sym2) -> Sym2 {
        pot::df_lambda(&y.inner, &self.p).into()
    }

    /// Brute-force sup of ξ:y − ψ_λ(ξ) over a grid of the given radius and resolution.
    #[pyo3(signature = (y, radius, n=41))]
    fn conjugate_numeric(&self, y: &Sym2, radius: f64, n: usize) -> PyResult<f64> {
        pot::conjugate_numeric(&y.inner, &self.p, radius, n).map_err(err)
    }

    fn flow_gap_density(&self, sigma: &Sym2) -> f64 {
        pot::flow_gap_density(&sigma.inner, &self.p.base())
    }

    fn flow_gap_bound(&self) -> f64 {
        pot::flow_gap_bound(&self.p.base())
    }
}

/// Pointwise implicit stress update σ solving A σ + dt·Dψ_λ(σ) = eta.
#[pyfunction]
#[pyo3(signature = (eta, dt, mu, ell, potential, tol=1e-13))]
fn return_map(eta: &Sym2, dt: f64, mu: f64, ell: f64, potential: &Potential, tol: f64) -> PyResult<Sym2> {
    let e = Elasticity::new(mu, ell).map_err(err)?;
    Ok(core_return_map(&eta.inner, dt, &e, &potential.p, tol).map_err(err)?.into())
}

/// Scenario configuration, the same JSON schema the command line reads.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Config {
    inner: CoreConfig,
}

#[pymethods]
impl Config {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Config { inner: CoreConfig::from_json(text).map_err(err)? })
    }

    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        builtin_config(name)
            .map(|inner| Config { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown builtin {name}; expected one of {}", BUILTIN_NAMES.join(", "))))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    /// Copy on a mesh refined `mesh` times and a time grid refined `steps` times.
    #[pyo3(signature = (mesh=1, steps=1))]
    fn refined(&self, mesh: usize, steps: usize) -> Self {
        Config { inner: self.inner.refined(mesh, steps) }
    }

    /// Copy with a different Norton–Hoff exponent and truncation level.
    #[pyo3(signature = (n, lam=None))]
    fn with_yield(&self, n: u32, lam: Option<f64>) -> Self {
        let mut c = self.inner.clone();
        c.yield_.n = n;
        if let Some(l) = lam {
            c.yield_.lambda = l;
        }
        Config { inner: c }
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn __repr__(&self) -> String {
        format!("Config({:?}, nx={}, ny={}, N={}, k={})", self.inner.name, self.inner.geometry.nx, self.inner.geometry.ny, self.inner.yield_.n, self.inner.time.k)
    }
}

#[pyfunction]
fn builtin_names() -> Vec<&'static str> {
    BUILTIN_NAMES.to_vec()
}

/// Runs one evolution and returns {"summary", "checks", "log", "final"}.
///
/// `final` holds the last slice's fields as flat lists in snapshot layout.
/// With `out`, snapshots snap_<i>.plp/.meta are written there every `stride` steps.
#[pyfunction]
#[pyo3(signature = (config, out=None, stride=0, tol_scale=1.0))]
fn simulate<'py>(py: Python<'py>, config: &Config, out: Option<PathBuf>, stride: usize, tol_scale: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config.inner.clone();
    let run = py.detach(move || -> plastiplate::Result<_> {
        let scen = cfg.build()?;
        let probe = cfg.probe(&scen.grid)?;
        let k = scen.time.steps();
        let grid = scen.grid.clone();
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
        }
        let opts = SolverOptions { stride: 0, ..cfg.solver.clone() };
        let traj = evolve_with(&scen, &opts, probe, |st| {
            if let Some(dir) = &out {
                if st.step == 0 || st.step == k || (stride > 0 && st.step % stride == 0) {
                    let meta = vec![("scenario".to_string(), cfg.name.clone()), ("step".to_string(), st.step.to_string()), ("time".to_string(), st.time.to_string())];
                    st.snapshot(&grid).write(&dir.join(format!("snap_{}.plp", st.step)), &meta)?;
                }
            }
            Ok(())
        })?;
        if let Some(dir) = &out {
            plastiplate::diagnostics::write_csv(&dir.join("diagnostics.csv"), &traj.log)?;
        }
        let fields: Vec<serde_json::Value> = traj
            .last()
            .snapshot(&grid)
            .blocks
            .iter()
            .map(|b| serde_json::json!({ "name": b.name, "nx": b.nx, "ny": b.ny, "nlayers": b.nlayers, "ncomp": b.ncomp, "padded": b.padded, "data": b.data }))
            .collect();
        let checks = traj.summary.invariant_checks(tol_scale);
        Ok(serde_json::json!({ "summary": traj.summary, "checks": checks, "log": traj.log, "final": fields }))
    });
    to_py(py, &run.map_err(err)?)
}

/// Randomized property suite; returns one dict per check.
#[pyfunction]
#[pyo3(signature = (seed=None, tol_scale=1.0))]
fn check<'py>(py: Python<'py>, seed: Option<u64>, tol_scale: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = CheckConfig { seed: seed.unwrap_or(CheckConfig::default().seed), tol_scale };
    let res = py.detach(move || run_all(&cfg)).map_err(err)?;
    to_py(py, &res)
}

/// Reads a .plp snapshot: {"meta": {...}, "blocks": {name: {...}}}.
#[pyfunction]
fn read_snapshot<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let snap = Snapshot::read(&path).map_err(err)?;
    let meta: serde_json::Map<String, serde_json::Value> =
        read_meta(&path).unwrap_or_default().into_iter().map(|(k, v)| (k, serde_json::Value::String(v))).collect();
    let blocks: serde_json::Map<String, serde_json::Value> = snap
        .blocks
        .iter()
        .map(|b| {
            let v = serde_json::json!({
                "nx": b.nx, "ny": b.ny, "nlayers": b.nlayers, "ncomp": b.ncomp, "padded": b.padded,
                "lx": b.lx, "ly": b.ly, "time": b.time, "step": b.step, "data": b.data,
            });
            (b.name.clone(), v)
        })
        .collect();
    to_py(py, &serde_json::json!({ "meta": meta, "blocks": blocks }))
}

#[pymodule]
fn plastiplate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Sym2>()?;
    m.add_class::<Potential>()?;
    m.add_class::<Config>()?;
    m.add_function(wrap_pyfunction!(return_map, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(read_snapshot, m)?)?;
    Ok(())
}
