//! Python bindings for the `giem` library.

use std::path::Path;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde_json::Value;

use giem::analysis::{
    convergence_sweep, denjoy_check, ConvergenceOptions, DenjoyOptions, LetterOrbit, MobiusApproximant, SweepOptions,
    Target,
};
use giem::cli::{compare_runs, run, ExperimentConfig};
use giem::giem::{FamilyDescriptor, Giem};
use giem::numerics::{BigFloat, PrecisionContext, Real};
use giem::rauzy::RauzyState;

create_exception!(giem_py, GiemError, PyException);

fn err(e: giem::Error) -> PyErr {
    GiemError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_bound_py_any(py)?,
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_bound_py_any(py)?,
            (None, Some(u)) => u.into_bound_py_any(py)?,
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)?,
        },
        Value::String(s) => s.into_bound_py_any(py)?,
        Value::Array(xs) => {
            let list = PyList::empty(py);
            for x in xs {
                list.append(to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(m) => {
            let dict = PyDict::new(py);
            for (k, x) in m {
                dict.set_item(k, to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn ser<'py, S: serde::Serialize>(py: Python<'py>, v: &S) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| GiemError::new_err(e.to_string()))?;
    to_py(py, &value)
}

fn descriptor(preset: Option<&str>, json: Option<&str>) -> PyResult<FamilyDescriptor> {
    match (preset, json) {
        (Some(p), None) => FamilyDescriptor::preset(p).map_err(err),
        (None, Some(j)) => serde_json::from_str(j).map_err(|e| GiemError::new_err(e.to_string())),
        _ => Err(GiemError::new_err("pass exactly one of preset= or descriptor=")),
    }
}

/// A genus-one generalized interval exchange map in extended precision.
#[pyclass(name = "Map", frozen)]
struct PyMap {
    map: Arc<Giem<BigFloat>>,
    bits: u32,
}

#[pymethods]
impl PyMap {
    /// Built-in family by name, or a JSON family descriptor.
    #[new]
    #[pyo3(signature = (preset=None, descriptor=None, bits=256))]
    fn new(preset: Option<&str>, descriptor: Option<&str>, bits: u32) -> PyResult<Self> {
        let d = self::descriptor(preset, descriptor)?;
        Ok(PyMap { map: d.build_arc::<BigFloat>(&bits).map_err(err)?, bits })
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        FamilyDescriptor::preset_names().to_vec()
    }

    #[getter]
    fn bits(&self) -> u32 {
        self.bits
    }

    #[getter]
    fn d(&self) -> usize {
        self.map.d()
    }

    /// Letter names in domain order.
    fn names(&self) -> Vec<String> {
        self.map.pair().names().to_vec()
    }

    fn lengths(&self) -> Vec<String> {
        self.map.lengths().iter().map(Real::to_text).collect()
    }

    /// `f(x)` as full-precision decimal text; `x` may be a decimal string or a float.
    fn eval(&self, x: &Bound<'_, PyAny>) -> PyResult<String> {
        let x = self.parse(x)?;
        self.map.eval(&x).map(|y| y.to_text()).map_err(err)
    }

    fn deriv(&self, x: &Bound<'_, PyAny>) -> PyResult<f64> {
        let x = self.parse(x)?;
        self.map.deriv(&x).map(|y| y.to_f64()).map_err(err)
    }

    fn inverse(&self, y: &Bound<'_, PyAny>) -> PyResult<String> {
        let y = self.parse(y)?;
        self.map.inverse(&y).map(|x| x.to_text()).map_err(err)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        ser(py, &self.map.validate())
    }

    /// Renormalizes `depth` times.
    fn renormalize(&self, depth: usize) -> PyResult<Renormalization> {
        let mut s = RauzyState::new(self.map.clone());
        s.advance_to(depth).map_err(err)?;
        Ok(Renormalization { state: s })
    }
}

impl PyMap {
    fn parse(&self, x: &Bound<'_, PyAny>) -> PyResult<BigFloat> {
        if let Ok(s) = x.extract::<String>() {
            return BigFloat::parse(&self.bits, &s).map_err(err);
        }
        Ok(BigFloat::new(self.bits, x.extract::<f64>()?))
    }
}

/// The `n`-th Rauzy-Veech renormalization of a map.
#[pyclass(frozen)]
struct Renormalization {
    state: RauzyState<BigFloat>,
}

#[pymethods]
impl Renormalization {
    #[getter]
    fn depth(&self) -> usize {
        self.state.depth()
    }

    fn return_times(&self) -> Vec<usize> {
        (0..self.state.d()).map(|a| self.state.return_time(a)).collect()
    }

    fn lengths(&self) -> Vec<String> {
        self.state.lengths().iter().map(Real::to_text).collect()
    }

    fn interval_length(&self) -> String {
        self.state.interval_length().to_text()
    }

    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        ser(py, &self.state.summaries())
    }

    fn eval_return_map(&self, x: &str) -> PyResult<String> {
        let bits = BigFloat::bits(self.state.map().ctx());
        let x = BigFloat::parse(&bits, x).map_err(err)?;
        self.state.eval_return_map(&x).map(|y| y.to_text()).map_err(err)
    }

    /// `m_n` for one letter, by the closed form.
    fn m_n(&self, letter: usize) -> PyResult<String> {
        self.check_letter(letter)?;
        let orb = LetterOrbit::new(&self.state, letter).map_err(err)?;
        orb.compute_mn(None).map(|m| m.closed.to_text()).map_err(err)
    }

    /// `(Z, DZ)` of the zoomed return map of `letter` at `z0 ∈ [0, 1]`.
    fn zoom(&self, letter: usize, z0: f64) -> PyResult<(f64, f64)> {
        self.check_letter(letter)?;
        let orb = LetterOrbit::new(&self.state, letter).map_err(err)?;
        let p = orb.point(&BigFloat::new(BigFloat::bits(self.state.map().ctx()), z0));
        Ok((p.z.to_f64(), p.dz.to_f64()))
    }
}

impl Renormalization {
    fn check_letter(&self, letter: usize) -> PyResult<()> {
        if letter >= self.state.d() {
            return Err(GiemError::new_err(format!("letter {letter} out of range")));
        }
        Ok(())
    }
}

/// `F(x) = m x / (1 + x(m − 1))` and its first two derivatives.
#[pyfunction]
fn mobius(m: f64, x: f64) -> (f64, f64, f64) {
    let f = MobiusApproximant::new(m);
    (f.eval(&x), f.d1(&x), f.d2(&x))
}

/// Zoom deviations from `F_n` (or the identity) over a depth sweep.
#[pyfunction]
#[pyo3(signature = (map, depth, target="mobius", grid_points=129, l1=false, first_depth=1))]
fn convergence<'py>(
    py: Python<'py>,
    map: &PyMap,
    depth: usize,
    target: &str,
    grid_points: usize,
    l1: bool,
    first_depth: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let target = match target {
        "mobius" => Target::Mobius,
        "identity" => Target::Identity,
        other => return Err(GiemError::new_err(format!("unknown target {other:?}"))),
    };
    let ctx = PrecisionContext::extended(map.bits).with_grid_points(grid_points);
    let opts = ConvergenceOptions {
        first_depth,
        max_depth: depth,
        target,
        sweep: SweepOptions { grid_points, l1, ..Default::default() },
        ..Default::default()
    };
    let sweep = py.detach(|| convergence_sweep(map.map.clone(), &ctx, &opts)).map_err(err)?;
    ser(py, &sweep)
}

/// Denjoy-type bounds: `θ`, return-map products and sampled two-point ratios.
#[pyfunction]
#[pyo3(signature = (map, depth, pairs=500, seed=1))]
fn denjoy<'py>(py: Python<'py>, map: &PyMap, depth: usize, pairs: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let opts = DenjoyOptions { max_depth: depth, pairs, seed, ..Default::default() };
    let rep = py.detach(|| denjoy_check(map.map.clone(), &opts)).map_err(err)?;
    ser(py, &rep)
}

/// Runs a TOML experiment config and returns its run record.
#[pyfunction]
#[pyo3(signature = (config, out))]
fn run_experiment<'py>(py: Python<'py>, config: &str, out: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_toml(config).map_err(err)?;
    let rec = py.detach(|| run(&cfg, Some(Path::new(out)))).map_err(err)?;
    ser(py, &rec)
}

#[pyfunction]
fn compare<'py>(py: Python<'py>, a: &str, b: &str) -> PyResult<Bound<'py, PyAny>> {
    ser(py, &compare_runs(Path::new(a), Path::new(b)).map_err(err)?)
}

#[pymodule]
fn giem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GiemError", m.py().get_type::<GiemError>())?;
    m.add_class::<PyMap>()?;
    m.add_class::<Renormalization>()?;
    m.add_function(wrap_pyfunction!(mobius, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(denjoy, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
