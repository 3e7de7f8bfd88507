//! Python bindings. Rationals cross the boundary as `"p/q"` strings (plain
//! integers are accepted on input) and agents as labels such as `"N0"`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use fairmatch::engines::{make_engine, EdgePolicy, EngineConfig, EngineKind, PairPolicy};
use fairmatch::envy::{self, AdjacencyGraph, Circuit, DesireGraph};
use fairmatch::gen::{self, Dynamics, GeneratorKind, GeneratorSpec};
use fairmatch::matching::{max_weight_matching_general, RoundWeights};
use fairmatch::oracle::{self, SequenceSearchResult};
use fairmatch::rational::{format_rational, parse_rational};
use fairmatch::trace::{Trace, TraceRecord};
use fairmatch::{AgentId, Instance, Mode, Rational, SimState, ValuationOracle};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rational_arg(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    if let Ok(i) = obj.extract::<i64>() {
        return Ok(Rational::from_integer(i.into()));
    }
    parse_rational(&obj.str()?.to_cow()?).map_err(value_error)
}

fn agent_arg(label: &str) -> PyResult<AgentId> {
    let bad = || PyValueError::new_err(format!("agent label must look like N0 or M2, got {label:?}"));
    let (side, index) = label.split_at_checked(1).ok_or_else(bad)?;
    let index: usize = index.parse().map_err(|_| bad())?;
    match side {
        "N" | "n" => Ok(AgentId::n(index)),
        "M" | "m" => Ok(AgentId::m(index)),
        _ => Err(bad()),
    }
}

fn engine_arg(name: &str) -> PyResult<EngineKind> {
    name.parse().map_err(value_error)
}

fn mode_arg(name: &str) -> PyResult<Mode> {
    match name {
        "rounds" => Ok(Mode::Rounds),
        "time" => Ok(Mode::Time),
        _ => Err(PyValueError::new_err(format!(
            "mode must be rounds or time, got {name:?}"
        ))),
    }
}

/// A market with its valuation schedule.
#[pyclass(name = "Instance", module = "pyfairmatch", frozen)]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = Instance::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = Instance::from_json(text).map_err(value_error)?;
        Ok(PyInstance { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.shape.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.shape.m
    }

    /// Declared capabilities, e.g. `["static", "binary01"]`.
    #[getter]
    fn capabilities(&self) -> Vec<String> {
        self.inner.declared.iter().map(|c| c.to_string()).collect()
    }

    /// `v_viewer(owner)` at timestep `t >= 1`, as `"p/q"`.
    fn value(&self, t: u64, viewer: &str, owner: &str) -> PyResult<String> {
        let (i, j) = (agent_arg(viewer)?, agent_arg(owner)?);
        let shape = self.inner.shape;
        if t == 0 || !shape.contains(i) || !shape.contains(j) {
            return Err(PyValueError::new_err("timestep or agent out of range"));
        }
        Ok(format_rational(&self.inner.value(t, i, j)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, m={}, mode={:?})",
            self.inner.shape.n, self.inner.shape.m, self.inner.mode
        )
    }
}

/// A run's header plus one record per timestep.
#[pyclass(name = "Trace", module = "pyfairmatch", frozen)]
struct PyTrace {
    inner: Trace,
}

fn record_dict<'py>(py: Python<'py>, r: &TraceRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    let matches: Vec<(usize, usize)> = r.matches.iter().map(|[n, m]| (*n, *m)).collect();
    d.set_item("matches", matches)?;
    d.set_item("weight", r.weight.as_ref().map(format_rational))?;
    d.set_item("iterations", r.iterations)?;
    let v = PyDict::new(py);
    v.set_item("ef1", r.verdicts.ef1)?;
    v.set_item("envy_bounded", r.verdicts.envy_bounded)?;
    v.set_item("envy_cycle_free", r.verdicts.envy_cycle_free)?;
    d.set_item("verdicts", v)?;
    d.set_item("stage_envy_free", r.stage_envy_free)?;
    Ok(d)
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = Trace::parse(text).map_err(value_error)?;
        Ok(PyTrace { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let inner = Trace::read(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyTrace { inner })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    #[getter]
    fn engine(&self) -> String {
        self.inner.header.engine.to_string()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.header.mode.to_string()
    }

    #[getter]
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items = self
            .inner
            .records
            .iter()
            .map(|r| record_dict(py, r))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, items)
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }
}

/// Draws a seeded random instance.
#[pyfunction]
#[pyo3(signature = (kind, n, m=None, p=0.5, seed=0, dynamics="static", k=1, steps=50, a=None, pad=false))]
#[allow(clippy::too_many_arguments)]
fn generate(
    kind: &str,
    n: usize,
    m: Option<usize>,
    p: f64,
    seed: u64,
    dynamics: &str,
    k: usize,
    steps: usize,
    a: Option<&Bound<'_, PyAny>>,
    pad: bool,
) -> PyResult<PyInstance> {
    let kind = match kind {
        "symmetric-binary" => GeneratorKind::SymmetricBinary,
        "only-symmetric-cycles" => GeneratorKind::OnlySymmetricCycles,
        "two-agent-additive" => GeneratorKind::TwoAgentAdditive,
        "general-binary" => GeneratorKind::GeneralBinary,
        other => return Err(PyValueError::new_err(format!("unknown generator kind {other:?}"))),
    };
    let dynamics = match dynamics {
        "static" => Dynamics::Static,
        "redraw" => Dynamics::Redraw,
        "flip-k" => Dynamics::FlipK(k),
        other => return Err(PyValueError::new_err(format!("unknown dynamics {other:?}"))),
    };
    let spec = GeneratorSpec {
        dynamics,
        steps,
        a: a.map(rational_arg).transpose()?.unwrap_or_default(),
        ..GeneratorSpec::new(kind, n, m.unwrap_or(n), p, seed)
    };
    let mut inner = gen::generate(&spec).map_err(value_error)?;
    if pad {
        inner = gen::pad_to_square(&inner);
    }
    Ok(PyInstance { inner })
}

/// Runs an engine for `steps` timesteps. Returns the trace and whether every
/// per-step verdict held.
#[pyfunction]
#[pyo3(signature = (instance, engine, steps, a=None, policy="lex", edge_policy="round-robin"))]
fn run(
    instance: &PyInstance,
    engine: &str,
    steps: u64,
    a: Option<&Bound<'_, PyAny>>,
    policy: &str,
    edge_policy: &str,
) -> PyResult<(PyTrace, bool)> {
    let kind = engine_arg(engine)?;
    let a = a.map(rational_arg).transpose()?;
    let config = EngineConfig {
        pair_policy: match policy {
            "lex" => PairPolicy::Lexicographic,
            "dfs" => PairPolicy::FirstFoundDfs,
            other => {
                return Err(PyValueError::new_err(format!(
                    "policy must be lex or dfs, got {other:?}"
                )))
            }
        },
        edge_policy: match edge_policy {
            "round-robin" => EdgePolicy::RoundRobin,
            "lex" => EdgePolicy::Lexicographic,
            other => return Err(PyValueError::new_err(format!("unknown edge policy {other:?}"))),
        },
        a,
    };
    let inst = &instance.inner;
    let header_a = match kind {
        EngineKind::SymBin => Some(a.unwrap_or_else(|| inst.capabilities().low_value())),
        _ => None,
    };
    let mut eng = make_engine(kind, config, inst).map_err(value_error)?;
    let mut state = SimState::new(inst.shape, kind.mode());
    let mut trace = Trace::new(kind, inst.shape, header_a);
    let mut passed = true;
    for _ in 0..steps {
        let report = eng
            .step(&mut state, inst)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        passed &= report.passed();
        trace.records.push(TraceRecord::from(&report));
    }
    Ok((PyTrace { inner: trace }, passed))
}

/// Re-checks a trace from scratch. Returns `{"passed", "steps", "failure"}`;
/// a failure is a dict with `t`, `check`, `pair`, `detail` and `message`.
#[pyfunction]
#[pyo3(signature = (instance, trace, mode=None))]
fn verify<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    trace: &PyTrace,
    mode: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = mode.map(mode_arg).transpose()?.unwrap_or(trace.inner.header.mode);
    let report = oracle::verify_trace(&instance.inner, &trace.inner, mode).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("passed", report.passed())?;
    d.set_item("steps", report.steps)?;
    match &report.failure {
        None => d.set_item("failure", py.None())?,
        Some(f) => {
            let fd = PyDict::new(py);
            fd.set_item("t", f.t)?;
            fd.set_item("check", f.check.to_string())?;
            fd.set_item("pair", f.pair.map(|(i, j)| (i.to_string(), j.to_string())))?;
            fd.set_item("detail", &f.detail)?;
            fd.set_item("message", f.to_string())?;
            d.set_item("failure", fd)?;
        }
    }
    Ok(d)
}

/// Maximum-weight perfect matching of a square weight table. Returns the
/// partner of each row and the total weight as `"p/q"`.
#[pyfunction]
fn max_weight_matching(weights: Vec<Vec<Bound<'_, PyAny>>>) -> PyResult<(Vec<usize>, String)> {
    let w = weights
        .iter()
        .map(|row| row.iter().map(rational_arg).collect::<PyResult<Vec<_>>>())
        .collect::<PyResult<Vec<_>>>()?;
    let weights = RoundWeights::from_matrix(1, w).map_err(value_error)?;
    let (x, total) = max_weight_matching_general(&weights);
    Ok((x.partners().to_vec(), format_rational(&total)))
}

/// Extracts a simple cycle through `(i, suc(i))` from a closed walk over a
/// directed graph given by its edge list.
#[pyfunction]
fn find_cycle_in_circuit(walk: Vec<usize>, edges: Vec<(usize, usize)>, i: usize) -> PyResult<Vec<usize>> {
    let vertex_count = walk
        .iter()
        .chain(edges.iter().flat_map(|(u, v)| [u, v]))
        .max()
        .map_or(0, |v| v + 1);
    let graph = AdjacencyGraph::from_edges(vertex_count, &edges);
    let circuit = Circuit::new(walk, &graph).map_err(value_error)?;
    let cycle = envy::find_cycle_in_circuit(&circuit, i).map_err(value_error)?;
    Ok(cycle.vertices().to_vec())
}

/// Whether every cycle of a static `{0,1}` instance's desire graph is made of
/// mutual likes. Returns the verdict and an offending `(n, m)` pair.
#[pyfunction]
fn only_symmetric_cycles(instance: &PyInstance) -> PyResult<(bool, Option<(usize, usize)>)> {
    let graph = DesireGraph::from_oracle(&instance.inner).map_err(value_error)?;
    let r = envy::only_symmetric_cycles(&graph);
    Ok((r.holds, r.witness.map(|p| (p.n, p.m))))
}

fn search_dict<'py>(py: Python<'py>, r: &SequenceSearchResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("exists", r.exists)?;
    d.set_item("horizon", r.horizon)?;
    d.set_item("explored", r.explored)?;
    d.set_item("sequences", r.sequences)?;
    let witness = r
        .witness
        .as_ref()
        .map(|w| w.iter().map(|x| x.partners().to_vec()).collect::<Vec<_>>());
    d.set_item("witness", witness)?;
    Ok(d)
}

/// Two-round search on the bundled dynamic 2x2 fixture.
#[pyfunction]
fn reproduce_theorem4(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let report = oracle::theorem4_reproduce();
    let d = search_dict(py, &report.result)?;
    d.set_item("matches_expected", report.matches_expected())?;
    let sweep = report
        .sweep
        .iter()
        .map(|(a, r)| Ok((format_rational(a), search_dict(py, r)?)))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("sweep", sweep)?;
    Ok(d)
}

/// Maximum-weight and unrestricted searches on the bundled 3x3 fixture.
#[pyfunction]
fn reproduce_theorem5(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let report = oracle::theorem5_reproduce();
    let d = PyDict::new(py);
    d.set_item("matches_expected", report.matches_expected())?;
    d.set_item("max_weight", format_rational(&report.max_weight))?;
    d.set_item("constrained", search_dict(py, &report.constrained)?)?;
    d.set_item("unconstrained", search_dict(py, &report.unconstrained)?)?;
    d.set_item("first_impossible_horizon", report.first_impossible_horizon)?;
    d.set_item("prefixes_checked", report.prefixes_checked.to_vec())?;
    let failures: Vec<String> = report.claim_failures.iter().map(|f| f.detail.clone()).collect();
    d.set_item("claim_failures", failures)?;
    Ok(d)
}

#[pymodule]
fn pyfairmatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(max_weight_matching, m)?)?;
    m.add_function(wrap_pyfunction!(find_cycle_in_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(only_symmetric_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_theorem4, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_theorem5, m)?)?;
    Ok(())
}
