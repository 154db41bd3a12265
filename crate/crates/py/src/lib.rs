//! Python bindings: thin wrappers over the core library with rationals
//! passed as "p/q" strings (no precision loss) and reports as JSON.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use shiftmax_core::brick::{
    beta_projection_decomposition_check, check_admissible, check_evanescent, run_experiment,
    ExperimentConfig,
};
use shiftmax_core::certify::{scan_levels, Certificate, CertifyContext, CertifyMode};
use shiftmax_core::cli::{parse_gauge_dsl, parse_sequence_dsl};
use shiftmax_core::debruijn::{
    build_graph, cycle_records, enumerate_cycles, hamiltonian_count as ham_count,
    PeriodicMeasure,
};
use shiftmax_core::haar::{forward_transform, StepFunction as CoreStepFunction};
use shiftmax_core::optimize::ergodic_supremum;
use shiftmax_core::polytope::{build_polytope, face_census};
use shiftmax_core::rat::{format_rat, parse_rat, Rat};

fn err(e: shiftmax_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A step function of level n on the binary shift: one exact rational value
/// ("p/q") per level-n cylinder, in lexicographic order.
#[pyclass(frozen)]
struct StepFunction {
    inner: CoreStepFunction,
}

#[pymethods]
impl StepFunction {
    #[new]
    fn new(level: u32, values: Vec<String>) -> PyResult<Self> {
        let values = values
            .iter()
            .map(|s| parse_rat(s))
            .collect::<Result<Vec<Rat>, _>>()
            .map_err(err)?;
        Ok(StepFunction {
            inner: CoreStepFunction::new(level, values).map_err(err)?,
        })
    }

    /// The constant function, as a level-0 step function.
    #[staticmethod]
    fn constant(value: &str) -> PyResult<Self> {
        let v = parse_rat(value).map_err(err)?;
        Ok(StepFunction {
            inner: CoreStepFunction::constant(v, 0).map_err(err)?,
        })
    }

    fn level(&self) -> u32 {
        self.inner.level()
    }

    fn values(&self) -> Vec<String> {
        self.inner.values().iter().map(format_rat).collect()
    }

    fn sup_norm(&self) -> String {
        format_rat(&self.inner.sup_norm())
    }

    /// Haar coefficients as {"mean": "p/q", "coeffs": {word: "p/q", ...}};
    /// the empty-string word is the level-0 coefficient.
    fn haar_coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let coeffs = forward_transform(&self.inner);
        let d = PyDict::new(py);
        d.set_item("mean", format_rat(coeffs.mean()))?;
        let by_word = PyDict::new(py);
        for (w, c) in coeffs.iter_words() {
            by_word.set_item(w.to_string(), format_rat(c))?;
        }
        d.set_item("coeffs", by_word)?;
        Ok(d)
    }

    /// Orbit average of this function along the periodic orbit of `word`.
    fn orbit_average(&self, word: &str) -> PyResult<String> {
        let m = PeriodicMeasure::parse(word).map_err(err)?;
        let v = shiftmax_core::optimize::evaluate(&self.inner, &m).map_err(err)?;
        Ok(format_rat(&v))
    }

    fn __repr__(&self) -> String {
        format!("StepFunction(level={})", self.inner.level())
    }
}

fn certificate_dict<'py>(py: Python<'py>, cert: &Certificate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("level", cert.level)?;
    d.set_item("maximizer", cert.maximizer.to_string())?;
    d.set_item("period", cert.maximizer.period())?;
    d.set_item("gap", format_rat(&cert.gap))?;
    d.set_item("tail_log2", cert.tail_log2().map(|r| format_rat(&r)))?;
    d.set_item("certified", cert.certified)?;
    if let Some(reason) = &cert.reason {
        d.set_item("reason", reason)?;
    }
    Ok(d)
}

/// Maximize a step function over shift-invariant measures.
/// Returns {"ergsup", "maximizer", "period", "gap", "tie"}.
#[pyfunction]
fn optimize<'py>(py: Python<'py>, f: &StepFunction) -> PyResult<Bound<'py, PyDict>> {
    let opt = ergodic_supremum(&f.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("ergsup", format_rat(&opt.ergsup))?;
    d.set_item("maximizer", opt.maximizer.to_string())?;
    d.set_item("period", opt.maximizer.period())?;
    d.set_item("gap", format_rat(&opt.gap))?;
    d.set_item("tie", opt.tie)?;
    Ok(d)
}

/// Gap-criterion scan of a fully known step function against an analytic
/// coefficient tail; returns the smallest certifying level's certificate,
/// or the deepest scanned one when nothing certifies.
#[pyfunction]
#[pyo3(signature = (f, max_level = 6, sequence = "default", gauge = "2^-n*a_n", lip0 = "0", sharp = true))]
fn certify<'py>(
    py: Python<'py>,
    f: &StepFunction,
    max_level: u32,
    sequence: &str,
    gauge: &str,
    lip0: &str,
    sharp: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let seq = parse_sequence_dsl(sequence).map_err(err)?;
    let gauge = parse_gauge_dsl(gauge).map_err(err)?;
    let lip0 = parse_rat(lip0).map_err(err)?;
    let coeffs = forward_transform(&f.inner)
        .padded_to_level(max_level.max(f.inner.level()).max(1))
        .map_err(err)?;
    let ctx = CertifyContext::new(max_level.max(1)).map_err(err)?;
    let mode = if sharp {
        CertifyMode::Sharp
    } else {
        CertifyMode::Conservative
    };
    let scan = scan_levels(&ctx, &coeffs, &seq, &gauge, &lip0, mode).map_err(err)?;
    let cert = scan
        .smallest_certificate()
        .or(scan.levels.last())
        .ok_or_else(|| PyValueError::new_err("nothing to scan"))?;
    certificate_dict(py, cert)
}

/// Simple cycles of the level-n de Bruijn graph as
/// [{"word", "period", "pi"}], sorted by canonical word.
#[pyfunction]
fn graph_cycles<'py>(py: Python<'py>, n: u32) -> PyResult<Bound<'py, PyList>> {
    let g = build_graph(n).map_err(err)?;
    let cycles = enumerate_cycles(&g).map_err(err)?;
    let records = cycle_records(&g, &cycles).map_err(err)?;
    let out = PyList::empty(py);
    for r in records {
        let d = PyDict::new(py);
        d.set_item("word", r.word)?;
        d.set_item("period", r.period)?;
        d.set_item("pi", r.pi)?;
        out.append(d)?;
    }
    Ok(out)
}

/// The level-n rotation polytope: dimension, vertex words, edge list, and
/// (optionally) the face census by dimension.
#[pyfunction]
#[pyo3(signature = (n, faces = false))]
fn polytope_summary<'py>(py: Python<'py>, n: u32, faces: bool) -> PyResult<Bound<'py, PyDict>> {
    let p = build_polytope(n).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n", n)?;
    d.set_item("dim", p.dim())?;
    d.set_item("vertex_count", p.vertex_count())?;
    let words: Vec<String> = p.measures().iter().map(|m| m.to_string()).collect();
    d.set_item("vertices", words)?;
    d.set_item("edges", p.edges())?;
    if faces {
        let census = face_census(&p.face_lattice().map_err(err)?);
        let c = PyDict::new(py);
        for (dim, count) in census {
            c.set_item(dim, count)?;
        }
        d.set_item("face_census", c)?;
    }
    Ok(d)
}

/// Number of Hamiltonian cycles of the level-n de Bruijn graph.
#[pyfunction]
fn hamiltonian_count(n: u32) -> PyResult<u64> {
    ham_count(n).map_err(err)
}

/// Recursive complexity of a periodic word: the smallest level at which its
/// orbit is a rotation-polytope vertex.
#[pyfunction]
fn recursive_complexity(word: &str) -> PyResult<u32> {
    Ok(PeriodicMeasure::parse(word).map_err(err)?.recursive_complexity())
}

/// Evanescence and admissibility of a (sequence, gauge) pair at a finite
/// horizon; returns (evanescent, admissible).
#[pyfunction]
#[pyo3(signature = (a = "default", b = "2^-n*a_n", horizon = 20))]
fn check_gauge(a: &str, b: &str, horizon: usize) -> PyResult<(bool, bool)> {
    let seq = parse_sequence_dsl(a).map_err(err)?;
    seq.validate().map_err(err)?;
    let gauge = parse_gauge_dsl(b).map_err(err)?;
    let eva = check_evanescent(&seq, gauge.c_eva_log2(), horizon.max(1)).map_err(err)?;
    let adm = check_admissible(&gauge, &seq, horizon).map_err(err)?;
    Ok((eva.ok, adm.ok()))
}

/// Run a brick prevalence experiment from a config JSON string; returns the
/// full report as a JSON string.
#[pyfunction]
fn run_experiment_json(config: &str) -> PyResult<String> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = run_experiment(&cfg).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// The classical convex decomposition of the uniform measure's level-3
/// cylinder frequencies into four periodic orbits; always true.
#[pyfunction]
fn beta_decomposition_check() -> PyResult<bool> {
    beta_projection_decomposition_check().map_err(err)
}

#[pymodule]
fn shiftmax(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<StepFunction>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(graph_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(polytope_summary, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian_count, m)?)?;
    m.add_function(wrap_pyfunction!(recursive_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(check_gauge, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_json, m)?)?;
    m.add_function(wrap_pyfunction!(beta_decomposition_check, m)?)?;
    Ok(())
}
