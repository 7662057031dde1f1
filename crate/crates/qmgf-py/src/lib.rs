//! Python bindings: load instances, lower them to QUBO form, run the
//! bundled solvers, and verify bitstrings, all from one module.
//!
//! The classes wrap the owning Rust types; exact rationals cross the
//! boundary as decimal strings so nothing is rounded on the way out.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qmgf::analysis::{dmgf_budget, qmgf_budget, EncodingSpec};
use qmgf::decimal::format_rat;
use qmgf::formulation::assemble;
use qmgf::lowering::{lower, to_ising, LoweredModel};
use qmgf::network::{load_network, NetworkModel};
use qmgf::solvers::{
    sample_sa, solve_exact_bb, solve_exhaustive, SaParams, DEFAULT_BIT_LIMIT,
    DEFAULT_DECISION_LIMIT,
};
use qmgf::verify::{load_served_ratio, verify_solution};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_bits(text: &str) -> PyResult<Vec<bool>> {
    text.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(value_err(format!("bitstring holds {other:?}, expected 0 or 1"))),
        })
        .collect()
}

/// A validated distribution-network instance.
#[pyclass(frozen)]
struct Network {
    inner: NetworkModel,
}

#[pymethods]
impl Network {
    /// Parses and validates instance JSON.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Network { inner: load_network(text).map_err(value_err)? })
    }

    /// Reads and parses an instance file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| value_err(format!("cannot read {path}: {e}")))?;
        Self::from_json(&text)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.nodes.len()
    }

    #[getter]
    fn branch_count(&self) -> usize {
        self.inner.branches.len()
    }

    #[getter]
    fn sources(&self) -> Vec<String> {
        self.inner.sources().map(|n| n.to_string()).collect()
    }

    #[getter]
    fn loaded_nodes(&self) -> Vec<String> {
        self.inner.loaded_nodes().map(|n| n.to_string()).collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    /// Compiles the instance into an integer QUBO.
    #[pyo3(signature = (scale=3, penalty=None))]
    fn lower(&self, scale: u32, penalty: Option<i64>) -> PyResult<Model> {
        let lowered = lower(&assemble(&self.inner), scale, penalty).map_err(value_err)?;
        Ok(Model { net: self.inner.clone(), lowered })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, branches={}, sources={})",
            self.inner.nodes.len(),
            self.inner.branches.len(),
            self.inner.sources().count()
        )
    }
}

/// A lowered instance: the QUBO, its variable registry, and the network it
/// came from (kept so solutions can be decoded and checked).
#[pyclass(frozen)]
struct Model {
    net: NetworkModel,
    lowered: LoweredModel,
}

#[pymethods]
impl Model {
    #[getter]
    fn dim(&self) -> usize {
        self.lowered.qubo.dim
    }

    #[getter]
    fn offset(&self) -> i64 {
        self.lowered.qubo.offset
    }

    #[getter]
    fn terms(&self) -> usize {
        self.lowered.qubo.coeffs.len()
    }

    #[getter]
    fn max_abs_coeff(&self) -> i64 {
        self.lowered.qubo.max_abs_coeff()
    }

    /// Uniform penalty weight as a decimal string (it can exceed i64).
    #[getter]
    fn penalty(&self) -> String {
        self.lowered.plan.constraint_weight.to_string()
    }

    #[getter]
    fn objective_power(&self) -> u32 {
        self.lowered.objective_power
    }

    /// Variable names in bit order: decision bits first, then slack.
    fn variable_names(&self) -> Vec<String> {
        let reg = &self.lowered.program.registry;
        (0..reg.len()).map(|i| reg.name(i)).collect()
    }

    /// (compact qubit total, register-encoded total) for the same instance.
    fn budget(&self) -> (usize, usize) {
        let q = qmgf_budget(&self.net, &self.lowered).total();
        let d = dmgf_budget(&self.net, &EncodingSpec::default());
        (q, d)
    }

    fn qubo_text(&self) -> String {
        self.lowered.qubo.to_qubo_string()
    }

    fn ising_text(&self) -> String {
        to_ising(&self.lowered.qubo).to_ising_string()
    }

    /// Energy of a full assignment given as a 0/1 string.
    fn energy(&self, bits: &str) -> PyResult<i64> {
        let bits = parse_bits(bits)?;
        if bits.len() != self.lowered.qubo.dim {
            return Err(value_err(format!(
                "expected {} bits, got {}",
                self.lowered.qubo.dim,
                bits.len()
            )));
        }
        Ok(self.lowered.qubo.energy(&bits))
    }

    /// Exact minimum: full enumeration when the model is small enough,
    /// branch and bound over the decision bits otherwise.
    fn solve_exact(&self) -> PyResult<SampleSet> {
        let set = if self.lowered.qubo.dim <= DEFAULT_BIT_LIMIT {
            solve_exhaustive(&self.lowered.qubo, DEFAULT_BIT_LIMIT)
        } else {
            solve_exact_bb(&self.lowered, DEFAULT_DECISION_LIMIT)
        }
        .map_err(value_err)?;
        Ok(SampleSet { inner: set })
    }

    /// Simulated annealing; the seed is required so runs are reproducible.
    #[pyo3(signature = (seed, samples=200, sweeps=1000))]
    fn sample(&self, seed: u64, samples: u32, sweeps: u32) -> SampleSet {
        let params = SaParams { samples, sweeps, seed, ..Default::default() };
        SampleSet { inner: sample_sa(&self.lowered.qubo, &params) }
    }

    /// Decodes a bitstring and checks it against the original rules.
    fn verify(&self, bits: &str) -> PyResult<Solution> {
        let bits = parse_bits(bits)?;
        let sol = verify_solution(&self.net, &self.lowered.program.registry, &bits)
            .map_err(value_err)?;
        let served_pct = load_served_ratio(&self.net, &sol.restored);
        Ok(Solution { inner: sol, served_pct })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dim={}, terms={}, penalty={})",
            self.lowered.qubo.dim,
            self.lowered.qubo.coeffs.len(),
            self.lowered.plan.constraint_weight
        )
    }
}

/// Solver output: merged states sorted by energy.
#[pyclass(frozen)]
struct SampleSet {
    inner: qmgf::solvers::SampleSet,
}

#[pymethods]
impl SampleSet {
    #[getter]
    fn ground_energy(&self) -> Option<i64> {
        self.inner.ground_energy()
    }

    #[getter]
    fn ground_probability(&self) -> f64 {
        self.inner.ground_probability()
    }

    #[getter]
    fn total(&self) -> u64 {
        self.inner.total_count()
    }

    /// Lowest-energy assignment as a 0/1 string.
    fn best_bits(&self) -> Option<String> {
        self.inner.best().map(|s| s.bitstring())
    }

    /// (energy, count, bitstring) rows, lowest energy first.
    fn rows(&self) -> Vec<(i64, u64, String)> {
        self.inner.samples.iter().map(|s| (s.energy, s.count, s.bitstring())).collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SampleSet(states={}, total={}, ground_energy={:?})",
            self.inner.samples.len(),
            self.inner.total_count(),
            self.inner.ground_energy()
        )
    }
}

/// A decoded assignment judged against the network's own rules.
#[pyclass(frozen)]
struct Solution {
    inner: qmgf::verify::Solution,
    served_pct: f64,
}

#[pymethods]
impl Solution {
    #[getter]
    fn feasible(&self) -> bool {
        self.inner.feasible
    }

    /// Weighted restored active power as a decimal string.
    #[getter]
    fn objective(&self) -> String {
        format_rat(&self.inner.objective_value)
    }

    #[getter]
    fn restored(&self) -> Vec<String> {
        self.inner.restored.iter().map(|n| n.to_string()).collect()
    }

    #[getter]
    fn closed(&self) -> Vec<String> {
        self.inner.topology.closed.iter().map(|b| b.to_string()).collect()
    }

    /// child -> parent over the energized nodes.
    #[getter]
    fn parent(&self) -> std::collections::BTreeMap<String, String> {
        self.inner
            .topology
            .parent
            .iter()
            .map(|(c, p)| (c.to_string(), p.to_string()))
            .collect()
    }

    #[getter]
    fn violations(&self) -> Vec<String> {
        self.inner.violations.clone()
    }

    #[getter]
    fn violation_total(&self) -> String {
        format_rat(&self.inner.violation_total)
    }

    #[getter]
    fn served_pct(&self) -> f64 {
        self.served_pct
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(feasible={}, objective={}, violations={})",
            self.inner.feasible,
            format_rat(&self.inner.objective_value),
            self.inner.violations.len()
        )
    }
}

#[pymodule]
fn qmgf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Model>()?;
    m.add_class::<SampleSet>()?;
    m.add_class::<Solution>()?;
    Ok(())
}
