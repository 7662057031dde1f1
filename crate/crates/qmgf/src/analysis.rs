//! Qubit accounting, benchmark fixture generators, and the scale sweep.
//!
//! The point of comparison is a conventional lowering that carries every
//! branch flow and node voltage as a fixed-point register: flow_bits per
//! directed branch quantity, integer_bits per node quantity, plus a sign
//! bit, on top of the same switch/parent/restore bits. Our compilation
//! spends qubits on path flags, product bits, and slacks instead; the
//! budgets below make the trade measurable per fixture.
//!
//! The generated roster sticks to shallow or bushy shapes. Path flags grow
//! with path length times crossing loads, so long chains and dense rings
//! genuinely lose the comparison; `ring_network` exists to show exactly
//! that in a sweep, and the roster keeps the shapes where the compact
//! compilation wins.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use crate::formulation::{
    objective, BinaryProgram, Constraint, LinearExpr, Sense, VarKind, VariableRegistry,
};
use crate::graphs::{check_radial_forest, Topology};
use crate::lowering::{lower, LoweredModel, LoweringError};
use crate::network::{load_network, NetworkModel, NodeId};
use crate::solvers::{sample_sa, SaParams};
use crate::Rat;

// ===== budgets =====

/// Fixed-point register widths for the conventional lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingSpec {
    pub flow_bits: u32,
    pub integer_bits: u32,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        EncodingSpec { flow_bits: 4, integer_bits: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitBudget {
    /// Switch, parent, restore, and path-flag bits.
    pub primary: usize,
    /// Product bits.
    pub aux: usize,
    /// Slack bits.
    pub slack: usize,
    /// Path-flag entries, before any lowering.
    pub support_entries: usize,
    /// Entries over (non-source nodes x branches); 1.0 means every node's
    /// flag row is fully dense.
    pub support_density: f64,
}

impl QubitBudget {
    pub fn total(&self) -> usize {
        self.primary + self.aux + self.slack
    }
}

/// Counts what the compact lowering actually spent.
pub fn qmgf_budget(net: &NetworkModel, lowered: &LoweredModel) -> QubitBudget {
    let reg = &lowered.program.registry;
    let primary = reg.count(VarKind::is_primary);
    let aux = reg.count(VarKind::is_aux);
    let slack = reg.count(VarKind::is_slack);
    let support_entries = reg.count(|k| matches!(k, VarKind::Pi(..)));
    let non_source = net.nodes.keys().filter(|n| !net.is_source(n)).count();
    let cells = non_source * net.branches.len();
    let support_density =
        if cells == 0 { 0.0 } else { support_entries as f64 / cells as f64 };
    QubitBudget { primary, aux, slack, support_entries, support_density }
}

/// What the register-based lowering would spend on the same network: one
/// signed fixed-point register per directed branch flow and per node
/// quantity, plus the same switch/parent/restore bits.
pub fn dmgf_budget(net: &NetworkModel, enc: &EncodingSpec) -> usize {
    let b = net.branches.len();
    let n = net.nodes.len();
    let registers = (enc.flow_bits + enc.integer_bits + 1) as usize * (2 * b + n);
    let alphas = b;
    let betas: usize = net
        .branches
        .iter()
        .map(|br| {
            let (lo, hi) = br.id.endpoints();
            (!net.is_source(lo)) as usize + (!net.is_source(hi)) as usize
        })
        .sum();
    let lambdas = net.loaded_nodes().count();
    registers + alphas + betas + lambdas
}

// ===== restoration submodel =====

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RestorationError {
    NotRadial,
}

impl std::fmt::Display for RestorationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RestorationError::NotRadial => write!(f, "topology is not a rooted radial forest"),
        }
    }
}

impl std::error::Error for RestorationError {}

/// With the topology pinned, only the restore bits remain decisions and
/// every product collapses to a linear term, so the security rules fold to
/// a gate-free program over the lambdas.
pub fn restoration_submodel(
    net: &NetworkModel,
    topo: &Topology,
) -> Result<BinaryProgram, RestorationError> {
    let energized: BTreeSet<NodeId> = net.nodes.keys().cloned().collect();
    if !check_radial_forest(net, topo, &energized) {
        return Err(RestorationError::NotRadial);
    }

    let mut registry = VariableRegistry::default();
    for n in net.loaded_nodes() {
        registry.push(VarKind::Lambda(n.clone()));
    }
    let lambda = |reg: &VariableRegistry, n: &NodeId| {
        reg.index_of(&VarKind::Lambda(n.clone())).expect("lambda")
    };

    let mut paths: BTreeMap<NodeId, Vec<crate::network::BranchId>> = BTreeMap::new();
    let mut roots: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for n in net.loaded_nodes() {
        let path = topo.path_to_root(n).expect("radial checked");
        let mut at = n.clone();
        while let Some(p) = topo.parent.get(&at) {
            at = p.clone();
        }
        roots.insert(n.clone(), at);
        paths.insert(n.clone(), path);
    }

    let mut constraints = Vec::new();
    let mut push = |label: String, lhs: LinearExpr, sense: Sense| {
        if lhs.terms.is_empty() {
            let vacuous = match sense {
                Sense::Le => !lhs.constant.is_positive(),
                Sense::Eq => lhs.constant.is_zero(),
            };
            if vacuous {
                return;
            }
        }
        constraints.push(Constraint { label, lhs, sense });
    };

    for j in net.nodes.keys().filter(|n| net.is_source(n)) {
        let src = net.nodes[j].source.as_ref().expect("source data");
        let mut p_flow = LinearExpr::zero();
        let mut q_flow = LinearExpr::zero();
        for i in net.loaded_nodes() {
            if roots.get(i) == Some(j) || i == j {
                let load = net.load(i).expect("loaded");
                let l = lambda(&registry, i);
                p_flow.add_term(l, load.p_active.clone());
                q_flow.add_term(l, load.q_reactive.clone());
            }
        }
        for (tag, flow, min, max) in [
            ("eq14", &p_flow, &src.p_min, &src.p_max),
            ("eq15", &q_flow, &src.q_min, &src.q_max),
        ] {
            let mut lo = flow.clone();
            lo.scale(-Rat::from_integer(1.into()));
            lo.add_constant(min.clone());
            push(format!("{tag}.lo[{j}]"), lo, Sense::Le);
            let mut hi = flow.clone();
            hi.add_constant(-max.clone());
            push(format!("{tag}.hi[{j}]"), hi, Sense::Le);
        }
    }

    for b in &net.branches {
        if !topo.closed.contains(&b.id) {
            continue;
        }
        let mut p = LinearExpr::zero();
        let mut q = LinearExpr::zero();
        for i in net.loaded_nodes() {
            if paths.get(i).is_some_and(|path| path.contains(&b.id)) {
                let load = net.load(i).expect("loaded");
                let l = lambda(&registry, i);
                p.add_term(l, load.p_active.clone());
                q.add_term(l, load.q_reactive.clone());
            }
        }
        if !p.terms.is_empty() {
            p.add_constant(-b.p_max.clone());
            push(format!("eq16[{}]", b.id), p, Sense::Le);
        }
        if !q.terms.is_empty() {
            q.add_constant(-b.q_max.clone());
            push(format!("eq17[{}]", b.id), q, Sense::Le);
        }
    }

    for h in net.loaded_nodes() {
        if net.is_source(h) {
            continue;
        }
        let mut lhs = LinearExpr::zero();
        for jk in &paths[h] {
            let branch = net.branch(jk).expect("closed branch");
            for i in net.loaded_nodes() {
                if !paths.get(i).is_some_and(|path| path.contains(jk)) {
                    continue;
                }
                let load = net.load(i).expect("loaded");
                let coef = (branch.r.clone() * &load.p_active
                    + branch.x.clone() * &load.q_reactive)
                    / &net.u_nominal;
                lhs.add_term(lambda(&registry, i), coef);
            }
        }
        lhs.add_term(lambda(&registry, h), net.u_delta.clone());
        lhs.add_constant(-net.nodes[h].du_max.clone() - &net.u_delta);
        push(format!("eq18[{h}]"), lhs, Sense::Le);
    }

    let objective = objective(net, &registry);
    Ok(BinaryProgram { registry, constraints, gates: Vec::new(), objective })
}

// ===== fixture generators =====

fn load_json(p: &str, w: u32) -> String {
    format!(r#" "load": {{ "p": {p}, "q": 0, "w": {w} }}"#)
}

const SOURCE_JSON: &str =
    r#" "source": { "p_min": 0, "p_max": 2.0, "q_min": 0, "q_max": 1.0 }"#;

fn branch_json(from: &str, to: &str) -> String {
    format!(
        r#"    {{ "from": "{from}", "to": "{to}", "r": 0.01, "x": 0.02, "p_max": 2.0, "q_max": 1.0 }}"#
    )
}

fn build_fixture(nodes: Vec<String>, branches: Vec<String>) -> NetworkModel {
    let text = format!(
        "{{\n  \"base\": {{ \"u_nominal\": 1.0, \"u_delta\": 0.05 }},\n  \"nodes\": [\n{}\n  ],\n  \"branches\": [\n{}\n  ]\n}}\n",
        nodes.join(",\n"),
        branches.join(",\n")
    );
    load_network(&text).expect("generated fixture is valid")
}

fn node_json(id: &str, extra: &str) -> String {
    if extra.is_empty() {
        format!(r#"    {{ "id": "{id}", "du_max": 0.05 }}"#)
    } else {
        format!(r#"    {{ "id": "{id}", "du_max": 0.05,{extra} }}"#)
    }
}

/// Alternating load weights 1, 2, 1, ... at 0.5 active power each.
fn leaf_load(k: usize) -> String {
    load_json("0.5", if k.is_multiple_of(2) { 1 } else { 2 })
}

/// Chain of `n` nodes, source at one end, every other node loaded.
pub fn line_network(n: usize) -> NetworkModel {
    assert!(n >= 2, "a line needs at least two nodes");
    let mut nodes = vec![node_json("n1", SOURCE_JSON)];
    let mut branches = Vec::new();
    for k in 2..=n {
        nodes.push(node_json(&format!("n{k}"), &leaf_load(k)));
        branches.push(branch_json(&format!("n{}", k - 1), &format!("n{k}")));
    }
    build_fixture(nodes, branches)
}

/// Source hub with `n - 1` loaded leaves.
pub fn star_network(n: usize) -> NetworkModel {
    assert!(n >= 2, "a star needs at least two nodes");
    let mut nodes = vec![node_json("hub", SOURCE_JSON)];
    let mut branches = Vec::new();
    for k in 1..n {
        let id = format!("leaf{k}");
        nodes.push(node_json(&id, &leaf_load(k)));
        branches.push(branch_json("hub", &id));
    }
    build_fixture(nodes, branches)
}

/// Three fully meshed nodes, one source; the smallest looped shape.
pub fn triangle_network() -> NetworkModel {
    let nodes = vec![
        node_json("a", SOURCE_JSON),
        node_json("b", &leaf_load(0)),
        node_json("c", &leaf_load(1)),
    ];
    let branches =
        vec![branch_json("a", "b"), branch_json("b", "c"), branch_json("a", "c")];
    build_fixture(nodes, branches)
}

/// Two-level binary tree: source root, two bare junctions, four loaded
/// leaves.
pub fn tree_network() -> NetworkModel {
    let mut nodes = vec![
        node_json("root", SOURCE_JSON),
        node_json("j1", ""),
        node_json("j2", ""),
    ];
    let mut branches = vec![branch_json("root", "j1"), branch_json("root", "j2")];
    for (k, (leaf, junction)) in
        [("l1", "j1"), ("l2", "j1"), ("l3", "j2"), ("l4", "j2")].iter().enumerate()
    {
        nodes.push(node_json(leaf, &leaf_load(k)));
        branches.push(branch_json(junction, leaf));
    }
    build_fixture(nodes, branches)
}

/// Cycle of `n` nodes with one source and `loaded` loaded nodes; every
/// node sees every branch on some path, which makes the flag rows dense.
pub fn ring_network(n: usize, loaded: usize) -> NetworkModel {
    assert!(n >= 3, "a ring needs at least three nodes");
    assert!(loaded < n, "at most n - 1 ring nodes can carry load");
    let mut nodes = vec![node_json("r1", SOURCE_JSON)];
    for k in 2..=n {
        let extra = if k - 2 < loaded { leaf_load(k) } else { String::new() };
        nodes.push(node_json(&format!("r{k}"), &extra));
    }
    let mut branches = Vec::new();
    for k in 1..n {
        branches.push(branch_json(&format!("r{k}"), &format!("r{}", k + 1)));
    }
    branches.push(branch_json(&format!("r{n}"), "r1"));
    build_fixture(nodes, branches)
}

/// Shapes where the compact compilation beats the register baseline.
pub fn standard_roster() -> Vec<(String, NetworkModel)> {
    vec![
        ("line3".to_string(), line_network(3)),
        ("line4".to_string(), line_network(4)),
        ("star4".to_string(), star_network(4)),
        ("star6".to_string(), star_network(6)),
        ("triangle3".to_string(), triangle_network()),
        ("tree7".to_string(), tree_network()),
    ]
}

// ===== scale sweep =====

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fixture: String,
    pub qubits_qmgf: usize,
    pub qubits_dmgf: usize,
    pub ground_prob: f64,
    pub min_energy: i64,
    pub samples: u32,
}

/// Lowers and anneals every roster entry; returns one row per fixture.
pub fn scale_sweep(
    roster: &[(String, NetworkModel)],
    enc: &EncodingSpec,
    scale_power: u32,
    sa: &SaParams,
) -> Result<Vec<SweepRow>, LoweringError> {
    let mut rows = Vec::with_capacity(roster.len());
    for (name, net) in roster {
        let program = crate::formulation::assemble(net);
        let lowered = lower(&program, scale_power, None)?;
        let budget = qmgf_budget(net, &lowered);
        let set = sample_sa(&lowered.qubo, sa);
        rows.push(SweepRow {
            fixture: name.clone(),
            qubits_qmgf: budget.total(),
            qubits_dmgf: dmgf_budget(net, enc),
            ground_prob: set.ground_probability(),
            min_energy: set.ground_energy().unwrap_or(0),
            samples: sa.samples,
        });
    }
    Ok(rows)
}

/// CSV rows `fixture,qubits_qmgf,qubits_dmgf,ground_prob,min_energy,samples`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("fixture,qubits_qmgf,qubits_dmgf,ground_prob,min_energy,samples\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{},{}\n",
            r.fixture, r.qubits_qmgf, r.qubits_dmgf, r.ground_prob, r.min_energy, r.samples
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::assemble;
    use crate::graphs::bfs_forest;
    use crate::solvers::{solve_exact_bb, DEFAULT_DECISION_LIMIT};

    const LINE3: &str = include_str!("../tests/fixtures/line3.json");

    #[test]
    fn canonical_line3_budget() {
        let net = load_network(LINE3).unwrap();
        let lowered = lower(&assemble(&net), 3, None).unwrap();
        let b = qmgf_budget(&net, &lowered);
        assert_eq!(b.primary, 10);
        assert_eq!(b.aux, 5);
        assert_eq!(b.slack, 52);
        assert_eq!(b.total(), 67);
        assert_eq!(b.total(), lowered.qubo.dim);
        assert_eq!(b.support_entries, 3);
        assert!((b.support_density - 0.75).abs() < 1e-12); // 3 of 2x2 cells
        assert_eq!(dmgf_budget(&net, &EncodingSpec::default()), 70);
    }

    #[test]
    fn roster_stays_under_register_baseline() {
        let enc = EncodingSpec::default();
        for (name, net) in standard_roster() {
            let lowered = lower(&assemble(&net), 3, None).unwrap();
            let q = qmgf_budget(&net, &lowered).total();
            let d = dmgf_budget(&net, &enc);
            assert!(q < d, "{name}: {q} qubits vs register baseline {d}");
        }
    }

    #[test]
    fn dense_ring_loses_the_comparison() {
        let net = ring_network(5, 2);
        let lowered = lower(&assemble(&net), 3, None).unwrap();
        let q = qmgf_budget(&net, &lowered);
        let d = dmgf_budget(&net, &EncodingSpec::default());
        assert!(q.total() > d, "ring should lose: {} vs {}", q.total(), d);
        assert!((q.support_density - 1.0).abs() < 1e-12, "ring rows are fully dense");
    }

    #[test]
    fn restoration_submodel_is_gate_free_and_solvable() {
        let net = load_network(LINE3).unwrap();
        let topo = bfs_forest(&net);
        let bp = restoration_submodel(&net, &topo).unwrap();
        assert!(bp.gates.is_empty());
        assert_eq!(bp.registry.len(), 2); // just the two restore bits
        let lowered = lower(&bp, 3, None).unwrap();
        let set = solve_exact_bb(&lowered, DEFAULT_DECISION_LIMIT).unwrap();
        // both loads restorable on the chain: objective 2.0 scaled by 1000
        assert_eq!(set.ground_energy(), Some(-2000));
    }

    #[test]
    fn restoration_submodel_rejects_broken_topologies() {
        let net = load_network(LINE3).unwrap();
        let topo = Topology::default(); // nothing closed, nothing parented
        assert_eq!(restoration_submodel(&net, &topo), Err(RestorationError::NotRadial));
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        let a = line_network(4).to_json_string();
        let b = line_network(4).to_json_string();
        assert_eq!(a, b);
        assert_eq!(star_network(6).nodes.len(), 6);
        assert_eq!(tree_network().branches.len(), 6);
        assert_eq!(ring_network(5, 2).branches.len(), 5);
        assert_eq!(triangle_network().branches.len(), 3);
    }

    #[test]
    fn sweep_rows_cover_roster_in_order() {
        let roster = vec![("line3".to_string(), line_network(3))];
        let sa = SaParams { samples: 10, sweeps: 50, seed: 1, ..Default::default() };
        let rows = scale_sweep(&roster, &EncodingSpec::default(), 3, &sa).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].fixture, "line3");
        assert_eq!(rows[0].samples, 10);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("fixture,qubits_qmgf,qubits_dmgf,ground_prob,min_energy,samples\n"));
        assert!(csv.contains("line3,"));
    }
}
