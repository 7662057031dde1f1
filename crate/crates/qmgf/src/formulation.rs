//! Binary program assembly: variables, constraints, AND gates, objective.
//!
//! Variable kinds and when they exist:
//!
//! * `Alpha(jk)`   - branch jk closed; one per branch.
//! * `Beta{i,j}`   - j is i's parent; per branch direction, never for a
//!   source child (sources have no parent).
//! * `Lambda(i)`   - load at i restored; only for nodes with p + q > 0.
//! * `Pi(i,jk)`    - i's supply path crosses jk; support entries only, every
//!   other (node, branch) pair is a hard 0.
//! * `AuxAnd(a,b)` - product bit for a*b, written y below. Chained: first
//!   u = lambda*pi products, then path-drop products v = pi*u reusing the
//!   u bits.
//! * `SlackBit`    - appended later by lowering::add_slacks.
//!
//! Constraint labels name their family and instance: eq4[n1-n2], eq5[n2],
//! eq8[ih|jk|a], eq9[i|ih], eq14.lo[j], eq14.hi[j], eq15.*, eq16[jk],
//! eq17[jk], eq18[h]. The family tags are stable interface strings used in
//! build reports.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::json;

use crate::decimal::format_rat;
use crate::graphs::{n2b_support, N2BSupport};
use crate::network::{BranchId, NetworkModel, NodeId};
use crate::Rat;

// ===== variables =====

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKind {
    Alpha(BranchId),
    Beta { child: NodeId, parent: NodeId },
    Lambda(NodeId),
    Pi(NodeId, BranchId),
    AuxAnd(usize, usize),
    SlackBit { constraint: usize, bit: usize },
}

impl VarKind {
    pub fn is_slack(&self) -> bool {
        matches!(self, VarKind::SlackBit { .. })
    }
    pub fn is_aux(&self) -> bool {
        matches!(self, VarKind::AuxAnd(..))
    }
    pub fn is_primary(&self) -> bool {
        !self.is_slack() && !self.is_aux()
    }
}

/// Bijection between variable indices and descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VariableRegistry {
    vars: Vec<VarKind>,
    index: BTreeMap<VarKind, usize>,
}

impl VariableRegistry {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Registers a new descriptor; a duplicate is a caller bug.
    pub fn push(&mut self, kind: VarKind) -> usize {
        let idx = self.vars.len();
        let prev = self.index.insert(kind.clone(), idx);
        assert!(prev.is_none(), "duplicate variable {kind:?}");
        self.vars.push(kind);
        idx
    }

    pub fn index_of(&self, kind: &VarKind) -> Option<usize> {
        self.index.get(kind).copied()
    }

    pub fn kind(&self, idx: usize) -> &VarKind {
        &self.vars[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &VarKind)> {
        self.vars.iter().enumerate()
    }

    pub fn count(&self, pred: impl Fn(&VarKind) -> bool) -> usize {
        self.vars.iter().filter(|k| pred(k)).count()
    }

    /// Index where the slack block begins; equals len() when no slacks.
    pub fn first_slack(&self) -> usize {
        self.vars.iter().position(VarKind::is_slack).unwrap_or(self.vars.len())
    }

    /// Human-readable variable name, stable across runs.
    pub fn name(&self, idx: usize) -> String {
        match &self.vars[idx] {
            VarKind::Alpha(b) => format!("alpha[{b}]"),
            VarKind::Beta { child, parent } => format!("beta[{child}->{parent}]"),
            VarKind::Lambda(n) => format!("lambda[{n}]"),
            VarKind::Pi(n, b) => format!("pi[{n}|{b}]"),
            VarKind::AuxAnd(a, b) => format!("and[{}*{}]", self.name(*a), self.name(*b)),
            VarKind::SlackBit { constraint, bit } => format!("slack[c{constraint}#{bit}]"),
        }
    }
}

// ===== expressions and constraints =====

/// Rational-coefficient affine expression over registered variables; zero
/// coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearExpr {
    pub terms: BTreeMap<usize, Rat>,
    pub constant: Rat,
}

impl LinearExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, var: usize, coef: Rat) {
        if coef.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(var) {
            Entry::Vacant(e) => {
                e.insert(coef);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += coef;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_constant(&mut self, c: Rat) {
        self.constant += c;
    }

    pub fn eval(&self, bits: &[bool]) -> Rat {
        let mut acc = self.constant.clone();
        for (&v, c) in &self.terms {
            if bits[v] {
                acc += c;
            }
        }
        acc
    }

    /// Largest value the expression can take over binary assignments.
    pub fn interval_max(&self) -> Rat {
        self.terms.values().filter(|c| c.is_positive()).cloned().sum::<Rat>() + &self.constant
    }

    /// Smallest value the expression can take over binary assignments.
    pub fn interval_min(&self) -> Rat {
        self.terms.values().filter(|c| c.is_negative()).cloned().sum::<Rat>() + &self.constant
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// lhs = 0
    Eq,
    /// lhs <= 0
    Le,
}

/// One constraint, right side already folded into the constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub lhs: LinearExpr,
    pub sense: Sense,
}

impl Constraint {
    pub fn satisfied(&self, bits: &[bool]) -> bool {
        let v = self.lhs.eval(bits);
        match self.sense {
            Sense::Eq => v.is_zero(),
            Sense::Le => !v.is_positive(),
        }
    }
}

/// y = a AND b, enforced by a quadratic penalty during lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AndGate {
    pub a: usize,
    pub b: usize,
    pub y: usize,
}

/// Assembled constrained binary program (pre-lowering).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryProgram {
    pub registry: VariableRegistry,
    pub constraints: Vec<Constraint>,
    pub gates: Vec<AndGate>,
    /// Maximized.
    pub objective: LinearExpr,
}

impl BinaryProgram {
    /// Deterministic JSON dump for golden-file comparison and build reports.
    pub fn debug_json(&self) -> String {
        let vars: Vec<_> = self
            .registry
            .iter()
            .map(|(i, _)| json!({ "index": i, "name": self.registry.name(i) }))
            .collect();
        let cons: Vec<_> = self
            .constraints
            .iter()
            .map(|c| {
                let terms: BTreeMap<String, String> = c
                    .lhs
                    .terms
                    .iter()
                    .map(|(&v, r)| (self.registry.name(v), format_rat(r)))
                    .collect();
                json!({
                    "label": c.label,
                    "sense": match c.sense { Sense::Eq => "=0", Sense::Le => "<=0" },
                    "terms": terms,
                    "constant": format_rat(&c.lhs.constant),
                })
            })
            .collect();
        let gates: Vec<_> = self
            .gates
            .iter()
            .map(|g| {
                json!({
                    "y": self.registry.name(g.y),
                    "a": self.registry.name(g.a),
                    "b": self.registry.name(g.b),
                })
            })
            .collect();
        let objective: BTreeMap<String, String> = self
            .objective
            .terms
            .iter()
            .map(|(&v, r)| (self.registry.name(v), format_rat(r)))
            .collect();
        let doc = json!({
            "variables": vars,
            "constraints": cons,
            "gates": gates,
            "objective": objective,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("program dump");
        text.push('\n');
        text
    }
}

impl fmt::Display for BinaryProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "program: {} vars, {} constraints, {} gates",
            self.registry.len(),
            self.constraints.len(),
            self.gates.len()
        )
    }
}

// ===== variable construction =====

/// Registers every decision variable: alphas, betas, lambdas, pis, then the
/// product bits (u = lambda*pi per loaded support entry, v = pi*u per
/// path-drop cross term). The i = h drop term needs no v bit: pi*pi = pi
/// makes it collapse onto u.
pub fn build_variables(net: &NetworkModel, support: &N2BSupport) -> VariableRegistry {
    let mut reg = VariableRegistry::default();

    for b in &net.branches {
        reg.push(VarKind::Alpha(b.id.clone()));
    }
    for b in &net.branches {
        let (lo, hi) = b.id.endpoints();
        if !net.is_source(lo) {
            reg.push(VarKind::Beta { child: lo.clone(), parent: hi.clone() });
        }
        if !net.is_source(hi) {
            reg.push(VarKind::Beta { child: hi.clone(), parent: lo.clone() });
        }
    }
    for n in net.loaded_nodes() {
        reg.push(VarKind::Lambda(n.clone()));
    }
    for (n, b) in support.entries() {
        reg.push(VarKind::Pi(n.clone(), b.clone()));
    }

    // u bits, in support order restricted to loaded nodes
    for (n, b) in support.entries() {
        if !net.is_loaded(n) {
            continue;
        }
        let l = reg.index_of(&VarKind::Lambda(n.clone())).expect("lambda");
        let p = reg.index_of(&VarKind::Pi(n.clone(), b.clone())).expect("pi");
        reg.push(VarKind::AuxAnd(l, p));
    }

    // v bits for the path-drop cross terms, ordered by (h, jk, i)
    for h in net.loaded_nodes() {
        if net.is_source(h) {
            continue; // a source's own path is empty
        }
        for jk in support.branches_for(h) {
            let pi_h = reg.index_of(&VarKind::Pi(h.clone(), jk.clone())).expect("pi");
            for i in net.loaded_nodes() {
                if i == h || !support.contains(i, jk) {
                    continue;
                }
                let u = u_index(&reg, i, jk).expect("u bit");
                reg.push(VarKind::AuxAnd(pi_h, u));
            }
        }
    }

    reg
}

fn lambda_index(reg: &VariableRegistry, n: &NodeId) -> Option<usize> {
    reg.index_of(&VarKind::Lambda(n.clone()))
}

fn pi_index(reg: &VariableRegistry, n: &NodeId, b: &BranchId) -> Option<usize> {
    reg.index_of(&VarKind::Pi(n.clone(), b.clone()))
}

/// Index of u = lambda(i) * pi(i,jk), when both constituents exist.
pub fn u_index(reg: &VariableRegistry, i: &NodeId, jk: &BranchId) -> Option<usize> {
    let l = lambda_index(reg, i)?;
    let p = pi_index(reg, i, jk)?;
    reg.index_of(&VarKind::AuxAnd(l, p))
}

/// Index of v = pi(h,jk) * u(i,jk); for i = h this is u(h,jk) itself.
pub fn v_index(reg: &VariableRegistry, h: &NodeId, i: &NodeId, jk: &BranchId) -> Option<usize> {
    if h == i {
        return u_index(reg, h, jk);
    }
    let pi_h = pi_index(reg, h, jk)?;
    let u = u_index(reg, i, jk)?;
    reg.index_of(&VarKind::AuxAnd(pi_h, u))
}

/// Gate list mirroring the AuxAnd registrations.
pub fn and_gates(reg: &VariableRegistry) -> Vec<AndGate> {
    reg.iter()
        .filter_map(|(y, k)| match k {
            VarKind::AuxAnd(a, b) => Some(AndGate { a: *a, b: *b, y }),
            _ => None,
        })
        .collect()
}

// ===== constraint builders =====

/// Switch/parent consistency and one-parent-per-node rules.
pub fn radiality_constraints(net: &NetworkModel, reg: &VariableRegistry) -> Vec<Constraint> {
    let mut out = Vec::new();

    // alpha = beta_ij + beta_ji per branch; missing directions are hard 0
    for b in &net.branches {
        let alpha = reg.index_of(&VarKind::Alpha(b.id.clone())).expect("alpha");
        let (lo, hi) = b.id.endpoints();
        let mut lhs = LinearExpr::zero();
        lhs.add_term(alpha, Rat::one());
        for (child, parent) in [(lo, hi), (hi, lo)] {
            if let Some(beta) =
                reg.index_of(&VarKind::Beta { child: child.clone(), parent: parent.clone() })
            {
                lhs.add_term(beta, -Rat::one());
            }
        }
        out.push(Constraint { label: format!("eq4[{}]", b.id), lhs, sense: Sense::Eq });
    }

    // every non-source node picks exactly one parent
    for n in net.nodes.keys() {
        if net.is_source(n) {
            continue;
        }
        let mut lhs = LinearExpr::zero();
        for b in net.incident(n) {
            let parent = b.id.other(n).expect("incident").clone();
            let beta = reg
                .index_of(&VarKind::Beta { child: n.clone(), parent })
                .expect("beta for non-source endpoint");
            lhs.add_term(beta, Rat::one());
        }
        lhs.add_constant(-Rat::one());
        out.push(Constraint { label: format!("eq5[{n}]"), lhs, sense: Sense::Eq });
    }

    out
}

/// Path-consistency rules: adjacency ties pi to beta, and each closed branch
/// forces its endpoints' pi rows to agree on every other branch. Written
/// product-free: pi_a - pi_b - (1 - alpha) <= 0 per ordered endpoint pair,
/// which matches the quadratic original on all eight assignments. Instances
/// whose lead pi is suppressed are tautologies and are not emitted.
pub fn n2b_constraints(
    net: &NetworkModel,
    support: &N2BSupport,
    reg: &VariableRegistry,
) -> Vec<Constraint> {
    let mut out = Vec::new();

    // adjacency: pi(i, ih) = beta(i->h); a suppressed pi pins beta to 0
    for b in &net.branches {
        let (lo, hi) = b.id.endpoints();
        for (i, h) in [(lo, hi), (hi, lo)] {
            let beta = match reg.index_of(&VarKind::Beta { child: i.clone(), parent: h.clone() }) {
                Some(idx) => idx,
                None => continue, // source child: pi is suppressed too, 0 = 0
            };
            let mut lhs = LinearExpr::zero();
            if let Some(pi) = pi_index(reg, i, &b.id) {
                lhs.add_term(pi, Rat::one());
            }
            lhs.add_term(beta, -Rat::one());
            out.push(Constraint { label: format!("eq9[{i}|{}]", b.id), lhs, sense: Sense::Eq });
        }
    }

    // crossing agreement along closed branches
    for ih in &net.branches {
        let alpha = reg.index_of(&VarKind::Alpha(ih.id.clone())).expect("alpha");
        let (i, h) = ih.id.endpoints();
        for jk in &net.branches {
            if jk.id == ih.id {
                continue;
            }
            for (a, b) in [(i, h), (h, i)] {
                let pi_a = match pi_index(reg, a, &jk.id) {
                    Some(idx) => idx,
                    None => continue, // 0 <= pi_b + (1 - alpha) always holds
                };
                let mut lhs = LinearExpr::zero();
                lhs.add_term(pi_a, Rat::one());
                if let Some(pi_b) = pi_index(reg, b, &jk.id) {
                    lhs.add_term(pi_b, -Rat::one());
                }
                lhs.add_term(alpha, Rat::one());
                lhs.add_constant(-Rat::one());
                out.push(Constraint {
                    label: format!("eq8[{}|{}|{a}]", ih.id, jk.id),
                    lhs,
                    sense: Sense::Le,
                });
            }
        }
    }

    let _ = support; // suppression is encoded in the registry itself
    out
}

/// Source box limits, branch flow limits, and node voltage-drop limits, all
/// in terms of the u/v product bits.
pub fn security_constraints(
    net: &NetworkModel,
    support: &N2BSupport,
    reg: &VariableRegistry,
) -> Vec<Constraint> {
    let mut out = Vec::new();
    let mut push = |label: String, lhs: LinearExpr, sense: Sense| {
        if lhs.terms.is_empty() {
            // a term-free rule is either vacuous (dropped here) or a
            // constant impossibility (kept so lowering reports it)
            let vacuous = match sense {
                Sense::Le => !lhs.constant.is_positive(),
                Sense::Eq => lhs.constant.is_zero(),
            };
            if vacuous {
                return;
            }
        }
        out.push(Constraint { label, lhs, sense });
    };

    // per-source active/reactive injection windows
    for j in net.nodes.keys().filter(|n| net.is_source(n)) {
        let src = net.nodes[j].source.as_ref().expect("source data");
        let mut p_flow = LinearExpr::zero(); // injected active power
        let mut q_flow = LinearExpr::zero();
        if let Some(load) = net.load(j) {
            if let Some(l) = lambda_index(reg, j) {
                p_flow.add_term(l, load.p_active.clone());
                q_flow.add_term(l, load.q_reactive.clone());
            }
        }
        for b in net.incident(j) {
            for i in net.loaded_nodes() {
                if let Some(u) = u_index(reg, i, &b.id) {
                    let load = net.load(i).expect("loaded");
                    p_flow.add_term(u, load.p_active.clone());
                    q_flow.add_term(u, load.q_reactive.clone());
                }
            }
        }

        for (tag, flow, min, max) in [
            ("eq14", &p_flow, &src.p_min, &src.p_max),
            ("eq15", &q_flow, &src.q_min, &src.q_max),
        ] {
            let mut lo = flow.clone();
            lo.scale(-Rat::one());
            lo.add_constant(min.clone());
            push(format!("{tag}.lo[{j}]"), lo, Sense::Le);

            let mut hi = flow.clone();
            hi.add_constant(-max.clone());
            push(format!("{tag}.hi[{j}]"), hi, Sense::Le);
        }
    }

    // branch flow limits gated by alpha
    for b in &net.branches {
        let alpha = reg.index_of(&VarKind::Alpha(b.id.clone())).expect("alpha");
        let mut p = LinearExpr::zero();
        let mut q = LinearExpr::zero();
        for i in net.loaded_nodes() {
            if let Some(u) = u_index(reg, i, &b.id) {
                let load = net.load(i).expect("loaded");
                p.add_term(u, load.p_active.clone());
                q.add_term(u, load.q_reactive.clone());
            }
        }
        if !p.terms.is_empty() {
            p.add_term(alpha, -b.p_max.clone());
            push(format!("eq16[{}]", b.id), p, Sense::Le);
        }
        if !q.terms.is_empty() {
            q.add_term(alpha, -b.q_max.clone());
            push(format!("eq17[{}]", b.id), q, Sense::Le);
        }
    }

    // node voltage drop along the supply path, relaxed for shed loads
    for h in net.loaded_nodes() {
        if net.is_source(h) {
            continue; // empty path, identically zero drop
        }
        let du_max = net.nodes[h].du_max.clone();
        let mut lhs = LinearExpr::zero();
        for jk in support.branches_for(h) {
            let branch = net.branch(jk).expect("supported branch");
            for i in net.loaded_nodes() {
                if !support.contains(i, jk) {
                    continue;
                }
                let load = net.load(i).expect("loaded");
                let coef = (branch.r.clone() * &load.p_active + branch.x.clone() * &load.q_reactive)
                    / &net.u_nominal;
                if let Some(v) = v_index(reg, h, i, jk) {
                    lhs.add_term(v, coef);
                }
            }
        }
        let lam = lambda_index(reg, h).expect("loaded node lambda");
        lhs.add_term(lam, net.u_delta.clone());
        lhs.add_constant(-du_max - &net.u_delta);
        push(format!("eq18[{h}]"), lhs, Sense::Le);
    }

    out
}

/// Weighted restored active power, to be maximized.
pub fn objective(net: &NetworkModel, reg: &VariableRegistry) -> LinearExpr {
    let mut obj = LinearExpr::zero();
    for n in net.loaded_nodes() {
        let load = net.load(n).expect("loaded");
        let lam = lambda_index(reg, n).expect("lambda");
        obj.add_term(lam, load.weight.clone() * &load.p_active);
    }
    obj
}

/// Full assembly: support, variables, all constraint families, objective.
pub fn assemble(net: &NetworkModel) -> BinaryProgram {
    let support = n2b_support(net);
    let registry = build_variables(net, &support);
    let mut constraints = radiality_constraints(net, &registry);
    constraints.extend(n2b_constraints(net, &support, &registry));
    constraints.extend(security_constraints(net, &support, &registry));
    let objective = objective(net, &registry);
    let gates = and_gates(&registry);
    BinaryProgram { registry, constraints, gates, objective }
}

impl LinearExpr {
    /// Multiplies every coefficient and the constant by `f`.
    pub fn scale(&mut self, f: Rat) {
        if f.is_zero() {
            self.terms.clear();
            self.constant = Rat::zero();
            return;
        }
        for c in self.terms.values_mut() {
            *c *= &f;
        }
        self.constant *= &f;
    }
}
