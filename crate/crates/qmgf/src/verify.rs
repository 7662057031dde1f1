//! Decodes solver bitstrings back into network terms and re-checks every
//! rule in its original form, independent of how the QUBO was composed.
//!
//! Flows are recomputed from scratch: each restored load is routed along
//! its parent chain and accumulated per branch, so a bookkeeping bug in the
//! compiler cannot vouch for itself. Structural rules (switch/parent
//! agreement, one parent each, radial forest, path flags) are checked
//! first; power-window, branch-limit, and voltage rules are evaluated in
//! exact rationals on the recomputed flows.
//!
//! `violation_total` sums the numeric excess of every quantitative breach
//! plus 1 per structural breach, so 0 means feasible and larger means
//! farther from feasible.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num_traits::Zero;
use serde_json::json;

use crate::decimal::format_rat;
use crate::formulation::{VarKind, VariableRegistry};
use crate::graphs::{check_radial_forest, Topology};
use crate::network::{BranchId, NetworkModel, NodeId};
use crate::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyError {
    LengthMismatch { expected: usize, got: usize },
    UnknownVariable { index: usize },
}

impl std::fmt::Display for VerifyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerifyError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} bits, got {got}")
            }
            VerifyError::UnknownVariable { index } => {
                write!(f, "bit {index} does not map to a network variable")
            }
        }
    }
}

impl std::error::Error for VerifyError {}

/// Raw per-kind view of a bitstring, before any consistency checks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decoded {
    pub closed: BTreeSet<BranchId>,
    /// Every set beta bit; a well-formed solution has exactly one per
    /// non-source node.
    pub parents: BTreeMap<NodeId, Vec<NodeId>>,
    pub restored: BTreeSet<NodeId>,
    pub pi: BTreeSet<(NodeId, BranchId)>,
}

/// Splits a full assignment into network terms. Product and slack bits are
/// ignored here; their consistency is the lowering's business, not part of
/// the solution's meaning.
pub fn decode(reg: &VariableRegistry, bits: &[bool]) -> Result<Decoded, VerifyError> {
    if bits.len() != reg.len() {
        return Err(VerifyError::LengthMismatch { expected: reg.len(), got: bits.len() });
    }
    let mut out = Decoded::default();
    for (idx, kind) in reg.iter() {
        if !bits[idx] {
            continue;
        }
        match kind {
            VarKind::Alpha(b) => {
                out.closed.insert(b.clone());
            }
            VarKind::Beta { child, parent } => {
                out.parents.entry(child.clone()).or_default().push(parent.clone());
            }
            VarKind::Lambda(n) => {
                out.restored.insert(n.clone());
            }
            VarKind::Pi(n, b) => {
                out.pi.insert((n.clone(), b.clone()));
            }
            VarKind::AuxAnd(..) | VarKind::SlackBit { .. } => {}
        }
    }
    Ok(out)
}

/// Active/reactive power carried by one branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub p: Rat,
    pub q: Rat,
}

/// Routes every restored load along its parent chain. Returns per-branch
/// flows and, per non-source node with an intact chain, the cumulative
/// voltage drop along that chain. Loads without an intact chain are
/// reported in the second list and carried by nothing.
pub fn compute_flows(
    net: &NetworkModel,
    topo: &Topology,
    restored: &BTreeSet<NodeId>,
) -> (BTreeMap<BranchId, Flow>, BTreeMap<NodeId, Rat>, Vec<NodeId>) {
    let rooted_path = |n: &NodeId| -> Option<Vec<BranchId>> {
        // a usable path ends at a source; a broken or cyclic chain does not
        let end = path_end(topo, n)?;
        if !net.is_source(end) {
            return None;
        }
        topo.path_to_root(n)
    };

    let mut flows: BTreeMap<BranchId, Flow> = BTreeMap::new();
    let mut unrouted = Vec::new();
    for i in restored {
        let load = match net.load(i) {
            Some(l) => l,
            None => continue,
        };
        let path = match rooted_path(i) {
            Some(p) => p,
            None => {
                unrouted.push(i.clone());
                continue;
            }
        };
        for b in path {
            let f = flows
                .entry(b)
                .or_insert_with(|| Flow { p: Rat::zero(), q: Rat::zero() });
            f.p += &load.p_active;
            f.q += &load.q_reactive;
        }
    }

    let mut drops: BTreeMap<NodeId, Rat> = BTreeMap::new();
    for n in net.nodes.keys() {
        if net.is_source(n) {
            continue;
        }
        let path = match rooted_path(n) {
            Some(p) => p,
            None => continue,
        };
        let mut drop = Rat::zero();
        for b in &path {
            let branch = match net.branch(b) {
                Some(br) => br,
                None => continue,
            };
            if let Some(f) = flows.get(b) {
                drop += (branch.r.clone() * &f.p + branch.x.clone() * &f.q) / &net.u_nominal;
            }
        }
        drops.insert(n.clone(), drop);
    }

    (flows, drops, unrouted)
}

/// Last node of the parent chain from `from`, None when the chain cycles.
fn path_end<'a>(topo: &'a Topology, from: &'a NodeId) -> Option<&'a NodeId> {
    let mut at = from;
    let mut steps = 0usize;
    while let Some(p) = topo.parent.get(at) {
        at = p;
        steps += 1;
        if steps > topo.parent.len() {
            return None;
        }
    }
    Some(at)
}

/// A decoded assignment judged against the original rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub topology: Topology,
    pub restored: BTreeSet<NodeId>,
    pub pi: BTreeSet<(NodeId, BranchId)>,
    pub flows: BTreeMap<BranchId, Flow>,
    /// Cumulative drop along each non-source node's supply path.
    pub drops: BTreeMap<NodeId, Rat>,
    /// Weighted restored active power.
    pub objective_value: Rat,
    pub feasible: bool,
    pub violations: Vec<String>,
    pub violation_total: Rat,
}

impl Solution {
    pub fn to_json_string(&self) -> String {
        let closed: Vec<String> = self.topology.closed.iter().map(|b| b.to_string()).collect();
        let parent: BTreeMap<String, String> = self
            .topology
            .parent
            .iter()
            .map(|(c, p)| (c.to_string(), p.to_string()))
            .collect();
        let restored: Vec<String> = self.restored.iter().map(|n| n.to_string()).collect();
        let pi: Vec<String> = self.pi.iter().map(|(n, b)| format!("{n}|{b}")).collect();
        let flows: BTreeMap<String, serde_json::Value> = self
            .flows
            .iter()
            .map(|(b, f)| {
                (b.to_string(), json!({ "p": format_rat(&f.p), "q": format_rat(&f.q) }))
            })
            .collect();
        let drops: BTreeMap<String, String> =
            self.drops.iter().map(|(n, d)| (n.to_string(), format_rat(d))).collect();
        let doc = json!({
            "closed": closed,
            "parent": parent,
            "restored": restored,
            "pi": pi,
            "flows": flows,
            "voltage_drops": drops,
            "objective": format_rat(&self.objective_value),
            "feasible": self.feasible,
            "violations": self.violations,
            "violation_total": format_rat(&self.violation_total),
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("solution dump");
        text.push('\n');
        text
    }
}

/// Fraction of total active load restored, in percent; 100 when the network
/// carries no load at all.
pub fn load_served_ratio(net: &NetworkModel, restored: &BTreeSet<NodeId>) -> f64 {
    let mut total = Rat::zero();
    let mut served = Rat::zero();
    for n in net.loaded_nodes() {
        let p = &net.load(n).expect("loaded").p_active;
        total += p;
        if restored.contains(n) {
            served += p;
        }
    }
    if total.is_zero() {
        return 100.0;
    }
    rat_to_f64(&(served / total)) * 100.0
}

fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Full check of a solver bitstring against the network's own rules.
pub fn verify_solution(
    net: &NetworkModel,
    reg: &VariableRegistry,
    bits: &[bool],
) -> Result<Solution, VerifyError> {
    let decoded = decode(reg, bits)?;
    let mut violations: Vec<String> = Vec::new();
    let mut total = Rat::zero();
    let one = Rat::from_integer(1.into());
    let structural = |violations: &mut Vec<String>, total: &mut Rat, msg: String| {
        violations.push(msg);
        *total += &one;
    };

    // switch/parent agreement per branch
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (child, ps) in &decoded.parents {
        if let Some(p) = ps.first() {
            parent.insert(child.clone(), p.clone());
        }
    }
    for b in &net.branches {
        let (lo, hi) = b.id.endpoints();
        let dirs = [(lo, hi), (hi, lo)]
            .iter()
            .filter(|(c, p)| decoded.parents.get(*c).is_some_and(|v| v.contains(p)))
            .count();
        let closed = decoded.closed.contains(&b.id) as usize;
        if dirs != closed {
            structural(
                &mut violations,
                &mut total,
                format!("eq4[{}]: switch {} but {} parent flags", b.id, closed, dirs),
            );
        }
    }

    // exactly one parent per non-source node
    for n in net.nodes.keys() {
        if net.is_source(n) {
            continue;
        }
        let k = decoded.parents.get(n).map_or(0, |v| v.len());
        if k != 1 {
            structural(&mut violations, &mut total, format!("eq5[{n}]: {k} parents chosen"));
        }
    }

    let topology = Topology { closed: decoded.closed.clone(), parent };

    // radial forest over all nodes (the parent rule energizes everything)
    let energized: BTreeSet<NodeId> = net.nodes.keys().cloned().collect();
    if !check_radial_forest(net, &topology, &energized) {
        structural(
            &mut violations,
            &mut total,
            "radiality: closed branches and parents do not form a rooted forest".to_string(),
        );
    }

    // path flags match the parent chains
    for n in net.nodes.keys() {
        if net.is_source(n) {
            continue;
        }
        let flagged: BTreeSet<BranchId> = decoded
            .pi
            .iter()
            .filter(|(m, _)| m == n)
            .map(|(_, b)| b.clone())
            .collect();
        let actual: Option<BTreeSet<BranchId>> = topology
            .path_to_root(n)
            .filter(|_| path_end(&topology, n).is_some_and(|e| net.is_source(e)))
            .map(|p| p.into_iter().collect());
        match actual {
            Some(actual) if actual == flagged => {}
            Some(_) => structural(
                &mut violations,
                &mut total,
                format!("path[{n}]: flagged branches disagree with the parent chain"),
            ),
            None => structural(
                &mut violations,
                &mut total,
                format!("path[{n}]: no parent chain to a source"),
            ),
        }
    }

    let (flows, drops, unrouted) = compute_flows(net, &topology, &decoded.restored);
    for n in unrouted {
        structural(
            &mut violations,
            &mut total,
            format!("restoration[{n}]: restored load has no supply path"),
        );
    }

    // source windows on recomputed injections
    for j in net.nodes.keys().filter(|n| net.is_source(n)) {
        let src = net.nodes[j].source.as_ref().expect("source data");
        let mut inj_p = Rat::zero();
        let mut inj_q = Rat::zero();
        if decoded.restored.contains(j) {
            if let Some(l) = net.load(j) {
                inj_p += &l.p_active;
                inj_q += &l.q_reactive;
            }
        }
        for i in &decoded.restored {
            if i == j {
                continue;
            }
            if path_end(&topology, i) == Some(j) {
                if let Some(l) = net.load(i) {
                    inj_p += &l.p_active;
                    inj_q += &l.q_reactive;
                }
            }
        }
        for (tag, inj, min, max) in [
            ("eq14", &inj_p, &src.p_min, &src.p_max),
            ("eq15", &inj_q, &src.q_min, &src.q_max),
        ] {
            if inj < min {
                violations.push(format!(
                    "{tag}.lo[{j}]: injection {} under floor {}",
                    format_rat(inj),
                    format_rat(min)
                ));
                total += min - inj;
            }
            if inj > max {
                violations.push(format!(
                    "{tag}.hi[{j}]: injection {} over ceiling {}",
                    format_rat(inj),
                    format_rat(max)
                ));
                total += inj - max;
            }
        }
    }

    // branch limits on recomputed flows
    for b in &net.branches {
        let f = match flows.get(&b.id) {
            Some(f) => f,
            None => continue,
        };
        if !topology.closed.contains(&b.id) {
            structural(
                &mut violations,
                &mut total,
                format!("eq16[{}]: open branch carries flow", b.id),
            );
            continue;
        }
        if f.p > b.p_max {
            violations.push(format!(
                "eq16[{}]: flow {} over limit {}",
                b.id,
                format_rat(&f.p),
                format_rat(&b.p_max)
            ));
            total += &f.p - &b.p_max;
        }
        if f.q > b.q_max {
            violations.push(format!(
                "eq17[{}]: flow {} over limit {}",
                b.id,
                format_rat(&f.q),
                format_rat(&b.q_max)
            ));
            total += &f.q - &b.q_max;
        }
    }

    // voltage drop per loaded node, relaxed when the load is shed
    for h in net.loaded_nodes() {
        if net.is_source(h) {
            continue;
        }
        let drop = match drops.get(h) {
            Some(d) => d.clone(),
            None => continue, // structural failure already recorded
        };
        let mut limit = net.nodes[h].du_max.clone();
        if !decoded.restored.contains(h) {
            limit += &net.u_delta;
        }
        if drop > limit {
            violations.push(format!(
                "eq18[{h}]: drop {} over limit {}",
                format_rat(&drop),
                format_rat(&limit)
            ));
            total += &drop - &limit;
        }
    }

    let mut objective_value = Rat::zero();
    for n in &decoded.restored {
        if let Some(l) = net.load(n) {
            objective_value += l.weight.clone() * &l.p_active;
        }
    }

    Ok(Solution {
        topology,
        restored: decoded.restored,
        pi: decoded.pi,
        flows,
        drops,
        objective_value,
        feasible: violations.is_empty(),
        violations,
        violation_total: total,
    })
}
