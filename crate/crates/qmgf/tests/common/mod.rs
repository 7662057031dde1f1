//! Shared fixture builders and independent re-computations of the network
//! rules for the integration suites. The flow and feasibility math here is
//! written from scratch on purpose (component scans, subtree sums, top-down
//! drop accumulation); agreement with the library is what the suites check.

#![allow(dead_code)] // each integration target uses a different subset

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmgf::decimal::parse_decimal;
use qmgf::lowering::LoweredModel;
use qmgf::network::{load_network, BranchId, NetworkModel, NodeId};
use qmgf::Rat;

/// Scale used by every generated fixture; all drawn values fit in it.
pub const SCALE: u32 = 3;

pub fn rat(s: &str) -> Rat {
    parse_decimal(s).expect("literal")
}

// ===== seeded fixture generation =====

/// Node/edge skeleton; electrical parameters are drawn per seed.
pub struct Shape {
    pub name: &'static str,
    /// (node name, is_source)
    pub nodes: &'static [(&'static str, bool)],
    pub loaded: &'static [&'static str],
    pub edges: &'static [(&'static str, &'static str)],
}

pub const SHAPES: &[Shape] = &[
    Shape {
        name: "line3",
        nodes: &[("n1", true), ("n2", false), ("n3", false)],
        loaded: &["n2", "n3"],
        edges: &[("n1", "n2"), ("n2", "n3")],
    },
    Shape {
        name: "line4",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false)],
        loaded: &["n2", "n3", "n4"],
        edges: &[("n1", "n2"), ("n2", "n3"), ("n3", "n4")],
    },
    Shape {
        name: "line4x2",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", true)],
        loaded: &["n2", "n3"],
        edges: &[("n1", "n2"), ("n2", "n3"), ("n3", "n4")],
    },
    Shape {
        name: "star4",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false)],
        loaded: &["n2", "n3", "n4"],
        edges: &[("n1", "n2"), ("n1", "n3"), ("n1", "n4")],
    },
    Shape {
        name: "star5",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false), ("n5", false)],
        loaded: &["n2", "n3", "n4", "n5"],
        edges: &[("n1", "n2"), ("n1", "n3"), ("n1", "n4"), ("n1", "n5")],
    },
    Shape {
        name: "star6",
        nodes: &[
            ("n1", true),
            ("n2", false),
            ("n3", false),
            ("n4", false),
            ("n5", false),
            ("n6", false),
        ],
        loaded: &["n2", "n3", "n4", "n5", "n6"],
        edges: &[("n1", "n2"), ("n1", "n3"), ("n1", "n4"), ("n1", "n5"), ("n1", "n6")],
    },
    Shape {
        name: "triangle1",
        nodes: &[("n1", true), ("n2", false), ("n3", false)],
        loaded: &["n2"],
        edges: &[("n1", "n2"), ("n1", "n3"), ("n2", "n3")],
    },
    Shape {
        name: "triangle2",
        nodes: &[("n1", true), ("n2", false), ("n3", false)],
        loaded: &["n2", "n3"],
        edges: &[("n1", "n2"), ("n1", "n3"), ("n2", "n3")],
    },
    Shape {
        name: "ring4a",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false)],
        loaded: &["n3"],
        edges: &[("n1", "n2"), ("n2", "n3"), ("n3", "n4"), ("n1", "n4")],
    },
    Shape {
        name: "ring4b",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false)],
        loaded: &["n2", "n4"],
        edges: &[("n1", "n2"), ("n2", "n3"), ("n3", "n4"), ("n1", "n4")],
    },
    Shape {
        name: "ring5",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false), ("n5", false)],
        loaded: &["n3"],
        edges: &[("n1", "n2"), ("n2", "n3"), ("n3", "n4"), ("n4", "n5"), ("n1", "n5")],
    },
    Shape {
        name: "tree5",
        nodes: &[("n1", true), ("n2", false), ("n3", false), ("n4", false), ("n5", false)],
        loaded: &["n3", "n4", "n5"],
        edges: &[("n1", "n2"), ("n2", "n3"), ("n2", "n4"), ("n2", "n5")],
    },
    Shape {
        name: "tree6",
        nodes: &[
            ("n1", true),
            ("n2", false),
            ("n3", false),
            ("n4", false),
            ("n5", false),
            ("n6", false),
        ],
        loaded: &["n4", "n5", "n6"],
        edges: &[("n1", "n2"), ("n1", "n3"), ("n2", "n4"), ("n2", "n5"), ("n3", "n6")],
    },
];

const LOAD_P: &[&str] = &["0.5", "0.5", "1.0", "1.5"];
const LOAD_Q: &[&str] = &["0", "0.1", "0.2", "0.5"];
const LOAD_W: &[&str] = &["1", "2", "3"];
const SRC_PMIN: &[&str] = &["0", "0", "0", "0.5"];
const SRC_PMAX: &[&str] = &["2.0", "2.5", "3.0"];
const SRC_QMAX: &[&str] = &["1.0", "1.5"];
const BR_R: &[&str] = &["0.01", "0.02"];
const BR_X: &[&str] = &["0.02", "0.05"];
const BR_PMAX: &[&str] = &["1.5", "2.0", "2.5"];
const BR_QMAX: &[&str] = &["1.0", "1.5"];
const DU_MAX: &[&str] = &["0.05", "0.08", "0.1"];

/// Instance text for a shape with seed-drawn parameters. All pool values
/// stay within three decimal places once multiplied pairwise, so a scale
/// of 10^3 always suffices.
pub fn instantiate(shape: &Shape, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn pick(rng: &mut ChaCha8Rng, pool: &[&str]) -> String {
        pool[rng.gen_range(0..pool.len())].to_string()
    }
    let multi_source = shape.nodes.iter().filter(|(_, s)| *s).count() > 1;

    let mut nodes = Vec::new();
    for (name, is_src) in shape.nodes {
        let du = pick(&mut rng, DU_MAX);
        let mut extra = String::new();
        if *is_src {
            // a floor only makes sense when one source must carry the island
            let p_min =
                if multi_source { "0".to_string() } else { pick(&mut rng, SRC_PMIN) };
            extra.push_str(&format!(
                r#", "source": {{ "p_min": {p_min}, "p_max": {}, "q_min": 0, "q_max": {} }}"#,
                pick(&mut rng, SRC_PMAX),
                pick(&mut rng, SRC_QMAX)
            ));
        }
        if shape.loaded.contains(name) {
            extra.push_str(&format!(
                r#", "load": {{ "p": {}, "q": {}, "w": {} }}"#,
                pick(&mut rng, LOAD_P),
                pick(&mut rng, LOAD_Q),
                pick(&mut rng, LOAD_W)
            ));
        }
        nodes.push(format!(r#"    {{ "id": "{name}", "du_max": {du}{extra} }}"#));
    }

    let mut branches = Vec::new();
    for (a, b) in shape.edges {
        branches.push(format!(
            r#"    {{ "from": "{a}", "to": "{b}", "r": {}, "x": {}, "p_max": {}, "q_max": {} }}"#,
            pick(&mut rng, BR_R),
            pick(&mut rng, BR_X),
            pick(&mut rng, BR_PMAX),
            pick(&mut rng, BR_QMAX)
        ));
    }

    // u_delta must cover the largest du_max draw (0.1)
    format!(
        "{{\n  \"base\": {{ \"u_nominal\": 1.0, \"u_delta\": 0.1 }},\n  \"nodes\": [\n{}\n  ],\n  \"branches\": [\n{}\n  ]\n}}\n",
        nodes.join(",\n"),
        branches.join(",\n")
    )
}

/// Two seeded instances of every shape: 26 fixtures, 3 to 6 nodes each.
pub fn acceptance_roster() -> Vec<(String, NetworkModel)> {
    let mut out = Vec::new();
    for (si, shape) in SHAPES.iter().enumerate() {
        for k in 0..2u64 {
            let seed = 1000 * (si as u64 + 1) + k;
            let text = instantiate(shape, seed);
            let net = load_network(&text).expect("generated fixture parses");
            out.push((format!("{}s{k}", shape.name), net));
        }
    }
    out
}

pub fn lower_fixture(net: &NetworkModel) -> LoweredModel {
    qmgf::lowering::lower(&qmgf::formulation::assemble(net), SCALE, None).expect("lowers")
}

// ===== independent topology enumeration =====

/// One admissible switch configuration: every component is a tree holding
/// exactly one source, rooted there.
#[derive(Debug, Clone)]
pub struct ValidTopo {
    pub closed: BTreeSet<BranchId>,
    pub parent: BTreeMap<NodeId, NodeId>,
    pub root: BTreeMap<NodeId, NodeId>,
    /// Child-side endpoint of each closed branch.
    pub below: BTreeMap<BranchId, NodeId>,
    pub paths: BTreeMap<NodeId, Vec<BranchId>>,
}

pub fn valid_topologies(net: &NetworkModel) -> Vec<ValidTopo> {
    let ids: Vec<BranchId> = net.branches.iter().map(|b| b.id.clone()).collect();
    let nodes: Vec<NodeId> = net.nodes.keys().cloned().collect();
    assert!(ids.len() <= 16, "oracle is for small fixtures");
    let mut out = Vec::new();

    'mask: for mask in 0u32..(1u32 << ids.len()) {
        let closed: BTreeSet<BranchId> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, b)| b.clone())
            .collect();

        let mut adj: BTreeMap<NodeId, Vec<(NodeId, BranchId)>> = BTreeMap::new();
        for b in &closed {
            let (lo, hi) = b.endpoints();
            adj.entry(lo.clone()).or_default().push((hi.clone(), b.clone()));
            adj.entry(hi.clone()).or_default().push((lo.clone(), b.clone()));
        }

        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut root: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut below: BTreeMap<BranchId, NodeId> = BTreeMap::new();

        for start in &nodes {
            if seen.contains(start) {
                continue;
            }
            let mut comp = vec![start.clone()];
            let mut frontier = vec![start.clone()];
            seen.insert(start.clone());
            while let Some(n) = frontier.pop() {
                for (m, _) in adj.get(&n).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if seen.insert(m.clone()) {
                        comp.push(m.clone());
                        frontier.push(m.clone());
                    }
                }
            }
            let in_comp: BTreeSet<&NodeId> = comp.iter().collect();
            let edges = closed.iter().filter(|b| in_comp.contains(b.endpoints().0)).count();
            let sources: Vec<&NodeId> =
                comp.iter().filter(|n| net.is_source(n)).collect();
            if edges != comp.len() - 1 || sources.len() != 1 {
                continue 'mask;
            }

            // root the tree at its source
            let r = sources[0].clone();
            let mut visited: BTreeSet<NodeId> = BTreeSet::new();
            visited.insert(r.clone());
            let mut frontier = vec![r.clone()];
            while let Some(n) = frontier.pop() {
                for (m, b) in adj.get(&n).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if visited.insert(m.clone()) {
                        parent.insert(m.clone(), n.clone());
                        below.insert(b.clone(), m.clone());
                        frontier.push(m.clone());
                    }
                }
            }
            for n in comp {
                root.insert(n, r.clone());
            }
        }

        let mut paths: BTreeMap<NodeId, Vec<BranchId>> = BTreeMap::new();
        for n in &nodes {
            let mut at = n.clone();
            let mut path = Vec::new();
            while let Some(p) = parent.get(&at) {
                path.push(BranchId::new(at.clone(), p.clone()));
                at = p.clone();
            }
            paths.insert(n.clone(), path);
        }

        out.push(ValidTopo { closed, parent, root, below, paths });
    }
    out
}

// ===== independent flow and feasibility math =====

/// Per-branch (p, q) by bottom-up subtree summation, and per-node drop by
/// top-down accumulation from each root.
pub fn downstream_flows(
    net: &NetworkModel,
    topo: &ValidTopo,
    restored: &BTreeSet<NodeId>,
) -> (BTreeMap<BranchId, (Rat, Rat)>, BTreeMap<NodeId, Rat>) {
    // (p, q, carries at least one restored load)
    let mut acc: BTreeMap<NodeId, (Rat, Rat, bool)> = BTreeMap::new();
    for n in net.nodes.keys() {
        let mut cell = (Rat::zero(), Rat::zero(), false);
        if restored.contains(n) {
            if let Some(l) = net.load(n) {
                cell = (l.p_active.clone(), l.q_reactive.clone(), true);
            }
        }
        acc.insert(n.clone(), cell);
    }

    let mut order: Vec<NodeId> = net.nodes.keys().cloned().collect();
    order.sort_by_key(|n| std::cmp::Reverse(topo.paths[n].len()));

    // deepest first: fold each finished subtree into its parent
    let mut flows: BTreeMap<BranchId, (Rat, Rat)> = BTreeMap::new();
    for n in &order {
        let Some(p) = topo.parent.get(n) else { continue };
        let cell = acc[n].clone();
        if cell.2 {
            flows.insert(BranchId::new(n.clone(), p.clone()), (cell.0.clone(), cell.1.clone()));
        }
        let up = acc.get_mut(p).expect("parent present");
        up.0 += cell.0;
        up.1 += cell.1;
        up.2 |= cell.2;
    }

    // shallowest first: drop(n) = drop(parent) + loss on the joining branch
    order.reverse();
    let mut drops: BTreeMap<NodeId, Rat> = BTreeMap::new();
    for n in &order {
        let Some(p) = topo.parent.get(n) else { continue };
        let b = BranchId::new(n.clone(), p.clone());
        let branch = net.branch(&b).expect("closed branch exists");
        let (fp, fq) = flows.get(&b).cloned().unwrap_or((Rat::zero(), Rat::zero()));
        let step = (branch.r.clone() * fp + branch.x.clone() * fq) / &net.u_nominal;
        let base = drops.get(p).cloned().unwrap_or_else(Rat::zero);
        drops.insert(n.clone(), base + step);
    }

    (flows, drops)
}

/// Checks the source windows, branch limits, and voltage drops for one
/// switch configuration and restoration subset.
pub fn combo_feasible(
    net: &NetworkModel,
    topo: &ValidTopo,
    restored: &BTreeSet<NodeId>,
) -> bool {
    let (flows, drops) = downstream_flows(net, topo, restored);

    for j in net.nodes.keys().filter(|n| net.is_source(n)) {
        let src = net.nodes[j].source.as_ref().expect("source data");
        let mut p = Rat::zero();
        let mut q = Rat::zero();
        for i in restored {
            if topo.root.get(i) == Some(j) {
                if let Some(l) = net.load(i) {
                    p += &l.p_active;
                    q += &l.q_reactive;
                }
            }
        }
        if p < src.p_min || p > src.p_max || q < src.q_min || q > src.q_max {
            return false;
        }
    }

    for (b, (p, q)) in &flows {
        let branch = net.branch(b).expect("branch");
        if *p > branch.p_max || *q > branch.q_max {
            return false;
        }
    }

    for h in net.loaded_nodes() {
        if net.is_source(h) {
            continue;
        }
        let mut limit = net.nodes[h].du_max.clone();
        if !restored.contains(h) {
            limit += &net.u_delta;
        }
        if drops.get(h).cloned().unwrap_or_else(Rat::zero) > limit {
            return false;
        }
    }

    true
}

pub fn objective_of(net: &NetworkModel, restored: &BTreeSet<NodeId>) -> Rat {
    let mut obj = Rat::zero();
    for n in restored {
        if let Some(l) = net.load(n) {
            obj += l.weight.clone() * &l.p_active;
        }
    }
    obj
}

pub struct BruteForce {
    /// Highest weighted restored power over all admissible combinations.
    pub best: Option<Rat>,
    pub feasible: Vec<(ValidTopo, BTreeSet<NodeId>)>,
}

pub fn brute_force(net: &NetworkModel) -> BruteForce {
    let loaded: Vec<NodeId> = net.loaded_nodes().cloned().collect();
    assert!(loaded.len() <= 16, "oracle is for small fixtures");
    let mut best: Option<Rat> = None;
    let mut feasible = Vec::new();
    for topo in valid_topologies(net) {
        for rmask in 0u32..(1u32 << loaded.len()) {
            let restored: BTreeSet<NodeId> = loaded
                .iter()
                .enumerate()
                .filter(|(i, _)| rmask >> i & 1 == 1)
                .map(|(_, n)| n.clone())
                .collect();
            if combo_feasible(net, &topo, &restored) {
                let obj = objective_of(net, &restored);
                if best.as_ref().is_none_or(|b| obj > *b) {
                    best = Some(obj.clone());
                }
                feasible.push((topo.clone(), restored));
            }
        }
    }
    BruteForce { best, feasible }
}

// ===== decision-space enumeration over a lowered model =====

/// Completes a decision prefix with the slack assignment that minimizes
/// each constraint residual, reachable because the slack weights cover
/// their range exactly.
pub fn full_bits_for_decision(model: &LoweredModel, dec: &[bool]) -> Vec<bool> {
    let reg = &model.program.registry;
    let n_dec = reg.first_slack();
    assert_eq!(dec.len(), n_dec);
    let mut bits = vec![false; reg.len()];
    bits[..n_dec].copy_from_slice(dec);

    for c in &model.program.constraints {
        let mut r = c.lhs.constant.clone();
        let mut slack: Vec<(usize, BigInt)> = Vec::new();
        for (idx, coef) in &c.lhs.terms {
            if *idx < n_dec {
                if dec[*idx] {
                    r += coef;
                }
            } else {
                debug_assert!(coef.is_integer());
                slack.push((*idx, coef.numer().clone()));
            }
        }
        if slack.is_empty() {
            continue;
        }
        debug_assert!(r.is_integer());
        let range: BigInt = slack.iter().map(|(_, w)| w).sum();
        let target = (-r.numer().clone()).max(BigInt::zero()).min(range);
        slack.sort_by(|a, b| b.1.cmp(&a.1));
        let mut rem = target;
        for (idx, w) in &slack {
            if *w <= rem {
                bits[*idx] = true;
                rem -= w;
            }
        }
        debug_assert!(rem.is_zero(), "slack weights failed to reach the target");
    }
    bits
}

/// Minimum energy over the whole assignment space, found by enumerating
/// decision prefixes and costing slacks at their optimum. Returns every
/// minimizing completion, up to `cap`.
pub fn decision_space_minimum(model: &LoweredModel, cap: usize) -> (i64, Vec<Vec<bool>>) {
    let n_dec = model.program.registry.first_slack();
    assert!(n_dec <= 26, "decision space too large to enumerate");
    let mut best = i64::MAX;
    let mut arg: Vec<Vec<bool>> = Vec::new();
    let mut dec = vec![false; n_dec];
    for mask in 0u64..(1u64 << n_dec) {
        for (i, d) in dec.iter_mut().enumerate() {
            *d = mask >> i & 1 == 1;
        }
        let bits = full_bits_for_decision(model, &dec);
        let e = model.qubo.energy(&bits);
        if e < best {
            best = e;
            arg.clear();
        }
        if e == best && arg.len() < cap {
            arg.push(bits);
        }
    }
    (best, arg)
}
