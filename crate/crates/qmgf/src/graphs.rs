//! Path enumeration, node-to-branch support, and radiality checking.
//!
//! The support relation is what keeps the formulation encoding-free: a pi
//! variable exists for (node, branch) only when some simple path from the
//! node to a source traverses that branch. Everything else is pinned to 0.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::network::{BranchId, NetworkModel, NodeId};

/// Set of (node, branch) pairs that may appear on a supply path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct N2BSupport {
    entries: BTreeSet<(NodeId, BranchId)>,
}

impl N2BSupport {
    pub fn contains(&self, node: &NodeId, branch: &BranchId) -> bool {
        // borrowed lookup without cloning
        self.entries.iter().any(|(n, b)| n == node && b == branch)
    }

    pub fn entries(&self) -> impl Iterator<Item = &(NodeId, BranchId)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Branches node may route through, in branch order.
    pub fn branches_for<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = &'a BranchId> {
        self.entries.iter().filter(move |(n, _)| n == node).map(|(_, b)| b)
    }
}

/// Switch state plus parent assignment decoded from (or built for) a network.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub closed: BTreeSet<BranchId>,
    /// child -> parent; undefined exactly on sources and de-energized nodes.
    pub parent: BTreeMap<NodeId, NodeId>,
}

impl Topology {
    /// Branch sequence from `from` to its root, following parents. `None`
    /// when the chain is broken or cyclic.
    pub fn path_to_root(&self, from: &NodeId) -> Option<Vec<BranchId>> {
        let mut path = Vec::new();
        let mut at = from;
        let bound = self.parent.len() + 1;
        while let Some(p) = self.parent.get(at) {
            path.push(BranchId::new(at.clone(), p.clone()));
            at = p;
            if path.len() > bound {
                return None; // cycle
            }
        }
        Some(path)
    }
}

/// All simple paths from `from` to a source, as branch sequences in walk
/// order. Paths end at the first source they touch; a source yields the
/// empty path. Work is exponential in pathological meshes; intended for
/// desk-scale instances.
pub fn simple_paths_to_sources(net: &NetworkModel, from: &NodeId) -> BTreeSet<Vec<BranchId>> {
    let mut out = BTreeSet::new();
    if net.is_source(from) {
        out.insert(Vec::new());
        return out;
    }
    if !net.nodes.contains_key(from) {
        return out;
    }
    let mut visited = BTreeSet::from([from.clone()]);
    let mut path = Vec::new();
    path_dfs(net, from, &mut visited, &mut path, &mut |p| {
        out.insert(p.to_vec());
    });
    out
}

fn path_dfs(
    net: &NetworkModel,
    at: &NodeId,
    visited: &mut BTreeSet<NodeId>,
    path: &mut Vec<BranchId>,
    emit: &mut impl FnMut(&[BranchId]),
) {
    for b in net.incident(at) {
        let next = b.id.other(at).expect("incident branch");
        if visited.contains(next) {
            continue;
        }
        path.push(b.id.clone());
        if net.is_source(next) {
            emit(path);
        } else {
            visited.insert(next.clone());
            path_dfs(net, next, visited, path, emit);
            visited.remove(next);
        }
        path.pop();
    }
}

/// Computes the support relation by per-node path search. A branch is marked
/// on the first witnessing path; once every branch is marked for a node the
/// search for that node stops early.
pub fn n2b_support(net: &NetworkModel) -> N2BSupport {
    let mut entries = BTreeSet::new();
    let branch_count = net.branches.len();
    for node in net.nodes.keys() {
        if net.is_source(node) {
            continue;
        }
        let mut marked: BTreeSet<BranchId> = BTreeSet::new();
        let mut visited = BTreeSet::from([node.clone()]);
        let mut path = Vec::new();
        support_dfs(net, node, &mut visited, &mut path, &mut marked, branch_count);
        for b in marked {
            entries.insert((node.clone(), b));
        }
    }
    N2BSupport { entries }
}

fn support_dfs(
    net: &NetworkModel,
    at: &NodeId,
    visited: &mut BTreeSet<NodeId>,
    path: &mut Vec<BranchId>,
    marked: &mut BTreeSet<BranchId>,
    branch_count: usize,
) {
    if marked.len() == branch_count {
        return; // everything witnessed already
    }
    for b in net.incident(at) {
        let next = b.id.other(at).expect("incident branch");
        if visited.contains(next) {
            continue;
        }
        path.push(b.id.clone());
        if net.is_source(next) {
            marked.extend(path.iter().cloned());
        } else {
            visited.insert(next.clone());
            support_dfs(net, next, visited, path, marked, branch_count);
            visited.remove(next);
        }
        path.pop();
    }
}

/// True iff the closed branches restricted to energized nodes form a forest,
/// every component contains exactly one source, and every energized
/// non-source node's parent chain walks closed branches to that source.
pub fn check_radial_forest(
    net: &NetworkModel,
    topo: &Topology,
    energized: &BTreeSet<NodeId>,
) -> bool {
    if !energized.iter().all(|n| net.nodes.contains_key(n)) {
        return false;
    }

    // induced subgraph
    let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    let mut edge_count = 0usize;
    for id in &topo.closed {
        if net.branch(id).is_none() {
            return false;
        }
        let (lo, hi) = id.endpoints();
        if energized.contains(lo) && energized.contains(hi) {
            adj.entry(lo).or_default().push(hi);
            adj.entry(hi).or_default().push(lo);
            edge_count += 1;
        }
    }

    // component scan: forest <=> edges = nodes - components
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    let mut components = 0usize;
    for start in energized {
        if seen.contains(start) {
            continue;
        }
        components += 1;
        let mut sources_here = 0usize;
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(n) = queue.pop_front() {
            if net.is_source(n) {
                sources_here += 1;
            }
            for m in adj.get(n).into_iter().flatten() {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        if sources_here != 1 {
            return false;
        }
    }
    if edge_count != energized.len() - components {
        return false; // a cycle hides somewhere
    }

    // parent chains walk closed branches to a source
    for n in energized {
        if net.is_source(n) {
            continue;
        }
        let mut at = n;
        let mut steps = 0usize;
        loop {
            let p = match topo.parent.get(at) {
                Some(p) => p,
                None => return false, // energized non-source without a parent
            };
            if !energized.contains(p) || !topo.closed.contains(&BranchId::new(at.clone(), p.clone())) {
                return false;
            }
            if net.is_source(p) {
                break;
            }
            at = p;
            steps += 1;
            if steps > energized.len() {
                return false; // cyclic parents
            }
        }
    }

    true
}

/// Deterministic breadth-first spanning forest grown from all sources at
/// once; the canonical feasible topology used for seeding and baselines.
pub fn bfs_forest(net: &NetworkModel) -> Topology {
    let mut topo = Topology::default();
    let mut seen: BTreeSet<NodeId> = net.sources().cloned().collect();
    let mut queue: VecDeque<NodeId> = seen.iter().cloned().collect();
    while let Some(n) = queue.pop_front() {
        for b in net.incident(&n) {
            let next = b.id.other(&n).expect("incident branch").clone();
            if !net.nodes.contains_key(&next) || seen.contains(&next) || net.is_source(&next) {
                continue;
            }
            seen.insert(next.clone());
            topo.parent.insert(next.clone(), n.clone());
            topo.closed.insert(b.id.clone());
            queue.push_back(next);
        }
    }
    topo
}
