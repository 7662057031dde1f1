//! Distribution-network model: nodes, branches, loads, sources.
//!
//! The instance file is JSON:
//!
//! ```json
//! {
//!   "base": { "u_nominal": 1.0, "u_delta": 0.05 },
//!   "nodes": [
//!     { "id": "n1", "du_max": 0.05,
//!       "source": { "p_min": 0, "p_max": 2.0, "q_min": 0, "q_max": 1.0 } },
//!     { "id": "n2", "du_max": 0.05, "load": { "p": 1.0, "q": 0.5, "w": 1 } }
//!   ],
//!   "branches": [
//!     { "from": "n1", "to": "n2", "r": 0.01, "x": 0.02, "p_max": 2.0, "q_max": 1.0 }
//!   ]
//! }
//! ```
//!
//! `u_delta` may be omitted; it then defaults to the largest `du_max`.
//! Numeric fields are parsed from their literal decimal text, exactly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decimal::{format_exact, parse_decimal};
use crate::Rat;

// ===== identifiers =====

/// Node label, ordered lexicographically everywhere determinism matters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        NodeId(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unordered pair of endpoints; construction canonicalizes the order so
/// `n1-n2` and `n2-n1` name the same branch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchId {
    lo: NodeId,
    hi: NodeId,
}

impl BranchId {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            BranchId { lo: a, hi: b }
        } else {
            BranchId { lo: b, hi: a }
        }
    }
    pub fn endpoints(&self) -> (&NodeId, &NodeId) {
        (&self.lo, &self.hi)
    }
    pub fn touches(&self, n: &NodeId) -> bool {
        &self.lo == n || &self.hi == n
    }
    /// The endpoint opposite `n`, if `n` is an endpoint at all.
    pub fn other(&self, n: &NodeId) -> Option<&NodeId> {
        if &self.lo == n {
            Some(&self.hi)
        } else if &self.hi == n {
            Some(&self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

// ===== model =====

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub p_active: Rat,
    pub q_reactive: Rat,
    pub weight: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub p_min: Rat,
    pub p_max: Rat,
    pub q_min: Rat,
    pub q_max: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub r: Rat,
    pub x: Rat,
    pub p_max: Rat,
    pub q_max: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    pub du_max: Rat,
    pub load: Option<Load>,
    pub source: Option<Source>,
}

/// Validated network; immutable after load, the formulation layers borrow it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub nodes: BTreeMap<NodeId, NodeData>,
    /// Sorted by branch id.
    pub branches: Vec<Branch>,
    pub u_nominal: Rat,
    pub u_delta: Rat,
}

impl NetworkModel {
    pub fn is_source(&self, n: &NodeId) -> bool {
        self.nodes.get(n).is_some_and(|d| d.source.is_some())
    }

    pub fn sources(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().filter(|(_, d)| d.source.is_some()).map(|(n, _)| n)
    }

    /// A node is loaded when it carries a load with p + q > 0; only loaded
    /// nodes get restoration variables.
    pub fn is_loaded(&self, n: &NodeId) -> bool {
        self.load(n).is_some_and(|l| {
            use num_traits::Zero;
            !(l.p_active.clone() + &l.q_reactive).is_zero()
        })
    }

    pub fn load(&self, n: &NodeId) -> Option<&Load> {
        self.nodes.get(n).and_then(|d| d.load.as_ref())
    }

    pub fn branch(&self, id: &BranchId) -> Option<&Branch> {
        self.branches.iter().find(|b| &b.id == id)
    }

    /// Branches incident to `n`, in branch order.
    pub fn incident<'a>(&'a self, n: &'a NodeId) -> impl Iterator<Item = &'a Branch> + 'a {
        self.branches.iter().filter(move |b| b.id.touches(n))
    }

    pub fn loaded_nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys().filter(move |n| self.is_loaded(n))
    }

    /// Diagnostic list of violated model invariants; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        validate(self)
    }

    /// Exact-decimal JSON rendering of the instance; inverse of
    /// [`load_network`] up to node/branch ordering.
    pub fn to_json_string(&self) -> String {
        to_json_string(self)
    }
}

// ===== errors =====

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at line {} column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub violations: Vec<String>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid network: {}", self.violations.join("; "))
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Parse(ParseError),
    Validation(ValidationError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Parse(e) => e.fmt(f),
            LoadError::Validation(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for LoadError {}

// ===== JSON schema =====

/// Exact decimal wrapper; (de)serializes through the literal number text.
#[derive(Debug, Clone, PartialEq)]
struct Dec(Rat);

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = serde_json::Number::deserialize(d)?;
        parse_decimal(&n.to_string()).map(Dec).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text = format_exact(&self.0)
            .ok_or_else(|| serde::ser::Error::custom("non-terminating decimal"))?;
        serde_json::Number::from_string_unchecked(text).serialize(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BaseDoc {
    u_nominal: Dec,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_delta: Option<Dec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoadDoc {
    p: Dec,
    q: Dec,
    w: Dec,
}

#[derive(Debug, Serialize, Deserialize)]
struct SourceDoc {
    p_min: Dec,
    p_max: Dec,
    q_min: Dec,
    q_max: Dec,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    du_max: Dec,
    #[serde(skip_serializing_if = "Option::is_none")]
    load: Option<LoadDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<SourceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BranchDoc {
    from: String,
    to: String,
    r: Dec,
    x: Dec,
    p_max: Dec,
    q_max: Dec,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    base: BaseDoc,
    nodes: Vec<NodeDoc>,
    branches: Vec<BranchDoc>,
}

// ===== operations =====

/// Parses and validates an instance file. Numeric fields are ingested from
/// their literal text, so the model holds exact rationals.
pub fn load_network(text: &str) -> Result<NetworkModel, LoadError> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| {
        LoadError::Parse(ParseError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })?;

    let mut nodes = BTreeMap::new();
    let mut duplicate = Vec::new();
    for n in doc.nodes {
        let id = NodeId::new(n.id);
        let data = NodeData {
            du_max: n.du_max.0,
            load: n.load.map(|l| Load { p_active: l.p.0, q_reactive: l.q.0, weight: l.w.0 }),
            source: n.source.map(|s| Source {
                p_min: s.p_min.0,
                p_max: s.p_max.0,
                q_min: s.q_min.0,
                q_max: s.q_max.0,
            }),
        };
        if nodes.insert(id.clone(), data).is_some() {
            duplicate.push(format!("duplicate node {id}"));
        }
    }

    let mut branches: Vec<Branch> = doc
        .branches
        .into_iter()
        .map(|b| Branch {
            id: BranchId::new(NodeId::new(b.from), NodeId::new(b.to)),
            r: b.r.0,
            x: b.x.0,
            p_max: b.p_max.0,
            q_max: b.q_max.0,
        })
        .collect();
    branches.sort_by(|a, b| a.id.cmp(&b.id));

    let u_delta = match doc.base.u_delta {
        Some(d) => d.0,
        // default: the loosest per-node drop bound
        None => nodes.values().map(|d| d.du_max.clone()).max().unwrap_or_else(|| {
            use num_traits::One;
            Rat::one()
        }),
    };

    let net = NetworkModel { nodes, branches, u_nominal: doc.base.u_nominal.0, u_delta };

    let mut violations = duplicate;
    violations.extend(validate(&net));
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(LoadError::Validation(ValidationError { violations }))
    }
}

/// Checks every model invariant and reports each violation as text.
pub fn validate(net: &NetworkModel) -> Vec<String> {
    use num_traits::Zero;
    let mut out = Vec::new();
    let zero = Rat::zero();

    for (id, data) in &net.nodes {
        if data.du_max <= zero {
            out.push(format!("non-positive du_max at {id}"));
        }
        if let Some(load) = &data.load {
            if load.p_active < zero {
                out.push(format!("negative load p at {id}"));
            }
            if load.q_reactive < zero {
                out.push(format!("negative load q at {id}"));
            }
            if load.weight < zero {
                out.push(format!("negative load weight at {id}"));
            }
        }
        if let Some(src) = &data.source {
            if src.p_min > src.p_max {
                out.push(format!("source p_min exceeds p_max at {id}"));
            }
            if src.q_min > src.q_max {
                out.push(format!("source q_min exceeds q_max at {id}"));
            }
        }
    }

    let mut seen = BTreeSet::new();
    for b in &net.branches {
        let (lo, hi) = b.id.endpoints();
        for end in [lo, hi] {
            if !net.nodes.contains_key(end) {
                out.push(format!("branch references undeclared node {end}"));
            }
        }
        if lo == hi {
            out.push(format!("branch {} joins a node to itself", b.id));
        }
        if !seen.insert(b.id.clone()) {
            out.push(format!("parallel branch {}", b.id));
        }
        if b.r < zero {
            out.push(format!("negative branch r on {}", b.id));
        }
        if b.x < zero {
            out.push(format!("negative branch x on {}", b.id));
        }
        if b.p_max <= zero {
            out.push(format!("non-positive branch p_max on {}", b.id));
        }
        if b.q_max <= zero {
            out.push(format!("non-positive branch q_max on {}", b.id));
        }
    }

    if net.u_nominal <= zero {
        out.push("non-positive u_nominal".to_string());
    }
    if net.sources().next().is_none() {
        out.push("no source node".to_string());
    }
    if let Some(max_du) = net.nodes.values().map(|d| &d.du_max).max() {
        if &net.u_delta < max_du {
            out.push("u_delta below the largest du_max".to_string());
        }
    }
    if !connected(net) {
        out.push("graph not connected".to_string());
    }

    out
}

/// BFS reachability over all declared nodes; undeclared branch endpoints are
/// ignored here (reported separately).
fn connected(net: &NetworkModel) -> bool {
    let mut it = net.nodes.keys();
    let start = match it.next() {
        Some(n) => n,
        None => return true,
    };
    let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for b in &net.branches {
        let (lo, hi) = b.id.endpoints();
        if net.nodes.contains_key(lo) && net.nodes.contains_key(hi) {
            adj.entry(lo).or_default().push(hi);
            adj.entry(hi).or_default().push(lo);
        }
    }
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    seen.insert(start);
    while let Some(n) = queue.pop_front() {
        for m in adj.get(n).into_iter().flatten() {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen.len() == net.nodes.len()
}

fn to_json_string(net: &NetworkModel) -> String {
    let doc = InstanceDoc {
        base: BaseDoc {
            u_nominal: Dec(net.u_nominal.clone()),
            u_delta: Some(Dec(net.u_delta.clone())),
        },
        nodes: net
            .nodes
            .iter()
            .map(|(id, d)| NodeDoc {
                id: id.as_str().to_string(),
                du_max: Dec(d.du_max.clone()),
                load: d.load.as_ref().map(|l| LoadDoc {
                    p: Dec(l.p_active.clone()),
                    q: Dec(l.q_reactive.clone()),
                    w: Dec(l.weight.clone()),
                }),
                source: d.source.as_ref().map(|s| SourceDoc {
                    p_min: Dec(s.p_min.clone()),
                    p_max: Dec(s.p_max.clone()),
                    q_min: Dec(s.q_min.clone()),
                    q_max: Dec(s.q_max.clone()),
                }),
            })
            .collect(),
        branches: net
            .branches
            .iter()
            .map(|b| {
                let (lo, hi) = b.id.endpoints();
                BranchDoc {
                    from: lo.as_str().to_string(),
                    to: hi.as_str().to_string(),
                    r: Dec(b.r.clone()),
                    x: Dec(b.x.clone()),
                    p_max: Dec(b.p_max.clone()),
                    q_max: Dec(b.q_max.clone()),
                }
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance serialization");
    text.push('\n');
    text
}
