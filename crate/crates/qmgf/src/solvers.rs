//! Classical solvers over integer QUBOs.
//!
//! Three engines with different contracts:
//!
//! * `solve_exhaustive` - Gray-code sweep of every assignment; exact, only
//!   for models whose full dimension fits the bit limit.
//! * `solve_exact_bb`   - exact branch and bound over the decision bits
//!   (primary + product bits). Slack fibers are never branched on: for a
//!   fixed decision assignment the best slack total is the clamp of the
//!   negated residual into [0, range], so each leaf is costed in closed
//!   form and the search stays sound for models whose slack block would be
//!   far too wide to enumerate.
//! * `sample_sa`        - Metropolis single-flip annealing, one independent
//!   chain per requested sample. Chains are seeded per index, so results
//!   do not depend on the worker count.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::formulation::{Sense, VarKind};
use crate::lowering::{slack_weights, LoweredModel, QuboModel};

/// Full enumeration refuses models wider than this by default.
pub const DEFAULT_BIT_LIMIT: usize = 24;
/// Branch and bound refuses models with more decision bits than this.
pub const DEFAULT_DECISION_LIMIT: usize = 44;
/// Degenerate ground states kept per exhaustive solve.
const GROUND_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveError {
    TooLarge { bits: usize, limit: usize },
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::TooLarge { bits, limit } => {
                write!(f, "model needs {bits} bits, limit is {limit}")
            }
        }
    }
}

impl std::error::Error for SolveError {}

// ===== sample sets =====

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub energy: i64,
    pub bits: Vec<bool>,
    /// How many times this exact state was observed (1 for exact solvers).
    pub count: u64,
}

impl Sample {
    pub fn bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Samples sorted by (energy, bits); equal states are merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub dim: usize,
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn from_raw(dim: usize, mut raw: Vec<(i64, Vec<bool>)>) -> Self {
        raw.sort();
        let mut samples: Vec<Sample> = Vec::new();
        for (energy, bits) in raw {
            match samples.last_mut() {
                Some(s) if s.energy == energy && s.bits == bits => s.count += 1,
                _ => samples.push(Sample { energy, bits, count: 1 }),
            }
        }
        SampleSet { dim, samples }
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn ground_energy(&self) -> Option<i64> {
        self.best().map(|s| s.energy)
    }

    pub fn total_count(&self) -> u64 {
        self.samples.iter().map(|s| s.count).sum()
    }

    /// Weighted fraction of observations sitting at the lowest seen energy.
    pub fn ground_probability(&self) -> f64 {
        let total = self.total_count();
        if total == 0 {
            return 0.0;
        }
        let ground = self.samples[0].energy;
        let at: u64 = self.samples.iter().take_while(|s| s.energy == ground).map(|s| s.count).sum();
        at as f64 / total as f64
    }

    /// CSV rows `energy,count,bitstring`, lowest energy first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,count,bitstring\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.energy, s.count, s.bitstring()));
        }
        out
    }

    /// Equal-width integer bins over the observed energy span.
    pub fn energy_histogram(&self, bins: usize) -> Vec<HistogramBin> {
        if self.samples.is_empty() || bins == 0 {
            return Vec::new();
        }
        let lo = self.samples[0].energy;
        let hi = self.samples.last().unwrap().energy;
        let span = (hi - lo + 1) as u64;
        let width = span.div_ceil(bins as u64).max(1) as i64;
        let n = span.div_ceil(width as u64) as usize;
        let mut out: Vec<HistogramBin> = (0..n)
            .map(|k| HistogramBin {
                lo: lo + k as i64 * width,
                hi: lo + (k as i64 + 1) * width - 1,
                count: 0,
            })
            .collect();
        for s in &self.samples {
            let k = ((s.energy - lo) / width) as usize;
            out[k].count += s.count;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramBin {
    pub lo: i64,
    pub hi: i64,
    pub count: u64,
}

/// CSV rows `bin_lo,bin_hi,count`.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in bins {
        out.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
    }
    out
}

// ===== exhaustive =====

/// Neighbor lists: diag[i] plus (j, c_ij) pairs per variable.
fn adjacency(q: &QuboModel) -> (Vec<i64>, Vec<Vec<(usize, i64)>>) {
    let mut diag = vec![0i64; q.dim];
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); q.dim];
    for (&(i, j), &c) in &q.coeffs {
        if i == j {
            diag[i] = c;
        } else {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
    }
    (diag, adj)
}

/// Energy change from flipping bit i in state x.
fn flip_delta(diag: &[i64], adj: &[Vec<(usize, i64)>], x: &[bool], i: usize) -> i64 {
    let mut field = diag[i];
    for &(j, c) in &adj[i] {
        if x[j] {
            field += c;
        }
    }
    if x[i] {
        -field
    } else {
        field
    }
}

/// Visits all 2^dim assignments in Gray-code order with O(deg) updates and
/// returns every ground state (capped) with the exact minimum energy.
pub fn solve_exhaustive(q: &QuboModel, bit_limit: usize) -> Result<SampleSet, SolveError> {
    if q.dim > bit_limit {
        return Err(SolveError::TooLarge { bits: q.dim, limit: bit_limit });
    }
    let (diag, adj) = adjacency(q);
    let mut x = vec![false; q.dim];
    let mut energy = q.offset;
    let mut best = energy;
    let mut ground: Vec<Vec<bool>> = vec![x.clone()];

    let total: u64 = 1u64 << q.dim;
    for step in 1..total {
        let i = step.trailing_zeros() as usize;
        energy += flip_delta(&diag, &adj, &x, i);
        x[i] = !x[i];
        if energy < best {
            best = energy;
            ground.clear();
            ground.push(x.clone());
        } else if energy == best && ground.len() < GROUND_CAP {
            ground.push(x.clone());
        }
    }

    Ok(SampleSet::from_raw(q.dim, ground.into_iter().map(|g| (best, g)).collect()))
}

// ===== exact branch and bound =====

struct BbConstraint {
    /// Decision-bit coefficients of the pre-slack left side.
    terms: Vec<(usize, i64)>,
    constant: i64,
    /// Feasible slack window is [-range, 0] for the residual.
    range: i64,
    /// Residual already contributed by assigned bits, plus the reachable
    /// interval of the unassigned remainder.
    cur: i64,
    pend_neg: i64,
    pend_pos: i64,
}

impl BbConstraint {
    /// Squared distance from the reachable residual interval to [-range, 0].
    fn bound(&self) -> i128 {
        let lo = self.cur + self.pend_neg;
        let hi = self.cur + self.pend_pos;
        let d = if lo > 0 {
            lo
        } else if hi < -self.range {
            -self.range - hi
        } else {
            0
        };
        (d as i128) * (d as i128)
    }
}

struct BbGate {
    a: usize,
    b: usize,
    y: usize,
}

struct BbState {
    constraints: Vec<BbConstraint>,
    gates: Vec<BbGate>,
    var_constraints: Vec<Vec<(usize, i64)>>,
    obj: Vec<i64>,
    obj_cur: i64,
    obj_pend_pos: i64,
    assigned: Vec<Option<bool>>,
    n_dec: usize,
}

impl BbState {
    fn assign(&mut self, v: usize, value: bool) {
        self.assigned[v] = Some(value);
        for &(ci, c) in &self.var_constraints[v] {
            let con = &mut self.constraints[ci];
            if c > 0 {
                con.pend_pos -= c;
            } else {
                con.pend_neg -= c;
            }
            if value {
                con.cur += c;
            }
        }
        let o = self.obj[v];
        if o > 0 {
            self.obj_pend_pos -= o;
        }
        if value {
            self.obj_cur += o;
        }
    }

    fn unassign(&mut self, v: usize) {
        let value = self.assigned[v].take().expect("unassign order");
        for &(ci, c) in &self.var_constraints[v] {
            let con = &mut self.constraints[ci];
            if c > 0 {
                con.pend_pos += c;
            } else {
                con.pend_neg += c;
            }
            if value {
                con.cur -= c;
            }
        }
        let o = self.obj[v];
        if o > 0 {
            self.obj_pend_pos += o;
        }
        if value {
            self.obj_cur -= o;
        }
    }

    /// Sound lower bound on the reachable energy below this node, given the
    /// uniform penalty weight.
    fn bound(&self, m: i128) -> i128 {
        let mut acc = -(self.obj_cur as i128) - (self.obj_pend_pos as i128);
        for con in &self.constraints {
            acc += m * con.bound();
        }
        for g in &self.gates {
            if let (Some(a), Some(b), Some(y)) =
                (self.assigned[g.a], self.assigned[g.b], self.assigned[g.y])
            {
                acc += m * gate_penalty(a, b, y) as i128;
            }
        }
        acc
    }
}

fn gate_penalty(a: bool, b: bool, y: bool) -> i64 {
    // ab - 2ay - 2by + 3y
    let (a, b, y) = (a as i64, b as i64, y as i64);
    a * b - 2 * a * y - 2 * b * y + 3 * y
}

fn big_to_i64(v: &BigInt, place: &str) -> i64 {
    v.to_i64().unwrap_or_else(|| panic!("{place} exceeds i64"))
}

/// Exact minimum of the lowered model, branching only on decision bits.
/// The returned sample carries a full assignment with the canonical slack
/// pattern (top weight first, then binary remainder).
pub fn solve_exact_bb(model: &LoweredModel, decision_limit: usize) -> Result<SampleSet, SolveError> {
    let reg = &model.program.registry;
    let n_dec = reg.first_slack();
    if n_dec > decision_limit {
        return Err(SolveError::TooLarge { bits: n_dec, limit: decision_limit });
    }
    let m = big_to_i64(&model.plan.constraint_weight, "penalty") as i128;
    let gate_m = big_to_i64(&model.plan.gate_weight, "gate penalty") as i128;
    assert_eq!(m, gate_m, "branch and bound assumes a uniform penalty");

    // strip slack terms back off the equalities
    let mut constraints = Vec::new();
    for (ci, c) in model.program.constraints.iter().enumerate() {
        debug_assert_eq!(c.sense, Sense::Eq);
        let mut terms = Vec::new();
        for (&v, coef) in &c.lhs.terms {
            if v < n_dec {
                terms.push((v, big_to_i64(coef.numer(), "coefficient")));
            }
        }
        let range = big_to_i64(&model.slack_ranges[ci], "slack range");
        let pend_neg: i64 = terms.iter().map(|&(_, c)| c.min(0)).sum();
        let pend_pos: i64 = terms.iter().map(|&(_, c)| c.max(0)).sum();
        let constant = big_to_i64(c.lhs.constant.numer(), "constant");
        constraints.push(BbConstraint {
            terms,
            constant,
            range,
            cur: constant,
            pend_neg,
            pend_pos,
        });
    }

    let mut var_constraints: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n_dec];
    for (ci, con) in constraints.iter().enumerate() {
        for &(v, c) in &con.terms {
            var_constraints[v].push((ci, c));
        }
    }
    let mut obj = vec![0i64; n_dec];
    for (&v, c) in &model.program.objective.terms {
        obj[v] = big_to_i64(c.numer(), "objective coefficient");
    }
    let obj_pend_pos: i64 = obj.iter().map(|&c| c.max(0)).sum();

    let gates: Vec<BbGate> =
        model.program.gates.iter().map(|g| BbGate { a: g.a, b: g.b, y: g.y }).collect();

    let mut state = BbState {
        constraints,
        gates,
        var_constraints,
        obj,
        obj_cur: 0,
        obj_pend_pos,
        assigned: vec![None; n_dec],
        n_dec,
    };

    // leaf energy for a full decision assignment, choosing optimal slacks
    let leaf_energy = |st: &BbState| -> i128 {
        let mut acc = -(st.obj_cur as i128);
        for con in &st.constraints {
            let r = con.cur;
            let s = (-r).clamp(0, con.range);
            let d = (r + s) as i128;
            acc += m * d * d;
        }
        for g in &st.gates {
            let (a, b, y) = (
                st.assigned[g.a].unwrap(),
                st.assigned[g.b].unwrap(),
                st.assigned[g.y].unwrap(),
            );
            acc += m * gate_penalty(a, b, y) as i128;
        }
        acc
    };

    // greedy descent incumbent from the all-zero assignment
    let mut seed_bits = vec![false; n_dec];
    for v in 0..n_dec {
        state.assign(v, false);
    }
    let mut seed_energy = leaf_energy(&state);
    loop {
        let mut improved = None;
        for (v, &sb) in seed_bits.iter().enumerate() {
            state.unassign(v);
            state.assign(v, !sb);
            let e = leaf_energy(&state);
            state.unassign(v);
            state.assign(v, sb);
            if e < seed_energy {
                seed_energy = e;
                improved = Some(v);
            }
        }
        match improved {
            Some(v) => {
                seed_bits[v] = !seed_bits[v];
                state.unassign(v);
                state.assign(v, seed_bits[v]);
            }
            None => break,
        }
    }
    for v in (0..n_dec).rev() {
        state.unassign(v);
    }

    let mut best_energy = seed_energy;
    let mut best_bits = seed_bits;

    // depth-first search, better-looking child first
    fn dfs(
        state: &mut BbState,
        depth: usize,
        m: i128,
        best_energy: &mut i128,
        best_bits: &mut Vec<bool>,
        leaf_energy: &dyn Fn(&BbState) -> i128,
    ) {
        if depth == state.n_dec {
            let e = leaf_energy(state);
            if e < *best_energy {
                *best_energy = e;
                *best_bits = state.assigned.iter().map(|b| b.unwrap()).collect();
            }
            return;
        }
        let mut order = [false, true];
        state.assign(depth, false);
        let b0 = state.bound(m);
        state.unassign(depth);
        state.assign(depth, true);
        let b1 = state.bound(m);
        state.unassign(depth);
        if b1 < b0 {
            order = [true, false];
        }
        for value in order {
            let b = if value { b1 } else { b0 };
            if b >= *best_energy {
                continue;
            }
            state.assign(depth, value);
            dfs(state, depth + 1, m, best_energy, best_bits, leaf_energy);
            state.unassign(depth);
        }
    }

    dfs(&mut state, 0, m, &mut best_energy, &mut best_bits, &leaf_energy);

    // rebuild the full bit vector with canonical slack patterns
    let mut bits = vec![false; reg.len()];
    bits[..n_dec].copy_from_slice(&best_bits);
    let mut slack_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (idx, kind) in reg.iter() {
        if let VarKind::SlackBit { constraint, bit } = kind {
            slack_index.insert((*constraint, *bit), idx);
        }
    }
    for (ci, _) in model.program.constraints.iter().enumerate() {
        let range = big_to_i64(&model.slack_ranges[ci], "slack range");
        if range == 0 {
            continue;
        }
        let mut r = state.constraints[ci].constant;
        for &(v, c) in &state.constraints[ci].terms {
            if best_bits[v] {
                r += c;
            }
        }
        let mut s = (-r).clamp(0, range);
        let weights = slack_weights(&BigInt::from(range));
        for (bit, w) in weights.iter().enumerate().rev() {
            let w = big_to_i64(w, "slack weight");
            if s >= w {
                s -= w;
                bits[slack_index[&(ci, bit)]] = true;
            }
        }
        debug_assert_eq!(s, 0, "slack decomposition left a remainder");
    }

    let energy = i64::try_from(best_energy).expect("energy fits i64");
    debug_assert_eq!(model.qubo.energy(&bits), energy, "leaf costing disagrees with the QUBO");
    Ok(SampleSet::from_raw(reg.len(), vec![(energy, bits)]))
}

// ===== simulated annealing =====

#[derive(Debug, Clone, PartialEq)]
pub struct SaParams {
    pub samples: u32,
    pub sweeps: u32,
    pub seed: u64,
    /// Absolute inverse-temperature endpoints. Left unset, they are derived
    /// from the model's per-variable flip scales.
    pub beta_range: Option<(f64, f64)>,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams { samples: 200, sweeps: 1000, seed: 0, beta_range: None }
    }
}

/// Schedule endpoints from single-flip energy scales: hot enough that even
/// the stiffest variable moves half the time, cold enough that a move of the
/// smallest linear bias is all but rejected. Penalty models mix coefficient
/// magnitudes across many orders, so one global coefficient scale will not
/// do, and total per-variable stiffness overshoots the late-stage barriers
/// (near a residual of zero a slack flip costs about one penalty unit, far
/// less than that bit's worst case).
fn default_beta_range(dim: usize, diag: &[i64], adj: &[Vec<(usize, i64)>]) -> (f64, f64) {
    let mut stiffest = 0f64;
    let mut smallest_bias = f64::INFINITY;
    for i in 0..dim {
        let mut s = diag[i].abs() as f64;
        for &(_, c) in &adj[i] {
            s += c.abs() as f64;
        }
        stiffest = stiffest.max(s);
        if diag[i] != 0 {
            smallest_bias = smallest_bias.min(diag[i].abs() as f64);
        }
    }
    if stiffest == 0.0 {
        return (0.1, 10.0); // all flips are free
    }
    let hot = 2f64.ln() / stiffest;
    let cold_scale = if smallest_bias.is_finite() { smallest_bias } else { stiffest };
    let cold = (100f64.ln() / cold_scale).max(10.0 * hot);
    (hot, cold)
}

/// One independent annealing chain per sample. Chain r is seeded from
/// seed XOR r, so any chain can be reproduced in isolation.
pub fn sample_sa(q: &QuboModel, params: &SaParams) -> SampleSet {
    let (diag, adj) = adjacency(q);
    let (b0, b1) = params.beta_range.unwrap_or_else(|| default_beta_range(q.dim, &diag, &adj));
    let sweeps = params.sweeps as usize;
    let betas: Vec<f64> = if sweeps <= 1 {
        vec![b1; sweeps]
    } else {
        let ratio = b1 / b0;
        (0..sweeps)
            .map(|t| b0 * ratio.powf(t as f64 / (sweeps - 1) as f64))
            .collect()
    };

    let raw: Vec<(i64, Vec<bool>)> = (0..params.samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ r);
            let mut x: Vec<bool> = (0..q.dim).map(|_| rng.gen()).collect();
            let mut energy = q.energy(&x);
            for &beta in &betas {
                for i in 0..q.dim {
                    let delta = flip_delta(&diag, &adj, &x, i);
                    if delta <= 0 || rng.gen::<f64>() < (-beta * delta as f64).exp() {
                        x[i] = !x[i];
                        energy += delta;
                    }
                }
            }
            debug_assert_eq!(energy, q.energy(&x), "incremental energy drifted");
            (energy, x)
        })
        .collect();

    SampleSet::from_raw(q.dim, raw)
}
