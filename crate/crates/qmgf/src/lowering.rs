//! Lowers a constrained binary program to an integer QUBO.
//!
//! Stages, in order:
//!
//! 1. `scale_to_integers` - the objective is multiplied by exactly
//!    10^scale_power; each constraint by the smallest power of ten that
//!    clears its denominators (capped at scale_power, so a single knob
//!    bounds all magnitudes).
//! 2. `add_slacks` - every inequality L <= 0 becomes an equality
//!    L + sum(w_b s_b) = 0 over fresh slack bits whose weights are powers
//!    of two with the top weight truncated, covering the residual range
//!    [0, R] exactly and never overshooting.
//! 3. `derive_penalties` - the uniform multiplier M = S + 1 where S is the
//!    largest achievable scaled objective. A violated constraint then costs
//!    more than the whole objective can pay back; with the nonnegative
//!    objectives the formulation emits, ground states are exactly the
//!    feasible optima.
//! 4. `compose_qubo` - energy = -objective + M * sum(L_c^2) + M *
//!    sum(and_penalty), expanded over x^2 = x into upper-triangular
//!    integer coefficients plus a constant offset.
//!
//! `to_ising` converts x = (1+z)/2 exactly; every h/J value is a multiple
//! of 1/4 so the text form always terminates.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::decimal::{format_rat, pow10_exponent};
use crate::formulation::{BinaryProgram, LinearExpr, Sense, VarKind};
use crate::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoweringError {
    /// A coefficient's denominator has a prime factor other than 2 or 5.
    NonTerminating { place: String },
    /// scale_power is too small to clear a denominator.
    ScaleTooSmall { place: String, required: u32 },
    /// A constraint can never hold over binary assignments.
    InfeasibleConstraint { label: String },
    /// A composed coefficient fell outside i64.
    Overflow { place: String },
    /// Penalty weights must be positive.
    BadPenalty { given: i64 },
}

impl std::fmt::Display for LoweringError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoweringError::NonTerminating { place } => {
                write!(f, "non-terminating coefficient in {place}")
            }
            LoweringError::ScaleTooSmall { place, required } => {
                write!(f, "{place} needs scale power {required}")
            }
            LoweringError::InfeasibleConstraint { label } => {
                write!(f, "constraint {label} can never be satisfied")
            }
            LoweringError::Overflow { place } => write!(f, "coefficient overflow in {place}"),
            LoweringError::BadPenalty { given } => write!(f, "penalty must be positive, got {given}"),
        }
    }
}

impl std::error::Error for LoweringError {}

// ===== stage 1: integer scaling =====

/// Program with integral coefficients plus the powers of ten applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProgram {
    pub program: BinaryProgram,
    pub objective_power: u32,
    /// Power applied to constraints[i], parallel to program.constraints.
    pub constraint_powers: Vec<u32>,
}

fn required_power(expr: &LinearExpr, place: &str) -> Result<u32, LoweringError> {
    let mut k = 0u32;
    for c in expr.terms.values().chain(std::iter::once(&expr.constant)) {
        let p = pow10_exponent(c)
            .ok_or_else(|| LoweringError::NonTerminating { place: place.to_string() })?;
        k = k.max(p);
    }
    Ok(k)
}

fn pow10(k: u32) -> Rat {
    Rat::from_integer(BigInt::from(10u8).pow(k))
}

pub fn scale_to_integers(
    bp: &BinaryProgram,
    scale_power: u32,
) -> Result<ScaledProgram, LoweringError> {
    let mut program = bp.clone();

    let need = required_power(&program.objective, "objective")?;
    if need > scale_power {
        return Err(LoweringError::ScaleTooSmall { place: "objective".into(), required: need });
    }
    program.objective.scale(pow10(scale_power));

    let mut constraint_powers = Vec::with_capacity(program.constraints.len());
    for c in &mut program.constraints {
        let k = required_power(&c.lhs, &c.label)?;
        if k > scale_power {
            return Err(LoweringError::ScaleTooSmall { place: c.label.clone(), required: k });
        }
        c.lhs.scale(pow10(k));
        constraint_powers.push(k);
    }

    Ok(ScaledProgram { program, objective_power: scale_power, constraint_powers })
}

// ===== stage 2: slack expansion =====

/// Integer-coefficient program whose constraints are all equalities.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackedProgram {
    pub program: BinaryProgram,
    pub objective_power: u32,
    pub constraint_powers: Vec<u32>,
    /// Residual range per constraint; 0 for native equalities.
    pub slack_ranges: Vec<BigInt>,
}

fn as_int(r: &Rat) -> BigInt {
    debug_assert!(r.is_integer(), "scaled coefficient {r} not integral");
    r.numer().clone()
}

/// Power-of-two weights with a truncated top that sum to `range` and whose
/// subset sums cover [0, range] exactly.
pub fn slack_weights(range: &BigInt) -> Vec<BigInt> {
    if range.is_zero() {
        return Vec::new();
    }
    assert!(range.is_positive());
    let bits = range.bits(); // ceil(log2(range+1)) for range >= 1
    let mut weights = Vec::with_capacity(bits as usize);
    let mut acc = BigInt::zero();
    for b in 0..bits.saturating_sub(1) {
        let w = BigInt::one() << b;
        acc += &w;
        weights.push(w);
    }
    weights.push(range - acc); // top weight, at most 2^(bits-1)
    weights
}

pub fn add_slacks(sp: &ScaledProgram) -> Result<SlackedProgram, LoweringError> {
    let mut program = sp.program.clone();
    let mut slack_ranges = Vec::with_capacity(program.constraints.len());

    for ci in 0..program.constraints.len() {
        let (sense, min) = {
            let c = &program.constraints[ci];
            (c.sense, c.lhs.interval_min())
        };
        if sense == Sense::Eq {
            slack_ranges.push(BigInt::zero());
            continue;
        }
        if min.is_positive() {
            let label = program.constraints[ci].label.clone();
            return Err(LoweringError::InfeasibleConstraint { label });
        }
        let range = as_int(&-min);
        for (bit, w) in slack_weights(&range).into_iter().enumerate() {
            let idx = program.registry.push(VarKind::SlackBit { constraint: ci, bit });
            program.constraints[ci].lhs.add_term(idx, Rat::from_integer(w));
        }
        let c = &mut program.constraints[ci];
        c.sense = Sense::Eq;
        slack_ranges.push(range);
    }

    Ok(SlackedProgram {
        program,
        objective_power: sp.objective_power,
        constraint_powers: sp.constraint_powers.clone(),
        slack_ranges,
    })
}

// ===== stage 3: penalty weights =====

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyPlan {
    /// Multiplier for every squared constraint residual.
    pub constraint_weight: BigInt,
    /// Multiplier for every AND-gate penalty.
    pub gate_weight: BigInt,
}

/// Uniform M = S + 1 where S bounds the scaled objective from above. Every
/// unit of constraint or gate violation then costs more than the whole
/// objective can pay back. Strict separation of feasible optima relies on
/// a nonnegative objective, which holds for every model this crate builds.
pub fn derive_penalties(sp: &SlackedProgram) -> PenaltyPlan {
    let s = sp.program.objective.interval_max();
    let s = as_int(&s).max(BigInt::zero());
    let m = s + BigInt::one();
    PenaltyPlan { constraint_weight: m.clone(), gate_weight: m }
}

/// User-supplied uniform penalty.
pub fn penalty_plan(m: i64) -> Result<PenaltyPlan, LoweringError> {
    if m <= 0 {
        return Err(LoweringError::BadPenalty { given: m });
    }
    Ok(PenaltyPlan { constraint_weight: BigInt::from(m), gate_weight: BigInt::from(m) })
}

// ===== stage 4: QUBO composition =====

/// Upper-triangular integer QUBO: energy(x) = offset
/// + sum over (i,j) of coeffs[(i,j)] * x_i * x_j, with (i,i) linear terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuboModel {
    pub dim: usize,
    pub coeffs: BTreeMap<(usize, usize), i64>,
    pub offset: i64,
}

impl QuboModel {
    pub fn energy(&self, bits: &[bool]) -> i64 {
        assert_eq!(bits.len(), self.dim, "assignment length");
        let mut acc = self.offset as i128;
        for (&(i, j), &c) in &self.coeffs {
            if bits[i] && bits[j] {
                acc += c as i128;
            }
        }
        i64::try_from(acc).expect("energy fits i64")
    }

    pub fn max_abs_coeff(&self) -> i64 {
        self.coeffs.values().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Text form: `dim offset` header then `i j coeff` triples in order.
    pub fn to_qubo_string(&self) -> String {
        let mut out = format!("{} {}\n", self.dim, self.offset);
        for (&(i, j), &c) in &self.coeffs {
            out.push_str(&format!("{i} {j} {c}\n"));
        }
        out
    }
}

struct QuboBuilder {
    dim: usize,
    coeffs: BTreeMap<(usize, usize), BigInt>,
    offset: BigInt,
}

impl QuboBuilder {
    fn new(dim: usize) -> Self {
        Self { dim, coeffs: BTreeMap::new(), offset: BigInt::zero() }
    }

    fn add(&mut self, i: usize, j: usize, v: BigInt) {
        if v.is_zero() {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let slot = self.coeffs.entry(key).or_insert_with(BigInt::zero);
        *slot += v;
        if slot.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    /// Adds weight * expr^2 using x^2 = x.
    fn add_square(&mut self, expr: &LinearExpr, weight: &BigInt) {
        let terms: Vec<(usize, BigInt)> =
            expr.terms.iter().map(|(&v, c)| (v, as_int(c))).collect();
        let constant = as_int(&expr.constant);
        for (idx, (i, a)) in terms.iter().enumerate() {
            self.add(*i, *i, weight * a * a + weight * BigInt::from(2) * &constant * a);
            for (j, b) in &terms[idx + 1..] {
                self.add(*i, *j, weight * BigInt::from(2) * a * b);
            }
        }
        self.offset += weight * &constant * &constant;
    }

    fn finish(self) -> Result<QuboModel, LoweringError> {
        let mut coeffs = BTreeMap::new();
        for (k, v) in self.coeffs {
            let c = v.to_i64().ok_or_else(|| LoweringError::Overflow {
                place: format!("coefficient ({}, {})", k.0, k.1),
            })?;
            coeffs.insert(k, c);
        }
        let offset = self
            .offset
            .to_i64()
            .ok_or_else(|| LoweringError::Overflow { place: "offset".into() })?;
        Ok(QuboModel { dim: self.dim, coeffs, offset })
    }
}

/// energy = -objective + M * sum(residual^2) + M * sum(ab - 2ay - 2by + 3y).
pub fn compose_qubo(sp: &SlackedProgram, plan: &PenaltyPlan) -> Result<QuboModel, LoweringError> {
    let mut b = QuboBuilder::new(sp.program.registry.len());

    for (&v, c) in &sp.program.objective.terms {
        b.add(v, v, -as_int(c));
    }
    b.offset -= as_int(&sp.program.objective.constant);

    for c in &sp.program.constraints {
        debug_assert_eq!(c.sense, Sense::Eq, "inequality survived slack stage");
        b.add_square(&c.lhs, &plan.constraint_weight);
    }

    for g in &sp.program.gates {
        let m = &plan.gate_weight;
        b.add(g.a, g.b, m.clone());
        b.add(g.a, g.y, m * BigInt::from(-2));
        b.add(g.b, g.y, m * BigInt::from(-2));
        b.add(g.y, g.y, m * BigInt::from(3));
    }

    b.finish()
}

// ===== Ising form =====

/// energy(z) = offset - sum(J_ij z_i z_j) - sum(h_i z_i), z in {-1,+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub dim: usize,
    pub h: Vec<Rat>,
    pub couplings: BTreeMap<(usize, usize), Rat>,
    pub offset: Rat,
}

impl IsingModel {
    pub fn energy(&self, spins: &[i8]) -> Rat {
        assert_eq!(spins.len(), self.dim, "spin vector length");
        let spin = |i: usize| Rat::from_integer(BigInt::from(spins[i]));
        let mut acc = self.offset.clone();
        for (i, h) in self.h.iter().enumerate() {
            acc -= h * spin(i);
        }
        for (&(i, j), jj) in &self.couplings {
            acc -= jj * spin(i) * spin(j);
        }
        acc
    }

    /// Text form: `dim offset` header, `h i value` lines, `J i j value` lines.
    pub fn to_ising_string(&self) -> String {
        let mut out = format!("{} {}\n", self.dim, format_rat(&self.offset));
        for (i, h) in self.h.iter().enumerate() {
            if !h.is_zero() {
                out.push_str(&format!("h {i} {}\n", format_rat(h)));
            }
        }
        for (&(i, j), c) in &self.couplings {
            out.push_str(&format!("J {i} {j} {}\n", format_rat(c)));
        }
        out
    }
}

/// Exact change of variables x = (1 + z) / 2.
pub fn to_ising(q: &QuboModel) -> IsingModel {
    let quarter = Rat::new(BigInt::one(), BigInt::from(4));
    let half = Rat::new(BigInt::one(), BigInt::from(2));
    let mut h = vec![Rat::zero(); q.dim];
    let mut couplings: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
    let mut offset = Rat::from_integer(BigInt::from(q.offset));

    for (&(i, j), &c) in &q.coeffs {
        let c = Rat::from_integer(BigInt::from(c));
        if i == j {
            // c x = c/2 + (c/2) z
            h[i] -= &c * &half;
            offset += &c * &half;
        } else {
            // c x_i x_j = c/4 (1 + z_i + z_j + z_i z_j)
            let q4 = &c * &quarter;
            h[i] -= &q4;
            h[j] -= &q4;
            let slot = couplings.entry((i, j)).or_insert_with(Rat::zero);
            *slot -= &q4;
            offset += &q4;
        }
    }
    couplings.retain(|_, v| !v.is_zero());

    IsingModel { dim: q.dim, h, couplings, offset }
}

// ===== top-level pipeline =====

#[derive(Debug, Clone, PartialEq)]
pub struct LoweredModel {
    /// Slacked integer program; its registry names every QUBO variable.
    pub program: BinaryProgram,
    pub objective_power: u32,
    pub constraint_powers: Vec<u32>,
    pub slack_ranges: Vec<BigInt>,
    pub plan: PenaltyPlan,
    pub qubo: QuboModel,
}

pub fn lower(
    bp: &BinaryProgram,
    scale_power: u32,
    penalty: Option<i64>,
) -> Result<LoweredModel, LoweringError> {
    let scaled = scale_to_integers(bp, scale_power)?;
    let slacked = add_slacks(&scaled)?;
    let plan = match penalty {
        Some(m) => penalty_plan(m)?,
        None => derive_penalties(&slacked),
    };
    let qubo = compose_qubo(&slacked, &plan)?;
    Ok(LoweredModel {
        program: slacked.program,
        objective_power: slacked.objective_power,
        constraint_powers: slacked.constraint_powers,
        slack_ranges: slacked.slack_ranges,
        plan,
        qubo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{AndGate, Constraint, VariableRegistry};

    fn int(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    fn two_var_program(con: Constraint) -> BinaryProgram {
        let mut registry = VariableRegistry::default();
        registry.push(VarKind::Lambda(crate::network::NodeId::new("a")));
        registry.push(VarKind::Lambda(crate::network::NodeId::new("b")));
        BinaryProgram {
            registry,
            constraints: vec![con],
            gates: Vec::new(),
            objective: LinearExpr::zero(),
        }
    }

    #[test]
    fn slack_weights_match_known_ranges() {
        // x1 + x2 - 3 <= 0: range 3 -> {1, 2}
        assert_eq!(slack_weights(&BigInt::from(3)), [BigInt::from(1), BigInt::from(2)]);
        // -x1 - 1 <= 0: range 2 -> {1, 1}
        assert_eq!(slack_weights(&BigInt::from(2)), [BigInt::from(1), BigInt::from(1)]);
        assert_eq!(slack_weights(&BigInt::from(1)), [BigInt::from(1)]);
        assert!(slack_weights(&BigInt::zero()).is_empty());
        // top weight truncated: 5 -> {1, 2, 2}
        assert_eq!(
            slack_weights(&BigInt::from(5)),
            [BigInt::from(1), BigInt::from(2), BigInt::from(2)]
        );
    }

    #[test]
    fn slack_weights_cover_every_residual_exactly() {
        for range in 1..200i64 {
            let ws = slack_weights(&BigInt::from(range));
            let mut reachable = vec![false; range as usize + 1];
            let n = ws.len();
            for mask in 0..(1u32 << n) {
                let total: BigInt = ws
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, w)| w.clone())
                    .sum();
                let t = total.to_i64().unwrap();
                assert!(t <= range, "range {range} overshoots to {t}");
                reachable[t as usize] = true;
            }
            assert!(reachable.iter().all(|&r| r), "range {range} has gaps");
        }
    }

    #[test]
    fn unsatisfiable_inequality_is_reported() {
        let mut lhs = LinearExpr::zero();
        lhs.add_term(0, int(1));
        lhs.add_constant(int(2));
        let bp = two_var_program(Constraint { label: "t".into(), lhs, sense: Sense::Le });
        let scaled = scale_to_integers(&bp, 3).unwrap();
        match add_slacks(&scaled) {
            Err(LoweringError::InfeasibleConstraint { label }) => assert_eq!(label, "t"),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn tight_inequality_becomes_pure_equality() {
        // x1 - 1 <= 0 holds with residual range 1; x1 + x2 <= 0 pins both to 0
        let mut lhs = LinearExpr::zero();
        lhs.add_term(0, int(1));
        lhs.add_term(1, int(1));
        let bp = two_var_program(Constraint { label: "t".into(), lhs, sense: Sense::Le });
        let slacked = add_slacks(&scale_to_integers(&bp, 0).unwrap()).unwrap();
        assert_eq!(slacked.slack_ranges, [BigInt::zero()]);
        assert_eq!(slacked.program.registry.len(), 2); // no slack bits
        assert_eq!(slacked.program.constraints[0].sense, Sense::Eq);
    }

    #[test]
    fn equality_penalty_matches_hand_expansion() {
        // (x1 + x2 - 1)^2 with M = 1: 2 x1 x2 - x1 - x2 + 1
        let mut lhs = LinearExpr::zero();
        lhs.add_term(0, int(1));
        lhs.add_term(1, int(1));
        lhs.add_constant(int(-1));
        let bp = two_var_program(Constraint { label: "t".into(), lhs, sense: Sense::Eq });
        let lowered = lower(&bp, 0, Some(1)).unwrap();
        let q = &lowered.qubo;
        assert_eq!(q.offset, 1);
        assert_eq!(q.coeffs[&(0, 1)], 2);
        assert_eq!(q.coeffs[&(0, 0)], -1);
        assert_eq!(q.coeffs[&(1, 1)], -1);
    }

    #[test]
    fn and_gate_penalty_table() {
        let mut registry = VariableRegistry::default();
        registry.push(VarKind::Lambda(crate::network::NodeId::new("a")));
        registry.push(VarKind::Lambda(crate::network::NodeId::new("b")));
        registry.push(VarKind::AuxAnd(0, 1));
        let bp = BinaryProgram {
            registry,
            constraints: Vec::new(),
            gates: vec![AndGate { a: 0, b: 1, y: 2 }],
            objective: LinearExpr::zero(),
        };
        let q = lower(&bp, 0, Some(1)).unwrap().qubo;
        for bits in 0..8u8 {
            let x = [bits & 1 == 1, bits >> 1 & 1 == 1, bits >> 2 & 1 == 1];
            let want_zero = x[2] == (x[0] && x[1]);
            let e = q.energy(&x);
            if want_zero {
                assert_eq!(e, 0, "consistent gate at {x:?}");
            } else {
                assert!(e >= 1, "violated gate at {x:?} got {e}");
            }
        }
    }

    #[test]
    fn scale_picks_minimal_power_per_constraint() {
        let mut lhs = LinearExpr::zero();
        lhs.add_term(0, crate::decimal::parse_decimal("0.5").unwrap());
        let c1 = Constraint { label: "halves".into(), lhs, sense: Sense::Eq };
        let mut lhs = LinearExpr::zero();
        lhs.add_term(1, crate::decimal::parse_decimal("0.009").unwrap());
        let c2 = Constraint { label: "mills".into(), lhs, sense: Sense::Eq };
        let mut bp = two_var_program(c1);
        bp.constraints.push(c2);
        bp.objective.add_term(0, int(2));
        let scaled = scale_to_integers(&bp, 3).unwrap();
        assert_eq!(scaled.constraint_powers, [1, 3]);
        assert_eq!(scaled.objective_power, 3);
        assert_eq!(scaled.program.objective.terms[&0], int(2000));
        assert_eq!(scaled.program.constraints[0].lhs.terms[&0], int(5));
        assert_eq!(scaled.program.constraints[1].lhs.terms[&1], int(9));
    }

    #[test]
    fn scale_too_small_names_the_constraint() {
        let mut lhs = LinearExpr::zero();
        lhs.add_term(0, crate::decimal::parse_decimal("0.0001").unwrap());
        let bp = two_var_program(Constraint { label: "tiny".into(), lhs, sense: Sense::Eq });
        match scale_to_integers(&bp, 3) {
            Err(LoweringError::ScaleTooSmall { place, required }) => {
                assert_eq!(place, "tiny");
                assert_eq!(required, 4);
            }
            other => panic!("expected scale error, got {other:?}"),
        }
    }

    #[test]
    fn non_terminating_coefficient_rejected() {
        let mut lhs = LinearExpr::zero();
        lhs.add_term(0, Rat::new(BigInt::one(), BigInt::from(3)));
        let bp = two_var_program(Constraint { label: "third".into(), lhs, sense: Sense::Eq });
        assert!(matches!(
            scale_to_integers(&bp, 6),
            Err(LoweringError::NonTerminating { .. })
        ));
    }

    #[test]
    fn derived_penalty_exceeds_objective_reach() {
        let mut bp = two_var_program(Constraint {
            label: "t".into(),
            lhs: LinearExpr::zero(),
            sense: Sense::Eq,
        });
        bp.constraints.clear();
        bp.objective.add_term(0, crate::decimal::parse_decimal("1.0").unwrap());
        bp.objective.add_term(1, crate::decimal::parse_decimal("1.0").unwrap());
        let slacked = add_slacks(&scale_to_integers(&bp, 3).unwrap()).unwrap();
        let plan = derive_penalties(&slacked);
        assert_eq!(plan.constraint_weight, BigInt::from(2001));
    }

    #[test]
    fn ising_round_trip_agrees_on_all_assignments() {
        // small hand QUBO including diagonal, coupling, and offset
        let mut coeffs = BTreeMap::new();
        coeffs.insert((0, 0), 1i64);
        coeffs.insert((0, 1), 4);
        coeffs.insert((1, 2), -3);
        coeffs.insert((2, 2), 2);
        let q = QuboModel { dim: 3, coeffs, offset: 5 };
        let is = to_ising(&q);
        for bits in 0..8u8 {
            let x: Vec<bool> = (0..3).map(|i| bits >> i & 1 == 1).collect();
            let z: Vec<i8> = x.iter().map(|&b| if b { 1 } else { -1 }).collect();
            assert_eq!(Rat::from_integer(BigInt::from(q.energy(&x))), is.energy(&z));
        }
    }

    #[test]
    fn ising_matches_known_singletons() {
        // {(0,0): 1} -> h0 = -1/2, offset 1/2
        let mut coeffs = BTreeMap::new();
        coeffs.insert((0, 0), 1i64);
        let ising = to_ising(&QuboModel { dim: 1, coeffs, offset: 0 });
        assert_eq!(ising.h[0], Rat::new(BigInt::from(-1), BigInt::from(2)));
        assert_eq!(ising.offset, Rat::new(BigInt::one(), BigInt::from(2)));
        // {(0,1): 4} -> J01 = -1, h0 = h1 = -1, offset 1
        let mut coeffs = BTreeMap::new();
        coeffs.insert((0, 1), 4i64);
        let ising = to_ising(&QuboModel { dim: 2, coeffs, offset: 0 });
        assert_eq!(ising.couplings[&(0, 1)], -Rat::one());
        assert_eq!(ising.h, [-Rat::one(), -Rat::one()]);
        assert_eq!(ising.offset, Rat::one());
    }

    #[test]
    fn qubo_text_form_is_stable() {
        let mut coeffs = BTreeMap::new();
        coeffs.insert((0, 0), -7i64);
        coeffs.insert((0, 2), 12);
        let q = QuboModel { dim: 3, coeffs, offset: 9 };
        assert_eq!(q.to_qubo_string(), "3 9\n0 0 -7\n0 2 12\n");
        let ising = to_ising(&q);
        let text = ising.to_ising_string();
        assert!(text.starts_with("3 "));
        assert!(text.contains("\nJ 0 2 "));
    }
}
