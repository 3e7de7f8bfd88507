//! Valuation oracles: who values whom, at which timestep, and which
//! structural properties (symmetry, binarity, staticness) are promised.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::market::{AgentId, MarketShape, Side};
use crate::rational::{Rational, PQ};

/// Cross-side values at one timestep. Same-side values are implicitly zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueMatrix {
    shape: MarketShape,
    /// `n_to_m[i][j]` = value of N-agent `i` for M-agent `j`.
    n_to_m: Vec<Vec<Rational>>,
    /// `m_to_n[j][i]` = value of M-agent `j` for N-agent `i`.
    m_to_n: Vec<Vec<Rational>>,
}

impl ValueMatrix {
    pub fn zeros(shape: MarketShape) -> Self {
        ValueMatrix {
            shape,
            n_to_m: vec![vec![Rational::zero(); shape.m]; shape.n],
            m_to_n: vec![vec![Rational::zero(); shape.n]; shape.m],
        }
    }

    /// Builds a matrix from the two directed value tables.
    pub fn from_tables(n_to_m: Vec<Vec<Rational>>, m_to_n: Vec<Vec<Rational>>) -> Self {
        let n = n_to_m.len();
        let m = m_to_n.len();
        assert!(n_to_m.iter().all(|r| r.len() == m), "n_to_m must be n x m");
        assert!(m_to_n.iter().all(|r| r.len() == n), "m_to_n must be m x n");
        ValueMatrix {
            shape: MarketShape { n, m },
            n_to_m,
            m_to_n,
        }
    }

    /// Builds a symmetric matrix from `v[i][j] = v_i(j) = v_j(i)`.
    pub fn symmetric(values: Vec<Vec<Rational>>) -> Self {
        let n = values.len();
        let m = values.first().map_or(0, Vec::len);
        let transposed = (0..m).map(|j| (0..n).map(|i| values[i][j]).collect()).collect();
        Self::from_tables(values, transposed)
    }

    pub fn shape(&self) -> MarketShape {
        self.shape
    }

    pub fn get(&self, i: AgentId, j: AgentId) -> Rational {
        match (i.side, j.side) {
            (Side::N, Side::M) => self.n_to_m[i.index][j.index],
            (Side::M, Side::N) => self.m_to_n[i.index][j.index],
            _ => Rational::zero(),
        }
    }

    /// Sets `v_i(j)`; same-side assignments are rejected.
    pub fn set(&mut self, i: AgentId, j: AgentId, value: Rational) {
        match (i.side, j.side) {
            (Side::N, Side::M) => self.n_to_m[i.index][j.index] = value,
            (Side::M, Side::N) => self.m_to_n[i.index][j.index] = value,
            _ => panic!("same-side values are fixed at zero ({i} -> {j})"),
        }
    }

    /// Row-major `(n+m) x (n+m)` matrix: rows/cols `0..n` are N-agents,
    /// `n..n+m` are M-agents.
    pub fn to_full(&self) -> Vec<Vec<Rational>> {
        let agents: Vec<AgentId> = self.all_agents().collect();
        agents
            .iter()
            .map(|&i| agents.iter().map(|&j| self.get(i, j)).collect())
            .collect()
    }

    /// Inverse of [`ValueMatrix::to_full`]. Fails on wrong dimensions or
    /// non-zero same-side entries.
    pub fn from_full(shape: MarketShape, full: &[Vec<Rational>]) -> Result<Self, String> {
        let size = shape.n + shape.m;
        if full.len() != size || full.iter().any(|r| r.len() != size) {
            return Err(format!("value matrix must be {size} x {size}"));
        }
        let agent = |k: usize| {
            if k < shape.n {
                AgentId::n(k)
            } else {
                AgentId::m(k - shape.n)
            }
        };
        let mut out = ValueMatrix::zeros(shape);
        for (r, row) in full.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let (i, j) = (agent(r), agent(c));
                if i.side == j.side {
                    if !v.is_zero() {
                        return Err(format!("same-side entry ({i}, {j}) must be 0/1, got {}", PQ(v)));
                    }
                } else {
                    out.set(i, j, *v);
                }
            }
        }
        Ok(out)
    }

    fn all_agents(&self) -> impl Iterator<Item = AgentId> {
        self.shape.agents(Side::N).chain(self.shape.agents(Side::M))
    }

    /// Every ordered cross-side pair `(i, j)`, N-agents first.
    pub fn cross_pairs(shape: MarketShape) -> impl Iterator<Item = (AgentId, AgentId)> {
        let nm = shape
            .agents(Side::N)
            .flat_map(move |i| shape.agents(Side::M).map(move |j| (i, j)));
        let mn = shape
            .agents(Side::M)
            .flat_map(move |j| shape.agents(Side::N).map(move |i| (j, i)));
        nm.chain(mn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Static,
    Symmetric,
    Binary,
    Binary01,
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Capability::Static => "static",
            Capability::Symmetric => "symmetric",
            Capability::Binary => "binary",
            Capability::Binary01 => "binary01",
        })
    }
}

/// What an oracle promises about its values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub is_static: bool,
    pub symmetric: bool,
    pub binary: bool,
    pub binary01: bool,
    /// The low value of a binary valuation (`v in {a, 1}`).
    pub a: Option<Rational>,
}

impl Capabilities {
    pub fn declares(&self, cap: Capability) -> bool {
        match cap {
            Capability::Static => self.is_static,
            Capability::Symmetric => self.symmetric,
            Capability::Binary => self.binary || self.binary01,
            Capability::Binary01 => self.binary01,
        }
    }

    /// The low binary value; `binary01` forces it to zero.
    pub fn low_value(&self) -> Rational {
        if self.binary01 {
            Rational::zero()
        } else {
            self.a.unwrap_or_else(Rational::zero)
        }
    }
}

/// Source of per-timestep values `v_i^t(j)`.
pub trait ValuationOracle {
    fn shape(&self) -> MarketShape;

    /// `v_i^t(j)` for `t >= 1`; zero whenever `i` and `j` share a side.
    fn value(&self, t: u64, i: AgentId, j: AgentId) -> Rational;

    fn capabilities(&self) -> Capabilities;

    fn matrix_at(&self, t: u64) -> ValueMatrix {
        let shape = self.shape();
        let mut out = ValueMatrix::zeros(shape);
        for (i, j) in ValueMatrix::cross_pairs(shape) {
            out.set(i, j, self.value(t, i, j));
        }
        out
    }
}

impl<O: ValuationOracle + ?Sized> ValuationOracle for &O {
    fn shape(&self) -> MarketShape {
        (**self).shape()
    }
    fn value(&self, t: u64, i: AgentId, j: AgentId) -> Rational {
        (**self).value(t, i, j)
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
}

/// A single fixed value matrix with explicit declared capabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticValuation {
    pub values: ValueMatrix,
    pub caps: Capabilities,
}

impl StaticValuation {
    pub fn new(values: ValueMatrix, mut caps: Capabilities) -> Self {
        caps.is_static = true;
        StaticValuation { values, caps }
    }
}

impl ValuationOracle for StaticValuation {
    fn shape(&self) -> MarketShape {
        self.values.shape()
    }
    fn value(&self, _t: u64, i: AgentId, j: AgentId) -> Rational {
        self.values.get(i, j)
    }
    fn capabilities(&self) -> Capabilities {
        self.caps.clone()
    }
}

/// A binary oracle read with a different low value: likes stay 1,
/// everything else (across sides) becomes `a`.
#[derive(Clone, Copy)]
pub struct Releveled<'a> {
    pub inner: &'a dyn ValuationOracle,
    pub a: Rational,
}

impl ValuationOracle for Releveled<'_> {
    fn shape(&self) -> MarketShape {
        self.inner.shape()
    }
    fn value(&self, t: u64, i: AgentId, j: AgentId) -> Rational {
        if i.side == j.side {
            Rational::zero()
        } else if self.inner.value(t, i, j).is_one() {
            Rational::one()
        } else {
            self.a
        }
    }
    fn capabilities(&self) -> Capabilities {
        let mut caps = self.inner.capabilities();
        caps.binary01 = self.a.is_zero() && (caps.binary || caps.binary01);
        caps.a = Some(self.a);
        caps
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The capability is required but the oracle does not declare it.
    NotDeclared,
    /// `v_i(j) != v_j(i)`.
    Asymmetric { forward: Rational, backward: Rational },
    /// A value outside `{a, 1}` (or `{0, 1}`).
    NotBinary { value: Rational, a: Rational },
    /// The value differs from its value at `t = 1`.
    Changed { first: Rational, now: Rational },
    /// A declared `a` outside `[0, 1)`.
    BadLowValue { a: Rational },
}

/// First pair found to break a required capability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub capability: Capability,
    pub t: u64,
    pub pair: Option<(AgentId, AgentId)>,
    pub kind: Box<ViolationKind>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "capability {} violated at t = {}", self.capability, self.t)?;
        if let Some((i, j)) = self.pair {
            write!(f, " for pair ({i}, {j})")?;
        }
        match self.kind.as_ref() {
            ViolationKind::NotDeclared => write!(f, ": not declared by the instance"),
            ViolationKind::Asymmetric { forward, backward } => {
                write!(f, ": v_i(j) = {} but v_j(i) = {}", PQ(forward), PQ(backward))
            }
            ViolationKind::NotBinary { value, a } => {
                write!(f, ": value {} not in {{{}, 1}}", PQ(value), PQ(a))
            }
            ViolationKind::Changed { first, now } => {
                write!(f, ": value {} differs from t = 1 value {}", PQ(now), PQ(first))
            }
            ViolationKind::BadLowValue { a } => write!(f, ": a = {} not in [0, 1)", PQ(a)),
        }
    }
}

impl std::error::Error for Violation {}

/// Checks that every `required` capability is declared and actually holds at
/// timestep `t`, scanning all cross-side pairs in order.
pub fn validate_oracle<O: ValuationOracle + ?Sized>(
    oracle: &O,
    t: u64,
    required: &[Capability],
) -> Result<(), Violation> {
    let caps = oracle.capabilities();
    let shape = oracle.shape();
    let violation = |capability, pair, kind| Violation {
        capability,
        t,
        pair,
        kind: Box::new(kind),
    };
    for &cap in required {
        if !caps.declares(cap) {
            return Err(violation(cap, None, ViolationKind::NotDeclared));
        }
        match cap {
            Capability::Symmetric => {
                for (i, j) in ValueMatrix::cross_pairs(shape).filter(|(i, _)| i.side == Side::N) {
                    let forward = oracle.value(t, i, j);
                    let backward = oracle.value(t, j, i);
                    if forward != backward {
                        return Err(violation(
                            cap,
                            Some((i, j)),
                            ViolationKind::Asymmetric { forward, backward },
                        ));
                    }
                }
            }
            Capability::Binary | Capability::Binary01 => {
                let a = if cap == Capability::Binary01 {
                    Rational::zero()
                } else {
                    caps.low_value()
                };
                if a < Rational::zero() || a >= Rational::one() {
                    return Err(violation(cap, None, ViolationKind::BadLowValue { a }));
                }
                for (i, j) in ValueMatrix::cross_pairs(shape) {
                    let value = oracle.value(t, i, j);
                    if value != a && !value.is_one() {
                        return Err(violation(cap, Some((i, j)), ViolationKind::NotBinary { value, a }));
                    }
                }
            }
            Capability::Static => {
                for (i, j) in ValueMatrix::cross_pairs(shape) {
                    let first = oracle.value(1, i, j);
                    let now = oracle.value(t, i, j);
                    if first != now {
                        return Err(violation(cap, Some((i, j)), ViolationKind::Changed { first, now }));
                    }
                }
            }
        }
    }
    Ok(())
}
