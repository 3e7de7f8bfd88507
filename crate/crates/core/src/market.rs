//! Agents, market shape, confirmed matches and the append-only match history.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    N,
    M,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::N => Side::M,
            Side::M => Side::N,
        }
    }

    pub const BOTH: [Side; 2] = [Side::N, Side::M];
}

/// An agent, named by its side and a 0-based index within that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId {
    pub side: Side,
    pub index: usize,
}

impl AgentId {
    pub fn n(index: usize) -> Self {
        AgentId { side: Side::N, index }
    }

    pub fn m(index: usize) -> Self {
        AgentId { side: Side::M, index }
    }

    /// Decodes the interleaved 1-based labelling where odd labels are N-agents
    /// (1, 3, 5, ...) and even labels are M-agents (2, 4, 6, ...).
    pub fn from_interleaved(label: usize) -> Self {
        assert!(label >= 1, "interleaved labels start at 1");
        if label % 2 == 1 {
            AgentId::n((label - 1) / 2)
        } else {
            AgentId::m(label / 2 - 1)
        }
    }

    pub fn interleaved(self) -> usize {
        match self.side {
            Side::N => 2 * self.index + 1,
            Side::M => 2 * self.index + 2,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.side {
            Side::N => write!(f, "N{}", self.index),
            Side::M => write!(f, "M{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarketShape {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("market sides must be non-empty (n = {n}, m = {m})")]
pub struct EmptySideError {
    pub n: usize,
    pub m: usize,
}

impl MarketShape {
    pub fn new(n: usize, m: usize) -> Result<Self, EmptySideError> {
        if n == 0 || m == 0 {
            return Err(EmptySideError { n, m });
        }
        Ok(MarketShape { n, m })
    }

    pub fn square(n: usize) -> Self {
        MarketShape { n, m: n }
    }

    pub fn len(&self, side: Side) -> usize {
        match side {
            Side::N => self.n,
            Side::M => self.m,
        }
    }

    pub fn is_square(&self) -> bool {
        self.n == self.m
    }

    pub fn agents(&self, side: Side) -> impl Iterator<Item = AgentId> {
        (0..self.len(side)).map(move |index| AgentId { side, index })
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        agent.index < self.len(agent.side)
    }
}

/// One cross-side pairing: `n` indexes side N, `m` indexes side M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub n: usize,
    pub m: usize,
}

impl Pair {
    pub fn new(n: usize, m: usize) -> Self {
        Pair { n, m }
    }

    /// The endpoint on `side`.
    pub fn on(&self, side: Side) -> AgentId {
        match side {
            Side::N => AgentId::n(self.n),
            Side::M => AgentId::m(self.m),
        }
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.on(agent.side) == agent
    }

    /// The partner of `agent` if it takes part in this pair.
    pub fn partner_of(&self, agent: AgentId) -> Option<AgentId> {
        self.contains(agent).then(|| self.on(agent.side.other()))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{N{}, M{}}}", self.n, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchEvent {
    pub t: u64,
    pub pair: Pair,
}

/// A perfect matching of a square market, stored as `partner[i]` = the
/// M-agent matched to N-agent `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoundMatching {
    partner: Vec<usize>,
}

impl RoundMatching {
    pub fn from_partners(partner: Vec<usize>) -> Result<Self, HistoryError> {
        let n = partner.len();
        let mut seen = vec![false; n];
        for &j in &partner {
            if j >= n {
                return Err(HistoryError::AgentOutOfRange(AgentId::m(j)));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(HistoryError::DuplicateAgent(AgentId::m(j)));
            }
        }
        Ok(RoundMatching { partner })
    }

    pub fn from_pairs(n: usize, pairs: &[Pair]) -> Result<Self, HistoryError> {
        let mut partner = vec![usize::MAX; n];
        for p in pairs {
            if p.n >= n {
                return Err(HistoryError::AgentOutOfRange(AgentId::n(p.n)));
            }
            if partner[p.n] != usize::MAX {
                return Err(HistoryError::DuplicateAgent(AgentId::n(p.n)));
            }
            partner[p.n] = p.m;
        }
        if let Some(i) = partner.iter().position(|&j| j == usize::MAX) {
            return Err(HistoryError::NotPerfect { missing: AgentId::n(i) });
        }
        Self::from_partners(partner)
    }

    pub fn identity(n: usize) -> Self {
        RoundMatching {
            partner: (0..n).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.partner.len()
    }

    pub fn partner_of_n(&self, i: usize) -> usize {
        self.partner[i]
    }

    pub fn partners(&self) -> &[usize] {
        &self.partner
    }

    pub fn pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.partner.iter().enumerate().map(|(n, &m)| Pair { n, m })
    }

    pub fn to_pairs(&self) -> Vec<Pair> {
        self.pairs().collect()
    }

    /// Exchanges the partners of two agents on the same side.
    pub fn swap(&mut self, a: AgentId, b: AgentId) {
        debug_assert_eq!(a.side, b.side);
        match a.side {
            Side::N => self.partner.swap(a.index, b.index),
            Side::M => {
                let ia = self.partner.iter().position(|&j| j == a.index).unwrap();
                let ib = self.partner.iter().position(|&j| j == b.index).unwrap();
                self.partner.swap(ia, ib);
            }
        }
    }
}

impl fmt::Display for RoundMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, p) in self.pairs().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// How many matches a timestep holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Each timestep is a perfect matching.
    Rounds,
    /// Each timestep holds at most one match.
    Time,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Rounds => "rounds",
            Mode::Time => "time",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("timestep gap: expected t = {expected}, got t = {got}")]
    TimestepGap { expected: u64, got: u64 },
    #[error("agent {0} appears twice in one timestep")]
    DuplicateAgent(AgentId),
    #[error("agent {0} is outside the market")]
    AgentOutOfRange(AgentId),
    #[error("round is not a perfect matching: {missing} is unmatched")]
    NotPerfect { missing: AgentId },
    #[error("time-mode step holds {count} matches; at most one is allowed")]
    TooManyMatches { count: usize },
}

/// Confirmed matches of one timestep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchStep {
    pub t: u64,
    pub pairs: Vec<Pair>,
}

/// Append-only record of confirmed matches. Bundles are views over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchHistory {
    shape: MarketShape,
    mode: Mode,
    steps: Vec<MatchStep>,
}

impl MatchHistory {
    pub fn new(shape: MarketShape, mode: Mode) -> Self {
        MatchHistory {
            shape,
            mode,
            steps: Vec::new(),
        }
    }

    pub fn shape(&self) -> MarketShape {
        self.shape
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Timestep of the last confirmed step (0 when empty).
    pub fn t(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn steps(&self) -> &[MatchStep] {
        &self.steps
    }

    /// Checks that `pairs` may be confirmed as timestep `t`.
    pub fn check_step(&self, t: u64, pairs: &[Pair]) -> Result<(), HistoryError> {
        check_step_shape(self.shape, self.t(), t, pairs)?;
        match self.mode {
            Mode::Rounds => {
                if !self.shape.is_square() {
                    return Err(HistoryError::NotPerfect {
                        missing: AgentId::m(self.shape.m.min(self.shape.n)),
                    });
                }
                RoundMatching::from_pairs(self.shape.n, pairs)?;
            }
            Mode::Time => {
                if pairs.len() > 1 {
                    return Err(HistoryError::TooManyMatches { count: pairs.len() });
                }
            }
        }
        Ok(())
    }

    pub fn push(&mut self, t: u64, pairs: Vec<Pair>) -> Result<(), HistoryError> {
        self.check_step(t, &pairs)?;
        self.steps.push(MatchStep { t, pairs });
        Ok(())
    }

    pub fn events(&self) -> impl Iterator<Item = MatchEvent> + '_ {
        self.steps
            .iter()
            .flat_map(|s| s.pairs.iter().map(move |&pair| MatchEvent { t: s.t, pair }))
    }

    /// The bundle of `agent` through time `t`: its partners with timestamps.
    pub fn bundle(&self, agent: AgentId, t: u64) -> Vec<(u64, AgentId)> {
        self.steps
            .iter()
            .take_while(|s| s.t <= t)
            .filter_map(|s| {
                s.pairs
                    .iter()
                    .find_map(|p| p.partner_of(agent))
                    .map(|partner| (s.t, partner))
            })
            .collect()
    }

    /// The prefix of the first `t` timesteps.
    pub fn prefix(&self, t: u64) -> MatchHistory {
        MatchHistory {
            shape: self.shape,
            mode: self.mode,
            steps: self.steps.iter().take(t as usize).cloned().collect(),
        }
    }
}

/// Index/timestep/duplicate checks shared by the history and the ledgers.
pub(crate) fn check_step_shape(shape: MarketShape, last_t: u64, t: u64, pairs: &[Pair]) -> Result<(), HistoryError> {
    if t != last_t + 1 {
        return Err(HistoryError::TimestepGap {
            expected: last_t + 1,
            got: t,
        });
    }
    let mut seen_n = vec![false; shape.n];
    let mut seen_m = vec![false; shape.m];
    for p in pairs {
        if p.n >= shape.n {
            return Err(HistoryError::AgentOutOfRange(AgentId::n(p.n)));
        }
        if p.m >= shape.m {
            return Err(HistoryError::AgentOutOfRange(AgentId::m(p.m)));
        }
        if std::mem::replace(&mut seen_n[p.n], true) {
            return Err(HistoryError::DuplicateAgent(AgentId::n(p.n)));
        }
        if std::mem::replace(&mut seen_m[p.m], true) {
            return Err(HistoryError::DuplicateAgent(AgentId::m(p.m)));
        }
    }
    Ok(())
}
