//! Matching engines behind a common stepping interface. Each step confirms
//! the matches of one timestep and returns an audit report.

mod asym_cycles;
mod round_robin;
mod sym_bin;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envy::{any_envy_cycle, build_envy_graph, is_c_envy_bounded, is_ef1, AdjacencyGraph};
use crate::ledger::{SimState, ValueView};
use crate::market::{AgentId, HistoryError, Mode, Pair, Side};
use crate::matching::MatchingError;
use crate::rational::Rational;
use crate::valuation::{ValuationOracle, Violation};

pub use asym_cycles::AsymCyclesEngine;
pub use round_robin::{Phase, RoundRobinEngine, RoundRobinStage};
pub use sym_bin::{SwapRecord, SymBinEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    /// Swap-repair of a maximum-weight round; symmetric binary values.
    SymBin,
    /// Single matches with envier steals; `{0,1}` values with only symmetric cycles.
    AsymCycles,
    /// Two-agent round-robin stages; additive values.
    RoundRobin,
}

impl EngineKind {
    pub fn mode(self) -> Mode {
        match self {
            EngineKind::SymBin => Mode::Rounds,
            EngineKind::AsymCycles | EngineKind::RoundRobin => Mode::Time,
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::SymBin => "sym-bin",
            EngineKind::AsymCycles => "asym-cycles",
            EngineKind::RoundRobin => "round-robin",
        })
    }
}

impl FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sym-bin" => Ok(EngineKind::SymBin),
            "asym-cycles" => Ok(EngineKind::AsymCycles),
            "round-robin" => Ok(EngineKind::RoundRobin),
            other => Err(format!("unknown engine {other:?}")),
        }
    }
}

/// Which violating pair a repair loop handles first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PairPolicy {
    /// Smallest envier index, then smallest enviee; side N before side M.
    #[default]
    Lexicographic,
    /// Enviers in depth-first preorder of the previous step's envy graph.
    FirstFoundDfs,
}

/// How the single-match engine proposes its initial pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EdgePolicy {
    /// Cycle through desire edges in `(n, m)` order.
    #[default]
    RoundRobin,
    /// Always the first desire edge.
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EngineConfig {
    pub pair_policy: PairPolicy,
    pub edge_policy: EdgePolicy,
    /// Low binary value used for reported weights and bounds; defaults to
    /// the oracle's declared `a`.
    pub a: Option<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub ef1: bool,
    pub envy_bounded: Option<bool>,
    pub envy_cycle_free: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub engine: EngineKind,
    pub t: u64,
    pub events: Vec<Pair>,
    /// Round weight (rounds mode only).
    pub weight: Option<Rational>,
    /// Swaps or steals performed by the repair loop.
    pub iterations: usize,
    pub verdicts: Verdicts,
    /// Per-swap audit (symmetric binary engine).
    pub swaps: Vec<SwapRecord>,
    /// Good-edge count of the tentative round, initially and after each swap.
    pub good_edge_counts: Vec<usize>,
    /// Exact envy-freeness at a round-robin stage boundary.
    pub stage_envy_free: Option<bool>,
}

impl StepReport {
    /// The verdicts the engine guarantees all hold.
    pub fn passed(&self) -> bool {
        let v = &self.verdicts;
        match self.engine {
            EngineKind::SymBin | EngineKind::AsymCycles => v.ef1 && v.envy_bounded.unwrap_or(true) && v.envy_cycle_free,
            EngineKind::RoundRobin => v.ef1 && self.stage_envy_free.unwrap_or(true),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("valuation capability check failed: {0}")]
    Capability(#[from] Violation),
    #[error("engine does not support this market: {0}")]
    Shape(String),
    #[error("precondition violated at t = {t}: {detail}")]
    Precondition { t: u64, detail: String },
    #[error("repair loop exceeded its bound of {bound} iterations at t = {t}")]
    IterationBound { t: u64, bound: usize },
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

impl EngineError {
    /// Errors caused by the instance not meeting the engine's requirements.
    pub fn is_capability(&self) -> bool {
        matches!(
            self,
            EngineError::Capability(_) | EngineError::Shape(_) | EngineError::Matching(_)
        )
    }
}

pub trait Engine {
    fn kind(&self) -> EngineKind;

    /// Decides and confirms the matches of timestep `state.t() + 1`.
    fn step(&mut self, state: &mut SimState, oracle: &dyn ValuationOracle) -> Result<StepReport, EngineError>;
}

/// Builds an engine, validating the oracle against its requirements.
pub fn make_engine(
    kind: EngineKind,
    config: EngineConfig,
    oracle: &dyn ValuationOracle,
) -> Result<Box<dyn Engine>, EngineError> {
    Ok(match kind {
        EngineKind::SymBin => Box::new(SymBinEngine::new(config, oracle)?),
        EngineKind::AsymCycles => Box::new(AsymCyclesEngine::new(config, oracle)?),
        EngineKind::RoundRobin => Box::new(RoundRobinEngine::new(oracle)?),
    })
}

/// Runs `steps` timesteps from an empty state.
pub fn run_engine(
    kind: EngineKind,
    config: EngineConfig,
    oracle: &dyn ValuationOracle,
    steps: u64,
) -> Result<(SimState, Vec<StepReport>), EngineError> {
    let mut engine = make_engine(kind, config, oracle)?;
    let mut state = SimState::new(oracle.shape(), kind.mode());
    let mut reports = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        reports.push(engine.step(&mut state, oracle)?);
    }
    Ok((state, reports))
}

/// EF1 and envy-cycle verdicts from a state's value ledger.
pub(crate) fn common_verdicts(state: &SimState, envy_bound: Option<(&dyn ValueView, Rational)>) -> Verdicts {
    let values = &state.ledgers.values;
    Verdicts {
        ef1: is_ef1(values).ef1,
        envy_bounded: envy_bound.map(|(view, c)| is_c_envy_bounded(view, c).bounded),
        envy_cycle_free: any_envy_cycle(values).is_none(),
    }
}

/// Scan order of enviers on one side under a pair policy.
pub(crate) fn envier_order<V: ValueView + ?Sized>(policy: PairPolicy, view: &V, side: Side) -> Vec<usize> {
    let len = view.shape().len(side);
    match policy {
        PairPolicy::Lexicographic => (0..len).collect(),
        PairPolicy::FirstFoundDfs => dfs_preorder(&build_envy_graph(view, side).graph),
    }
}

fn dfs_preorder(graph: &AdjacencyGraph) -> Vec<usize> {
    let n = graph.adj.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut seen[u], true) {
                continue;
            }
            order.push(u);
            stack.extend(graph.adj[u].iter().rev().filter(|&&v| !seen[v]));
        }
    }
    order
}

pub(crate) fn agent(side: Side, index: usize) -> AgentId {
    AgentId { side, index }
}
