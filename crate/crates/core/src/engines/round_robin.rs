//! One match per timestep when N has exactly two agents. Time is split into
//! stages of `2m` steps: the N-agents alternately pick their favorite
//! remaining M-agent, then the picks are replayed with the roles exchanged.

use num_traits::Zero;

use super::{common_verdicts, Engine, EngineError, EngineKind, StepReport};
use crate::envy::is_c_envy_bounded;
use crate::ledger::SimState;
use crate::market::{AgentId, Pair};
use crate::valuation::{validate_oracle, Capability, ValuationOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Picking from the pool.
    Pick,
    /// Replaying the recorded picks with the other N-agent.
    Replay,
}

/// Progress within the current stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRobinStage {
    /// Zero-based stage number.
    pub index: u64,
    pub phase: Phase,
    /// Picks made so far this stage, as `(n, m)` pairs.
    pub sigma: Vec<Pair>,
    /// M-agents not yet picked in this stage.
    pub pool: Vec<usize>,
    /// N-agent acting next (0 or 1).
    pub picker: usize,
    /// Next position of `sigma` to replay.
    pub cursor: usize,
}

impl RoundRobinStage {
    fn start(index: u64, m: usize) -> Self {
        RoundRobinStage {
            index,
            phase: Phase::Pick,
            sigma: Vec::with_capacity(m),
            pool: (0..m).collect(),
            picker: 0,
            cursor: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundRobinEngine {
    m: usize,
    stage: RoundRobinStage,
}

impl RoundRobinEngine {
    pub fn new(oracle: &dyn ValuationOracle) -> Result<Self, EngineError> {
        let shape = oracle.shape();
        if shape.n != 2 {
            return Err(EngineError::Shape(format!(
                "needs exactly two N-agents, got n = {}",
                shape.n
            )));
        }
        validate_oracle(oracle, 1, &[Capability::Static])?;
        Ok(RoundRobinEngine {
            m: shape.m,
            stage: RoundRobinStage::start(0, shape.m),
        })
    }

    pub fn stage(&self) -> &RoundRobinStage {
        &self.stage
    }

    /// Steps per stage.
    pub fn stage_len(&self) -> usize {
        2 * self.m
    }

    /// Next match, advancing the stage bookkeeping. Returns whether the
    /// stage ends with it.
    fn next_pair(&mut self, oracle: &dyn ValuationOracle, t: u64) -> (Pair, bool) {
        let st = &mut self.stage;
        let i = st.picker;
        st.picker = 1 - i;
        match st.phase {
            Phase::Pick => {
                let me = AgentId::n(i);
                // Strictly greater keeps the lowest index among ties.
                let mut best = 0;
                for k in 1..st.pool.len() {
                    if oracle.value(t, me, AgentId::m(st.pool[k])) > oracle.value(t, me, AgentId::m(st.pool[best])) {
                        best = k;
                    }
                }
                let pair = Pair::new(i, st.pool.remove(best));
                st.sigma.push(pair);
                if st.pool.is_empty() {
                    st.phase = Phase::Replay;
                    st.picker = 1;
                }
                (pair, false)
            }
            Phase::Replay => {
                let pair = Pair::new(i, st.sigma[st.cursor].m);
                st.cursor += 1;
                let done = st.cursor == st.sigma.len();
                if done {
                    self.stage = RoundRobinStage::start(st.index + 1, self.m);
                }
                (pair, done)
            }
        }
    }
}

impl Engine for RoundRobinEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::RoundRobin
    }

    fn step(&mut self, state: &mut SimState, oracle: &dyn ValuationOracle) -> Result<StepReport, EngineError> {
        let t = state.t() + 1;
        validate_oracle(oracle, t, &[Capability::Static])?;
        let (pair, stage_end) = self.next_pair(oracle, t);
        state.confirm(oracle, vec![pair])?;
        let stage_envy_free =
            stage_end.then(|| is_c_envy_bounded(&state.ledgers.values, crate::rational::Rational::zero()).bounded);
        Ok(StepReport {
            engine: EngineKind::RoundRobin,
            t,
            events: vec![pair],
            weight: None,
            iterations: 0,
            verdicts: common_verdicts(state, None),
            swaps: Vec::new(),
            good_edge_counts: Vec::new(),
            stage_envy_free,
        })
    }
}
