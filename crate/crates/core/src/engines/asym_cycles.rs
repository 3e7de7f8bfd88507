//! One match per timestep for static `{0,1}` values whose desire graph has
//! only symmetric cycles: propose a desire edge, then let any agent who would
//! fall more than one like behind take the place of the agent they envy.

use num_traits::One;

use super::{
    agent, common_verdicts, envier_order, EdgePolicy, Engine, EngineConfig, EngineError, EngineKind, PairPolicy,
    StepReport,
};
use crate::envy::{only_symmetric_cycles, DesireGraph};
use crate::ledger::{KappaLedger, SimState};
use crate::market::{Pair, Side};
use crate::rational::Rational;
use crate::valuation::{validate_oracle, Capability, ValuationOracle};

#[derive(Debug, Clone)]
pub struct AsymCyclesEngine {
    pair_policy: PairPolicy,
    edge_policy: EdgePolicy,
    desire: DesireGraph,
    proposals: usize,
}

impl AsymCyclesEngine {
    pub fn new(config: EngineConfig, oracle: &dyn ValuationOracle) -> Result<Self, EngineError> {
        let desire = DesireGraph::from_oracle(oracle)?;
        let check = only_symmetric_cycles(&desire);
        if let Some(pair) = check.witness {
            return Err(EngineError::Shape(format!(
                "desire edge {pair} is asymmetric and lies on a cycle"
            )));
        }
        Ok(AsymCyclesEngine {
            pair_policy: config.pair_policy,
            edge_policy: config.edge_policy,
            desire,
            proposals: 0,
        })
    }

    pub fn desire_graph(&self) -> &DesireGraph {
        &self.desire
    }

    pub fn steal_bound(&self) -> usize {
        self.desire.shape.n + self.desire.shape.m
    }

    fn propose(&mut self) -> Pair {
        let edges = &self.desire.edges;
        let k = match self.edge_policy {
            EdgePolicy::RoundRobin => self.proposals % edges.len(),
            EdgePolicy::Lexicographic => 0,
        };
        self.proposals += 1;
        edges[k].pair
    }
}

/// First same-side `(p, j)` whose like-gap would exceed 1 if `x` were made.
fn find_steal(
    kappa: &KappaLedger,
    oracle: &dyn ValuationOracle,
    t: u64,
    x: Pair,
    orders: &[Vec<usize>; 2],
) -> Option<(Side, usize, usize)> {
    let shape = kappa.shape();
    for (side, order) in Side::BOTH.into_iter().zip(orders) {
        let holder = x.on(side).index;
        let partner = x.on(side.other());
        for &p in order {
            let likes = u64::from(oracle.value(t, agent(side, p), partner).is_one());
            let own = kappa.kappa(side, p, p) + if p == holder { likes } else { 0 };
            for j in (0..shape.len(side)).filter(|&j| j != p) {
                let other = kappa.kappa(side, p, j) + if j == holder { likes } else { 0 };
                if other >= own + 2 {
                    return Some((side, p, j));
                }
            }
        }
    }
    None
}

impl Engine for AsymCyclesEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::AsymCycles
    }

    fn step(&mut self, state: &mut SimState, oracle: &dyn ValuationOracle) -> Result<StepReport, EngineError> {
        let t = state.t() + 1;
        validate_oracle(oracle, t, &[Capability::Static, Capability::Binary01])?;
        let mut iterations = 0;
        let events = if self.desire.is_empty() {
            Vec::new()
        } else {
            let mut x = self.propose();
            let kappa = &state.ledgers.kappa;
            let view = kappa.with_low_value(Rational::from_integer(0));
            let orders = [
                envier_order(self.pair_policy, &view, Side::N),
                envier_order(self.pair_policy, &view, Side::M),
            ];
            while let Some((side, p, _)) = find_steal(kappa, oracle, t, x, &orders) {
                if iterations == self.steal_bound() {
                    return Err(EngineError::IterationBound {
                        t,
                        bound: self.steal_bound(),
                    });
                }
                iterations += 1;
                x = match side {
                    Side::N => Pair::new(p, x.m),
                    Side::M => Pair::new(x.n, p),
                };
            }
            vec![x]
        };
        state.confirm(oracle, events.clone())?;
        let verdicts = common_verdicts(state, Some((&state.ledgers.values, Rational::one())));
        Ok(StepReport {
            engine: EngineKind::AsymCycles,
            t,
            events,
            weight: None,
            iterations,
            verdicts,
            swaps: Vec::new(),
            good_edge_counts: Vec::new(),
            stage_envy_free: None,
        })
    }
}
