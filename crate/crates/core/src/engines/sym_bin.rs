//! Perfect-matching rounds for symmetric binary values: start from a
//! maximum-weight round and swap partners while some agent would end up two
//! likes behind another.

use num_traits::One;
use serde::Serialize;

use super::{
    agent, common_verdicts, envier_order, Engine, EngineConfig, EngineError, EngineKind, PairPolicy, StepReport,
};
use crate::envy::any_envy_cycle;
use crate::ledger::{KappaLedger, SimState};
use crate::market::{AgentId, RoundMatching, Side};
use crate::matching::{binary_symmetric_unchecked, good_edges_unchecked};
use crate::rational::Rational;
use crate::valuation::{validate_oracle, Capability, ValuationOracle};

/// One partner swap, with the facts the repair argument relies on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SwapRecord {
    pub envier: AgentId,
    pub envied: AgentId,
    /// The envier's tentative partner before the swap.
    pub old_partner: AgentId,
    /// The envier's tentative partner after the swap.
    pub new_partner: AgentId,
    pub liked_old_partner: bool,
    pub likes_new_partner: bool,
    /// Whether the envier already envied the other agent before this timestep.
    pub envied_before: bool,
}

impl SwapRecord {
    /// Old partner worth `a`, new partner worth 1, and pre-existing envy.
    pub fn is_well_formed(&self) -> bool {
        !self.liked_old_partner && self.likes_new_partner && self.envied_before
    }
}

#[derive(Debug, Clone)]
pub struct SymBinEngine {
    policy: PairPolicy,
    a: Rational,
}

impl SymBinEngine {
    pub fn new(config: EngineConfig, oracle: &dyn ValuationOracle) -> Result<Self, EngineError> {
        let shape = oracle.shape();
        if !shape.is_square() {
            return Err(EngineError::Shape(format!(
                "rounds need n = m, got n = {}, m = {}",
                shape.n, shape.m
            )));
        }
        validate_oracle(oracle, 1, &[Capability::Binary, Capability::Symmetric])?;
        let a = config.a.unwrap_or_else(|| oracle.capabilities().low_value());
        Ok(SymBinEngine {
            policy: config.pair_policy,
            a,
        })
    }

    pub fn swap_bound(n: usize) -> usize {
        2 * n * n
    }
}

/// Partner of every agent on `side` in a tentative round.
fn partners_on(x: &RoundMatching, side: Side) -> Vec<AgentId> {
    match side {
        Side::N => x.partners().iter().map(|&j| AgentId::m(j)).collect(),
        Side::M => {
            let mut inv = vec![AgentId::n(0); x.size()];
            for p in x.pairs() {
                inv[p.m] = AgentId::n(p.n);
            }
            inv
        }
    }
}

fn check_preconditions(kappa: &KappaLedger, t: u64) -> Result<(), EngineError> {
    let shape = kappa.shape();
    for side in Side::BOTH {
        let len = shape.len(side);
        for i in 0..len {
            for j in 0..len {
                if kappa.kappa(side, i, j) > kappa.kappa(side, i, i) + 1 {
                    return Err(EngineError::Precondition {
                        t,
                        detail: format!(
                            "{} is more than one like behind {} before the step",
                            agent(side, i),
                            agent(side, j)
                        ),
                    });
                }
            }
        }
    }
    if let Some((side, cycle)) = any_envy_cycle(&kappa.with_low_value(Rational::from_integer(0))) {
        return Err(EngineError::Precondition {
            t,
            detail: format!("envy cycle {cycle} on side {side:?} before the step"),
        });
    }
    Ok(())
}

impl SymBinEngine {
    /// First same-side pair `(i, j)` whose tentative like-gap is at least 2.
    fn find_violation(
        &self,
        kappa: &KappaLedger,
        oracle: &dyn ValuationOracle,
        t: u64,
        x: &RoundMatching,
        orders: &[Vec<usize>; 2],
    ) -> Option<(Side, usize, usize)> {
        for (side, order) in Side::BOTH.into_iter().zip(orders) {
            let partner = partners_on(x, side);
            let likes = |i: usize, j: usize| u64::from(oracle.value(t, agent(side, i), partner[j]).is_one());
            for &i in order {
                let own = kappa.kappa(side, i, i) + likes(i, i);
                for j in 0..partner.len() {
                    if j != i && kappa.kappa(side, i, j) + likes(i, j) >= own + 2 {
                        return Some((side, i, j));
                    }
                }
            }
        }
        None
    }
}

impl Engine for SymBinEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::SymBin
    }

    fn step(&mut self, state: &mut SimState, oracle: &dyn ValuationOracle) -> Result<StepReport, EngineError> {
        let t = state.t() + 1;
        validate_oracle(oracle, t, &[Capability::Binary, Capability::Symmetric])?;
        let kappa = &state.ledgers.kappa;
        check_preconditions(kappa, t)?;

        let shape = oracle.shape();
        let n = shape.n;
        let zero_view = kappa.with_low_value(Rational::from_integer(0));
        let orders = [
            envier_order(self.policy, &zero_view, Side::N),
            envier_order(self.policy, &zero_view, Side::M),
        ];
        let mut x = binary_symmetric_unchecked(oracle, t, shape);
        let mut good_edge_counts = vec![good_edges_unchecked(oracle, t, &x).len()];
        let mut swaps = Vec::new();
        let bound = Self::swap_bound(n);
        while let Some((side, i, j)) = self.find_violation(kappa, oracle, t, &x, &orders) {
            if swaps.len() == bound {
                return Err(EngineError::IterationBound { t, bound });
            }
            let partner = partners_on(&x, side);
            let (envier, envied) = (agent(side, i), agent(side, j));
            swaps.push(SwapRecord {
                envier,
                envied,
                old_partner: partner[i],
                new_partner: partner[j],
                liked_old_partner: oracle.value(t, envier, partner[i]).is_one(),
                likes_new_partner: oracle.value(t, envier, partner[j]).is_one(),
                envied_before: kappa.kappa(side, i, j) > kappa.kappa(side, i, i),
            });
            x.swap(envier, envied);
            good_edge_counts.push(good_edges_unchecked(oracle, t, &x).len());
        }

        let good = *good_edge_counts.last().expect("initial count");
        let weight = Rational::from_integer(good as i128) + self.a * Rational::from_integer((n - good) as i128);
        let events = x.to_pairs();
        state.confirm(oracle, events.clone())?;
        let bound_view = state.ledgers.kappa.with_low_value(self.a);
        let verdicts = common_verdicts(state, Some((&bound_view, Rational::one() - self.a)));
        Ok(StepReport {
            engine: EngineKind::SymBin,
            t,
            events,
            weight: Some(weight),
            iterations: swaps.len(),
            verdicts,
            swaps,
            good_edge_counts,
            stage_envy_free: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::run_engine;
    use crate::market::{MarketShape, Pair};
    use crate::rational::{frac, int};
    use crate::valuation::{Capabilities, StaticValuation, ValueMatrix};

    fn oracle(values: Vec<Vec<Rational>>, a: Rational) -> StaticValuation {
        StaticValuation::new(
            ValueMatrix::symmetric(values),
            Capabilities {
                symmetric: true,
                binary: true,
                a: Some(a),
                ..Default::default()
            },
        )
    }

    #[test]
    fn alternates_when_one_edge_is_good() {
        // Only (N0, M0) is good; the round-2 repair must hand M0 to N1's side.
        let a = frac(1, 2);
        let o = oracle(vec![vec![int(1), a], vec![a, a]], a);
        let (state, reports) = run_engine(EngineKind::SymBin, EngineConfig::default(), &o, 6).unwrap();
        assert!(reports.iter().all(|r| r.passed()));
        assert_eq!(state.t(), 6);
        for r in &reports {
            assert!(r.swaps.iter().all(SwapRecord::is_well_formed));
            assert!(r.iterations <= SymBinEngine::swap_bound(2));
        }
    }

    #[test]
    fn swap_when_two_agents_share_a_like() {
        // v_1(2)=1, v_1(4)=1, v_3(2)=1, v_3(4)=a in interleaved labels.
        let a = int(0);
        let o = oracle(vec![vec![int(1), int(1)], vec![int(1), a]], a);
        let (state, reports) = run_engine(EngineKind::SymBin, EngineConfig::default(), &o, 4).unwrap();
        assert_eq!(reports[0].events, vec![Pair::new(0, 1), Pair::new(1, 0)]);
        assert!(reports.iter().all(|r| r.passed()));
        assert_eq!(state.history.shape(), MarketShape::square(2));
    }

    #[test]
    fn rejects_non_square_and_non_binary() {
        let o = StaticValuation::new(
            ValueMatrix::from_tables(vec![vec![int(1), int(1)]], vec![vec![int(1)], vec![int(1)]]),
            Capabilities {
                symmetric: true,
                binary: true,
                ..Default::default()
            },
        );
        assert!(matches!(
            SymBinEngine::new(EngineConfig::default(), &o),
            Err(EngineError::Shape(_))
        ));
        let o = oracle(vec![vec![frac(1, 3)]], int(0));
        assert!(matches!(
            SymBinEngine::new(EngineConfig::default(), &o),
            Err(EngineError::Capability(_))
        ));
    }
}
