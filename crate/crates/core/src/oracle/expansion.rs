//! Splitting every round of a rounds history into single matches and
//! checking EF2 after each one.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::brute::Bundles;
use crate::market::{AgentId, MatchHistory, Mode, Pair};
use crate::valuation::ValuationOracle;

/// Rounds of at most this many matches are expanded in every order.
pub const EXHAUSTIVE_ORDER_LIMIT: usize = 4;
/// Orders tried per round above the limit.
pub const SAMPLED_ORDERS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ef2Failure {
    pub t: u64,
    pub order: Vec<Pair>,
    /// Number of matches of `order` already made.
    pub made: usize,
    pub pair: (AgentId, AgentId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ef2Verdict {
    pub holds: bool,
    pub orders_checked: u64,
    pub exhaustive: bool,
    pub failure: Option<Ef2Failure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("EF2 expansion needs a rounds-mode history")]
pub struct NotRounds;

pub fn ef2_over_time_expansion(oracle: &dyn ValuationOracle, history: &MatchHistory) -> Result<Ef2Verdict, NotRounds> {
    if history.mode() != Mode::Rounds {
        return Err(NotRounds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut bundles = Bundles::new(history.shape());
    let mut orders_checked = 0;
    let mut exhaustive = true;
    for step in history.steps() {
        let orders: Vec<Vec<Pair>> = if step.pairs.len() <= EXHAUSTIVE_ORDER_LIMIT {
            step.pairs.iter().copied().permutations(step.pairs.len()).collect()
        } else {
            exhaustive = false;
            (0..SAMPLED_ORDERS)
                .map(|_| {
                    let mut o = step.pairs.clone();
                    o.shuffle(&mut rng);
                    o
                })
                .collect()
        };
        for order in orders {
            orders_checked += 1;
            for (made, &p) in order.iter().enumerate() {
                bundles.push(step.t, p);
                if let Some(pair) = bundles.efk_violation(oracle, 2) {
                    return Ok(Ef2Verdict {
                        holds: false,
                        orders_checked,
                        exhaustive,
                        failure: Some(Ef2Failure {
                            t: step.t,
                            order: order.clone(),
                            made: made + 1,
                            pair,
                        }),
                    });
                }
            }
            for &p in order.iter().rev() {
                bundles.pop(p);
            }
        }
        for &p in &step.pairs {
            bundles.push(step.t, p);
        }
    }
    Ok(Ef2Verdict {
        holds: true,
        orders_checked,
        exhaustive,
        failure: None,
    })
}
