//! Definitional recomputation from raw bundles. Nothing here reads the
//! incremental ledgers or the envy module; every quantity is re-summed from
//! time-stamped matches.

use std::fmt::Write;

use itertools::Itertools;

use crate::market::{AgentId, MarketShape, MatchHistory, Pair, Side};
use crate::rational::{Rational, PQ};
use crate::valuation::ValuationOracle;

/// Every agent's bundle as `(t, partner)` occurrences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundles {
    shape: MarketShape,
    n_side: Vec<Vec<(u64, AgentId)>>,
    m_side: Vec<Vec<(u64, AgentId)>>,
}

impl Bundles {
    pub fn new(shape: MarketShape) -> Self {
        Bundles {
            shape,
            n_side: vec![Vec::new(); shape.n],
            m_side: vec![Vec::new(); shape.m],
        }
    }

    pub fn from_history(history: &MatchHistory) -> Self {
        let mut b = Bundles::new(history.shape());
        for e in history.events() {
            b.push(e.t, e.pair);
        }
        b
    }

    pub fn shape(&self) -> MarketShape {
        self.shape
    }

    pub fn push(&mut self, t: u64, pair: Pair) {
        self.n_side[pair.n].push((t, AgentId::m(pair.m)));
        self.m_side[pair.m].push((t, AgentId::n(pair.n)));
    }

    pub fn pop(&mut self, pair: Pair) {
        self.n_side[pair.n].pop();
        self.m_side[pair.m].pop();
    }

    pub fn bundle(&self, agent: AgentId) -> &[(u64, AgentId)] {
        match agent.side {
            Side::N => &self.n_side[agent.index],
            Side::M => &self.m_side[agent.index],
        }
    }

    /// Each occurrence in `owner`'s bundle as valued by `viewer`.
    pub fn occurrence_values<O: ValuationOracle + ?Sized>(
        &self,
        oracle: &O,
        viewer: AgentId,
        owner: AgentId,
    ) -> Vec<Rational> {
        self.bundle(owner)
            .iter()
            .map(|&(t, partner)| oracle.value(t, viewer, partner))
            .collect()
    }

    /// `v_viewer(X_owner)`.
    pub fn value<O: ValuationOracle + ?Sized>(&self, oracle: &O, viewer: AgentId, owner: AgentId) -> Rational {
        self.occurrence_values(oracle, viewer, owner).into_iter().sum()
    }

    /// Matches in `owner`'s bundle that `viewer` values at exactly 1.
    pub fn likes<O: ValuationOracle + ?Sized>(&self, oracle: &O, viewer: AgentId, owner: AgentId) -> i128 {
        self.occurrence_values(oracle, viewer, owner)
            .into_iter()
            .filter(|v| *v == Rational::from_integer(1))
            .count() as i128
    }

    pub fn same_side_pairs(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        Side::BOTH.into_iter().flat_map(move |side| {
            let len = self.shape.len(side);
            (0..len)
                .cartesian_product(0..len)
                .filter(|(i, j)| i != j)
                .map(move |(i, j)| (AgentId { side, index: i }, AgentId { side, index: j }))
        })
    }

    /// Whether removing some set of at most `k` occurrences from `j`'s bundle
    /// leaves `i` without envy. Tries every subset.
    pub fn envy_free_up_to<O: ValuationOracle + ?Sized>(&self, oracle: &O, i: AgentId, j: AgentId, k: usize) -> bool {
        let own = self.value(oracle, i, i);
        let occ = self.occurrence_values(oracle, i, j);
        let total: Rational = occ.iter().sum();
        (0..=k.min(occ.len())).any(|size| {
            occ.iter()
                .combinations(size)
                .any(|removed| own >= total - removed.into_iter().sum::<Rational>())
        })
    }

    /// First pair violating envy-freeness up to `k` matches.
    pub fn efk_violation<O: ValuationOracle + ?Sized>(&self, oracle: &O, k: usize) -> Option<(AgentId, AgentId)> {
        self.same_side_pairs()
            .find(|&(i, j)| !self.envy_free_up_to(oracle, i, j, k))
    }

    /// First pair with `v_i(X_j) - v_i(X_i) > c`.
    pub fn bound_violation<O: ValuationOracle + ?Sized>(
        &self,
        oracle: &O,
        c: Rational,
    ) -> Option<(AgentId, AgentId, Rational)> {
        self.same_side_pairs().find_map(|(i, j)| {
            let gap = self.value(oracle, i, j) - self.value(oracle, i, i);
            (gap > c).then_some((i, j, gap))
        })
    }

    /// Agents on the first side whose envy relation has a cycle, found by
    /// transitive closure.
    pub fn envy_cycle_side<O: ValuationOracle + ?Sized>(&self, oracle: &O) -> Option<(Side, usize)> {
        for side in Side::BOTH {
            let len = self.shape.len(side);
            let a = |k| AgentId { side, index: k };
            let mut reach: Vec<Vec<bool>> = (0..len)
                .map(|i| {
                    (0..len)
                        .map(|j| i != j && self.value(oracle, a(i), a(j)) > self.value(oracle, a(i), a(i)))
                        .collect()
                })
                .collect();
            for k in 0..len {
                let via = reach[k].clone();
                for row in reach.iter_mut().filter(|row| row[k]) {
                    for (cell, &through) in row.iter_mut().zip(&via) {
                        *cell |= through;
                    }
                }
            }
            if let Some(i) = (0..len).find(|&i| reach[i][i]) {
                return Some((side, i));
            }
        }
        None
    }

    /// Bundles and the same-side value table, for failure reports.
    pub fn dump<O: ValuationOracle + ?Sized>(&self, oracle: &O) -> String {
        let mut out = String::new();
        for side in Side::BOTH {
            for agent in self.shape.agents(side) {
                let items = self.bundle(agent).iter().map(|(t, p)| format!("{p}@{t}")).join(" ");
                let row = self
                    .shape
                    .agents(side)
                    .map(|other| PQ(&self.value(oracle, agent, other)).to_string())
                    .join(" ");
                let _ = writeln!(out, "  {agent}: [{items}]  values: {row}");
            }
        }
        out
    }
}
