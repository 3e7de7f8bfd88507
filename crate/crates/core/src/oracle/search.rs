//! Exhaustive depth-first search over sequences of perfect matchings.

use thiserror::Error;

use super::brute::Bundles;
use crate::market::RoundMatching;
use crate::matching::{
    enumerate_perfect_matchings, matching_weight, max_weight_matching_general, MatchingError, RoundWeights,
};
use crate::valuation::ValuationOracle;

pub const SEARCH_MAX_N: usize = 4;
pub const SEARCH_MAX_T: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchConstraint {
    AnyPerfect,
    /// Only rounds of maximum weight at their timestep.
    MaxWeightOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchProperty {
    /// The cumulative matching is EF1 after every round.
    Ef1EachRound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSearchResult {
    pub exists: bool,
    pub witness: Option<Vec<RoundMatching>>,
    /// Rounds evaluated at any depth.
    pub explored: u64,
    /// Full-length sequences evaluated.
    pub sequences: u64,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search is limited to n <= {SEARCH_MAX_N} and T <= {SEARCH_MAX_T}, got n = {n}, T = {horizon}")]
    GuardExceeded { n: usize, horizon: u64 },
    #[error(transparent)]
    Matching(#[from] MatchingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub constraint: SearchConstraint,
    pub property: SearchProperty,
    /// Stop at the first full-length sequence that keeps the property.
    pub stop_at_first: bool,
}

/// Whether some sequence of `horizon` rounds keeps `property` throughout.
pub fn exhaustive_sequence_search(
    oracle: &dyn ValuationOracle,
    horizon: u64,
    constraint: SearchConstraint,
    property: SearchProperty,
) -> Result<SequenceSearchResult, SearchError> {
    let options = SearchOptions {
        constraint,
        property,
        stop_at_first: true,
    };
    search_with_visitor(oracle, horizon, options, &mut |_, _| {})
}

/// Like [`exhaustive_sequence_search`], calling `visit` on every prefix that
/// keeps the property, with the bundles after that prefix.
pub fn search_with_visitor(
    oracle: &dyn ValuationOracle,
    horizon: u64,
    options: SearchOptions,
    visit: &mut dyn FnMut(&[RoundMatching], &Bundles),
) -> Result<SequenceSearchResult, SearchError> {
    let shape = oracle.shape();
    if shape.n > SEARCH_MAX_N || horizon > SEARCH_MAX_T {
        return Err(SearchError::GuardExceeded { n: shape.n, horizon });
    }
    let all: Vec<RoundMatching> = enumerate_perfect_matchings(shape)?.collect();
    let mut candidates = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let options_t = match options.constraint {
            SearchConstraint::AnyPerfect => all.clone(),
            SearchConstraint::MaxWeightOnly => {
                let weights = RoundWeights::from_oracle(oracle, t)?;
                let (_, best) = max_weight_matching_general(&weights);
                all.iter()
                    .filter(|x| matching_weight(&weights, x).map(|w| w == best).unwrap_or(false))
                    .cloned()
                    .collect()
            }
        };
        candidates.push(options_t);
    }
    let mut search = Search {
        oracle,
        candidates,
        options,
        explored: 0,
        sequences: 0,
        prefix: Vec::new(),
        bundles: Bundles::new(shape),
        witness: None,
        visit,
    };
    if horizon == 0 {
        search.witness = Some(Vec::new());
    } else {
        search.dfs(1, horizon);
    }
    Ok(SequenceSearchResult {
        exists: search.witness.is_some(),
        witness: search.witness,
        explored: search.explored,
        sequences: search.sequences,
        horizon,
    })
}

struct Search<'a> {
    oracle: &'a dyn ValuationOracle,
    candidates: Vec<Vec<RoundMatching>>,
    options: SearchOptions,
    explored: u64,
    sequences: u64,
    prefix: Vec<RoundMatching>,
    bundles: Bundles,
    witness: Option<Vec<RoundMatching>>,
    visit: &'a mut dyn FnMut(&[RoundMatching], &Bundles),
}

impl Search<'_> {
    fn holds(&self) -> bool {
        match self.options.property {
            SearchProperty::Ef1EachRound => self.bundles.efk_violation(self.oracle, 1).is_none(),
        }
    }

    /// Returns true once the search should stop.
    fn dfs(&mut self, t: u64, horizon: u64) -> bool {
        for k in 0..self.candidates[t as usize - 1].len() {
            let x = self.candidates[t as usize - 1][k].clone();
            let pairs = x.to_pairs();
            for &p in &pairs {
                self.bundles.push(t, p);
            }
            self.prefix.push(x);
            self.explored += 1;
            if t == horizon {
                self.sequences += 1;
            }
            let mut stop = false;
            if self.holds() {
                (self.visit)(&self.prefix, &self.bundles);
                if t == horizon {
                    if self.witness.is_none() {
                        self.witness = Some(self.prefix.clone());
                    }
                    stop = self.options.stop_at_first;
                } else {
                    stop = self.dfs(t + 1, horizon);
                }
            }
            self.prefix.pop();
            for &p in pairs.iter().rev() {
                self.bundles.pop(p);
            }
            if stop {
                return true;
            }
        }
        false
    }
}
