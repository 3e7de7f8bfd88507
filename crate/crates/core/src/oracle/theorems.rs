//! Reproductions of the two impossibility results on the bundled fixtures.

use num_traits::Zero;

use super::brute::Bundles;
use super::search::{
    exhaustive_sequence_search, search_with_visitor, SearchConstraint, SearchOptions, SearchProperty,
    SequenceSearchResult,
};
use super::verify::verify_rounds_ef1;
use crate::instance::Instance;
use crate::market::{AgentId, Pair, RoundMatching};
use crate::matching::{max_weight_matching_general, RoundWeights};
use crate::rational::{Rational, PQ};
use crate::valuation::{Capability, ValuationOracle, ValueMatrix};

const SWAP_2X2: &str = include_str!("../../fixtures/swap_2x2.json");
const DYNAMIC_2X2: &str = include_str!("../../fixtures/dynamic_2x2.json");
const MAX_WEIGHT_3X3: &str = include_str!("../../fixtures/max_weight_3x3.json");

pub fn swap_fixture() -> Instance {
    Instance::from_json(SWAP_2X2).expect("bundled fixture parses")
}

pub fn dynamic_fixture() -> Instance {
    Instance::from_json(DYNAMIC_2X2).expect("bundled fixture parses")
}

pub fn max_weight_fixture() -> Instance {
    Instance::from_json(MAX_WEIGHT_3X3).expect("bundled fixture parses")
}

/// The dynamic fixture with every non-like raised from 0 to `a`.
pub fn dynamic_fixture_with_low_value(a: Rational) -> Instance {
    let base = dynamic_fixture();
    let raise = |m: &ValueMatrix| {
        let mut out = m.clone();
        for (i, j) in ValueMatrix::cross_pairs(m.shape()) {
            if m.get(i, j).is_zero() {
                out.set(i, j, a);
            }
        }
        out
    };
    let declared = if a.is_zero() {
        vec![Capability::Binary01]
    } else {
        vec![Capability::Binary]
    };
    Instance::new_scripted(base.matrices.iter().map(raise).collect(), Some(a), declared)
}

/// Low values swept alongside `a = 0`; reported, not asserted.
pub fn sweep_values() -> Vec<Rational> {
    vec![Rational::new(1, 4), Rational::new(1, 2)]
}

/// Replays a search witness through the verifier.
pub fn witness_sound(oracle: &dyn ValuationOracle, result: &SequenceSearchResult) -> bool {
    result
        .witness
        .as_ref()
        .is_none_or(|w| verify_rounds_ef1(oracle, w).passed())
}

#[derive(Debug, Clone)]
pub struct Theorem4Report {
    pub result: SequenceSearchResult,
    pub sweep: Vec<(Rational, SequenceSearchResult)>,
}

impl Theorem4Report {
    /// No EF1 sequence of two rounds, after checking all four.
    pub fn matches_expected(&self) -> bool {
        !self.result.exists && self.result.sequences == 4
    }
}

pub fn theorem4_reproduce() -> Theorem4Report {
    let run = |inst: &Instance| {
        exhaustive_sequence_search(inst, 2, SearchConstraint::AnyPerfect, SearchProperty::Ef1EachRound)
            .expect("2x2 search is within the guard")
    };
    let result = run(&dynamic_fixture());
    let sweep = sweep_values()
        .into_iter()
        .map(|a| (a, run(&dynamic_fixture_with_low_value(a))))
        .collect();
    Theorem4Report { result, sweep }
}

/// One surviving prefix at an even round where a claimed identity failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimFailure {
    pub prefix: Vec<RoundMatching>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Theorem5Report {
    /// Optimum round weight (equal at every timestep for a static instance).
    pub max_weight: Rational,
    /// Restricted to maximum-weight rounds, horizon 6.
    pub constrained: SequenceSearchResult,
    /// Smallest horizon with no surviving maximum-weight sequence.
    pub first_impossible_horizon: Option<u64>,
    /// Surviving prefixes of length 2 and of length 4; the claims are
    /// checked on each.
    pub prefixes_checked: [usize; 2],
    pub claim_failures: Vec<ClaimFailure>,
    /// Any perfect matching allowed, horizon 6.
    pub unconstrained: SequenceSearchResult,
    pub witness_sound: bool,
    /// The unconstrained witness matches agents 5 and 2 at some round.
    pub witness_pairs_5_with_2: bool,
}

impl Theorem5Report {
    pub fn matches_expected(&self) -> bool {
        self.max_weight == Rational::new(3, 2)
            && !self.constrained.exists
            && self.prefixes_checked[0] > 0
            && self.claim_failures.is_empty()
            && self.unconstrained.exists
            && self.witness_sound
    }
}

pub const THEOREM5_HORIZON: u64 = 6;

pub fn theorem5_reproduce() -> Theorem5Report {
    let inst = max_weight_fixture();
    let (_, max_weight) = max_weight_matching_general(&RoundWeights::from_oracle(&inst, 1).expect("square"));
    let (one, three, five) = (AgentId::n(0), AgentId::n(1), AgentId::n(2));
    let (four, six) = (AgentId::m(1), AgentId::m(2));

    let mut prefixes_checked = [0, 0];
    let mut claim_failures = Vec::new();
    let mut visit = |prefix: &[RoundMatching], b: &Bundles| {
        let t = prefix.len();
        if t != 2 && t != 4 {
            return;
        }
        prefixes_checked[t / 2 - 1] += 1;
        let v = |i, j| b.value(&inst, i, j);
        let mut fail = |detail: String| {
            claim_failures.push(ClaimFailure {
                prefix: prefix.to_vec(),
                detail,
            })
        };
        if v(four, four) != v(four, six) {
            fail(format!(
                "t = {t}: v_4(X_4) = {} but v_4(X_6) = {}",
                PQ(&v(four, four)),
                PQ(&v(four, six))
            ));
        }
        let r = Rational::from_integer(t as i128 / 2);
        let sum = (v(one, five) - v(one, one)) + (v(three, five) - v(three, three));
        if sum != r {
            fail(format!("t = {t}: r-sum is {}, expected {}", PQ(&sum), PQ(&r)));
        }
    };
    let options = SearchOptions {
        constraint: SearchConstraint::MaxWeightOnly,
        property: SearchProperty::Ef1EachRound,
        stop_at_first: false,
    };
    let constrained =
        search_with_visitor(&inst, THEOREM5_HORIZON, options, &mut visit).expect("3x3 search is within the guard");

    let first_impossible_horizon = (1..=THEOREM5_HORIZON).find(|&h| {
        !exhaustive_sequence_search(&inst, h, SearchConstraint::MaxWeightOnly, SearchProperty::Ef1EachRound)
            .expect("within guard")
            .exists
    });
    let unconstrained = exhaustive_sequence_search(
        &inst,
        THEOREM5_HORIZON,
        SearchConstraint::AnyPerfect,
        SearchProperty::Ef1EachRound,
    )
    .expect("3x3 search is within the guard");
    let witness_pairs_5_with_2 = unconstrained
        .witness
        .as_ref()
        .is_some_and(|w| w.iter().any(|x| x.pairs().any(|p| p == Pair::new(2, 0))));
    Theorem5Report {
        max_weight,
        constrained,
        first_impossible_horizon,
        prefixes_checked,
        claim_failures,
        witness_sound: witness_sound(&inst, &unconstrained),
        unconstrained,
        witness_pairs_5_with_2,
    }
}
