//! Per-timestep matching weights and maximum-weight perfect matchings.

use std::collections::VecDeque;

use itertools::Itertools;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::market::{AgentId, MarketShape, Pair, RoundMatching};
use crate::rational::Rational;
use crate::valuation::{validate_oracle, Capability, ValuationOracle, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("market is not square (n = {n}, m = {m})")]
    NotSquare { n: usize, m: usize },
    #[error("matching has {got} pairs but the market has {expected} agents per side")]
    SizeMismatch { expected: usize, got: usize },
    #[error("enumeration is limited to n <= {limit}, got n = {n}")]
    TooLarge { n: usize, limit: usize },
    #[error(transparent)]
    Capability(#[from] Violation),
}

/// `w(i, j) = (v_i^t(j) + v_j^t(i)) / 2` for every `i` in N and `j` in M.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundWeights {
    pub t: u64,
    w: Vec<Vec<Rational>>,
}

impl RoundWeights {
    pub fn from_oracle<O: ValuationOracle + ?Sized>(oracle: &O, t: u64) -> Result<Self, MatchingError> {
        let shape = oracle.shape();
        if !shape.is_square() {
            return Err(MatchingError::NotSquare { n: shape.n, m: shape.m });
        }
        let half = Rational::new(1, 2);
        let w = (0..shape.n)
            .map(|i| {
                (0..shape.m)
                    .map(|j| {
                        let (a, b) = (AgentId::n(i), AgentId::m(j));
                        (oracle.value(t, a, b) + oracle.value(t, b, a)) * half
                    })
                    .collect()
            })
            .collect();
        Ok(RoundWeights { t, w })
    }

    /// Weights given directly; must be square.
    pub fn from_matrix(t: u64, w: Vec<Vec<Rational>>) -> Result<Self, MatchingError> {
        let n = w.len();
        if let Some(row) = w.iter().find(|r| r.len() != n) {
            return Err(MatchingError::NotSquare { n, m: row.len() });
        }
        Ok(RoundWeights { t, w })
    }

    pub fn size(&self) -> usize {
        self.w.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Rational {
        self.w[i][j]
    }
}

/// `W^t(x)`: total weight of a perfect matching.
pub fn matching_weight(weights: &RoundWeights, x: &RoundMatching) -> Result<Rational, MatchingError> {
    if x.size() != weights.size() {
        return Err(MatchingError::SizeMismatch {
            expected: weights.size(),
            got: x.size(),
        });
    }
    Ok(x.pairs().map(|p| weights.get(p.n, p.m)).sum())
}

/// Pairs of a matching where both endpoints value each other at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodEdgeSet {
    pub pairs: Vec<Pair>,
}

impl GoodEdgeSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Good edges of `x` under a binary symmetric oracle at `t`.
pub fn good_edges<O: ValuationOracle + ?Sized>(
    oracle: &O,
    t: u64,
    x: &RoundMatching,
) -> Result<GoodEdgeSet, MatchingError> {
    validate_oracle(oracle, t, &[Capability::Binary, Capability::Symmetric])?;
    Ok(good_edges_unchecked(oracle, t, x))
}

pub(crate) fn good_edges_unchecked<O: ValuationOracle + ?Sized>(oracle: &O, t: u64, x: &RoundMatching) -> GoodEdgeSet {
    let pairs = x
        .pairs()
        .filter(|p| {
            oracle.value(t, AgentId::n(p.n), AgentId::m(p.m)).is_one()
                && oracle.value(t, AgentId::m(p.m), AgentId::n(p.n)).is_one()
        })
        .collect();
    GoodEdgeSet { pairs }
}

/// Exact maximum-weight perfect matching by the primal-dual assignment
/// method (O(n^3)). Columns are scanned in ascending order, so ties resolve
/// deterministically.
pub fn max_weight_matching_general(weights: &RoundWeights) -> (RoundMatching, Rational) {
    let n = weights.size();
    if n == 0 {
        return (RoundMatching::identity(0), Rational::zero());
    }
    // Minimize cost = -w. Index 0 is the virtual row/column.
    let cost = |i: usize, j: usize| -weights.get(i - 1, j - 1);
    let mut u = vec![Rational::zero(); n + 1];
    let mut v = vec![Rational::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<Rational>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<Rational> = None;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if minv[j].is_none_or(|m| cur < m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].expect("set above");
                if delta.is_none_or(|d| mj < d) {
                    delta = Some(mj);
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains while row i is unassigned");
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else if let Some(m) = minv[j].as_mut() {
                    *m -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut partner = vec![0usize; n];
    for j in 1..=n {
        partner[p[j] - 1] = j - 1;
    }
    let x = RoundMatching::from_partners(partner).expect("assignment is a permutation");
    let w = x.pairs().map(|pr| weights.get(pr.n, pr.m)).sum();
    (x, w)
}

/// Maximum-cardinality bipartite matching (Hopcroft-Karp, O(E sqrt V)).
/// Returns `mate[i]` for every left vertex.
pub fn hopcroft_karp(right_count: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    let left_count = adj.len();
    let mut mate_left: Vec<Option<usize>> = vec![None; left_count];
    let mut mate_right: Vec<Option<usize>> = vec![None; right_count];
    let mut dist = vec![INF; left_count];

    loop {
        // Layer free left vertices by alternating-path distance.
        let mut queue = VecDeque::new();
        for i in 0..left_count {
            if mate_left[i].is_none() {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = INF;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                match mate_right[j] {
                    None => found = true,
                    Some(k) if dist[k] == INF => {
                        dist[k] = dist[i] + 1;
                        queue.push_back(k);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut next_edge = vec![0usize; left_count];
        for i in 0..left_count {
            if mate_left[i].is_none() {
                augment(i, adj, &mut dist, &mut next_edge, &mut mate_left, &mut mate_right);
            }
        }
    }
    mate_left
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    dist: &mut [usize],
    next_edge: &mut [usize],
    mate_left: &mut [Option<usize>],
    mate_right: &mut [Option<usize>],
) -> bool {
    while let Some(&j) = adj[i].get(next_edge[i]) {
        next_edge[i] += 1;
        let extends = match mate_right[j] {
            None => true,
            Some(k) => dist[k] == dist[i] + 1 && augment(k, adj, dist, next_edge, mate_left, mate_right),
        };
        if extends {
            mate_left[i] = Some(j);
            mate_right[j] = Some(i);
            return true;
        }
    }
    dist[i] = usize::MAX;
    false
}

/// Maximum-weight perfect matching for binary symmetric values: maximize the
/// number of good edges, then pair leftovers by ascending index. Every
/// leftover pair is worth `a`, so any completion has the same weight.
pub fn max_weight_matching_binary_symmetric<O: ValuationOracle + ?Sized>(
    oracle: &O,
    t: u64,
) -> Result<RoundMatching, MatchingError> {
    let shape = oracle.shape();
    if !shape.is_square() {
        return Err(MatchingError::NotSquare { n: shape.n, m: shape.m });
    }
    validate_oracle(oracle, t, &[Capability::Binary, Capability::Symmetric])?;
    Ok(binary_symmetric_unchecked(oracle, t, shape))
}

pub(crate) fn binary_symmetric_unchecked<O: ValuationOracle + ?Sized>(
    oracle: &O,
    t: u64,
    shape: MarketShape,
) -> RoundMatching {
    let n = shape.n;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| oracle.value(t, AgentId::n(i), AgentId::m(j)).is_one())
                .collect()
        })
        .collect();
    let mate = hopcroft_karp(n, &adj);
    let mut taken = vec![false; n];
    for j in mate.iter().flatten() {
        taken[*j] = true;
    }
    let mut free_m = (0..n).filter(|&j| !taken[j]);
    let partner = mate
        .iter()
        .map(|m| m.unwrap_or_else(|| free_m.next().expect("as many free M-agents as free N-agents")))
        .collect();
    RoundMatching::from_partners(partner).expect("completion is a permutation")
}

pub const ENUMERATION_LIMIT: usize = 8;

/// All `n!` perfect matchings in lexicographic order of `partner` vectors.
pub fn enumerate_perfect_matchings(shape: MarketShape) -> Result<impl Iterator<Item = RoundMatching>, MatchingError> {
    if !shape.is_square() {
        return Err(MatchingError::NotSquare { n: shape.n, m: shape.m });
    }
    if shape.n > ENUMERATION_LIMIT {
        return Err(MatchingError::TooLarge {
            n: shape.n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok((0..shape.n)
        .permutations(shape.n)
        .map(|p| RoundMatching::from_partners(p).expect("permutation")))
}
