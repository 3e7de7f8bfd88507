use std::collections::BTreeSet;

use num_traits::{One, Zero};
use proptest::prelude::*;

use fairmatch::engines::{run_engine, EngineConfig, EngineKind};
use fairmatch::envy::{
    find_cycle_in_circuit, is_c_envy_bounded, is_ef1, is_efx_binary01, only_symmetric_cycles, AdjacencyGraph, Circuit,
    DesireGraph, Digraph,
};
use fairmatch::instance::Instance;
use fairmatch::ledger::{Ledgers, ValueView};
use fairmatch::matching::{
    enumerate_perfect_matchings, matching_weight, max_weight_matching_binary_symmetric, max_weight_matching_general,
    RoundWeights,
};
use fairmatch::oracle::Bundles;
use fairmatch::valuation::{validate_oracle, Capabilities, Capability, StaticValuation};
use fairmatch::{AgentId, MarketShape, MatchHistory, Mode, Pair, Rational, Side, ValueMatrix};

fn rational() -> impl Strategy<Value = Rational> {
    (0i128..10, 1i128..5).prop_map(|(p, q)| Rational::new(p, q))
}

fn matrix(shape: MarketShape, cell: BoxedStrategy<Rational>) -> impl Strategy<Value = ValueMatrix> {
    let pairs: Vec<(AgentId, AgentId)> = ValueMatrix::cross_pairs(shape).collect();
    prop::collection::vec(cell, pairs.len()).prop_map(move |vals| {
        let mut m = ValueMatrix::zeros(shape);
        for (&(i, j), v) in pairs.iter().zip(vals) {
            m.set(i, j, v);
        }
        m
    })
}

/// Symmetric matrix with each cross pair liked (1) or not (`a`).
fn symmetric_binary(n: usize, a: Rational) -> impl Strategy<Value = ValueMatrix> {
    prop::collection::vec(any::<bool>(), n * n).prop_map(move |likes| {
        let mut m = ValueMatrix::zeros(MarketShape::square(n));
        for i in 0..n {
            for j in 0..n {
                let v = if likes[i * n + j] { Rational::one() } else { a };
                m.set(AgentId::n(i), AgentId::m(j), v);
                m.set(AgentId::m(j), AgentId::n(i), v);
            }
        }
        m
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// A scripted instance with one matrix per round plus a rounds history.
fn scripted_history(cell: BoxedStrategy<Rational>) -> impl Strategy<Value = (Instance, MatchHistory)> {
    (1usize..=4, 1usize..=6).prop_flat_map(move |(n, t)| {
        let shape = MarketShape::square(n);
        (
            prop::collection::vec(matrix(shape, cell.clone()), t),
            prop::collection::vec(permutation(n), t),
        )
            .prop_map(move |(ms, perms)| {
                let inst = Instance::new_scripted(ms, None, vec![]);
                let mut h = MatchHistory::new(shape, Mode::Rounds);
                for (k, p) in perms.into_iter().enumerate() {
                    let pairs = p.into_iter().enumerate().map(|(i, j)| Pair::new(i, j)).collect();
                    h.push(k as u64 + 1, pairs).unwrap();
                }
                (inst, h)
            })
    })
}

fn binary_cell(a: Rational) -> BoxedStrategy<Rational> {
    prop_oneof![Just(Rational::one()), Just(a)].boxed()
}

fn low_values() -> [Rational; 3] {
    [Rational::zero(), Rational::new(1, 2), Rational::new(9, 10)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ledger_matches_definitional_sums((inst, h) in scripted_history(rational().boxed())) {
        let ledgers = Ledgers::from_history(&inst, &h).unwrap();
        let b = Bundles::from_history(&h);
        for side in Side::BOTH {
            for i in inst.shape.agents(side) {
                for j in inst.shape.agents(side) {
                    prop_assert_eq!(ledgers.values.bundle_value(side, i.index, j.index), b.value(&inst, i, j));
                }
            }
        }
    }

    #[test]
    fn prefix_then_suffix_equals_whole((inst, h) in scripted_history(rational().boxed()), cut in 0u64..=6) {
        let cut = cut.min(h.t());
        let mut ledgers = Ledgers::from_history(&inst, &h.prefix(cut)).unwrap();
        for step in h.steps().iter().filter(|s| s.t > cut) {
            ledgers.apply_events(&inst, step.t, &step.pairs).unwrap();
        }
        prop_assert_eq!(ledgers, Ledgers::from_history(&inst, &h).unwrap());
    }

    #[test]
    fn kappa_view_reproduces_binary_values(
        k in 0usize..3,
        seed_hist in scripted_history(binary_cell(Rational::zero())),
    ) {
        let a = low_values()[k];
        let (base, h) = seed_hist;
        // Raise every non-like to `a`.
        let ms = base.matrices.iter().map(|m| {
            let mut out = m.clone();
            for (i, j) in ValueMatrix::cross_pairs(m.shape()) {
                if m.get(i, j).is_zero() {
                    out.set(i, j, a);
                }
            }
            out
        }).collect();
        let inst = Instance::new_scripted(ms, Some(a), vec![Capability::Binary]);
        let ledgers = Ledgers::from_history(&inst, &h).unwrap();
        let view = ledgers.kappa.with_low_value(a);
        let b = Bundles::from_history(&h);
        for side in Side::BOTH {
            for i in 0..inst.shape.len(side) {
                for j in 0..inst.shape.len(side) {
                    prop_assert_eq!(view.bundle_value(side, i, j), ledgers.values.bundle_value(side, i, j));
                    let (ai, aj) = (AgentId { side, index: i }, AgentId { side, index: j });
                    prop_assert_eq!(ledgers.kappa.kappa(side, i, j) as i128, b.likes(&inst, ai, aj));
                }
            }
        }
    }

    #[test]
    fn bound_implies_ef1_and_is_uniform_in_a((inst, h) in scripted_history(binary_cell(Rational::zero()))) {
        let ledgers = Ledgers::from_history(&inst, &h).unwrap();
        let verdicts: Vec<bool> = low_values()
            .iter()
            .map(|&a| is_c_envy_bounded(&ledgers.kappa.with_low_value(a), Rational::one() - a).bounded)
            .collect();
        prop_assert!(verdicts.iter().all(|&v| v == verdicts[0]));
        if verdicts[0] {
            prop_assert!(is_ef1(&ledgers.values).ef1);
        }
        let b = Bundles::from_history(&h);
        prop_assert_eq!(is_ef1(&ledgers.values).ef1, b.efk_violation(&inst, 1).is_none());
        let caps = Capabilities { binary01: true, ..Capabilities::default() };
        prop_assert_eq!(is_efx_binary01(&ledgers.kappa, &caps).unwrap(), b.efk_violation(&inst, 1).is_none());
    }

    #[test]
    fn general_solver_is_optimal(n in 1usize..=5, cells in prop::collection::vec(rational(), 25)) {
        let w: Vec<Vec<Rational>> = (0..n).map(|i| cells[i * 5..i * 5 + n].to_vec()).collect();
        let weights = RoundWeights::from_matrix(1, w).unwrap();
        let (x, best) = max_weight_matching_general(&weights);
        prop_assert_eq!(matching_weight(&weights, &x).unwrap(), best);
        let brute = enumerate_perfect_matchings(MarketShape::square(n))
            .unwrap()
            .map(|y| matching_weight(&weights, &y).unwrap())
            .max()
            .unwrap();
        prop_assert_eq!(best, brute);
    }

    #[test]
    fn binary_fast_path_matches_general(
        k in 0usize..3,
        (n, m) in (1usize..=6).prop_flat_map(|n| (Just(n), symmetric_binary(n, Rational::new(1, 3)))),
    ) {
        let a = low_values()[k];
        let mut values = m.clone();
        for (i, j) in ValueMatrix::cross_pairs(m.shape()) {
            if !m.get(i, j).is_one() {
                values.set(i, j, a);
            }
        }
        let caps = Capabilities { symmetric: true, binary: true, binary01: a.is_zero(), a: Some(a), ..Capabilities::default() };
        let oracle = StaticValuation::new(values, caps);
        let weights = RoundWeights::from_oracle(&oracle, 1).unwrap();
        let fast = max_weight_matching_binary_symmetric(&oracle, 1).unwrap();
        let fast_w = matching_weight(&weights, &fast).unwrap();
        let (_, general) = max_weight_matching_general(&weights);
        prop_assert_eq!(fast_w, general);
        let liked = fast.pairs().filter(|p| weights.get(p.n, p.m).is_one()).count() as i128;
        prop_assert_eq!(fast_w, Rational::from_integer(liked) + a * Rational::from_integer(n as i128 - liked));
    }
}

/// Every simple cycle of `g` in canonical rotation (brute force).
fn simple_cycles(g: &AdjacencyGraph) -> BTreeSet<Vec<usize>> {
    fn extend(g: &AdjacencyGraph, path: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
        let (start, last) = (path[0], *path.last().unwrap());
        for v in 0..g.vertex_count() {
            if !g.has_edge(last, v) {
                continue;
            }
            if v == start && path.len() >= 2 {
                out.insert(path.clone());
            } else if v > start && !path.contains(&v) {
                path.push(v);
                extend(g, path, out);
                path.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    for s in 0..g.vertex_count() {
        extend(g, &mut vec![s], &mut out);
    }
    out
}

/// Brute force: every undirected simple cycle uses symmetric edges only.
fn undirected_cycles_all_symmetric(graph: &DesireGraph) -> bool {
    let g = graph.as_digraph();
    let symmetric: BTreeSet<(usize, usize)> = graph
        .edges
        .iter()
        .filter(|e| e.symmetric)
        .map(|e| (graph.vertex(AgentId::n(e.pair.n)), graph.vertex(AgentId::m(e.pair.m))))
        .collect();
    simple_cycles(&g).into_iter().filter(|c| c.len() >= 3).all(|c| {
        (0..c.len()).all(|q| {
            let (u, v) = (c[q], c[(q + 1) % c.len()]);
            symmetric.contains(&(u.min(v), u.max(v)))
        })
    })
}

fn circuit_case() -> impl Strategy<Value = (AdjacencyGraph, Vec<usize>)> {
    (2usize..=5).prop_flat_map(|v| {
        (
            prop::collection::vec(0..v, 2..=6),
            prop::collection::vec(any::<bool>(), v * v),
        )
            .prop_filter_map("consecutive repeat", move |(walk, extra)| {
                let l = walk.len();
                if (0..l).any(|q| walk[q] == walk[(q + 1) % l]) {
                    return None;
                }
                let mut g = AdjacencyGraph::new(v);
                for q in 0..l {
                    g.add_edge(walk[q], walk[(q + 1) % l]);
                }
                for x in 0..v {
                    for y in 0..v {
                        if x != y && extra[x * v + y] {
                            g.add_edge(x, y);
                        }
                    }
                }
                Some((g, walk))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cycle_in_circuit_is_a_real_cycle_through_the_edge((g, walk) in circuit_case()) {
        let circuit = Circuit::new(walk.clone(), &g).unwrap();
        let cycles = simple_cycles(&g);
        for &i in &walk {
            let c = find_cycle_in_circuit(&circuit, i).unwrap();
            prop_assert!(c.contains_edge(i, circuit.suc(i).unwrap()));
            prop_assert!(cycles.contains(&c.canonical()), "{:?} not a cycle of {:?}", c.vertices(), g);
        }
    }

    #[test]
    fn symmetric_cycle_check_matches_enumeration(
        (n, m, cells) in (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
            (Just(n), Just(m), prop::collection::vec(0u8..4, n * m))
        }),
    ) {
        let shape = MarketShape::new(n, m).unwrap();
        let mut values = ValueMatrix::zeros(shape);
        // 0: none, 1: N likes M, 2: M likes N, 3: both.
        for (k, c) in cells.iter().enumerate() {
            let (i, j) = (AgentId::n(k / m), AgentId::m(k % m));
            if c & 1 == 1 { values.set(i, j, Rational::one()); }
            if c & 2 == 2 { values.set(j, i, Rational::one()); }
        }
        let graph = DesireGraph::from_matrix(&values);
        prop_assert_eq!(only_symmetric_cycles(&graph).holds, undirected_cycles_all_symmetric(&graph));
    }

    #[test]
    fn sym_bin_traces_pass_the_verifier_for_every_a(
        seed_matrices in (1usize..=5).prop_flat_map(|n| prop::collection::vec(symmetric_binary(n, Rational::zero()), 6)),
    ) {
        let n = seed_matrices[0].shape().n;
        let inst = Instance::new_scripted(seed_matrices, Some(Rational::zero()),
            vec![Capability::Symmetric, Capability::Binary, Capability::Binary01]);
        for t in 1..=6 {
            validate_oracle(&inst, t, &inst.declared).unwrap();
        }
        let mut rounds = Vec::new();
        for a in low_values() {
            let config = EngineConfig { a: Some(a), ..EngineConfig::default() };
            let (_, reports) = run_engine(EngineKind::SymBin, config, &inst, 12).unwrap();
            for r in &reports {
                prop_assert!(r.passed());
                prop_assert!(r.iterations <= 2 * n * n);
                prop_assert!(r.swaps.iter().all(|s| s.is_well_formed()));
                prop_assert!(r.good_edge_counts.windows(2).all(|w| w[0] <= w[1]));
            }
            let trace = fairmatch::trace::Trace::from_reports(EngineKind::SymBin, inst.shape, Some(a), &reports);
            let report = fairmatch::oracle::verify_trace(&inst, &trace, Mode::Rounds).unwrap();
            prop_assert!(report.passed(), "{}", report.failure.unwrap());
            rounds.push(reports.iter().map(|r| r.events.clone()).collect::<Vec<_>>());
        }
        prop_assert!(rounds.iter().all(|r| *r == rounds[0]));
    }
}
