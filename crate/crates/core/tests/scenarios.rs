use num_traits::{One, Zero};

use fairmatch::engines::{run_engine, EdgePolicy, EngineConfig, EngineKind};
use fairmatch::envy::{is_ef1, only_symmetric_cycles, DesireGraph};
use fairmatch::gen::{generate, pad_to_square, run_adaptive, Dynamics, GeneratorKind, GeneratorSpec, SpoilMatched};
use fairmatch::instance::Instance;
use fairmatch::ledger::Ledgers;
use fairmatch::matching::{enumerate_perfect_matchings, matching_weight, max_weight_matching_general, RoundWeights};
use fairmatch::oracle::theorems::witness_sound;
use fairmatch::oracle::{
    ef2_over_time_expansion, exhaustive_sequence_search, search_with_visitor, verify_trace, Bundles, SearchConstraint,
    SearchOptions, SearchProperty,
};
use fairmatch::trace::Trace;
use fairmatch::valuation::{validate_oracle, Capabilities, Capability};
use fairmatch::{
    AgentId, MarketShape, MatchHistory, Mode, Pair, Rational, RoundMatching, ValuationOracle, ValueMatrix,
};

fn r(p: i128) -> Rational {
    Rational::from_integer(p)
}

fn verify(inst: &Instance, kind: EngineKind, a: Option<Rational>, steps: u64) {
    let (_, reports) = run_engine(kind, EngineConfig::default(), inst, steps).unwrap();
    assert!(reports.iter().all(|r| r.passed()));
    let trace = Trace::from_reports(kind, inst.shape, a, &reports);
    let report = verify_trace(inst, &trace, kind.mode()).unwrap();
    assert!(report.passed(), "{}", report.failure.unwrap());
}

#[test]
fn round_robin_two_by_two_hand_simulation() {
    let mut values = ValueMatrix::zeros(MarketShape::square(2));
    for (j, (va, vb)) in [(3, 5), (1, 2)].into_iter().enumerate() {
        values.set(AgentId::n(0), AgentId::m(j), r(va));
        values.set(AgentId::n(1), AgentId::m(j), r(vb));
    }
    let inst = Instance::new_static(values, None, vec![Capability::Static]);
    let (state, reports) = run_engine(EngineKind::RoundRobin, EngineConfig::default(), &inst, 4).unwrap();
    let events: Vec<Pair> = reports.iter().flat_map(|r| r.events.clone()).collect();
    assert_eq!(
        events,
        vec![Pair::new(0, 0), Pair::new(1, 1), Pair::new(1, 0), Pair::new(0, 1)]
    );
    for t in 1..=4 {
        let ledgers = Ledgers::from_history(&inst, &state.history.prefix(t)).unwrap();
        assert!(is_ef1(&ledgers.values).ef1, "t = {t}");
    }
    assert_eq!(reports[3].stage_envy_free, Some(true));
}

#[test]
fn round_robin_single_m_agent() {
    let mut values = ValueMatrix::zeros(MarketShape::new(2, 1).unwrap());
    values.set(AgentId::n(0), AgentId::m(0), r(2));
    values.set(AgentId::n(1), AgentId::m(0), r(7));
    let inst = Instance::new_static(values, None, vec![Capability::Static]);
    let (_, reports) = run_engine(EngineKind::RoundRobin, EngineConfig::default(), &inst, 2).unwrap();
    assert_eq!(reports[0].events, vec![Pair::new(0, 0)]);
    assert_eq!(reports[1].events, vec![Pair::new(1, 0)]);
    assert_eq!(reports[1].stage_envy_free, Some(true));
}

#[test]
fn shared_favourite_triggers_exactly_one_steal() {
    // N0 and N1 both like M0, who likes nobody.
    let mut values = ValueMatrix::zeros(MarketShape::new(2, 1).unwrap());
    values.set(AgentId::n(0), AgentId::m(0), Rational::one());
    values.set(AgentId::n(1), AgentId::m(0), Rational::one());
    let inst = Instance::new_static(values, None, vec![Capability::Static, Capability::Binary01]);
    let config = EngineConfig {
        edge_policy: EdgePolicy::Lexicographic,
        ..EngineConfig::default()
    };
    let (state, reports) = run_engine(EngineKind::AsymCycles, config, &inst, 3).unwrap();
    assert_eq!(reports[0].iterations, 0);
    assert_eq!(reports[1].iterations, 1);
    assert_eq!(reports[1].events, vec![Pair::new(1, 0)]);
    for t in 1..=3 {
        let ledgers = Ledgers::from_history(&inst, &state.history.prefix(t)).unwrap();
        assert!(is_ef1(&ledgers.values).ef1);
    }
}

#[test]
fn symmetric_desire_graph_first_step_has_no_steals() {
    let spec = GeneratorSpec::new(GeneratorKind::SymmetricBinary, 4, 4, 0.6, 2);
    let inst = generate(&spec).unwrap();
    let (_, reports) = run_engine(EngineKind::AsymCycles, EngineConfig::default(), &inst, 1).unwrap();
    assert_eq!(reports[0].iterations, 0);
    assert_eq!(reports[0].events.len(), 1);
}

#[test]
fn star_with_one_way_spokes_stays_ef1() {
    // M0 is liked by every N-agent and likes only N0.
    let mut values = ValueMatrix::zeros(MarketShape::new(4, 1).unwrap());
    for i in 0..4 {
        values.set(AgentId::n(i), AgentId::m(0), Rational::one());
    }
    values.set(AgentId::m(0), AgentId::n(0), Rational::one());
    let inst = Instance::new_static(values, None, vec![Capability::Static, Capability::Binary01]);
    assert!(only_symmetric_cycles(&DesireGraph::from_matrix(inst.matrix(1))).holds);
    verify(&inst, EngineKind::AsymCycles, None, 20);
}

#[test]
fn dynamic_five_by_five_passes_verifier() {
    let spec = GeneratorSpec {
        dynamics: Dynamics::Redraw,
        steps: 50,
        ..GeneratorSpec::new(GeneratorKind::SymmetricBinary, 5, 5, 0.5, 99)
    };
    verify(
        &generate(&spec).unwrap(),
        EngineKind::SymBin,
        Some(Rational::zero()),
        50,
    );
}

#[test]
fn density_extremes() {
    let zero = generate(&GeneratorSpec::new(GeneratorKind::SymmetricBinary, 3, 3, 0.0, 1)).unwrap();
    verify(&zero, EngineKind::SymBin, None, 10);
    let one = generate(&GeneratorSpec::new(GeneratorKind::SymmetricBinary, 3, 3, 1.0, 1)).unwrap();
    let (_, reports) = run_engine(EngineKind::SymBin, EngineConfig::default(), &one, 10).unwrap();
    assert!(reports.iter().all(|r| r.iterations == 0));
}

#[test]
fn padded_instances_never_swap_toward_dummies() {
    for seed in 0..20 {
        let spec = GeneratorSpec::new(GeneratorKind::SymmetricBinary, 2, 3, 0.5, seed);
        let padded = pad_to_square(&generate(&spec).unwrap());
        assert_eq!(padded.shape, MarketShape::square(3));
        for j in 0..3 {
            assert!(padded.value(1, AgentId::n(2), AgentId::m(j)).is_zero());
            assert!(padded.value(1, AgentId::m(j), AgentId::n(2)).is_zero());
        }
        validate_oracle(&padded, 1, &padded.declared).unwrap();
        let (_, reports) = run_engine(EngineKind::SymBin, EngineConfig::default(), &padded, 20).unwrap();
        let dummy = AgentId::n(2);
        for r in &reports {
            for s in &r.swaps {
                assert!(s.new_partner != dummy && s.envier != dummy, "seed {seed}: {s:?}");
            }
            let weights = RoundWeights::from_oracle(&padded, r.t).unwrap();
            let dummy_match = r.events.iter().find(|p| p.n == 2).unwrap();
            assert!(weights.get(dummy_match.n, dummy_match.m).is_zero());
        }
        let trace = Trace::from_reports(EngineKind::SymBin, padded.shape, None, &reports);
        assert!(verify_trace(&padded, &trace, Mode::Rounds).unwrap().passed());
    }
}

#[test]
fn bridge_restriction_matters() {
    let mut failures = 0;
    for seed in 0..100 {
        let restricted = generate(&GeneratorSpec::new(GeneratorKind::OnlySymmetricCycles, 4, 4, 0.5, seed)).unwrap();
        assert!(only_symmetric_cycles(&DesireGraph::from_matrix(restricted.matrix(1))).holds);
        let free = generate(&GeneratorSpec::new(GeneratorKind::GeneralBinary, 4, 4, 0.5, seed)).unwrap();
        if !only_symmetric_cycles(&DesireGraph::from_matrix(free.matrix(1))).holds {
            failures += 1;
        }
    }
    assert!(failures > 0);
}

#[test]
fn adaptive_adversary_cannot_break_ef1() {
    for a in [Rational::zero(), Rational::new(1, 2)] {
        let shape = MarketShape::square(4);
        let caps = Capabilities {
            symmetric: true,
            binary: true,
            binary01: a.is_zero(),
            a: Some(a),
            ..Capabilities::default()
        };
        let mut adversary = SpoilMatched::new(a, 0.6, 17);
        let (_, reports, revealed) = run_adaptive(
            EngineKind::SymBin,
            EngineConfig::default(),
            shape,
            caps,
            &mut adversary,
            40,
        )
        .unwrap();
        assert_eq!(revealed.revealed(), 40);
        let inst = revealed.to_instance(vec![Capability::Symmetric, Capability::Binary]);
        let trace = Trace::from_reports(EngineKind::SymBin, shape, Some(a), &reports);
        let report = verify_trace(&inst, &trace, Mode::Rounds).unwrap();
        assert!(report.passed(), "{}", report.failure.unwrap());
    }
}

#[test]
fn empty_traces_pass() {
    let inst = generate(&GeneratorSpec::new(GeneratorKind::SymmetricBinary, 3, 3, 0.5, 0)).unwrap();
    let trace = Trace::new(EngineKind::SymBin, inst.shape, None);
    assert!(verify_trace(&inst, &trace, Mode::Rounds).unwrap().passed());
    let verdict = ef2_over_time_expansion(&inst, &MatchHistory::new(inst.shape, Mode::Rounds)).unwrap();
    assert!(verdict.holds);
}

#[test]
fn ef2_expansion_catches_a_lopsided_history() {
    // Both N-agents like only M0; N0 gets M0 every round.
    let mut values = ValueMatrix::zeros(MarketShape::square(2));
    values.set(AgentId::n(0), AgentId::m(0), Rational::one());
    values.set(AgentId::n(1), AgentId::m(0), Rational::one());
    let inst = Instance::new_static(values, None, vec![Capability::Static, Capability::Binary01]);
    let mut h = MatchHistory::new(inst.shape, Mode::Rounds);
    for t in 1..=3 {
        h.push(t, vec![Pair::new(0, 0), Pair::new(1, 1)]).unwrap();
    }
    let verdict = ef2_over_time_expansion(&inst, &h).unwrap();
    assert!(!verdict.holds);
    let failure = verdict.failure.unwrap();
    assert_eq!(failure.t, 3);
    assert_eq!(failure.pair, (AgentId::n(1), AgentId::n(0)));
}

#[test]
fn search_visits_every_unpruned_node_for_two_agents() {
    for seed in 0..10 {
        let spec = GeneratorSpec {
            dynamics: Dynamics::Redraw,
            steps: 5,
            ..GeneratorSpec::new(GeneratorKind::SymmetricBinary, 2, 2, 0.5, seed)
        };
        let inst = generate(&spec).unwrap();
        let horizon = 5;
        let options = SearchOptions {
            constraint: SearchConstraint::AnyPerfect,
            property: SearchProperty::Ef1EachRound,
            stop_at_first: false,
        };
        let result = search_with_visitor(&inst, horizon, options, &mut |_, _| {}).unwrap();

        // Direct enumeration: a length-d sequence is visited iff all of its
        // proper prefixes are EF1.
        let rounds: Vec<RoundMatching> = enumerate_perfect_matchings(inst.shape).unwrap().collect();
        let ef1_prefixes = |code: u32, d: u64| -> Vec<bool> {
            let mut b = Bundles::new(inst.shape);
            (1..=d)
                .map(|t| {
                    for p in rounds[((code >> (t - 1)) & 1) as usize].pairs() {
                        b.push(t, p);
                    }
                    b.efk_violation(&inst, 1).is_none()
                })
                .collect()
        };
        let mut explored = 0;
        let mut leaves = 0;
        let mut exists = false;
        for d in 1..=horizon {
            for code in 0..(1u32 << d) {
                let ok = ef1_prefixes(code, d);
                if ok[..ok.len() - 1].iter().all(|&x| x) {
                    explored += 1;
                    if d == horizon {
                        leaves += 1;
                        exists |= ok[ok.len() - 1];
                    }
                }
            }
        }
        assert_eq!(result.explored, explored, "seed {seed}");
        assert_eq!(result.sequences, leaves, "seed {seed}");
        assert_eq!(result.exists, exists, "seed {seed}");
        if exists {
            assert!(witness_sound(&inst, &result));
        }
    }
}

#[test]
fn engine_trace_is_a_max_weight_witness() {
    for seed in 0..10 {
        let inst = generate(&GeneratorSpec::new(GeneratorKind::SymmetricBinary, 3, 3, 0.5, seed)).unwrap();
        let horizon = 4;
        let (_, reports) = run_engine(EngineKind::SymBin, EngineConfig::default(), &inst, horizon).unwrap();
        for r in &reports {
            let weights = RoundWeights::from_oracle(&inst, r.t).unwrap();
            let x = RoundMatching::from_pairs(3, &r.events).unwrap();
            assert_eq!(
                matching_weight(&weights, &x).unwrap(),
                max_weight_matching_general(&weights).1
            );
        }
        let result = exhaustive_sequence_search(
            &inst,
            horizon,
            SearchConstraint::MaxWeightOnly,
            SearchProperty::Ef1EachRound,
        )
        .unwrap();
        assert!(result.exists, "seed {seed}");
        assert!(witness_sound(&inst, &result));
    }
}
