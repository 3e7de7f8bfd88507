//! Acceptance run: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines always reach the output.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use itertools::Itertools;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fairmatch::engines::{run_engine, EngineConfig, EngineKind, SymBinEngine};
use fairmatch::envy::{find_cycle_in_circuit, AdjacencyGraph, Circuit, Digraph};
use fairmatch::gen::{generate, Dynamics, GeneratorKind, GeneratorSpec};
use fairmatch::matching::{
    enumerate_perfect_matchings, matching_weight, max_weight_matching_binary_symmetric, max_weight_matching_general,
    RoundWeights,
};
use fairmatch::oracle::{ef2_over_time_expansion, theorem4_reproduce, theorem5_reproduce, verify_trace};
use fairmatch::trace::Trace;
use fairmatch::valuation::{Capabilities, StaticValuation};
use fairmatch::{AgentId, Instance, MarketShape, Mode, Rational, ValueMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn low_values() -> [Rational; 3] {
    [Rational::zero(), Rational::new(1, 2), Rational::new(9, 10)]
}

/// The 200 symmetric binary specs shared by criteria 1, 2 and 9.
fn suite_one_specs() -> Vec<GeneratorSpec> {
    let densities = [0.2, 0.5, 0.8];
    (0..200u64)
        .map(|k| {
            let n = 2 + (k as usize % 7);
            let p = densities[(k as usize / 7) % 3];
            let dynamics = match k % 3 {
                0 => Dynamics::Static,
                1 => Dynamics::Redraw,
                _ => Dynamics::FlipK(1 + (k as usize % n)),
            };
            GeneratorSpec {
                dynamics,
                steps: 50,
                ..GeneratorSpec::new(GeneratorKind::SymmetricBinary, n, n, p, 1000 + k)
            }
        })
        .collect()
}

struct SuiteOne {
    /// Instance and its a = 0 trace, kept for criterion 9.
    traces: Vec<(Instance, Trace)>,
    max_swaps: usize,
    swap_violations: usize,
}

fn criterion_1(suite: &mut Option<SuiteOne>) -> Outcome {
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    let mut max_swaps = 0;
    let mut swap_violations = 0;
    for spec in suite_one_specs() {
        let instance = generate(&spec).expect("suite spec is feasible");
        let mut rounds_by_a = Vec::new();
        for a in low_values() {
            let config = EngineConfig {
                a: Some(a),
                ..EngineConfig::default()
            };
            let (_, reports) = match run_engine(EngineKind::SymBin, config, &instance, 50) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("seed {}: engine error {e}", spec.seed));
                    break;
                }
            };
            for r in &reports {
                max_swaps = max_swaps.max(r.iterations);
                if r.iterations > SymBinEngine::swap_bound(spec.n) {
                    swap_violations += 1;
                }
            }
            let trace = Trace::from_reports(EngineKind::SymBin, instance.shape, Some(a), &reports);
            let report = verify_trace(&instance, &trace, Mode::Rounds).expect("header matches");
            if let Some(f) = report.failure {
                failures.push(format!(
                    "seed {} a = {a}: {}",
                    spec.seed,
                    f.to_string().lines().next().unwrap_or("")
                ));
            }
            rounds_by_a.push(trace.records.iter().map(|r| r.pairs()).collect::<Vec<_>>());
            if a.is_zero() {
                traces.push((instance.clone(), trace));
            }
        }
        if rounds_by_a.iter().any(|r| *r != rounds_by_a[0]) {
            failures.push(format!("seed {}: matches depend on a", spec.seed));
        }
    }
    *suite = Some(SuiteOne {
        traces,
        max_swaps,
        swap_violations,
    });
    match failures.first() {
        None => outcome(true, "200 instances x 50 rounds x a in {0, 1/2, 9/10} verified"),
        Some(f) => outcome(false, format!("{} failures, first: {f}", failures.len())),
    }
}

fn criterion_2(suite: &Option<SuiteOne>) -> Outcome {
    let Some(suite) = suite else {
        return outcome(false, "suite 1 did not run");
    };
    let spec = GeneratorSpec {
        dynamics: Dynamics::Redraw,
        steps: 1000,
        ..GeneratorSpec::new(GeneratorKind::SymmetricBinary, 8, 8, 0.5, 7)
    };
    let instance = generate(&spec).expect("feasible");
    let (_, reports) = match run_engine(EngineKind::SymBin, EngineConfig::default(), &instance, 1000) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("n = 8 long run failed: {e}")),
    };
    let long_max = reports.iter().map(|r| r.iterations).max().unwrap_or(0);
    let pass = suite.swap_violations == 0 && long_max <= SymBinEngine::swap_bound(8);
    outcome(
        pass,
        format!(
            "suite max swaps {} ({} over 2n^2); n = 8 over 1000 steps: max {} of bound 128",
            suite.max_swaps, suite.swap_violations, long_max
        ),
    )
}

fn criterion_3() -> Outcome {
    let r = theorem4_reproduce();
    outcome(
        r.matches_expected(),
        format!("exists = {}, sequences = {}", r.result.exists, r.result.sequences),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let r = theorem5_reproduce();
    let pass = r.matches_expected() && start.elapsed().as_secs_f64() < 1.0;
    outcome(
        pass,
        format!(
            "max weight {}, constrained exists = {} (no sequence from horizon {:?}), claims on {}+{} prefixes, {} failures, unconstrained exists = {}",
            r.max_weight,
            r.constrained.exists,
            r.first_impossible_horizon,
            r.prefixes_checked[0],
            r.prefixes_checked[1],
            r.claim_failures.len(),
            r.unconstrained.exists
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut steals = 0;
    for k in 0..100u64 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=(12 - n).min(6));
        let spec = GeneratorSpec::new(GeneratorKind::OnlySymmetricCycles, n, m, 0.4, 5000 + k);
        let instance = generate(&spec).expect("feasible");
        let reports = match run_engine(EngineKind::AsymCycles, EngineConfig::default(), &instance, 100) {
            Ok((_, r)) => r,
            Err(e) => {
                failures.push(format!("seed {}: {e}", spec.seed));
                continue;
            }
        };
        for r in &reports {
            steals = steals.max(r.iterations);
            if r.iterations > n + m {
                failures.push(format!("seed {} t = {}: {} steals", spec.seed, r.t, r.iterations));
            }
        }
        let trace = Trace::from_reports(EngineKind::AsymCycles, instance.shape, None, &reports);
        let report = verify_trace(&instance, &trace, Mode::Time).expect("header matches");
        if let Some(f) = report.failure {
            failures.push(format!(
                "seed {}: {}",
                spec.seed,
                f.to_string().lines().next().unwrap_or("")
            ));
        }
    }
    match failures.first() {
        None => outcome(true, format!("100 instances x 100 steps, max steals per step {steals}")),
        Some(f) => outcome(false, format!("{} failures, first: {f}", failures.len())),
    }
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    for k in 0..100u64 {
        let m = 1 + (k as usize % 10);
        let spec = GeneratorSpec::new(GeneratorKind::TwoAgentAdditive, 2, m, 0.5, 6000 + k);
        let instance = generate(&spec).expect("feasible");
        let steps = 3 * 2 * m as u64;
        let reports = match run_engine(EngineKind::RoundRobin, EngineConfig::default(), &instance, steps) {
            Ok((_, r)) => r,
            Err(e) => {
                failures.push(format!("seed {}: {e}", spec.seed));
                continue;
            }
        };
        let boundaries = reports.iter().filter(|r| r.stage_envy_free.is_some()).count();
        if boundaries != 3 {
            failures.push(format!("seed {}: {boundaries} stage boundaries", spec.seed));
        }
        let trace = Trace::from_reports(EngineKind::RoundRobin, instance.shape, None, &reports);
        let report = verify_trace(&instance, &trace, Mode::Time).expect("header matches");
        if let Some(f) = report.failure {
            failures.push(format!(
                "seed {}: {}",
                spec.seed,
                f.to_string().lines().next().unwrap_or("")
            ));
        }
    }
    match failures.first() {
        None => outcome(true, "100 instances, m <= 10, 3 stages each"),
        Some(f) => outcome(false, format!("{} failures, first: {f}", failures.len())),
    }
}

fn brute_force_optimum(weights: &RoundWeights) -> Rational {
    let shape = MarketShape::square(weights.size());
    enumerate_perfect_matchings(shape)
        .expect("n <= 8")
        .map(|x| matching_weight(weights, &x).expect("same size"))
        .max()
        .expect("at least one matching")
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for case in 0..500 {
        let n = rng.random_range(1..=4);
        let shape = MarketShape::square(n);
        if case % 2 == 0 {
            // Binary symmetric: all three solvers, plus the weight identity.
            let a = low_values()[rng.random_range(0..3)];
            let p = rng.random_range(0.0..1.0);
            let mut values = ValueMatrix::zeros(shape);
            for i in 0..n {
                for j in 0..n {
                    let v = if rng.random_bool(p) { Rational::one() } else { a };
                    values.set(AgentId::n(i), AgentId::m(j), v);
                    values.set(AgentId::m(j), AgentId::n(i), v);
                }
            }
            let caps = Capabilities {
                symmetric: true,
                binary: true,
                binary01: a.is_zero(),
                a: Some(a),
                ..Capabilities::default()
            };
            let oracle = StaticValuation::new(values, caps);
            let weights = RoundWeights::from_oracle(&oracle, 1).expect("square");
            let fast = max_weight_matching_binary_symmetric(&oracle, 1).expect("binary symmetric");
            let fast_w = matching_weight(&weights, &fast).expect("same size");
            let (_, general) = max_weight_matching_general(&weights);
            let brute = brute_force_optimum(&weights);
            let liked = fast.pairs().filter(|p| weights.get(p.n, p.m).is_one()).count();
            let identity = Rational::from_integer(liked as i128) + a * Rational::from_integer((n - liked) as i128);
            if !(fast_w == general && general == brute && identity == fast_w) {
                failures.push(format!(
                    "case {case}: fast {fast_w}, general {general}, brute {brute}, identity {identity}"
                ));
            }
        } else {
            let w: Vec<Vec<Rational>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| Rational::new(rng.random_range(0..=20), rng.random_range(1..=6)))
                        .collect()
                })
                .collect();
            let weights = RoundWeights::from_matrix(1, w).expect("square");
            let (x, general) = max_weight_matching_general(&weights);
            let brute = brute_force_optimum(&weights);
            if general != brute || matching_weight(&weights, &x).ok() != Some(general) {
                failures.push(format!("case {case}: general {general}, brute {brute}"));
            }
        }
    }
    match failures.first() {
        None => outcome(true, "500 matrices (250 binary symmetric, 250 general), n <= 4"),
        Some(f) => outcome(false, format!("{} failures, first: {f}", failures.len())),
    }
}

/// Every simple cycle of `g`, each in canonical rotation.
fn all_simple_cycles(g: &AdjacencyGraph) -> BTreeSet<Vec<usize>> {
    let v = g.vertex_count();
    let mut out = BTreeSet::new();
    for len in 2..=v {
        for perm in (0..v).permutations(len) {
            if perm[0] != *perm.iter().min().expect("nonempty") {
                continue;
            }
            if (0..len).all(|q| g.has_edge(perm[q], perm[(q + 1) % len])) {
                out.insert(perm);
            }
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let mut cases = 0;
    while cases < 1000 {
        let v = rng.random_range(2..=5);
        let len = rng.random_range(2..=6);
        let walk: Vec<usize> = (0..len).map(|_| rng.random_range(0..v)).collect();
        if (0..len).any(|q| walk[q] == walk[(q + 1) % len]) {
            continue;
        }
        let mut g = AdjacencyGraph::new(v);
        for q in 0..len {
            g.add_edge(walk[q], walk[(q + 1) % len]);
        }
        for x in 0..v {
            for y in 0..v {
                if x != y && rng.random_bool(0.25) {
                    g.add_edge(x, y);
                }
            }
        }
        let circuit = Circuit::new(walk.clone(), &g).expect("edges were added");
        let cycles = all_simple_cycles(&g);
        for &i in walk.iter().unique() {
            cases += 1;
            let suc = circuit.suc(i).expect("i is on the circuit");
            match find_cycle_in_circuit(&circuit, i) {
                Ok(c) if c.contains_edge(i, suc) && cycles.contains(&c.canonical()) => {}
                Ok(c) => failures.push(format!("walk {walk:?}, i = {i}: got {:?}", c.vertices())),
                Err(e) => failures.push(format!("walk {walk:?}, i = {i}: {e}")),
            }
        }
    }
    match failures.first() {
        None => outcome(true, format!("{cases} circuit cases on graphs with <= 5 vertices")),
        Some(f) => outcome(false, format!("{} failures, first: {f}", failures.len())),
    }
}

fn criterion_9(suite: &Option<SuiteOne>) -> Outcome {
    let Some(suite) = suite else {
        return outcome(false, "suite 1 did not run");
    };
    let mut checked = 0;
    let mut orders = 0;
    let mut failures = Vec::new();
    for (instance, trace) in &suite.traces {
        if instance.shape.n > 4 {
            continue;
        }
        let history = trace.history(instance.shape, Mode::Rounds).expect("verified trace");
        let verdict = ef2_over_time_expansion(instance, &history).expect("rounds mode");
        checked += 1;
        orders += verdict.orders_checked;
        if !verdict.holds || !verdict.exhaustive {
            failures.push(format!("{:?}", verdict.failure));
        }
    }
    match failures.first() {
        None => outcome(
            checked > 0,
            format!("{checked} traces, {orders} intra-round orders, all exhaustive"),
        ),
        Some(f) => outcome(false, format!("{} failures, first: {f}", failures.len())),
    }
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, f64) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let mut suite = None;
    let start = Instant::now();
    let first = timed(|| criterion_1(&mut suite));
    let results = [
        ("1 symmetric binary suite", first),
        ("2 swap bound", timed(|| criterion_2(&suite))),
        ("3 two-round impossibility", timed(criterion_3)),
        ("4 maximum-weight impossibility", timed(criterion_4)),
        ("5 only-symmetric-cycles suite", timed(criterion_5)),
        ("6 two-agent round robin suite", timed(criterion_6)),
        ("7 solver agreement", timed(criterion_7)),
        ("8 cycle in circuit", timed(criterion_8)),
        ("9 EF2 over time expansion", timed(|| criterion_9(&suite))),
    ];
    let mut all = true;
    for (name, (o, secs)) in &results {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} [{secs:.2}s] ({})", o.detail);
        all &= o.pass;
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
