//! Independent trace verification: replays the recorded matches against the
//! valuation oracle and rechecks every per-step property from scratch.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use super::brute::Bundles;
use crate::engines::EngineKind;
use crate::market::{AgentId, MarketShape, Mode, Pair, RoundMatching};
use crate::matching::{max_weight_matching_general, RoundWeights};
use crate::rational::{Rational, PQ};
use crate::trace::{Trace, TraceRecord};
use crate::valuation::{Releveled, ValuationOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Perfect matching (rounds) or at most one match (time).
    Shape,
    /// Round weight equals the optimum and the recorded value.
    Weight,
    Ef1,
    EnvyBound,
    EnvyCycle,
    /// All envy gaps are at most 0 at a round-robin stage boundary.
    StageEnvyFree,
    /// A verdict stored in the trace disagrees with the recomputed one.
    RecordedVerdict,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Shape => "step shape",
            CheckKind::Weight => "maximum weight",
            CheckKind::Ef1 => "EF1",
            CheckKind::EnvyBound => "envy bound",
            CheckKind::EnvyCycle => "envy-cycle freeness",
            CheckKind::StageEnvyFree => "stage envy-freeness",
            CheckKind::RecordedVerdict => "recorded verdict",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyFailure {
    pub t: u64,
    pub check: CheckKind,
    pub pair: Option<(AgentId, AgentId)>,
    pub detail: String,
    /// Bundles and value tables after step `t`.
    pub dump: String,
}

impl fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t = {}: {} check failed", self.t, self.check)?;
        if let Some((i, j)) = self.pair {
            write!(f, " for pair ({i}, {j})")?;
        }
        writeln!(f, ": {}", self.detail)?;
        write!(f, "state after t = {}:\n{}", self.t, self.dump)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub steps: usize,
    pub failure: Option<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("trace is in {trace} mode but {requested} mode was requested")]
    ModeMismatch { trace: Mode, requested: Mode },
    #[error("trace market is {trace_n}x{trace_m} but the instance is {n}x{m}")]
    ShapeMismatch {
        trace_n: usize,
        trace_m: usize,
        n: usize,
        m: usize,
    },
}

fn shape_problem(shape: MarketShape, mode: Mode, pairs: &[Pair]) -> Option<String> {
    if let Some(p) = pairs.iter().find(|p| p.n >= shape.n || p.m >= shape.m) {
        return Some(format!("match {p} is outside the market"));
    }
    let mut seen_n = vec![false; shape.n];
    let mut seen_m = vec![false; shape.m];
    for p in pairs {
        if std::mem::replace(&mut seen_n[p.n], true) || std::mem::replace(&mut seen_m[p.m], true) {
            return Some(format!("match {p} reuses an agent"));
        }
    }
    match mode {
        Mode::Rounds if !(shape.is_square() && pairs.len() == shape.n) => {
            Some(format!("{} matches do not form a perfect matching", pairs.len()))
        }
        Mode::Time if pairs.len() > 1 => Some(format!("{} matches in one timestep", pairs.len())),
        _ => None,
    }
}

struct Replay<'a> {
    oracle: &'a dyn ValuationOracle,
    engine: Option<EngineKind>,
    bound: Option<Rational>,
    stage_len: u64,
}

impl Replay<'_> {
    fn fail(
        &self,
        t: u64,
        check: CheckKind,
        pair: Option<(AgentId, AgentId)>,
        detail: String,
        b: &Bundles,
    ) -> VerifyFailure {
        VerifyFailure {
            t,
            check,
            pair,
            detail,
            dump: b.dump(self.oracle),
        }
    }

    fn check_step(
        &self,
        b: &Bundles,
        t: u64,
        pairs: &[Pair],
        record: Option<&TraceRecord>,
    ) -> Result<(), VerifyFailure> {
        let oracle = self.oracle;
        if self.engine == Some(EngineKind::SymBin) {
            let weights = RoundWeights::from_oracle(oracle, t).expect("square market checked");
            let actual: Rational = pairs.iter().map(|p| weights.get(p.n, p.m)).sum();
            let (_, optimum) = max_weight_matching_general(&weights);
            if actual != optimum {
                let detail = format!("round weight {} but the optimum is {}", PQ(&actual), PQ(&optimum));
                return Err(self.fail(t, CheckKind::Weight, None, detail, b));
            }
            let recorded = record.and_then(|r| r.weight);
            if record.is_some() && recorded != Some(actual) {
                let shown = recorded.map_or("null".to_string(), |w| PQ(&w).to_string());
                let detail = format!("recorded weight {shown} but the round weighs {}", PQ(&actual));
                return Err(self.fail(t, CheckKind::Weight, None, detail, b));
            }
        }

        let ef1 = b.efk_violation(oracle, 1);
        if let Some((i, j)) = ef1 {
            let detail = format!(
                "v_i(X_i) = {}, v_i(X_j) = {}, and no single removal ends the envy",
                PQ(&b.value(oracle, i, i)),
                PQ(&b.value(oracle, i, j))
            );
            return Err(self.fail(t, CheckKind::Ef1, Some((i, j)), detail, b));
        }
        let bound = self.bound.map(|c| (c, b.bound_violation(oracle, c)));
        if let Some((c, Some((i, j, gap)))) = bound {
            let detail = format!("envy gap {} exceeds {}", PQ(&gap), PQ(&c));
            return Err(self.fail(t, CheckKind::EnvyBound, Some((i, j)), detail, b));
        }
        let cycle = b.envy_cycle_side(oracle);
        if matches!(self.engine, Some(EngineKind::SymBin | EngineKind::AsymCycles)) {
            if let Some((side, k)) = cycle {
                let detail = format!("{} lies on an envy cycle", AgentId { side, index: k });
                return Err(self.fail(t, CheckKind::EnvyCycle, None, detail, b));
            }
        }
        if self.engine == Some(EngineKind::RoundRobin) && self.stage_len > 0 && t.is_multiple_of(self.stage_len) {
            if let Some((i, j, gap)) = b.bound_violation(oracle, Rational::zero()) {
                let detail = format!("envy gap {} at the end of a stage", PQ(&gap));
                return Err(self.fail(t, CheckKind::StageEnvyFree, Some((i, j)), detail, b));
            }
        }

        let Some(record) = record else { return Ok(()) };
        let v = &record.verdicts;
        let mut mismatches = Vec::new();
        if !v.ef1 {
            mismatches.push("ef1");
        }
        if let (Some(recorded), Some((_, found))) = (v.envy_bounded, bound) {
            if recorded != found.is_none() {
                mismatches.push("envy_bounded");
            }
        }
        if v.envy_cycle_free != cycle.is_none() {
            mismatches.push("envy_cycle_free");
        }
        if !mismatches.is_empty() {
            let detail = format!("trace disagrees with recomputation on {}", mismatches.join(", "));
            return Err(self.fail(t, CheckKind::RecordedVerdict, None, detail, b));
        }
        Ok(())
    }
}

/// Replays `trace` from empty bundles and checks every timestep. The
/// engine named in the header selects the extra per-engine checks.
pub fn verify_trace(oracle: &dyn ValuationOracle, trace: &Trace, mode: Mode) -> Result<VerifyReport, VerifyError> {
    let h = &trace.header;
    if h.mode != mode {
        return Err(VerifyError::ModeMismatch {
            trace: h.mode,
            requested: mode,
        });
    }
    let shape = oracle.shape();
    if (h.n, h.m) != (shape.n, shape.m) {
        return Err(VerifyError::ShapeMismatch {
            trace_n: h.n,
            trace_m: h.m,
            n: shape.n,
            m: shape.m,
        });
    }
    let low = h.a.unwrap_or_else(|| oracle.capabilities().low_value());
    // A sym-bin run may report under a low value other than the instance's.
    let releveled = Releveled { inner: oracle, a: low };
    let oracle: &dyn ValuationOracle = match h.engine {
        EngineKind::SymBin if low != oracle.capabilities().low_value() => &releveled,
        _ => oracle,
    };
    let replay = Replay {
        oracle,
        engine: Some(h.engine),
        bound: match h.engine {
            EngineKind::SymBin => Some(Rational::one() - low),
            EngineKind::AsymCycles => Some(Rational::one()),
            EngineKind::RoundRobin => None,
        },
        stage_len: 2 * shape.m as u64,
    };
    let steps = trace.records.iter().map(|r| (r.t, r.pairs(), Some(r)));
    Ok(replay.run(shape, mode, steps))
}

/// Checks only shape and EF1 after every round of a plain matching sequence.
pub fn verify_rounds_ef1(oracle: &dyn ValuationOracle, rounds: &[RoundMatching]) -> VerifyReport {
    let replay = Replay {
        oracle,
        engine: None,
        bound: None,
        stage_len: 0,
    };
    let steps = rounds
        .iter()
        .enumerate()
        .map(|(k, x)| (k as u64 + 1, x.to_pairs(), None));
    replay.run(oracle.shape(), Mode::Rounds, steps)
}

impl Replay<'_> {
    fn run<'r>(
        &self,
        shape: MarketShape,
        mode: Mode,
        steps: impl Iterator<Item = (u64, Vec<Pair>, Option<&'r TraceRecord>)>,
    ) -> VerifyReport {
        let mut bundles = Bundles::new(shape);
        let mut done = 0;
        for (t, pairs, record) in steps {
            if let Some(detail) = shape_problem(shape, mode, &pairs) {
                return VerifyReport {
                    steps: done,
                    failure: Some(self.fail(t, CheckKind::Shape, None, detail, &bundles)),
                };
            }
            for &p in &pairs {
                bundles.push(t, p);
            }
            if let Err(failure) = self.check_step(&bundles, t, &pairs, record) {
                return VerifyReport {
                    steps: done,
                    failure: Some(failure),
                };
            }
            done += 1;
        }
        VerifyReport {
            steps: done,
            failure: None,
        }
    }
}
