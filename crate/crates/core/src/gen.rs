//! Seeded instance generators and dynamic-valuation adversaries.

use num_traits::{One, Zero};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engines::{make_engine, EngineConfig, EngineError, EngineKind, StepReport};
use crate::envy::{only_symmetric_cycles, DesireGraph};
use crate::instance::{Instance, ValueMode};
use crate::ledger::SimState;
use crate::market::{AgentId, MarketShape, MatchHistory, Side};
use crate::rational::Rational;
use crate::valuation::{Capabilities, Capability, ValuationOracle, ValueMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Square, `v in {a, 1}`, `v_i(j) = v_j(i)`.
    SymmetricBinary,
    /// Static `{0,1}` values whose desire graph has only symmetric cycles.
    OnlySymmetricCycles,
    /// Two N-agents, arbitrary non-negative rationals.
    TwoAgentAdditive,
    /// Static `{0,1}` values with independent directions.
    GeneralBinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Static,
    /// Fresh draw every timestep.
    Redraw,
    /// Toggle `k` uniformly chosen pairs every timestep.
    FlipK(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    /// Like density in `[0, 1]`.
    pub p: f64,
    pub seed: u64,
    pub dynamics: Dynamics,
    /// Scripted horizon for dynamic instances.
    pub steps: usize,
    /// Low value for symmetric binary instances.
    pub a: Rational,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, m: usize, p: f64, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            m,
            p,
            seed,
            dynamics: Dynamics::Static,
            steps: 1,
            a: Rational::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("infeasible generator spec: {0}")]
pub struct GenError(pub String);

fn infeasible<T>(msg: impl Into<String>) -> Result<T, GenError> {
    Err(GenError(msg.into()))
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance, GenError> {
    if !(0.0..=1.0).contains(&spec.p) {
        return infeasible(format!("density {} outside [0, 1]", spec.p));
    }
    let shape = MarketShape::new(spec.n, spec.m).map_err(|e| GenError(e.to_string()))?;
    if spec.dynamics != Dynamics::Static && spec.kind != GeneratorKind::SymmetricBinary {
        return infeasible("only symmetric-binary instances support dynamics");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        GeneratorKind::SymmetricBinary => symmetric_binary(spec, shape, &mut rng),
        GeneratorKind::OnlySymmetricCycles => {
            let values = only_symmetric_cycles_matrix(shape, spec.p, &mut rng);
            Ok(Instance::new_static(
                values,
                None,
                vec![Capability::Static, Capability::Binary01],
            ))
        }
        GeneratorKind::TwoAgentAdditive => {
            if spec.n != 2 {
                return infeasible(format!("two-agent-additive needs n = 2, got n = {}", spec.n));
            }
            let mut values = ValueMatrix::zeros(shape);
            for (i, j) in ValueMatrix::cross_pairs(shape) {
                let v = Rational::new(rng.random_range(0..=9), rng.random_range(1..=4));
                values.set(i, j, v);
            }
            Ok(Instance::new_static(values, None, vec![Capability::Static]))
        }
        GeneratorKind::GeneralBinary => {
            let mut values = ValueMatrix::zeros(shape);
            for (i, j) in ValueMatrix::cross_pairs(shape) {
                if rng.random_bool(spec.p) {
                    values.set(i, j, Rational::one());
                }
            }
            Ok(Instance::new_static(
                values,
                None,
                vec![Capability::Static, Capability::Binary01],
            ))
        }
    }
}

fn symmetric_binary(spec: &GeneratorSpec, shape: MarketShape, rng: &mut ChaCha8Rng) -> Result<Instance, GenError> {
    // Static rectangular instances are allowed so they can be padded.
    if spec.dynamics != Dynamics::Static && !shape.is_square() {
        return infeasible(format!(
            "dynamic symmetric-binary needs n = m, got {} and {}",
            spec.n, spec.m
        ));
    }
    let a = spec.a;
    if a < Rational::zero() || a >= Rational::one() {
        return infeasible(format!("a = {a} outside [0, 1)"));
    }
    let (n, m) = (shape.n, shape.m);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<bool>> {
        (0..n)
            .map(|_| (0..m).map(|_| rng.random_bool(spec.p)).collect())
            .collect()
    };
    let to_matrix = |likes: &[Vec<bool>]| {
        ValueMatrix::symmetric(
            likes
                .iter()
                .map(|row| row.iter().map(|&l| if l { Rational::one() } else { a }).collect())
                .collect(),
        )
    };
    let mut declared = vec![Capability::Symmetric, Capability::Binary];
    if a.is_zero() {
        declared.push(Capability::Binary01);
    }
    let mut likes = draw(rng);
    if spec.dynamics == Dynamics::Static {
        declared.push(Capability::Static);
        return Ok(Instance::new_static(to_matrix(&likes), Some(a), declared));
    }
    let mut matrices = Vec::with_capacity(spec.steps.max(1));
    matrices.push(to_matrix(&likes));
    for _ in 1..spec.steps.max(1) {
        match spec.dynamics {
            Dynamics::Redraw => likes = draw(rng),
            Dynamics::FlipK(k) => {
                for cell in index::sample(rng, n * n, k.min(n * n)) {
                    let (i, j) = (cell / n, cell % n);
                    likes[i][j] = !likes[i][j];
                }
            }
            Dynamics::Static => unreachable!(),
        }
        matrices.push(to_matrix(&likes));
    }
    Ok(Instance::new_scripted(matrices, Some(a), declared))
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// A symmetric core plus one-way likes that only ever join two different
/// components, so every one-way edge is a bridge.
pub fn only_symmetric_cycles_matrix(shape: MarketShape, p: f64, rng: &mut ChaCha8Rng) -> ValueMatrix {
    let mut values = ValueMatrix::zeros(shape);
    let vertex = |a: AgentId| match a.side {
        Side::N => a.index,
        Side::M => shape.n + a.index,
    };
    let mut parent: Vec<usize> = (0..shape.n + shape.m).collect();
    let mut rest = Vec::new();
    for (i, j) in ValueMatrix::cross_pairs(shape).filter(|(i, _)| i.side == Side::N) {
        if rng.random_bool(p) {
            values.set(i, j, Rational::one());
            values.set(j, i, Rational::one());
            let (ri, rj) = (find(&mut parent, vertex(i)), find(&mut parent, vertex(j)));
            parent[ri] = rj;
        } else {
            rest.push((i, j));
        }
    }
    rest.shuffle(rng);
    for (i, j) in rest {
        let (ri, rj) = (find(&mut parent, vertex(i)), find(&mut parent, vertex(j)));
        if ri != rj && rng.random_bool(p) {
            let (from, to) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
            values.set(from, to, Rational::one());
            parent[ri] = rj;
        }
    }
    debug_assert!(only_symmetric_cycles(&DesireGraph::from_matrix(&values)).holds);
    values
}

/// Extends the smaller side with agents valued 0 by everyone and valuing
/// everyone at 0.
pub fn pad_to_square(instance: &Instance) -> Instance {
    let shape = instance.shape;
    if shape.is_square() {
        return instance.clone();
    }
    let k = shape.n.max(shape.m);
    let square = MarketShape::square(k);
    let pad = |m: &ValueMatrix| {
        let mut out = ValueMatrix::zeros(square);
        for (i, j) in ValueMatrix::cross_pairs(shape) {
            out.set(i, j, m.get(i, j));
        }
        out
    };
    let mut declared = instance.declared.clone();
    let a = instance.a.unwrap_or_else(Rational::zero);
    if !a.is_zero() {
        // Dummy values of 0 fall outside {a, 1}.
        declared.retain(|c| *c != Capability::Binary);
    }
    Instance {
        shape: square,
        a: instance.a,
        mode: instance.mode,
        matrices: instance.matrices.iter().map(pad).collect(),
        declared,
    }
}

/// Supplies each timestep's values after seeing the confirmed history.
pub trait Adversary {
    fn next_matrix(&mut self, t: u64, history: &MatchHistory) -> ValueMatrix;
}

impl<F: FnMut(u64, &MatchHistory) -> ValueMatrix> Adversary for F {
    fn next_matrix(&mut self, t: u64, history: &MatchHistory) -> ValueMatrix {
        self(t, history)
    }
}

/// Symmetric binary adversary: every pair matched last round becomes
/// disliked, and every other pair is redrawn with density `p`.
#[derive(Debug, Clone)]
pub struct SpoilMatched {
    pub a: Rational,
    pub p: f64,
    pub rng: ChaCha8Rng,
}

impl SpoilMatched {
    pub fn new(a: Rational, p: f64, seed: u64) -> Self {
        SpoilMatched {
            a,
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Adversary for SpoilMatched {
    fn next_matrix(&mut self, _t: u64, history: &MatchHistory) -> ValueMatrix {
        let n = history.shape().n;
        let mut likes: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..n).map(|_| self.rng.random_bool(self.p)).collect())
            .collect();
        if let Some(last) = history.steps().last() {
            for p in &last.pairs {
                likes[p.n][p.m] = false;
            }
        }
        ValueMatrix::symmetric(
            likes
                .iter()
                .map(|row| row.iter().map(|&l| if l { Rational::one() } else { self.a }).collect())
                .collect(),
        )
    }
}

/// Oracle whose matrices are revealed one timestep at a time.
#[derive(Debug, Clone)]
pub struct RevealedOracle {
    shape: MarketShape,
    caps: Capabilities,
    matrices: Vec<ValueMatrix>,
}

impl RevealedOracle {
    pub fn new(shape: MarketShape, caps: Capabilities) -> Self {
        RevealedOracle {
            shape,
            caps,
            matrices: Vec::new(),
        }
    }

    pub fn reveal(&mut self, matrix: ValueMatrix) {
        assert_eq!(matrix.shape(), self.shape, "revealed matrix has the wrong shape");
        self.matrices.push(matrix);
    }

    pub fn revealed(&self) -> u64 {
        self.matrices.len() as u64
    }

    /// Everything revealed so far as a scripted instance.
    pub fn to_instance(&self, declared: Vec<Capability>) -> Instance {
        Instance {
            shape: self.shape,
            a: self.caps.a,
            mode: ValueMode::Scripted,
            matrices: self.matrices.clone(),
            declared,
        }
    }
}

impl ValuationOracle for RevealedOracle {
    fn shape(&self) -> MarketShape {
        self.shape
    }

    fn value(&self, t: u64, i: AgentId, j: AgentId) -> Rational {
        let k = t.checked_sub(1).expect("timesteps start at 1") as usize;
        self.matrices
            .get(k)
            .unwrap_or_else(|| panic!("values for t = {t} not revealed yet"))
            .get(i, j)
    }

    fn capabilities(&self) -> Capabilities {
        self.caps.clone()
    }
}

/// Runs an engine against an adversary that picks each timestep's values
/// after observing all earlier confirmed matches.
pub fn run_adaptive<A: Adversary>(
    kind: EngineKind,
    config: EngineConfig,
    shape: MarketShape,
    caps: Capabilities,
    adversary: &mut A,
    steps: u64,
) -> Result<(SimState, Vec<StepReport>, RevealedOracle), EngineError> {
    let mut oracle = RevealedOracle::new(shape, caps);
    let mut state = SimState::new(shape, kind.mode());
    let mut reports = Vec::new();
    if steps == 0 {
        return Ok((state, reports, oracle));
    }
    oracle.reveal(adversary.next_matrix(1, &state.history));
    let mut engine = make_engine(kind, config, &oracle)?;
    for t in 1..=steps {
        if t > 1 {
            oracle.reveal(adversary.next_matrix(t, &state.history));
        }
        reports.push(engine.step(&mut state, &oracle)?);
    }
    Ok((state, reports, oracle))
}
