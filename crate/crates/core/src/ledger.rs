//! Running cumulative values `v_i(X_j^t)` and like-counts `kappa_i(X_j^t)`
//! for every ordered same-side pair.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::market::{check_step_shape, AgentId, HistoryError, MarketShape, MatchHistory, Pair, Side};
use crate::rational::Rational;
use crate::valuation::ValuationOracle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cross-side query ({0}, {1}): bundle values are only defined within a side")]
pub struct CrossSideQuery(pub AgentId, pub AgentId);

/// Square per-side table indexed by `(i, j)` agent indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Square<T> {
    len: usize,
    cells: Vec<T>,
}

impl<T: Clone> Square<T> {
    fn new(len: usize, fill: T) -> Self {
        Square {
            len,
            cells: vec![fill; len * len],
        }
    }

    fn get(&self, i: usize, j: usize) -> &T {
        &self.cells[i * self.len + j]
    }

    fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.cells[i * self.len + j]
    }
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::N => 0,
        Side::M => 1,
    }
}

/// Read access to cumulative same-side values.
pub trait ValueView {
    fn shape(&self) -> MarketShape;

    /// `v_i(X_j)` for `i`, `j` on the same side.
    fn bundle_value(&self, side: Side, i: usize, j: usize) -> Rational;
}

/// Exact cumulative values `v_i(X_j^t) = sum_{t' <= t} v_i^{t'}(x_j^{t'})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueLedger {
    shape: MarketShape,
    t: u64,
    values: [Square<Rational>; 2],
    /// Largest single time-stamped contribution `v_i^{t'}(x_j^{t'})` in `X_j`.
    best_single: [Square<Rational>; 2],
}

impl ValueLedger {
    pub fn new(shape: MarketShape) -> Self {
        let z = Rational::zero();
        ValueLedger {
            shape,
            t: 0,
            values: [Square::new(shape.n, z), Square::new(shape.m, z)],
            best_single: [Square::new(shape.n, z), Square::new(shape.m, z)],
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn value_of(&self, i: AgentId, j: AgentId) -> Result<Rational, CrossSideQuery> {
        if i.side != j.side {
            return Err(CrossSideQuery(i, j));
        }
        Ok(self.bundle_value(i.side, i.index, j.index))
    }

    /// Largest single-match contribution to `v_i(X_j)`; zero for empty bundles.
    pub fn best_single(&self, side: Side, i: usize, j: usize) -> Rational {
        *self.best_single[side_slot(side)].get(i, j)
    }
}

impl ValueView for ValueLedger {
    fn shape(&self) -> MarketShape {
        self.shape
    }

    fn bundle_value(&self, side: Side, i: usize, j: usize) -> Rational {
        *self.values[side_slot(side)].get(i, j)
    }
}

/// Like-counts: `kappa_i(X_j)` = matches in `X_j` that `i` values at exactly 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KappaLedger {
    shape: MarketShape,
    t: u64,
    kappa: [Square<u64>; 2],
    sizes: [Vec<u64>; 2],
}

impl KappaLedger {
    pub fn new(shape: MarketShape) -> Self {
        KappaLedger {
            shape,
            t: 0,
            kappa: [Square::new(shape.n, 0), Square::new(shape.m, 0)],
            sizes: [vec![0; shape.n], vec![0; shape.m]],
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn shape(&self) -> MarketShape {
        self.shape
    }

    pub fn kappa(&self, side: Side, i: usize, j: usize) -> u64 {
        *self.kappa[side_slot(side)].get(i, j)
    }

    pub fn bundle_size(&self, agent: AgentId) -> u64 {
        self.sizes[side_slot(agent.side)][agent.index]
    }

    /// Values reconstructed as `kappa + a (|X| - kappa)`.
    pub fn with_low_value(&self, a: Rational) -> KappaView<'_> {
        KappaView { kappa: self, a }
    }
}

/// Binary values read off a [`KappaLedger`] for a chosen low value `a`.
#[derive(Debug, Clone, Copy)]
pub struct KappaView<'a> {
    pub kappa: &'a KappaLedger,
    pub a: Rational,
}

impl ValueView for KappaView<'_> {
    fn shape(&self) -> MarketShape {
        self.kappa.shape
    }

    fn bundle_value(&self, side: Side, i: usize, j: usize) -> Rational {
        let k = self.kappa.kappa(side, i, j) as i128;
        let size = self.kappa.sizes[side_slot(side)][j] as i128;
        Rational::from_integer(k) + self.a * Rational::from_integer(size - k)
    }
}

/// Both ledgers, advanced together one timestep at a time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ledgers {
    pub values: ValueLedger,
    pub kappa: KappaLedger,
}

impl Ledgers {
    pub fn new(shape: MarketShape) -> Self {
        Ledgers {
            values: ValueLedger::new(shape),
            kappa: KappaLedger::new(shape),
        }
    }

    pub fn shape(&self) -> MarketShape {
        self.values.shape
    }

    pub fn t(&self) -> u64 {
        self.values.t
    }

    /// Applies the confirmed matches of timestep `t` (must be `self.t() + 1`).
    pub fn apply_events<O: ValuationOracle + ?Sized>(
        &mut self,
        oracle: &O,
        t: u64,
        pairs: &[Pair],
    ) -> Result<(), HistoryError> {
        let shape = self.shape();
        check_step_shape(shape, self.t(), t, pairs)?;
        for side in Side::BOTH {
            let slot = side_slot(side);
            let len = shape.len(side);
            let mut partner: Vec<Option<AgentId>> = vec![None; len];
            for p in pairs {
                let me = p.on(side);
                partner[me.index] = Some(p.on(side.other()));
            }
            for (j, pj) in partner.iter().enumerate() {
                let Some(pj) = *pj else { continue };
                self.kappa.sizes[slot][j] += 1;
                for i in 0..len {
                    let v = oracle.value(t, AgentId { side, index: i }, pj);
                    *self.values.values[slot].get_mut(i, j) += v;
                    let best = self.values.best_single[slot].get_mut(i, j);
                    if v > *best {
                        *best = v;
                    }
                    if v.is_one() {
                        *self.kappa.kappa[slot].get_mut(i, j) += 1;
                    }
                }
            }
        }
        self.values.t = t;
        self.kappa.t = t;
        Ok(())
    }

    /// Replays a whole history from empty ledgers.
    pub fn from_history<O: ValuationOracle + ?Sized>(oracle: &O, history: &MatchHistory) -> Result<Self, HistoryError> {
        let mut ledgers = Ledgers::new(history.shape());
        for step in history.steps() {
            ledgers.apply_events(oracle, step.t, &step.pairs)?;
        }
        Ok(ledgers)
    }
}

/// A history plus its ledgers: the mutable state every engine advances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub history: MatchHistory,
    pub ledgers: Ledgers,
}

impl SimState {
    pub fn new(shape: MarketShape, mode: crate::market::Mode) -> Self {
        SimState {
            history: MatchHistory::new(shape, mode),
            ledgers: Ledgers::new(shape),
        }
    }

    pub fn t(&self) -> u64 {
        self.history.t()
    }

    /// Confirms the matches of the next timestep in both history and ledgers.
    pub fn confirm<O: ValuationOracle + ?Sized>(&mut self, oracle: &O, pairs: Vec<Pair>) -> Result<u64, HistoryError> {
        let t = self.t() + 1;
        self.history.check_step(t, &pairs)?;
        self.ledgers.apply_events(oracle, t, &pairs)?;
        self.history.push(t, pairs)?;
        Ok(t)
    }
}
