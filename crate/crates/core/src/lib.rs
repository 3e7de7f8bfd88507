//! Fair repeated matching in two-sided markets.
//!
//! Agents on sides N and M are matched once per timestep (a single match, or
//! a perfect matching "round"). Each agent accumulates a bundle of matches
//! and the crate tracks whether anyone envies a same-side agent's bundle by
//! more than one match.

pub mod cli;
pub mod engines;
pub mod envy;
pub mod gen;
pub mod instance;
pub mod ledger;
pub mod market;
pub mod matching;
pub mod oracle;
pub mod rational;
pub mod trace;
pub mod valuation;

pub use engines::{run_engine, Engine, EngineConfig, EngineError, EngineKind, StepReport};
pub use instance::Instance;
pub use ledger::{Ledgers, SimState, ValueLedger};
pub use market::{AgentId, MarketShape, MatchHistory, Mode, Pair, RoundMatching, Side};
pub use rational::Rational;
pub use valuation::{Capabilities, Capability, ValuationOracle, ValueMatrix};
