//! Brute-force checks that share no code with the engines' incremental
//! ledgers: trace replay, exhaustive sequence search, EF2 expansion, and the
//! two impossibility reproductions.

pub mod brute;
pub mod expansion;
pub mod search;
pub mod theorems;
pub mod verify;

pub use brute::Bundles;
pub use expansion::{ef2_over_time_expansion, Ef2Verdict};
pub use search::{
    exhaustive_sequence_search, search_with_visitor, SearchConstraint, SearchError, SearchOptions, SearchProperty,
    SequenceSearchResult,
};
pub use theorems::{theorem4_reproduce, theorem5_reproduce, Theorem4Report, Theorem5Report};
pub use verify::{verify_rounds_ef1, verify_trace, CheckKind, VerifyError, VerifyFailure, VerifyReport};
