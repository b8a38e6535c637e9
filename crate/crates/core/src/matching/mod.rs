//! Streaming pattern matching on discretized paths and regenerative
//! sampling of first-match times.

mod automaton;
mod query;
mod renewal;
mod sandwich;

pub use automaton::PrefixAutomaton;
pub use query::{
    hitting_time, hitting_time_stream, return_time, sample_block, shadow_hitting_time,
    shadow_pattern, uniform, waiting_block, waiting_time, waiting_time_stream, ChainStream,
    ChainTarget, MatchKind, MatchOutcome, MatchQuery, MatchResult, TargetMode, AUTO_SCAN_LIMIT,
    DEFAULT_BUDGET,
};
pub use renewal::{RenewalSampler, Start, MAX_SIMULATED_RETURNS};
pub use sandwich::{bounds, sandwich_diagnostic, Band, SandwichReport, SandwichRow, SandwichSample};
