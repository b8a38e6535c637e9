//! Exact simulation of CTMC paths, delta-discretization and pathwise
//! functionals.

mod functionals;
mod rng;
mod source;
mod trajectory;

pub use functionals::{
    entropy_production_sample, girsanov_log_ratio, jump_pair_counts, path_log_ratio,
    shadow_functional, EntropySample, ENTROPY_SIGN_CONVENTION,
};
pub use rng::{Rng, Role, Seed};
pub use source::{LazyDiscretizer, MarkovSource, PathSource, SymbolSource};
pub use trajectory::{
    discretize, simulate, CumulativeTable, DiscretePath, Initial, Simulator, Trajectory,
};
