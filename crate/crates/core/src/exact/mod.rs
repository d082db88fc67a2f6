//! Ground-truth oracles: enumeration, Held-Karp, and ranked matchings.

mod brute;
mod held_karp;
mod kbest;

pub use brute::{all_matchings, brute_force_ap, brute_force_atsp, for_each_feasible_matching};
pub use held_karp::held_karp;
pub use kbest::{
    count_matchings_below, count_restricted_below, kbest_matchings, KBestStream, RankedMatching,
};

/// Largest n accepted by the enumeration oracles.
pub const BRUTE_FORCE_MAX_N: usize = 10;
/// Largest n accepted by Held-Karp (memory is `O(n 2^n)`).
pub const HELD_KARP_MAX_N: usize = 22;
