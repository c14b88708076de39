//! Queue-length distributions at the end of red and their support code.

mod combinatorics;
mod pmf;
mod props;

pub use combinatorics::{binom, ln_binom, ln_factorial, ln_poisson, poisson};
pub use pmf::{truncation_bound, JointQueuePmf, QueuePmf, NORMALIZATION_TOL};
pub use props::{
    prop1_pmf, prop2_expectations, prop2_joint, prop2_means, prop3_expectation, prop3_pmf, s_term, sigma, tmid,
    StockParams,
};
