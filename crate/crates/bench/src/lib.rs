//! Fixtures shared by the benchmarks.

use twinmarket::{simulate_incomplete, IncompleteModelSpec, PriceSeries};

/// Seeded binomial path with `returns` steps.
pub fn fixture_prices(returns: usize) -> PriceSeries {
    simulate_incomplete(&IncompleteModelSpec::binomial(
        0.005, 0.05, returns, 42, 100.0,
    ))
    .expect("valid fixture spec")
}
