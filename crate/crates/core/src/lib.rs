//! Complete twins of discrete-time stock markets.
//!
//! Given an observed price history, the crate builds a nearby market whose
//! return magnitudes are predictable (they are the trace of a band-limited
//! sequence), prices and replicates claims exactly in that market, and runs
//! the experiments showing that rounded price data cannot tell the two
//! models apart.
//!
//! * [`banlim`]: sinc kernels, band-limited fitting and extrapolation.
//! * [`market`]: prices, discounted returns and the twin builder.
//! * [`replicate`]: martingale pricing and self-financing hedges on the
//!   sign tree of a twin.
//! * [`harness`]: incomplete-model simulators and indistinguishability runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banlim;
pub mod error;
pub mod harness;
pub mod market;
pub mod replicate;

pub use banlim::{
    fit_bandlimited, interpolate_bandlimited, lowpass_project, projection_error, sinc_kernel,
    BandLimitedExtension, BandSpec, FitOptions, Norm, SampledSignal,
};
pub use error::{Error, Result};
pub use harness::{
    hypothesis_report, indistinguishability_experiment, predictability_demo, round_to_tick,
    simulate_incomplete, ExperimentReport, HypothesisRow, HypothesisTable, IncompleteModelSpec,
    ModelKind,
};
pub use market::{
    build_twin, decompose, discount, omega_grid, verify_twin, weighted_norm, BoundCheck,
    CompleteTwin, OmegaTrial, PriceSeries, ReturnSeries, TwinVerification, Validity, WeightConfig,
};
pub use replicate::{
    check_crr_completeness, martingale_prob, price, replicate, verify_replication, Claim,
    CrrVerdict, PlanNode, PredictableMagnitudes, ReplicationPlan, SignPath, MAX_DEPTH,
};
