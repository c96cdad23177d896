//! Exact evaluation and calibration of basket trial designs that borrow
//! information between baskets through empirical-Bayes sharing weights.
//!
//! Two sharing schemes are supported: the power prior design, where basket
//! `k` adds `w_ki` times the data of basket `i` to its own prior, and
//! Fujikawa's design, where the prior shapes are weighted as well. Weights
//! come from the calibrated power prior (CPP) formula or from the
//! Jensen-Shannon divergence (JSD) of the individual posteriors.
//!
//! Operating characteristics are computed by exhaustive enumeration of the
//! outcome space, reduced by permutation symmetry; a seeded Monte Carlo
//! simulator of the same designs serves as an independent check.

pub mod calibration;
pub mod design;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod quadrature;
pub mod simulate;
pub mod special;

pub use calibration::{adjust_lambda, get_scenarios, opt_design, CalibrationRequest, RankedDesignTable, ScenarioMatrix};
pub use design::{
    cpp_weight, final_decision, jsd_weight, shared_posterior, weight_curve, weight_matrix, BasketState, BasketStatus,
    DesignSpec, TrialState, WeightConfig, WeightMatrix, WeightMethod,
};
pub use engine::{
    interim_decision, ppp, single_stage_oc, two_stage_oc, Enumeration, Estimate, ExactEngine, InterimAction,
    InterimConfig, InterimKind, OCResult, StageLayout, TrueScenario,
};
pub use error::{Error, Result};
pub use simulate::{simulate_oc, SimConfig, SimResult};
pub use special::{beta_binom_pmf, beta_tail, binom_pmf, jsd_beta, log_beta_fn, BetaParams, Probability};
