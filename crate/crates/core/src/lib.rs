//! Monte Carlo engine for the sigma-finite last-passage measures attached
//! to nonnegative submartingales of class (Sigma).
//!
//! The crate simulates such processes (reflected and skew Brownian-type
//! examples, low-dimensional Bessel processes), samples the associated
//! measure by an explicit change of variables on the increasing part, and
//! verifies the defining last-passage identities by comparing independent
//! estimators of both sides at pinned tolerances.

pub mod bridge;
pub mod error;
pub mod estimate;
pub mod functional;
pub mod grid;
pub mod path;
pub mod pricing;
pub mod qmeasure;
pub mod rng;
pub mod sigma;
pub mod suite;
pub mod verify;

pub use error::EngineError;
pub use estimate::EstimatorResult;
pub use functional::{CylinderFunctional, IntegrableTestFunction, Scope, StoppingRule};
pub use grid::TimeGrid;
pub use path::{simulate, simulate_bessel, simulate_bm, simulate_exp_martingale, PathSample, ProcessSpec};
pub use pricing::{bs_closed_form, last_passage_cdf, mc_put_price, price_report, PutSpec};
pub use qmeasure::{
    bs_measure_expectation, q_integral, q_integral_stopped, reweight_class_d,
    sample_azema_image, sample_measure, sample_q_spliced, ExtensionBudget, LevelProposal,
    MeasureTag, WeightedSample,
};
pub use sigma::ClassSigmaPath;
pub use suite::{all_ids, default_ids, run_identity, run_suite};
pub use verify::{IdentityReport, SigmaModel, Verdict, VerifyConfig};
