//! Fairness auditing of tabular decision data.
//!
//! Statistical parity, equalized odds and sufficiency, together with their
//! individualized forms, are each an independence statement between the
//! prediction `Ŷ` or target `Y` and a sensitive attribute `S`, possibly given
//! `Y`, `Ŷ` and the feature vector `X`. The crate estimates how far each
//! statement is from holding:
//!
//! * [`criteria::evaluate`] stratifies exactly on categorical conditioning sets;
//! * [`neighborhood::soft_evaluate`] compares each record with its feature-space
//!   neighbors when `X` has numeric columns;
//! * [`lipschitz::audit_map`] checks a representation map for distance expansion;
//! * [`synth::generate`] builds scenarios with known verdicts;
//! * [`report::run_audit`] ties everything together for the CLI.

pub mod criteria;
pub mod data;
pub mod distribution;
pub mod error;
pub mod lipschitz;
pub mod measures;
pub mod neighborhood;
pub mod report;
pub mod rng;
pub mod special;
pub mod synth;

pub use criteria::{
    evaluate, evaluate_ftu, situation_testing_evaluate, CriterionId, CriterionSpec,
};
pub use data::Dataset;
pub use error::{Error, Result};
