//! Linear TD(λ) prediction: accumulate, replace and true online traces,
//! Markov reward process benchmarks with exact oracles, a seeded sweep
//! harness and tile-coded signal prediction.
//!
//! ```
//! use tdkit::{FeatureVector, TdConfig, TdLearner, Variant};
//!
//! let phi = FeatureVector::binary(1, vec![0]).unwrap();
//! let mut td = TdLearner::new(TdConfig::new(Variant::TrueOnline, 1.0, 1.0, 1.0), 1).unwrap();
//! td.step(&phi, 0.0, &phi, false).unwrap();
//! td.step(&phi, 1.0, &phi, true).unwrap();
//! assert_eq!(td.theta().as_slice(), &[1.0]);
//! ```

pub mod error;
pub mod exec;
pub mod experiments;
pub mod gvf;
pub mod learner;
pub mod linear;
pub mod mrp;
pub mod representation;
pub mod suite;

pub use error::{Error, Result};
pub use exec::Execution;
pub use learner::{TdConfig, TdError, TdLearner, ThetaInit, Variant, DIVERGENCE_BOUND};
pub use linear::{axpy_dense, axpy_into, dot, FeatureVector, NoOps, OpCounter, OpSink, WeightVector};
pub use mrp::{lms_solution_weighted, rms_error, Mrp, Transition, ValueTable, Weighting};
pub use representation::{Representation, RepresentationKind};
pub use suite::{make_one_state, make_random_mrp, make_two_state, RandomMrpSpec};
