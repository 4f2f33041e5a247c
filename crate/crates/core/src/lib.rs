//! Simulator for Byzantine-robust distributed non-convex optimisation.
//!
//! The crate implements perturbed gradient descent driven by an inexact
//! gradient oracle ([`optimizer`]), robust aggregation rules that realise
//! such an oracle from worker messages ([`aggregators`]), Byzantine worker
//! strategies ([`adversaries`]), analytic benchmark losses ([`problems`]),
//! and a seeded experiment harness ([`harness`]).

pub mod acceptance;
pub mod adversaries;
pub mod aggregators;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod optimizer;
pub mod output;
pub mod problems;
pub mod rng;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use vector::ParamVector;
