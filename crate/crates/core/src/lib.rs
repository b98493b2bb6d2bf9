//! Explicit upper and lower bounds on the expected value of stopping times
//! for random walks in `R^d` and Brownian motion, plus the Monte Carlo
//! machinery used to check them.
//!
//! A stopping time is described by a [`geometry::Region`] in `(t, s)` space,
//! an observation [`schedules::Schedule`], and an increment law from
//! [`moments`]. The calculators in [`bounds`] turn those into
//! [`bounds::BoundReport`]s; [`simulate`] estimates the true expectation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod geometry;
pub mod gfun;
pub mod moments;
pub mod optimize;
pub mod rng;
pub mod schedules;
pub mod simulate;

pub use bounds::{AssumptionStatus, BoundReport, Direction, TheoremTag};
pub use error::{Error, Result};
pub use geometry::{Hyperplane, Region, RegionKind};
pub use moments::{analytic_moments, DistributionSpec, MomentProfile, ScalarFamily};
pub use schedules::{Schedule, ScheduleKind};
pub use simulate::{McSummary, RunRecord};
