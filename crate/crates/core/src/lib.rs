//! Power and bandwidth allocation for distributed MIMO radar networks that
//! localize several targets at once, minimizing the worst per-target
//! Cramér-Rao bound on position.
//!
//! Geometry and CRLB algebra are generic over [`Real`] (`f32` or `f64`);
//! the optimizers work in `f64`.

pub mod certificate;
pub mod convex;
pub mod crlb;
pub mod error;
pub mod experiment;
pub mod localization;
pub mod real;
pub mod scenario;
pub mod spca;

pub use certificate::{lower_bound, solve_single_constraint_global, Certificate};
pub use crlb::{build_all, max_trace_crlb, trace_crlb};
pub use error::{Error, Result};
pub use real::Real;
pub use scenario::{random_scenario, Budgets, LayoutDistribution, PhysConst};
pub use spca::{allocate, allocate_scenario, recover_allocation, solve_canonical, ProblemKind, SpcaOptions};

pub type Scenario = scenario::Scenario<f64>;
pub type Point2D = scenario::Point2D<f64>;
pub type CrlbComponents = crlb::CrlbComponents<f64>;
pub type AllocationPair = crlb::AllocationPair<f64>;
