//! Hybrid A* reverse-parking planner.
//!
//! The search expands constant-steer reverse primitives of a kinematic
//! single-track model and keeps only branches whose sampled centerline stays
//! clear of an occupancy grid inflated by the vehicle half-width. Exact
//! rectangle-footprint oracles in [`validation`] certify the results.
//!
//! With the default `parallel` feature, the data-parallel loops (branch
//! collision checks, grid dilation, path certification) run on rayon; turning
//! it off gives a purely sequential build with identical results.

// Range checks are written as `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod occupancy;
pub mod par;
pub mod planner;
pub mod scenario;
pub mod validation;

pub use error::{Error, Result};
pub use geometry::{Point, Rect};
pub use kinematics::{ControlInput, Pose, Trajectory, TrajectorySample, VehicleParams};
pub use occupancy::{InflatedGrid, OccupancyGrid};
pub use par::Exec;
pub use planner::{CostWeights, PlanResult, PlanStatus, PlannerConfig, QueueEntry};
pub use scenario::{canonical_parking_lot, parse_scenario, Scenario};
