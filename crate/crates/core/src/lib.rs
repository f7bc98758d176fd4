#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dirichlet;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod kernel;
pub mod path;
pub mod quad;
pub mod rng;
pub mod stats;

pub use eigen::{EigenEstimate, FaberKrahnResult};
pub use error::{Error, Result};
pub use geometry::{Domain, Shape};
pub use grid::{GridFunction, GridOperator};
pub use kernel::{JumpKernel, KernelFamily, RadialProfile, SmallJumpStats};
pub use path::{ExitSample, PathConfig, PathSimulator, SmallJumpMode, SurvivalCurve};
pub use stats::EstimatorResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
