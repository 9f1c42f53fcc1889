//! Frame-to-frame RGB-D odometry by maximizing the RKHS inner product of two
//! colored point clouds over SE(3), with online adaptation of the spatial
//! kernel length-scale.
//!
//! The pieces, bottom up:
//!
//! * [`lie`]: SE(3) exponential/logarithm and pose algebra.
//! * [`kernels`]: squared-exponential spatial and color kernels.
//! * [`rkhs`]: clouds as RKHS functions, sparsified pair sets, `F` and `J`.
//! * [`registration`]: line-searched gradient ascent of `F` over SE(3).
//! * [`adaptive`]: the length-scale gradient and update schedule.
//! * [`sensitivity`]: cutoff analysis for the kernel sparsification threshold.
//! * [`frame_pipeline`] / [`dataset`]: RGB-D frames to clouds, TUM ingestion.
//! * [`evaluation`]: trajectories and relative pose error.
//! * [`odometry`]: sequential frame-to-frame driver.
//! * [`synthetic`]: ray-cast RGB-D frames for tests and demos.

pub mod adaptive;
#[cfg(feature = "imaging")]
pub mod dataset;
pub mod error;
pub mod evaluation;
#[cfg(feature = "imaging")]
pub mod frame_pipeline;
pub mod kernels;
pub mod lie;
#[cfg(feature = "imaging")]
pub mod odometry;
mod reduce;
pub mod registration;
pub mod rkhs;
pub mod sensitivity;
#[cfg(feature = "imaging")]
pub mod synthetic;

pub use error::{Error, Result};
pub use kernels::{ColorLabel, KernelParams};
pub use lie::{Pose, Twist};
pub use registration::{register, EllMode, RegistrationResult, SolverConfig};
pub use rkhs::{ColoredCloud, PairSet};
