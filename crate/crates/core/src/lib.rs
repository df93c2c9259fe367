//! Trajectory prediction for a depth-camera wearer from a single depth frame.
//!
//! The pipeline: a depth image is lifted into an [`egospace`] occlusion map
//! in a gaze-normalized ground frame ([`geometry`]); future ego-motion lives
//! in a low-dimensional [`trajectory`] subspace; a pitch-binned
//! [`database`] of (map, coefficients) pairs seeds candidate trajectories
//! that the [`predictor`] refines against the test map; [`discovery`] turns
//! the predicted set into a likelihood of traversable hidden space.
//! [`synthworld`] renders box worlds and provides exact oracles, and
//! [`evalharness`] implements the precision and detection protocols.

pub mod error;
pub mod geometry;
pub mod egospace;
pub mod trajectory;
pub mod observe;
pub mod database;
pub mod predictor;
pub mod discovery;
pub mod synthworld;
pub mod dataset;
pub mod evalharness;

pub use error::{Error, ErrorCategory, Result};
