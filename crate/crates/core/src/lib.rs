//! Simulation and potential-theory toolkit for the volume of the sausage
//! swept by a unit ball along a rotationally invariant α-stable path.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod potential;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{SausageSkeleton, VolumeEstimate, VolumeMethod};
pub use potential::PotentialContext;
pub use process::{PathSkeleton, ProcessParams};
pub use rng::RandomStream;
