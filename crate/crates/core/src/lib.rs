//! Volumes of unions and intersections of balls, and the truncated-polytope
//! machinery used to compute them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod ball_volumes;
pub mod cli;
pub mod configurations;
pub mod error;
pub mod laurent;
pub mod meanwidth;
pub mod ode;
pub mod polyhedra;
mod sampling;
pub mod truncated_volume;

pub use error::{KpvError, Result};
