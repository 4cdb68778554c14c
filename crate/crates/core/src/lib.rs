//! Simulation core for trajectory tracking of a differential-drive robot
//! under wheel faults: vehicle and motor models, quintic reference planning,
//! tracking controllers, fault injection with a Kalman filter bank, the
//! closed-loop engine and the evaluation metrics.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the `trackbench` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod controllers;
pub mod eval;
pub mod faults;
pub mod flags;
pub mod integrate;
pub mod math;
pub mod planner;
pub mod sim;
pub mod vehicle;
