#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod initial_data;
pub mod io;
pub mod lane_emden;
pub mod numerics;
pub mod ode;
pub mod solver;
pub mod star_state;

pub use error::{Error, Result};
