//! Value-function approximation for nonlinear feedback control with
//! gradient-enhanced functional tensor trains.

pub mod basis;
pub mod control;
pub mod cross;
pub mod error;
pub mod ftt;
pub mod io;
pub mod matops;
pub mod models;
pub mod sampler;

pub use error::{Error, Result};
