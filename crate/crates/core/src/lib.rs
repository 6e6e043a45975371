//! Bayesian optimisation of simulated photonic reservoir computers.

pub mod acquisition;
pub mod campaign;
pub mod error;
pub mod gp;
pub mod hyperspace;
pub mod logfile;
pub mod matrix_io;
pub mod optim;
pub mod readout;
pub mod reservoir;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};
