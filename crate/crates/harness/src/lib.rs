//! Experiment harness for PGD-VHL: phase-transition grids, convergence
//! traces and noise sweeps, written as versioned CSV files.

pub mod cli;
pub mod experiments;
pub mod output;
pub mod spec;
