//! Configuration, file output and the command-line entry point.

pub mod cli;
pub mod config;
pub mod csv;
pub mod vtk;
