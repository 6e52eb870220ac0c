//! Config-driven experiment runner: simulate replicates, estimate cross
//! statistics, compute oracle curves and compare the two.

pub mod commands;
pub mod config;
pub mod fieldio;
pub mod figures;
pub mod manifest;
pub mod tables;
