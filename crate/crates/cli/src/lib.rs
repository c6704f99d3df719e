//! Experiment harness for randomized time-splitting LQ control: convergence
//! sweeps, variance tables, mesh studies, timing, exact-expectation bound
//! checks, and the particle mapping audit, with CSV/JSON reporting.

pub mod config;
pub mod experiments;
pub mod report;
