//! Distributed portfolio valuation benchmark suite.
//!
//! `riskbench` generates a realistic derivatives portfolio, prices it
//! with the engines in `riskbench-core`, farms the jobs out to workers
//! over a rank-addressed transport using a greedy first-free-worker
//! scheduler, and reports normalized speedup tables.

pub mod bench;
pub mod cli;
pub mod dispatch;
pub mod files;
pub mod portfolio;
pub mod pricing;
pub mod transport;
