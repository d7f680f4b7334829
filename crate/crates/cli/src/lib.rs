//! Verification runner: configuration, check suites, reports and plot data.

pub mod app;
pub mod checks;
pub mod config;
pub mod report;

pub use config::{Suite, SuiteConfig};
pub use report::{Record, Report};
