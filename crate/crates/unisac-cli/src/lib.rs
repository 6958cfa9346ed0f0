//! Shared plumbing of the experiment driver: the declarative configuration
//! document and the CSV result table, exposed for integration tests.

pub mod config;
pub mod table;
