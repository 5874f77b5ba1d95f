//! Cost model and simulator for cloud event processing.
//!
//! Compares pay-per-request function deployments against stream processing
//! clusters for a stateless storage application (UC1) and a stateful
//! sliding-window aggregation (UC2). Load comes from an open workload of
//! fixed-interval sensors; stream processing capacity is sized by searching
//! for the fewest instances whose simulated consumer lag stays flat.

pub mod analysis;
pub mod capacity;
pub mod cli;
pub mod deployment;
pub mod kv;
pub mod pricing;
pub mod scenario;
pub mod time;
pub mod usecase;
pub mod workload;
