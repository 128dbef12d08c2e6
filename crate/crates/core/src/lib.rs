pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod schedule;
pub mod theory;
pub mod trackers;
