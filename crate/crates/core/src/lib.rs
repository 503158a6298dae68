//! Multi-user wireless video scheduling with per-channel-state resource
//! prices.
//!
//! A coordinator prices bandwidth separately in every joint channel state
//! and each user solves its own priced, foresighted packet scheduling
//! problem over a DAG of video data units. The crate also carries a
//! post-decision-state learner, the usual baselines and a simulator with a
//! brute-force centralized oracle for small instances.

pub mod baselines;
pub mod coord;
pub mod error;
pub mod mdp;
pub mod model;
pub mod pds;
pub mod sched;
pub mod sim;

pub use error::{Error, Result};
