//! Simulation loop, centralized oracle and reports.

pub mod episode;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod solution;

pub use episode::{run_episode, run_seeds, EpisodeConfig, EpisodeTrace, Message, Replay, SlotRecord, UserSlot};
pub use metrics::{MetricsReport, UserMetrics};
pub use oracle::{centralized_oracle, compare_with_oracle, JointSpace, OracleComparison, OracleConfig, OracleResult};
pub use solution::{normalized_shares, prepare, Allocation, PrepareConfig, Prepared, Scheduling, Solution};
