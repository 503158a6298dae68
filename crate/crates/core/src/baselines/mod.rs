//! Comparison solutions: static-share myopic scheduling, drift-based
//! scheduling and a single price shared by every channel state.

pub mod lyapunov;
pub mod myopic;
pub mod uniform;

pub use lyapunov::{lyapunov_action, DriftValue, LyapunovBudget};
pub use myopic::{myopic_policy, static_shares, MyopicPolicy};
pub use uniform::{scale_up, uniform_price_solve, UniformConfig, UniformPriceSolution};
