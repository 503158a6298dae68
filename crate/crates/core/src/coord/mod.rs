//! Per-joint-channel-state prices and the coordination loop.

pub mod policies;
pub mod price;
pub mod run;

pub use policies::{fit_to_budget, usages, view_prices, PricedPolicies};
pub use price::{update_prices, user_price, PriceRecord, PriceTable};
pub use run::{expected_usage, run_coordination, CoordinationConfig, CoordinationReport, TraceRow};
