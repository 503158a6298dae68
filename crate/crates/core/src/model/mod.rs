//! Traffic, channel and payoff model shared by every solver.

pub mod channel;
pub mod scenario;
pub mod state;
pub mod template;

pub use channel::{ChannelModel, ChannelState, JointChannel};
pub use scenario::{PriceView, Scenario, ScenarioFile, UserConfig};
pub use state::{
    action_set, advance_traffic, advance_with_arrivals, bandwidth_of, bandwidth_usage, colex_cmp,
    distortion_reduction, effective_min_quality, energy, fill_to, packet_capacity, payoff, priority_order,
    truncate_to, BoxIter, ScheduleAction, TrafficStep, UserState,
};
pub use template::{Context, ContextEntry, DataUnitSpec, GopTemplate, SizePmf};
