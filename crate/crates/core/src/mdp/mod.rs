//! Per-user priced MDPs solved by value iteration.

pub mod solver;
pub mod space;

pub use solver::{
    bellman_backup, decide, evaluate_policy, greedy_choice, greedy_choice_capped, policy_values, post_values, solve_finite_horizon,
    solve_priced_mdp, solve_priced_mdp_from, transitions, write_value_csv, Choice, ExoChain, PricedUserModel,
    ValueTable,
};
pub use space::{TrafficSpace, DEFAULT_STATE_BUDGET};

use std::sync::Arc;

use crate::error::Result;
use crate::model::UserConfig;

impl PricedUserModel {
    /// Builds the traffic space for `user` and wraps it with `chain`.
    pub fn for_user(user: &UserConfig, chain: ExoChain, delta: f64) -> Result<Self> {
        let space = TrafficSpace::with_budget(&user.template, chain.len(), DEFAULT_STATE_BUDGET)?;
        PricedUserModel::new(user, Arc::new(space), chain, delta)
    }
}
