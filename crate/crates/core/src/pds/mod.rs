//! Post-decision-state learning: values of the state right after the
//! scheduling action and before new arrivals, learned from realized slots
//! only.

mod du;
mod learner;

pub use du::{pds_decomposed_schedule, DuPdsTables};
pub use learner::{pds_update, write_learning_curve, LearningCurveRow, PdsLearner, PdsValueTable};

use crate::error::Result;
use crate::mdp::solver::beats;
use crate::model::{effective_min_quality, energy, BoxIter, GopTemplate, ScheduleAction, UserState};

/// State right after the action: `x - a` with the channel unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PostDecision {
    pub phase: u32,
    pub buffer: Vec<u32>,
    pub channel: usize,
}

impl PostDecision {
    /// Entries that survive into the next context, keyed by their position
    /// there; expiring entries are dropped.
    pub fn carried(&self, template: &GopTemplate) -> Vec<(usize, u32)> {
        template
            .carry(self.phase)
            .iter()
            .zip(&self.buffer)
            .filter_map(|(to, &x)| to.map(|p| (p, x)))
            .collect()
    }

    /// Total packets still buffered after the action.
    pub fn total(&self) -> u32 {
        self.buffer.iter().sum()
    }
}

/// `x~ = x - a`, `h~ = h`.
pub fn to_pds(state: &UserState, action: &ScheduleAction) -> Result<PostDecision> {
    action.check(state)?;
    Ok(PostDecision {
        phase: state.phase,
        buffer: state.buffer.iter().zip(&action.sends).map(|(x, y)| x - y).collect(),
        channel: state.channel,
    })
}

/// A value on post-decision states.
pub trait PostDecisionValue {
    fn post_value(&self, template: &GopTemplate, post: &PostDecision) -> f64;
}

/// Zero everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroValue;

impl PostDecisionValue for ZeroValue {
    fn post_value(&self, _: &GopTemplate, _: &PostDecision) -> f64 {
        0.0
    }
}

/// Per-slot objective parameters of a greedy post-decision decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyParams {
    pub price: f64,
    pub beta: f64,
    pub gain_to_noise: f64,
    pub delta: f64,
    pub min_quality: f64,
}

/// Exhaustive argmax of `(1 - delta) [u - price ||a||] + delta U(x - a)`
/// over the feasible actions, first maximum in colex order.
pub fn pds_greedy_action<V: PostDecisionValue + ?Sized>(
    template: &GopTemplate,
    state: &UserState,
    table: &V,
    p: &GreedyParams,
) -> ScheduleAction {
    pds_greedy_capped(template, state, table, p, u32::MAX).0
}

/// As [`pds_greedy_action`], restricted to at most `capacity` packets.
/// Returns the action and its objective.
pub fn pds_greedy_capped<V: PostDecisionValue + ?Sized>(
    template: &GopTemplate,
    state: &UserState,
    table: &V,
    p: &GreedyParams,
    capacity: u32,
) -> (ScheduleAction, f64) {
    let floor = effective_min_quality(template, state, p.min_quality) - 1e-9;
    let mut best = f64::NEG_INFINITY;
    let mut best_y = vec![0; state.buffer.len()];
    for y in BoxIter::new(&state.buffer) {
        let n: u32 = y.iter().sum();
        if n > capacity {
            continue;
        }
        let gain = crate::model::state::weighted_sends(template, state.phase, &y);
        if gain < floor {
            continue;
        }
        let post = PostDecision {
            phase: state.phase,
            buffer: state.buffer.iter().zip(&y).map(|(x, s)| x - s).collect(),
            channel: state.channel,
        };
        let imm = gain - p.beta * energy(p.gain_to_noise, n) - p.price * n as f64;
        let val = (1.0 - p.delta) * imm + p.delta * table.post_value(template, &post);
        if beats(val, best) {
            best = val;
            best_y = y;
        }
    }
    (ScheduleAction::new(best_y), best)
}
