use crate::model::{energy, GopTemplate, ScheduleAction, UserState};
use crate::pds::{PostDecision, PostDecisionValue};

/// How the slot's resource enters the drift decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LyapunovBudget {
    /// Per-packet price, no hard cap.
    Price(f64),
    /// Hard packet cap, no price.
    Capacity(u32),
}

/// Mean number of packets arriving at the start of the slot after `phase`.
pub fn mean_arrivals(template: &GopTemplate, phase: u32) -> f64 {
    let next = template.next_phase(phase);
    let ctx = template.context(next as u64);
    template
        .fresh(phase)
        .iter()
        .map(|&pos| template.du(ctx.entries[pos].du).size_pmf.mean())
        .sum()
}

/// Negative quadratic drift of the total backlog, `-[(|x~| + l)^2 - Q^2]`,
/// as a post-decision value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftValue {
    /// Backlog `Q` before the action.
    pub backlog: u32,
    pub arrivals: f64,
}

impl DriftValue {
    pub fn for_state(template: &GopTemplate, state: &UserState) -> Self {
        DriftValue {
            backlog: state.total_packets(),
            arrivals: mean_arrivals(template, state.phase),
        }
    }

    pub fn drift(&self, left: u32) -> f64 {
        let q = self.backlog as f64;
        (left as f64 + self.arrivals).powi(2) - q * q
    }
}

impl PostDecisionValue for DriftValue {
    fn post_value(&self, _: &GopTemplate, post: &PostDecision) -> f64 {
        -self.drift(post.total())
    }
}

/// Drift-plus-penalty decision: picks the total `n` maximizing
/// `-beta rho(n) - price n - drift(Q - n)` (smallest `n` on ties) and sends
/// it in context order. Distortion impacts are never read.
pub fn lyapunov_action(
    template: &GopTemplate,
    state: &UserState,
    budget: LyapunovBudget,
    beta: f64,
    gain_to_noise: f64,
) -> ScheduleAction {
    let drift = DriftValue::for_state(template, state);
    let q = state.total_packets();
    let (price, cap) = match budget {
        LyapunovBudget::Price(p) => (p, q),
        LyapunovBudget::Capacity(c) => (0.0, c.min(q)),
    };
    let mut best = f64::NEG_INFINITY;
    let mut best_n = 0;
    for n in 0..=cap {
        let v = -beta * energy(gain_to_noise, n) - price * n as f64 - drift.drift(q - n);
        if crate::mdp::solver::beats(v, best) {
            best = v;
            best_n = n;
        }
    }
    let mut sends = vec![0; state.buffer.len()];
    let mut left = best_n;
    for (s, &x) in sends.iter_mut().zip(&state.buffer) {
        *s = x.min(left);
        left -= *s;
    }
    ScheduleAction::new(sends)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_example() {
        let d = DriftValue { backlog: 3, arrivals: 0.0 };
        assert_eq!(d.drift(2), -5.0);
        assert_eq!(d.drift(3), 0.0);
    }
}
