use crate::model::{packet_capacity, ScheduleAction, Scenario, UserState};
use crate::sched::SimpleScheduler;

/// Bandwidth shares proportional to each user's distortion impact per GOP.
pub fn static_shares(scenario: &Scenario) -> Vec<f64> {
    let w: Vec<f64> = scenario.users.iter().map(|u| u.template.gop_impact()).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / w.len() as f64; w.len()]
    }
}

/// Fixed shares of the bandwidth and a capacity-filling scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct MyopicPolicy {
    pub shares: Vec<f64>,
    pub scheduler: SimpleScheduler,
}

pub fn myopic_policy(scenario: &Scenario) -> MyopicPolicy {
    MyopicPolicy {
        shares: static_shares(scenario),
        scheduler: SimpleScheduler::Edf,
    }
}

impl MyopicPolicy {
    /// Packets `user` may send in its channel state `h`.
    pub fn capacity(&self, scenario: &Scenario, user: usize, h: usize) -> u32 {
        packet_capacity(
            self.shares[user] * scenario.bandwidth,
            scenario.bits_per_packet,
            scenario.users[user].channel.rate(h),
        )
    }

    pub fn act(&self, scenario: &Scenario, user: usize, state: &UserState) -> ScheduleAction {
        let cap = self.capacity(scenario, user, state.channel);
        self.scheduler.schedule(&scenario.users[user].template, state, cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illustration_shares_are_even() {
        let s = Scenario::preset("illustration-2user").unwrap();
        let sh = static_shares(&s);
        assert!((sh[0] - 0.5).abs() < 1e-12 && (sh[1] - 0.5).abs() < 1e-12);
        let p = myopic_policy(&s);
        assert_eq!(p.capacity(&s, 0, 0), 30);
        assert_eq!(p.capacity(&s, 0, 1), 20);
    }
}
