use std::collections::BTreeMap;

use super::episode::EpisodeTrace;
use crate::model::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub name: String,
    /// `(1 - delta) sum_t delta^t u_t` over the episode.
    pub discounted_payoff: f64,
    pub mean_payoff: f64,
    pub mean_distortion: f64,
    pub mean_energy: f64,
    pub mean_bandwidth: f64,
    /// Lost packets by frame label.
    pub losses: BTreeMap<String, u64>,
    /// Lost packets of frames labelled `I` in slots after the first.
    pub i_loss_after_first: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub solution: String,
    pub seed: u64,
    pub slots: usize,
    pub users: Vec<UserMetrics>,
    /// Largest per-slot bandwidth use.
    pub peak_bandwidth: f64,
    /// Messages exchanged per slot, averaged.
    pub messages_per_slot: f64,
}

impl MetricsReport {
    pub fn from_trace(scenario: &Scenario, trace: &EpisodeTrace) -> Self {
        let n = trace.slots.len().max(1) as f64;
        let d = trace.discount;
        let mut users: Vec<UserMetrics> = scenario
            .users
            .iter()
            .map(|u| UserMetrics {
                name: u.name.clone(),
                discounted_payoff: 0.0,
                mean_payoff: 0.0,
                mean_distortion: 0.0,
                mean_energy: 0.0,
                mean_bandwidth: 0.0,
                losses: u.template.dus().iter().map(|du| (du.label.clone(), 0)).collect(),
                i_loss_after_first: 0,
            })
            .collect();
        let mut weight = 1.0 - d;
        let mut peak = 0.0f64;
        let mut messages = 0usize;
        for rec in &trace.slots {
            peak = peak.max(rec.bandwidth());
            messages += rec.messages.len();
            for (i, us) in rec.users.iter().enumerate() {
                let m = &mut users[i];
                m.discounted_payoff += weight * us.payoff;
                m.mean_payoff += us.payoff / n;
                m.mean_distortion += us.distortion / n;
                m.mean_energy += us.energy / n;
                m.mean_bandwidth += us.bandwidth / n;
                for &(du, k) in &us.lost {
                    let label = &scenario.users[i].template.du(du).label;
                    *m.losses.entry(label.clone()).or_default() += k as u64;
                    if label == "I" && rec.slot > 1 {
                        m.i_loss_after_first += k as u64;
                    }
                }
            }
            weight *= d;
        }
        MetricsReport {
            scenario: trace.scenario.clone(),
            solution: trace.solution.to_string(),
            seed: trace.seed,
            slots: trace.slots.len(),
            users,
            peak_bandwidth: peak,
            messages_per_slot: messages as f64 / n,
        }
    }

    pub fn network_discounted(&self) -> f64 {
        self.users.iter().map(|u| u.discounted_payoff).sum()
    }

    pub fn network_mean_payoff(&self) -> f64 {
        self.users.iter().map(|u| u.mean_payoff).sum()
    }

    pub fn network_mean_distortion(&self) -> f64 {
        self.users.iter().map(|u| u.mean_distortion).sum()
    }

    pub fn i_loss_after_first(&self) -> u64 {
        self.users.iter().map(|u| u.i_loss_after_first).sum()
    }
}
