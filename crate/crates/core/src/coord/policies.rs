//! Users' priced policies under a price table, in either price view.

use std::sync::Arc;

use super::price::user_price;
use crate::error::Result;
use crate::mdp::{decide, greedy_choice_capped, solve_priced_mdp_from, ExoChain, PricedUserModel, TrafficSpace, ValueTable, DEFAULT_STATE_BUDGET};
use crate::model::{truncate_to, JointChannel, PriceView, Scenario, ScheduleAction, UserState};

/// Per-user price each user plans against, indexed by its exogenous state.
pub fn view_prices(scenario: &Scenario, joint: &JointChannel, lambda0: &[f64], user: usize, view: PriceView) -> Vec<f64> {
    let ch = &scenario.users[user].channel;
    let per_s0: Vec<f64> = (0..joint.count())
        .map(|s0| user_price(lambda0[s0], ch.rate(joint.component(s0, user)), scenario.bits_per_packet))
        .collect();
    match view {
        PriceView::Full => per_s0,
        PriceView::Expected => {
            let pi = joint.stationary();
            (0..ch.len())
                .map(|h| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for s0 in 0..joint.count() {
                        if joint.component(s0, user) == h {
                            num += pi[s0] * per_s0[s0];
                            den += pi[s0];
                        }
                    }
                    if den > 0.0 {
                        num / den
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Solved per-user priced MDPs for one price table.
#[derive(Debug, Clone)]
pub struct PricedPolicies {
    pub view: PriceView,
    pub joint: JointChannel,
    pub lambda0: Vec<f64>,
    pub models: Vec<PricedUserModel>,
    pub tables: Vec<ValueTable>,
}

impl PricedPolicies {
    /// Solves every user against `lambda0`, warm-starting from `warm`.
    pub fn solve(
        scenario: &Scenario,
        view: PriceView,
        lambda0: &[f64],
        tol: f64,
        warm: Option<&PricedPolicies>,
    ) -> Result<Self> {
        let joint = scenario.joint_channel();
        let mut models = Vec::with_capacity(scenario.users.len());
        let mut tables = Vec::with_capacity(scenario.users.len());
        for (i, user) in scenario.users.iter().enumerate() {
            let price = view_prices(scenario, &joint, lambda0, i, view);
            let model = match warm {
                Some(w) if w.view == view => w.models[i].with_prices(price)?,
                _ => {
                    let chain = match view {
                        PriceView::Full => ExoChain::joint(&joint, i, price),
                        PriceView::Expected => ExoChain::own(&user.channel, price),
                    };
                    let space = TrafficSpace::with_budget(&user.template, chain.len(), DEFAULT_STATE_BUDGET)?;
                    PricedUserModel::new(user, Arc::new(space), chain, scenario.discount)?
                }
            };
            let start = warm.filter(|w| w.view == view).map(|w| &w.tables[i]);
            tables.push(solve_priced_mdp_from(&model, tol, start)?);
            models.push(model);
        }
        Ok(PricedPolicies {
            view,
            joint,
            lambda0: lambda0.to_vec(),
            models,
            tables,
        })
    }

    /// Exogenous index of `user` in joint channel state `s0`.
    pub fn z_of(&self, user: usize, s0: usize) -> usize {
        match self.view {
            PriceView::Full => s0,
            PriceView::Expected => self.joint.component(s0, user),
        }
    }

    /// Requested action of `user`, with the immediate term priced at the
    /// announced `lambda0_now`.
    pub fn act(
        &self,
        scenario: &Scenario,
        user: usize,
        state: &UserState,
        s0: usize,
        lambda0_now: f64,
    ) -> Result<ScheduleAction> {
        let h = self.joint.component(s0, user);
        let price = user_price(lambda0_now, scenario.users[user].channel.rate(h), scenario.bits_per_packet);
        decide(&self.models[user], &self.tables[user], state, self.z_of(user, s0), price)
    }
}

impl PricedPolicies {
    /// Realized actions for one slot. Overcommitted requests are scaled
    /// down. Otherwise the unused bandwidth goes back to the users: first
    /// split by the static shares, then whatever is still left in user
    /// order. Each user re-decides with the extra as a packet cap and the
    /// extra priced at zero.
    pub fn realize(
        &self,
        scenario: &Scenario,
        s0: usize,
        states: &[UserState],
        requests: &[ScheduleAction],
    ) -> Result<Vec<ScheduleAction>> {
        let used: f64 = usages(scenario, &self.joint, s0, requests).iter().sum();
        if used > scenario.bandwidth * (1.0 + 1e-12) {
            return Ok(fit_to_budget(scenario, &self.joint, s0, states, requests));
        }
        let shares = crate::baselines::static_shares(scenario);
        let mut spare = scenario.bandwidth - used;
        let mut out = requests.to_vec();
        for pass in 0..2 {
            let pool = spare;
            for (i, st) in states.iter().enumerate() {
                let cost = scenario.packet_cost(i, self.joint.component(s0, i));
                let extra = if pass == 0 { shares[i] * pool } else { spare };
                let room = ((extra.min(spare) / cost) + 1e-9).floor() as u32;
                if room == 0 || out[i].total() == st.total_packets() {
                    continue;
                }
                let m = &self.models[i];
                let pre = m.space.pre_index(st.phase, &st.buffer)?;
                let cap = out[i].total() + room;
                let (c, v) = greedy_choice_capped(m, &self.tables[i].post, pre, self.z_of(i, s0), 0.0, cap);
                if v.is_finite() {
                    let a = m.action_of(pre, c);
                    spare -= (a.total() as f64 - out[i].total() as f64) * cost;
                    out[i] = a;
                }
            }
        }
        Ok(out)
    }
}

/// Bandwidth used by each user's action in joint state `s0`.
pub fn usages(scenario: &Scenario, joint: &JointChannel, s0: usize, actions: &[ScheduleAction]) -> Vec<f64> {
    actions
        .iter()
        .enumerate()
        .map(|(i, a)| a.total() as f64 * scenario.packet_cost(i, joint.component(s0, i)))
        .collect()
}

/// Scales overcommitted requests down proportionally so that the slot fits
/// in the bandwidth; each user keeps its highest priority packets.
pub fn fit_to_budget(
    scenario: &Scenario,
    joint: &JointChannel,
    s0: usize,
    states: &[UserState],
    actions: &[ScheduleAction],
) -> Vec<ScheduleAction> {
    let used: f64 = usages(scenario, joint, s0, actions).iter().sum();
    if used <= scenario.bandwidth * (1.0 + 1e-12) {
        return actions.to_vec();
    }
    let f = scenario.bandwidth / used;
    let cost: Vec<f64> = (0..actions.len())
        .map(|i| scenario.packet_cost(i, joint.component(s0, i)))
        .collect();
    let exact: Vec<f64> = actions.iter().map(|a| a.total() as f64 * f).collect();
    let mut caps: Vec<u32> = exact.iter().map(|x| (x + 1e-9).floor() as u32).collect();
    // largest remainders first get one more packet while it still fits
    let mut spare = scenario.bandwidth - caps.iter().zip(&cost).map(|(&c, k)| c as f64 * k).sum::<f64>();
    let mut order: Vec<usize> = (0..actions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - caps[a] as f64;
        let rb = exact[b] - caps[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if caps[i] < actions[i].total() && cost[i] <= spare + 1e-12 {
            caps[i] += 1;
            spare -= cost[i];
        }
    }
    actions
        .iter()
        .enumerate()
        .map(|(i, a)| truncate_to(&scenario.users[i].template, &states[i], a, caps[i]))
        .collect()
}
