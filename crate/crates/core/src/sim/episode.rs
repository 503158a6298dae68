//! Slot-by-slot simulation of a prepared solution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::solution::{normalized_shares, Allocation, Prepared, Scheduling, Solution};
use crate::baselines::{lyapunov_action, scale_up, LyapunovBudget};
use crate::coord::{fit_to_budget, usages, user_price, PricedPolicies};
use crate::error::{Error, Result};
use crate::model::{
    advance_traffic, advance_with_arrivals, distortion_reduction, energy, packet_capacity, ScheduleAction, Scenario,
    UserState,
};
use crate::sched::{decomposed_schedule, RoundParams, RoundPrice};

/// Pinned randomness: initial states, channel indices per slot and,
/// optionally, the sizes of arriving DUs.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub initial: Vec<UserState>,
    /// `channels[t][i]` is user `i`'s channel in slot `t`.
    pub channels: Vec<Vec<usize>>,
    /// `arrivals[t][i]` lists the fresh entry sizes arriving after slot `t`.
    pub arrivals: Option<Vec<Vec<Vec<u32>>>>,
}

impl Replay {
    /// Two-user walkthrough: both users start a GOP with full frames and see
    /// the channel sequence good, bad, bad, bad, good.
    pub fn illustration(scenario: &Scenario) -> Result<Self> {
        if scenario.users.len() != 2 {
            return Err(Error::validation("users", "the illustration replay needs two users"));
        }
        let seq = [0usize, 1, 1, 1, 0];
        Ok(Replay {
            initial: scenario
                .users
                .iter()
                .map(|u| UserState::full(&u.template, 0, seq[0]))
                .collect(),
            channels: seq.iter().map(|&h| vec![h, h]).collect(),
            arrivals: None,
        })
    }

    pub fn slots(&self) -> usize {
        self.channels.len()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub slots: usize,
    pub seed: u64,
    pub replay: Option<Replay>,
}

/// One user's part of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSlot {
    pub state: UserState,
    /// Action the user asked for before any bandwidth adjustment.
    pub requested: ScheduleAction,
    pub sent: ScheduleAction,
    pub price: f64,
    pub bandwidth: f64,
    pub distortion: f64,
    pub energy: f64,
    pub payoff: f64,
    /// `(du id, packets)` dropped at the end of the slot.
    pub lost: Vec<(usize, u32)>,
}

/// What the coordinator and the users exchanged in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message {
    Price { user: usize, value: f64 },
    Request { user: usize, bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub s0: usize,
    pub lambda0: Option<f64>,
    pub users: Vec<UserSlot>,
    pub messages: Vec<Message>,
}

impl SlotRecord {
    pub fn bandwidth(&self) -> f64 {
        self.users.iter().map(|u| u.bandwidth).sum()
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub scenario: String,
    pub solution: Solution,
    pub seed: u64,
    pub discount: f64,
    pub slots: Vec<SlotRecord>,
}

fn start_states(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Vec<UserState> {
    crate::coord::run::Plant::start(scenario, rng).states
}

/// Policies whose requests drive the allocation, if any.
fn priced_policies(prepared: &Prepared) -> Option<&PricedPolicies> {
    if let Some(c) = &prepared.coordination {
        return Some(&c.policies);
    }
    prepared.uniform.as_ref().map(|u| &u.policies)
}

/// Runs `prepared` for `cfg.slots` slots (or the replay length).
pub fn run_episode(scenario: &Scenario, prepared: &Prepared, cfg: &EpisodeConfig) -> Result<EpisodeTrace> {
    let joint = scenario.joint_channel();
    let sol = prepared.solution;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut states, slots) = match &cfg.replay {
        Some(r) => {
            if r.initial.len() != scenario.users.len() || r.channels.iter().any(|c| c.len() != scenario.users.len()) {
                return Err(Error::validation("replay", "one initial state and channel per user required"));
            }
            let mut init = r.initial.clone();
            if let Some(first) = r.channels.first() {
                for (s, &h) in init.iter_mut().zip(first) {
                    s.channel = h;
                }
            }
            (init, r.slots())
        }
        None => (start_states(scenario, &mut rng), cfg.slots),
    };
    let mut out = Vec::with_capacity(slots);

    for t in 0..slots {
        let s0 = joint.encode(&states.iter().map(|s| s.channel).collect::<Vec<_>>());
        let lambda0 = prepared.prices.as_ref().map(|p| p.get(s0));
        let prices: Vec<f64> = (0..states.len())
            .map(|i| {
                let rate = scenario.users[i].channel.rate(states[i].channel);
                lambda0.map_or(0.0, |l| user_price(l, rate, scenario.bits_per_packet))
            })
            .collect();

        let requested = requests(scenario, prepared, &states, s0, lambda0.unwrap_or(0.0), &prices)?;
        let sent = match (sol.allocation, sol.scheduling) {
            (Allocation::Uniform, _) => scale_up(scenario, &joint, s0, &states, &requested),
            (Allocation::Proposed, Scheduling::Optimal) => match priced_policies(prepared) {
                Some(p) => p.realize(scenario, s0, &states, &requested)?,
                None => fit_to_budget(scenario, &joint, s0, &states, &requested),
            },
            (Allocation::Proposed, Scheduling::Decomposed | Scheduling::Learning) => {
                fit_to_budget(scenario, &joint, s0, &states, &requested)
            }
            (alloc, sched) => {
                let shares = match alloc {
                    Allocation::Myopic => prepared
                        .myopic
                        .as_ref()
                        .map(|m| m.shares.clone())
                        .ok_or_else(|| Error::Usage("myopic policy not prepared".into()))?,
                    _ => {
                        let granted = match priced_policies(prepared) {
                            Some(p) => p.realize(scenario, s0, &states, &requested)?,
                            None => requested.clone(),
                        };
                        normalized_shares(scenario, &usages(scenario, &joint, s0, &granted))
                    }
                };
                states
                    .iter()
                    .enumerate()
                    .map(|(i, st)| {
                        let u = &scenario.users[i];
                        let cap = packet_capacity(
                            shares[i] * scenario.bandwidth,
                            scenario.bits_per_packet,
                            u.channel.rate(st.channel),
                        );
                        match sched {
                            Scheduling::Simple(s) => s.schedule(&u.template, st, cap),
                            _ => lyapunov_action(
                                &u.template,
                                st,
                                LyapunovBudget::Capacity(cap),
                                u.tradeoff,
                                u.channel.gain_to_noise(st.channel),
                            ),
                        }
                    })
                    .collect()
            }
        };

        let bw = usages(scenario, &joint, s0, &sent);
        let req_bw = usages(scenario, &joint, s0, &requested);
        let mut messages = Vec::new();
        if sol.is_priced() {
            for i in 0..states.len() {
                messages.push(Message::Price { user: i, value: prices[i] });
                messages.push(Message::Request { user: i, bandwidth: req_bw[i] });
            }
        }

        let mut users = Vec::with_capacity(states.len());
        let mut next_states = Vec::with_capacity(states.len());
        for (i, st) in states.iter().enumerate() {
            let u = &scenario.users[i];
            let d = distortion_reduction(&u.template, st, &sent[i])?;
            let e = energy(u.channel.gain_to_noise(st.channel), sent[i].total());
            let pinned = cfg
                .replay
                .as_ref()
                .and_then(|r| r.arrivals.as_ref())
                .and_then(|a| a.get(t))
                .map(|a| a[i].clone());
            let (mut next, step) = match pinned {
                Some(a) => advance_with_arrivals(&u.template, st, &sent[i], &a)?,
                None => advance_traffic(&u.template, st, &sent[i], &mut rng)?,
            };
            next.channel = match &cfg.replay {
                Some(r) => r.channels.get(t + 1).map_or(st.channel, |c| c[i]),
                None => u.channel.sample(st.channel, &mut rng),
            };
            users.push(UserSlot {
                state: st.clone(),
                requested: requested[i].clone(),
                sent: sent[i].clone(),
                price: prices[i],
                bandwidth: bw[i],
                distortion: d,
                energy: e,
                payoff: d - u.tradeoff * e,
                lost: step.lost,
            });
            next_states.push(next);
        }
        out.push(SlotRecord {
            slot: t + 1,
            s0,
            lambda0,
            users,
            messages,
        });
        states = next_states;
    }
    Ok(EpisodeTrace {
        scenario: scenario.name.clone(),
        solution: sol,
        seed: cfg.seed,
        discount: scenario.discount,
        slots: out,
    })
}

/// Each user's own decision before the allocation step. Capacity-driven
/// solutions without a priced policy request nothing.
fn requests(
    scenario: &Scenario,
    prepared: &Prepared,
    states: &[UserState],
    s0: usize,
    lambda0: f64,
    prices: &[f64],
) -> Result<Vec<ScheduleAction>> {
    let sol = prepared.solution;
    let mut out = Vec::with_capacity(states.len());
    for (i, st) in states.iter().enumerate() {
        let u = &scenario.users[i];
        let a = match sol.scheduling {
            Scheduling::Learning => {
                let l = prepared
                    .learners
                    .as_ref()
                    .ok_or_else(|| Error::Usage("learners not trained".into()))?;
                l[i].greedy(st, prices[i])?
            }
            Scheduling::Decomposed => {
                let tables = prepared
                    .du_tables
                    .as_ref()
                    .ok_or_else(|| Error::Usage("DU tables not built".into()))?;
                let params = RoundParams {
                    price: prices[i],
                    rounds: RoundPrice::Current,
                    beta: u.tradeoff,
                    gain_to_noise: u.channel.gain_to_noise(st.channel),
                    delta: scenario.discount,
                    min_quality: u.min_quality,
                };
                decomposed_schedule(&u.template, st, st.channel, &params, &tables[i]).action
            }
            _ => match priced_policies(prepared) {
                Some(p) if sol.allocation != Allocation::Myopic => p.act(scenario, i, st, s0, lambda0)?,
                _ => ScheduleAction::zero(st.buffer.len()),
            },
        };
        out.push(a);
    }
    Ok(out)
}

/// Runs one episode per seed, spread over the available cores, and returns
/// their metrics in seed order.
pub fn run_seeds(
    scenario: &Scenario,
    prepared: &Prepared,
    seeds: &[u64],
    slots: usize,
) -> Result<Vec<super::metrics::MetricsReport>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    let parts: Vec<Result<Vec<_>>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&seed| {
                            let cfg = EpisodeConfig { slots, seed, replay: None };
                            let trace = run_episode(scenario, prepared, &cfg)?;
                            Ok(super::metrics::MetricsReport::from_trace(scenario, &trace))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("episode worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
