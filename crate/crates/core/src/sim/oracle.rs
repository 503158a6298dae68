//! Brute-force centralized solution of the joint constrained MDP, for
//! instances small enough to enumerate.

use std::sync::Arc;

use crate::coord::PricedPolicies;
use crate::error::{Error, Result, SizingReport};
use crate::mdp::{solver::MAX_ITERATIONS, Choice, ExoChain, PricedUserModel, TrafficSpace, DEFAULT_STATE_BUDGET};
use crate::model::{PriceView, Scenario, UserState};

/// Default cap on joint states.
pub const DEFAULT_JOINT_CAP: usize = 200_000;
/// Cap on joint (state, action profile) pairs per sweep.
pub const DEFAULT_WORK_CAP: u128 = 200_000_000;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub joint_cap: usize,
    pub work_cap: u128,
    /// Value error bound of the joint value iteration.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            joint_cap: DEFAULT_JOINT_CAP,
            work_cap: DEFAULT_WORK_CAP,
            tol: 1e-9,
        }
    }
}

/// One user's enumerated choices, fixed across sweeps.
#[derive(Debug, Clone, Copy)]
struct Opt {
    choice: Choice,
    /// Unpriced payoff per own channel state.
    gain: f64,
    energy_idx: u32,
    packets: u32,
    pd: usize,
}

/// Joint state space `[pre_1, .., pre_I, s0]`, row-major.
#[derive(Debug, Clone)]
pub struct JointSpace {
    pub models: Vec<PricedUserModel>,
    pre_counts: Vec<usize>,
    pd_counts: Vec<usize>,
    s0_count: usize,
    transition: Vec<Vec<f64>>,
    /// `succ[user][pd]`: next pre states with probabilities.
    succ: Vec<Vec<Vec<(usize, f64)>>>,
    opts: Vec<Vec<Vec<Opt>>>,
    /// `cost[user][s0]`: bandwidth per packet.
    cost: Vec<Vec<f64>>,
    components: Vec<Vec<usize>>,
    bandwidth: f64,
    delta: f64,
}

impl JointSpace {
    pub fn build(scenario: &Scenario, cfg: &OracleConfig) -> Result<Self> {
        let joint = scenario.joint_channel();
        let s0_count = joint.count();
        let mut models = Vec::new();
        for user in &scenario.users {
            let chain = ExoChain::own(&user.channel, vec![0.0; user.channel.len()]);
            let space = TrafficSpace::with_budget(&user.template, chain.len(), DEFAULT_STATE_BUDGET)?;
            models.push(PricedUserModel::new(user, Arc::new(space), chain, scenario.discount)?);
        }
        let pre_counts: Vec<usize> = models.iter().map(|m| m.space.pre_count()).collect();
        let states: u128 = pre_counts.iter().map(|&c| c as u128).product::<u128>() * s0_count as u128;
        let breakdown = || {
            let mut b: Vec<(String, u128)> = scenario
                .users
                .iter()
                .zip(&pre_counts)
                .map(|(u, &c)| (format!("{}.traffic_states", u.name), c as u128))
                .collect();
            b.push(("joint_channel_states".into(), s0_count as u128));
            b
        };
        if states > cfg.joint_cap as u128 {
            return Err(Error::Sizing(SizingReport {
                what: "centralized oracle".into(),
                states,
                budget: cfg.joint_cap as u128,
                breakdown: breakdown(),
            }));
        }
        let opts: Vec<Vec<Vec<Opt>>> = models
            .iter()
            .map(|m| {
                (0..m.space.pre_count())
                    .map(|pre| {
                        m.choices(pre)
                            .map(|c| Opt {
                                choice: c,
                                gain: m.payoff_of(pre, 0, c) + m.beta * m.energy_of(0, m.packets_of(pre, c)),
                                energy_idx: m.packets_of(pre, c),
                                packets: m.packets_of(pre, c),
                                pd: m.pd_of(pre, c),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let work: u128 = opts
            .iter()
            .map(|per| per.iter().map(|o| o.len() as u128).sum::<u128>())
            .product::<u128>()
            * s0_count as u128;
        if work > cfg.work_cap {
            let mut b = breakdown();
            b.push(("action_profiles_per_sweep".into(), work));
            return Err(Error::Sizing(SizingReport {
                what: "centralized oracle action enumeration".into(),
                states: work,
                budget: cfg.work_cap,
                breakdown: b,
            }));
        }
        let succ = models
            .iter()
            .map(|m| {
                let sp = &m.space;
                let mut out = vec![Vec::new(); sp.pd_count()];
                for info in &sp.phases {
                    for k in 0..info.pd_count {
                        let pd = info.pd_offset + k;
                        out[pd] = info
                            .combos
                            .iter()
                            .enumerate()
                            .map(|(mi, (_, pm))| (sp.successor(pd, mi), *pm))
                            .collect();
                    }
                }
                out
            })
            .collect();
        let components: Vec<Vec<usize>> = (0..scenario.users.len())
            .map(|i| (0..s0_count).map(|s0| joint.component(s0, i)).collect())
            .collect();
        let cost = (0..scenario.users.len())
            .map(|i| (0..s0_count).map(|s0| scenario.packet_cost(i, components[i][s0])).collect())
            .collect();
        Ok(JointSpace {
            pd_counts: models.iter().map(|m| m.space.pd_count()).collect(),
            models,
            pre_counts,
            s0_count,
            transition: joint.transition().to_vec(),
            succ,
            opts,
            cost,
            components,
            bandwidth: scenario.bandwidth,
            delta: scenario.discount,
        })
    }

    pub fn state_count(&self) -> usize {
        self.pre_counts.iter().product::<usize>() * self.s0_count
    }

    pub fn users(&self) -> usize {
        self.models.len()
    }

    /// Splits a joint index into per-user traffic states and `s0`.
    pub fn decode(&self, mut idx: usize) -> (Vec<usize>, usize) {
        let s0 = idx % self.s0_count;
        idx /= self.s0_count;
        let mut pres = vec![0; self.users()];
        for i in (0..self.users()).rev() {
            pres[i] = idx % self.pre_counts[i];
            idx /= self.pre_counts[i];
        }
        (pres, s0)
    }

    fn post_index(&self, pds: &[usize], s0: usize) -> usize {
        let mut idx = 0;
        for (i, &pd) in pds.iter().enumerate() {
            idx = idx * self.pd_counts[i] + pd;
        }
        idx * self.s0_count + s0
    }

    /// Expected next value of every joint post-decision state.
    fn post_values(&self, value: &[f64]) -> Vec<f64> {
        // channel first: W[.., s0] = sum_s0' P(s0'|s0) V[.., s0']
        let s = self.s0_count;
        let mut cur: Vec<f64> = value
            .chunks(s)
            .flat_map(|row| (0..s).map(move |a| self.transition[a].iter().zip(row).map(|(p, v)| p * v).sum::<f64>()))
            .collect();
        let mut shape: Vec<usize> = self.pre_counts.clone();
        for i in 0..self.users() {
            let outer: usize = shape[..i].iter().product();
            let inner: usize = shape[i + 1..].iter().product::<usize>() * s;
            let new = self.pd_counts[i];
            let old = shape[i];
            let mut out = vec![0.0; outer * new * inner];
            for o in 0..outer {
                for (pd, succ) in self.succ[i].iter().enumerate() {
                    let dst = &mut out[(o * new + pd) * inner..(o * new + pd + 1) * inner];
                    for &(pre, p) in succ {
                        let src = &cur[(o * old + pre) * inner..(o * old + pre + 1) * inner];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += p * v;
                        }
                    }
                }
            }
            cur = out;
            shape[i] = new;
        }
        cur
    }

    fn payoff(&self, user: usize, s0: usize, o: &Opt) -> f64 {
        let m = &self.models[user];
        o.gain - m.beta * m.energy_of(self.components[user][s0], o.energy_idx)
    }

    /// One Bellman sweep. With `prices` the constraint is dropped and each
    /// packet is charged its user price instead.
    fn sweep(&self, value: &[f64], prices: Option<&[f64]>, policy: Option<&mut Vec<Choice>>) -> Vec<f64> {
        let post = self.post_values(value);
        let d = self.delta;
        let n_users = self.users();
        let mut out = vec![0.0; value.len()];
        let mut best_profile = vec![Choice { option: 0, expiring: 0 }; value.len() * n_users];
        let mut idx = vec![0usize; n_users];
        let mut pds = vec![0usize; n_users];
        for (j, slot) in out.iter_mut().enumerate() {
            let (pres, s0) = self.decode(j);
            let lists: Vec<&Vec<Opt>> = (0..n_users).map(|i| &self.opts[i][pres[i]]).collect();
            idx.iter_mut().for_each(|x| *x = 0);
            let mut best = f64::NEG_INFINITY;
            'profiles: loop {
                let mut bw = 0.0;
                let mut gain = 0.0;
                for i in 0..n_users {
                    let o = &lists[i][idx[i]];
                    bw += o.packets as f64 * self.cost[i][s0];
                    gain += self.payoff(i, s0, o);
                    if let Some(l0) = prices {
                        gain -= o.packets as f64 * l0[s0] * self.cost[i][s0];
                    }
                    pds[i] = o.pd;
                }
                if prices.is_some() || bw <= self.bandwidth * (1.0 + 1e-12) {
                    let val = (1.0 - d) * gain + d * post[self.post_index(&pds, s0)];
                    if crate::mdp::solver::beats(val, best) {
                        best = val;
                        for i in 0..n_users {
                            best_profile[j * n_users + i] = lists[i][idx[i]].choice;
                        }
                    }
                }
                // odometer, first user fastest
                for i in 0..n_users {
                    idx[i] += 1;
                    if idx[i] < lists[i].len() {
                        continue 'profiles;
                    }
                    idx[i] = 0;
                }
                break;
            }
            *slot = best;
        }
        if let Some(p) = policy {
            *p = best_profile;
        }
        out
    }
}

/// Optimal centralized values and policy.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub space: JointSpace,
    /// `V*` per joint state.
    pub values: Vec<f64>,
    /// Optimal choices, `users()` entries per joint state.
    pub policy: Vec<Choice>,
    pub iterations: usize,
    pub residual: f64,
}

impl OracleResult {
    /// Network utility under a uniform initial joint state.
    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn iterate<F: FnMut(&[f64]) -> Vec<f64>>(n: usize, delta: f64, tol: f64, mut f: F) -> Result<(Vec<f64>, usize, f64)> {
    let threshold = if delta == 0.0 { f64::INFINITY } else { tol * (1.0 - delta) / delta };
    let mut v = vec![0.0; n];
    for it in 1..=MAX_ITERATIONS {
        let next = f(&v);
        let res = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if res < threshold {
            return Ok((v, it, res));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        detail: "joint value iteration".into(),
    })
}

/// Exact value iteration on the joint MDP with the bandwidth constraint
/// enforced in every state.
pub fn centralized_oracle(scenario: &Scenario, cfg: &OracleConfig) -> Result<OracleResult> {
    let space = JointSpace::build(scenario, cfg)?;
    let n = space.state_count();
    let (values, iterations, residual) = iterate(n, space.delta, cfg.tol, |v| space.sweep(v, None, None))?;
    let mut policy = Vec::new();
    space.sweep(&values, None, Some(&mut policy));
    Ok(OracleResult {
        space,
        values,
        policy,
        iterations,
        residual,
    })
}

/// Decentralized solution measured against the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub oracle_value: f64,
    /// Network utility of the per-user policies executed jointly.
    pub decentralized_value: f64,
    /// `(oracle - decentralized) / |oracle|`.
    pub relative_gap: f64,
    /// Dual bound at the given prices.
    pub dual_value: f64,
    /// `(dual - oracle) / |oracle|`.
    pub duality_gap: f64,
    /// Largest per-state difference between the joint penalized value and
    /// the sum of per-user penalized values.
    pub decomposition_residual: f64,
}

/// Evaluates `policies` (with announced prices `lambda0`) exactly on the
/// joint chain, and checks the dual decomposition at `lambda0`.
pub fn compare_with_oracle(
    scenario: &Scenario,
    oracle: &OracleResult,
    policies: &PricedPolicies,
    lambda0: &[f64],
    tol: f64,
) -> Result<OracleComparison> {
    let js = &oracle.space;
    let n = js.state_count();
    let d = js.delta;

    // realized profile of every joint state
    let mut reward = vec![0.0; n];
    let mut posts = vec![0usize; n];
    for j in 0..n {
        let (pres, s0) = js.decode(j);
        let states: Vec<UserState> = pres
            .iter()
            .enumerate()
            .map(|(i, &p)| js.models[i].space.pre_state(p, js.components[i][s0]))
            .collect();
        let requests = states
            .iter()
            .enumerate()
            .map(|(i, st)| policies.act(scenario, i, st, s0, lambda0[s0]))
            .collect::<Result<Vec<_>>>()?;
        let sent = policies.realize(scenario, s0, &states, &requests)?;
        let mut pds = Vec::with_capacity(js.users());
        for (i, a) in sent.iter().enumerate() {
            let m = &js.models[i];
            let c = m
                .choice_of(pres[i], a)
                .ok_or_else(|| Error::InfeasibleAction(format!("user {i}: {:?} outside the oracle's choices", a.sends)))?;
            reward[j] += m.payoff_of(pres[i], js.components[i][s0], c);
            pds.push(m.pd_of(pres[i], c));
        }
        posts[j] = js.post_index(&pds, s0);
    }
    let (dec, _, _) = iterate(n, d, tol, |v| {
        let post = js.post_values(v);
        (0..n).map(|j| (1.0 - d) * reward[j] + d * post[posts[j]]).collect()
    })?;
    let decentralized_value = dec.iter().sum::<f64>() / n as f64;

    // per-user penalized values with full channel information
    let full = PricedPolicies::solve(scenario, PriceView::Full, lambda0, tol, None)?;
    let s = js.s0_count;
    // Lambda(s0) = (1-d) lambda0(s0) B + d E[Lambda(s0')]
    let (lam, _, _) = iterate(s, d, tol, |v| {
        (0..s)
            .map(|a| {
                (1.0 - d) * lambda0[a] * scenario.bandwidth
                    + d * js.transition[a].iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
            })
            .collect()
    })?;
    let split: Vec<f64> = (0..n)
        .map(|j| {
            let (pres, s0) = js.decode(j);
            pres.iter()
                .enumerate()
                .map(|(i, &p)| full.tables[i].value_at(&full.models[i], p, s0))
                .sum()
        })
        .collect();
    let dual: Vec<f64> = (0..n).map(|j| split[j] + lam[j % s]).collect();
    let dual_value = dual.iter().sum::<f64>() / n as f64;

    let (pen, _, _) = iterate(n, d, tol, |v| js.sweep(v, Some(lambda0), None))?;
    let decomposition_residual = pen.iter().zip(&split).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let oracle_value = oracle.mean_value();
    let scale = oracle_value.abs().max(1e-12);
    Ok(OracleComparison {
        oracle_value,
        decentralized_value,
        relative_gap: (oracle_value - decentralized_value) / scale,
        dual_value,
        duality_gap: (dual_value - oracle_value) / scale,
        decomposition_residual,
    })
}
