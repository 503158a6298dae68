//! The coordination loop: users re-plan against announced prices, submit
//! bandwidth requests, and the coordinator moves the price of the visited
//! joint channel state.

use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policies::{usages, PricedPolicies};
use super::price::{update_prices, PriceTable};
use crate::error::{Error, Result};
use crate::model::{advance_traffic, payoff, PriceView, Scenario, UserState};

#[derive(Debug, Clone)]
pub struct CoordinationConfig {
    pub view: PriceView,
    /// Stop when every price change in the last sweep window is at most this.
    pub tolerance: f64,
    pub max_slots: usize,
    pub seed: u64,
    /// Value iteration tolerance used while prices move.
    pub solve_tol: f64,
    /// Tolerance of the final solve at converged prices.
    pub final_tol: f64,
    /// Slots simulated at frozen prices to estimate `E[usage | s0]`.
    pub eval_slots: usize,
    /// Fewest slots between two re-solves, as a fraction of elapsed slots.
    pub resolve_spacing: f64,
}

impl CoordinationConfig {
    pub fn for_scenario(s: &Scenario) -> Self {
        CoordinationConfig {
            view: s.price_view,
            tolerance: s.price_tolerance,
            max_slots: 200_000,
            seed: s.seed,
            solve_tol: 1e-4,
            final_tol: 1e-9,
            eval_slots: 20_000,
            resolve_spacing: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub s0: usize,
    pub lambda: f64,
    pub usage: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct CoordinationReport {
    pub prices: PriceTable,
    pub converged: bool,
    pub iterations: usize,
    pub resolves: usize,
    pub policies: PricedPolicies,
    /// `E[usage | s0]` at the final prices, `None` for unvisited states.
    pub expected_usage: Vec<Option<f64>>,
    /// `|lambda0(s0) (E[usage | s0] - B)|`.
    pub residuals: Vec<Option<f64>>,
    /// Network payoff of every coordination slot.
    pub utility: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl CoordinationReport {
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            return Ok(());
        }
        let last: Vec<String> = self
            .trace
            .iter()
            .rev()
            .take(5)
            .map(|r| format!("it {} s0 {} lambda {:.5} usage {:.4}", r.iteration, r.s0, r.lambda, r.usage))
            .collect();
        Err(Error::NonConvergence {
            iterations: self.iterations,
            detail: format!("prices still moving; last updates: {}", last.join("; ")),
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().flatten().fold(0.0, |a, b| a.max(*b))
    }

    /// Price-trace CSV: `iteration,s0,lambda0,usage,residual`.
    pub fn write_price_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "s0", "lambda0", "usage", "residual"])?;
        for r in &self.trace {
            w.write_record([
                r.iteration.to_string(),
                r.s0.to_string(),
                format!("{:.9}", r.lambda),
                format!("{:.9}", r.usage),
                format!("{:.9}", r.residual),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Users and channels of a running simulation, without any policy.
#[derive(Debug, Clone)]
pub(crate) struct Plant {
    pub states: Vec<UserState>,
}

impl Plant {
    pub fn start(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Self {
        let joint = scenario.joint_channel();
        let pi = joint.stationary();
        let s0 = crate::model::channel::sample_row(&pi, rng);
        let hs = joint.decode(s0);
        let states = scenario
            .users
            .iter()
            .zip(hs)
            .map(|(u, h)| UserState::sampled(&u.template, 0, h, rng))
            .collect();
        Plant { states }
    }

    pub fn s0(&self, scenario: &Scenario) -> usize {
        let hs: Vec<usize> = self.states.iter().map(|s| s.channel).collect();
        scenario.joint_channel().encode(&hs)
    }
}

/// Runs the price coordination loop until the windowed stop rule fires or
/// `max_slots` is reached.
pub fn run_coordination(scenario: &Scenario, cfg: &CoordinationConfig) -> Result<CoordinationReport> {
    let joint = scenario.joint_channel();
    let n_s0 = joint.count();
    let mut prices = PriceTable::new(n_s0);
    let mut policies = PricedPolicies::solve(scenario, cfg.view, prices.prices(), cfg.solve_tol, None)?;
    let mut solved_at = prices.prices().to_vec();
    let mut last_solve = 0usize;
    let mut resolves = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut plant = Plant::start(scenario, &mut rng);
    let mut window: VecDeque<f64> = VecDeque::new();
    let mut trace = Vec::new();
    let mut utility = Vec::new();
    let mut converged = false;
    let mut slot = 0;

    while slot < cfg.max_slots {
        slot += 1;
        let s0 = plant.s0(scenario);
        let lam = prices.get(s0);
        let mut requests = Vec::with_capacity(scenario.users.len());
        for (i, st) in plant.states.iter().enumerate() {
            requests.push(policies.act(scenario, i, st, s0, lam)?);
        }
        let req_bw = usages(scenario, &joint, s0, &requests);
        let delta = update_prices(&mut prices, s0, &req_bw, scenario.bandwidth);
        let usage: f64 = req_bw.iter().sum();
        trace.push(TraceRow {
            iteration: slot,
            s0,
            lambda: prices.get(s0),
            usage,
            residual: (prices.get(s0) * (usage - scenario.bandwidth)).abs(),
        });

        let sent = policies.realize(scenario, s0, &plant.states, &requests)?;
        let mut total = 0.0;
        for (i, u) in scenario.users.iter().enumerate() {
            total += payoff(&u.template, &u.channel, &plant.states[i], &sent[i], u.tradeoff)?;
            let (mut next, _) = advance_traffic(&u.template, &plant.states[i], &sent[i], &mut rng)?;
            next.channel = u.channel.sample(plant.states[i].channel, &mut rng);
            plant.states[i] = next;
        }
        utility.push(total);

        window.push_back(delta.abs());
        let span = 10 * prices.visited().max(1);
        while window.len() > span {
            window.pop_front();
        }
        let drift = prices
            .prices()
            .iter()
            .zip(&solved_at)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let stable = window.len() >= span && window.iter().all(|&d| d <= cfg.tolerance);
        if stable && drift <= cfg.tolerance / 10.0 {
            converged = true;
            break;
        }
        let spacing = (cfg.resolve_spacing * slot as f64) as usize;
        if drift > cfg.tolerance / 10.0 && slot - last_solve > spacing {
            policies = PricedPolicies::solve(scenario, cfg.view, prices.prices(), cfg.solve_tol, Some(&policies))?;
            solved_at = prices.prices().to_vec();
            last_solve = slot;
            resolves += 1;
        }
    }

    let policies = PricedPolicies::solve(scenario, cfg.view, prices.prices(), cfg.final_tol, Some(&policies))?;
    let expected_usage = expected_usage(scenario, &policies, &prices, cfg.eval_slots, cfg.seed ^ 0x5eed)?;
    let residuals = expected_usage
        .iter()
        .enumerate()
        .map(|(s0, u)| u.map(|u| (prices.get(s0) * (u - scenario.bandwidth)).abs()))
        .collect();
    Ok(CoordinationReport {
        prices,
        converged,
        iterations: slot,
        resolves,
        policies,
        expected_usage,
        residuals,
        utility,
        trace,
    })
}

/// Simulates `slots` slots at frozen prices and averages the requested
/// bandwidth per joint channel state.
pub fn expected_usage(
    scenario: &Scenario,
    policies: &PricedPolicies,
    prices: &PriceTable,
    slots: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let joint = scenario.joint_channel();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = Plant::start(scenario, &mut rng);
    let mut sum = vec![0.0; joint.count()];
    let mut cnt = vec![0usize; joint.count()];
    for _ in 0..slots {
        let s0 = plant.s0(scenario);
        let lam = prices.get(s0);
        let mut requests = Vec::with_capacity(scenario.users.len());
        for (i, st) in plant.states.iter().enumerate() {
            requests.push(policies.act(scenario, i, st, s0, lam)?);
        }
        sum[s0] += usages(scenario, &joint, s0, &requests).iter().sum::<f64>();
        cnt[s0] += 1;
        let sent = policies.realize(scenario, s0, &plant.states, &requests)?;
        for (i, u) in scenario.users.iter().enumerate() {
            let (mut next, _) = advance_traffic(&u.template, &plant.states[i], &sent[i], &mut rng)?;
            next.channel = u.channel.sample(plant.states[i].channel, &mut rng);
            plant.states[i] = next;
        }
    }
    Ok(sum
        .iter()
        .zip(&cnt)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect())
}
