use crate::coord::{expected_usage, fit_to_budget, usages, PriceTable, PricedPolicies};
use super::myopic::static_shares;
use crate::error::{Error, Result};
use crate::model::{fill_to, JointChannel, ScheduleAction, Scenario, UserState};

#[derive(Debug, Clone)]
pub struct UniformConfig {
    /// Bisection stops when the bracket is narrower than this.
    pub tolerance: f64,
    /// Slots simulated per candidate price.
    pub eval_slots: usize,
    pub solve_tol: f64,
    pub seed: u64,
    /// Largest price tried before giving up.
    pub max_price: f64,
}

impl UniformConfig {
    pub fn for_scenario(s: &Scenario) -> Self {
        UniformConfig {
            tolerance: 1e-4,
            eval_slots: 20_000,
            solve_tol: 1e-6,
            seed: s.seed ^ 0xbee,
            max_price: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UniformPriceSolution {
    pub lambda: f64,
    pub policies: PricedPolicies,
    /// `E[usage | s0]` at `lambda`, before any scaling.
    pub usage: Vec<Option<f64>>,
    /// Every price tried with its worst-state expected usage.
    pub curve: Vec<(f64, f64)>,
}

fn worst(usage: &[Option<f64>]) -> f64 {
    usage.iter().flatten().fold(0.0, |a, b| a.max(*b))
}

/// Smallest single price, shared by every joint channel state, whose
/// policies keep the expected usage within the bandwidth in every state.
pub fn uniform_price_solve(scenario: &Scenario, cfg: &UniformConfig) -> Result<UniformPriceSolution> {
    let n_s0 = scenario.joint_channel().count();
    let mut curve = Vec::new();
    let mut warm: Option<PricedPolicies> = None;
    let mut eval = |lam: f64, warm: &mut Option<PricedPolicies>| -> Result<(PricedPolicies, Vec<Option<f64>>)> {
        let prices = vec![lam; n_s0];
        let p = PricedPolicies::solve(scenario, scenario.price_view, &prices, cfg.solve_tol, warm.as_ref())?;
        let u = expected_usage(scenario, &p, &PriceTable::fixed(prices), cfg.eval_slots, cfg.seed)?;
        curve.push((lam, worst(&u)));
        *warm = Some(p.clone());
        Ok((p, u))
    };
    let limit = scenario.bandwidth * (1.0 + 1e-9);
    let (p0, u0) = eval(0.0, &mut warm)?;
    if worst(&u0) <= limit {
        return Ok(UniformPriceSolution { lambda: 0.0, policies: p0, usage: u0, curve });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = loop {
        let (p, u) = eval(hi, &mut warm)?;
        if worst(&u) <= limit {
            break (p, u);
        }
        lo = hi;
        hi *= 2.0;
        if hi > cfg.max_price {
            let text: Vec<String> = curve.iter().map(|(l, u)| format!("{l}:{u:.4}")).collect();
            return Err(Error::NonConvergence {
                iterations: curve.len(),
                detail: format!("no feasible uniform price up to {}; usage by price {}", cfg.max_price, text.join(" ")),
            });
        }
    };
    while hi - lo > cfg.tolerance {
        let mid = 0.5 * (lo + hi);
        let (p, u) = eval(mid, &mut warm)?;
        if worst(&u) <= limit {
            hi = mid;
            best = (p, u);
        } else {
            lo = mid;
        }
    }
    Ok(UniformPriceSolution {
        lambda: hi,
        policies: best.0,
        usage: best.1,
        curve,
    })
}

/// Inflates the requests to use the whole bandwidth, each user capped by
/// its buffer, then fills the extra packets by priority. Overcommitted
/// requests are scaled down instead.
pub fn scale_up(
    scenario: &Scenario,
    joint: &JointChannel,
    s0: usize,
    states: &[UserState],
    actions: &[ScheduleAction],
) -> Vec<ScheduleAction> {
    let used: f64 = usages(scenario, joint, s0, actions).iter().sum();
    if used >= scenario.bandwidth {
        return fit_to_budget(scenario, joint, s0, states, actions);
    }
    let b = scenario.bandwidth;
    let cost: Vec<f64> = (0..actions.len())
        .map(|i| scenario.packet_cost(i, joint.component(s0, i)))
        .collect();
    // nobody asked: inflate the static shares instead
    let n: Vec<f64> = if used <= 0.0 {
        static_shares(scenario).iter().zip(&cost).map(|(s, c)| s / c).collect()
    } else {
        actions.iter().map(|a| a.total() as f64).collect()
    };
    let cap: Vec<f64> = states.iter().map(|s| s.total_packets() as f64).collect();
    let load = |f: f64| -> f64 { (0..n.len()).map(|i| (n[i] * f).min(cap[i]) * cost[i]).sum() };
    let f_max = (0..n.len())
        .filter(|&i| n[i] > 0.0)
        .map(|i| cap[i] / n[i])
        .fold(1.0, f64::max);
    let f = if load(f_max) <= b {
        f_max
    } else {
        let (mut lo, mut hi) = (1.0, f_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if load(mid) <= b {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let exact: Vec<f64> = (0..n.len()).map(|i| (n[i] * f).min(cap[i])).collect();
    let mut caps: Vec<u32> = exact.iter().map(|x| (x + 1e-9).floor() as u32).collect();
    let mut spare = b - caps.iter().zip(&cost).map(|(&c, k)| c as f64 * k).sum::<f64>();
    let mut order: Vec<usize> = (0..n.len()).filter(|&i| n[i] > 0.0).collect();
    order.sort_by(|&a, &c| (exact[c] - caps[c] as f64).total_cmp(&(exact[a] - caps[a] as f64)).then(a.cmp(&c)));
    for i in order {
        if (caps[i] as f64) < cap[i] && cost[i] <= spare + 1e-12 {
            caps[i] += 1;
            spare -= cost[i];
        }
    }
    actions
        .iter()
        .enumerate()
        .map(|(i, a)| fill_to(&scenario.users[i].template, &states[i], a, caps[i].max(a.total())))
        .collect()
}
