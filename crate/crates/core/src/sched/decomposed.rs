//! Round-by-round scheduling over the context DAG using single-DU value
//! tables.

use super::order::Dag;
use crate::mdp::solver::beats;
use crate::mdp::ExoChain;
use crate::model::{effective_min_quality, energy, priority_order, GopTemplate, ScheduleAction, UserConfig, UserState};

/// Continuation value of one DU after a round: `remaining` slots left after
/// the current one, `left` packets still buffered, exogenous state `z`.
pub trait DuContinuation {
    fn continuation(&self, du: usize, remaining: u32, left: u32, z: usize) -> f64;
}

/// No continuation at all (pure one-slot objective).
#[derive(Debug, Clone, Copy, Default)]
pub struct NoContinuation;

impl DuContinuation for NoContinuation {
    fn continuation(&self, _: usize, _: u32, _: u32, _: usize) -> f64 {
        0.0
    }
}

/// Single-DU priced values `V_n(r, x, z)`, solved by backward induction over
/// the slots left before the DU's deadline.
#[derive(Debug, Clone)]
pub struct DuTables {
    /// `values[du][r][x][z]`.
    values: Vec<Vec<Vec<Vec<f64>>>>,
    transition: Vec<Vec<f64>>,
}

impl DuTables {
    pub fn build(user: &UserConfig, chain: &ExoChain, delta: f64) -> Self {
        let t = &user.template;
        let zc = chain.len();
        let w = t.window();
        let mut values = Vec::with_capacity(t.dus().len());
        for du in t.dus() {
            let cap = du.size_pmf.max();
            let q = du.distortion_impact;
            let mut per_r: Vec<Vec<Vec<f64>>> = Vec::with_capacity(w as usize);
            for r in 0..w {
                let mut table = vec![vec![0.0; zc]; cap as usize + 1];
                for x in 0..=cap {
                    for z in 0..zc {
                        let g = user.channel.gain_to_noise(chain.channel[z]);
                        let mut best = f64::NEG_INFINITY;
                        for y in 0..=x {
                            let imm = (q - chain.price[z]) * y as f64 - user.tradeoff * energy(g, y);
                            let cont = if r == 0 {
                                0.0
                            } else {
                                let prev = &per_r[r as usize - 1];
                                chain.transition[z]
                                    .iter()
                                    .enumerate()
                                    .map(|(z2, p)| p * prev[(x - y) as usize][z2])
                                    .sum()
                            };
                            best = best.max((1.0 - delta) * imm + delta * cont);
                        }
                        table[x as usize][z] = best;
                    }
                }
                per_r.push(table);
            }
            values.push(per_r);
        }
        DuTables {
            values,
            transition: chain.transition.clone(),
        }
    }

    /// `V_n(r, x, z)`.
    pub fn value(&self, du: usize, remaining: u32, x: u32, z: usize) -> f64 {
        self.values[du][remaining as usize][x as usize][z]
    }
}

impl DuContinuation for DuTables {
    fn continuation(&self, du: usize, remaining: u32, left: u32, z: usize) -> f64 {
        if remaining == 0 {
            return 0.0;
        }
        let prev = &self.values[du][remaining as usize - 1];
        self.transition[z]
            .iter()
            .enumerate()
            .map(|(z2, p)| p * prev[left as usize][z2])
            .sum()
    }
}

/// Price used in each scheduling round.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RoundPrice {
    /// Every round uses the current slot's price.
    #[default]
    Current,
    /// Round `k` uses entry `k` (the last entry repeats).
    PerRound(Vec<f64>),
}

impl RoundPrice {
    fn at(&self, k: usize, current: f64) -> f64 {
        match self {
            RoundPrice::Current => current,
            RoundPrice::PerRound(v) => v.get(k).or(v.last()).copied().unwrap_or(current),
        }
    }
}

/// Inputs of one decomposed scheduling call besides the state.
#[derive(Debug, Clone)]
pub struct RoundParams {
    pub price: f64,
    pub rounds: RoundPrice,
    pub beta: f64,
    pub gain_to_noise: f64,
    pub delta: f64,
    pub min_quality: f64,
}

/// Action together with the order in which DUs were processed.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedOutcome {
    pub action: ScheduleAction,
    /// Context positions in processing order.
    pub order: Vec<usize>,
}

/// Schedules one slot DU by DU: each round picks a current root of the
/// remaining DAG and its send count, then removes it.
pub fn decomposed_schedule<C: DuContinuation + ?Sized>(
    template: &GopTemplate,
    state: &UserState,
    z: usize,
    params: &RoundParams,
    tables: &C,
) -> DecomposedOutcome {
    let ctx = state.context(template);
    let n = ctx.len();
    let mut dag = Dag::from_context(ctx);
    let mut sends = vec![0u32; n];
    let mut order = Vec::with_capacity(n);
    let mut sent = 0u32;
    let rho = |k: u32| energy(params.gain_to_noise, k);
    let d = params.delta;

    while !dag.is_empty() {
        let k = order.len();
        let price = params.rounds.at(k, params.price);
        let roots = dag.roots();
        let pick = if let Some(&empty) = roots.iter().find(|&&p| state.buffer[p] == 0) {
            empty
        } else {
            let mut best = f64::NEG_INFINITY;
            let mut pick = roots[0];
            for &p in &roots {
                let e = ctx.entries[p];
                let q = template.impact(state.phase, p);
                let x = state.buffer[p];
                let marginal = (1.0 - d) * (q - price - params.beta * (rho(sent + 1) - rho(sent)))
                    + d * (tables.continuation(e.du, e.remaining, x - 1, z)
                        - tables.continuation(e.du, e.remaining, x, z));
                let better = beats(marginal, best)
                    || (!beats(best, marginal) && e.du < ctx.entries[pick].du);
                if better {
                    best = marginal;
                    pick = p;
                }
            }
            pick
        };
        let e = ctx.entries[pick];
        let q = template.impact(state.phase, pick);
        let x = state.buffer[pick];
        let mut best = f64::NEG_INFINITY;
        let mut best_y = 0;
        for y in 0..=x {
            let val = (1.0 - d) * ((q - price) * y as f64 - params.beta * (rho(sent + y) - rho(sent)))
                + d * tables.continuation(e.du, e.remaining, x - y, z);
            if beats(val, best) {
                best = val;
                best_y = y;
            }
        }
        sends[pick] = best_y;
        sent += best_y;
        order.push(pick);
        dag.remove(pick);
    }

    let mut action = ScheduleAction::new(sends);
    let floor = effective_min_quality(template, state, params.min_quality);
    let mut have: f64 = crate::model::state::weighted_sends(template, state.phase, &action.sends);
    if have < floor - 1e-9 {
        for pos in priority_order(template, state.phase) {
            let q = template.impact(state.phase, pos);
            while action.sends[pos] < state.buffer[pos] && have < floor - 1e-9 {
                action.sends[pos] += 1;
                have += q;
            }
        }
    }
    DecomposedOutcome { action, order }
}
