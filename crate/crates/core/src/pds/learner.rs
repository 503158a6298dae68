use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{to_pds, PostDecision, PostDecisionValue};
use crate::error::{Error, Result};
use crate::mdp::{greedy_choice, Choice, ExoChain, PricedUserModel, TrafficSpace, DEFAULT_STATE_BUDGET};
use crate::model::{GopTemplate, ScheduleAction, UserConfig, UserState};

/// Tabular post-decision values `U(x~, h)` with per-state visit counts.
#[derive(Debug, Clone)]
pub struct PdsValueTable {
    pub space: Arc<TrafficSpace>,
    /// `u[pd * Z + h]`.
    pub u: Vec<f64>,
    pub counts: Vec<u64>,
    zc: usize,
}

impl PdsValueTable {
    pub fn zeros(space: Arc<TrafficSpace>, exo: usize) -> Self {
        let n = space.pd_count() * exo;
        PdsValueTable {
            space,
            u: vec![0.0; n],
            counts: vec![0; n],
            zc: exo,
        }
    }

    pub fn exo_count(&self) -> usize {
        self.zc
    }

    pub fn index(&self, post: &PostDecision) -> Result<usize> {
        Ok(self.space.pd_index(post.phase, &post.buffer)? * self.zc + post.channel)
    }

    pub fn get(&self, post: &PostDecision) -> Result<f64> {
        Ok(self.u[self.index(post)?])
    }

    /// Blends `v` into entry `idx` with weight `1/k`, `k` the entry's visit
    /// count after this update.
    pub fn blend(&mut self, idx: usize, v: f64) {
        self.counts[idx] += 1;
        let k = self.counts[idx] as f64;
        self.u[idx] += (v - self.u[idx]) / k;
    }

    /// Sup-norm distance to `reference` over visited entries, and the range
    /// of `reference` over the same entries.
    pub fn sup_gap(&self, reference: &[f64]) -> (f64, f64) {
        let (mut gap, mut lo, mut hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        for (i, (&u, &r)) in self.u.iter().zip(reference).enumerate() {
            if self.counts[i] == 0 {
                continue;
            }
            gap = gap.max((u - r).abs());
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (gap, if hi >= lo { hi - lo } else { 0.0 })
    }
}

impl PostDecisionValue for PdsValueTable {
    fn post_value(&self, _: &GopTemplate, post: &PostDecision) -> f64 {
        self.get(post).unwrap_or(0.0)
    }
}

/// One learning step from realized samples only: the greedy value of the
/// realized next state `next` (priced at `price_next`) is blended into
/// `U(to_pds(state, action))`. Returns that greedy value.
pub fn pds_update(
    table: &mut PdsValueTable,
    model: &PricedUserModel,
    state: &UserState,
    action: &ScheduleAction,
    next: &UserState,
    price_next: f64,
) -> Result<f64> {
    let idx = table.index(&to_pds(state, action)?)?;
    let pre = table.space.pre_index(next.phase, &next.buffer)?;
    let (_, v) = greedy_choice(model, &table.u, pre, next.channel, price_next);
    table.blend(idx, v);
    Ok(v)
}

/// Online learner of one user.
#[derive(Debug, Clone)]
pub struct PdsLearner {
    /// Payoff and indexing data; its transition kernel is never read.
    pub model: PricedUserModel,
    pub table: PdsValueTable,
    /// Exploration decays as `1 / (1 + visits / tau)`.
    pub tau: f64,
    visits: Vec<u64>,
    pending: Option<usize>,
    rng: ChaCha8Rng,
}

impl PdsLearner {
    pub fn new(user: &UserConfig, delta: f64, seed: u64) -> Result<Self> {
        let exo = user.channel.len();
        let space = Arc::new(TrafficSpace::with_budget(&user.template, exo, DEFAULT_STATE_BUDGET)?);
        // the chain only sizes the exogenous axis here
        let chain = ExoChain::own(&user.channel, vec![0.0; exo]);
        let model = PricedUserModel::new(user, space.clone(), chain, delta)?;
        Ok(PdsLearner {
            table: PdsValueTable::zeros(space, exo),
            visits: vec![0; model.state_count()],
            model,
            tau: 100.0,
            pending: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Greedy action under the current table, no learning.
    pub fn greedy(&self, state: &UserState, price: f64) -> Result<ScheduleAction> {
        let pre = self.table.space.pre_index(state.phase, &state.buffer)?;
        let (c, _) = greedy_choice(&self.model, &self.table.u, pre, state.channel, price);
        Ok(self.model.action_of(pre, c))
    }

    /// Observes `state`, updates the previous post-decision value and picks
    /// an epsilon-greedy action.
    pub fn step(&mut self, state: &UserState, price: f64) -> Result<ScheduleAction> {
        let zc = self.table.exo_count();
        if state.channel >= zc {
            return Err(Error::validation("state.channel", "outside the channel model"));
        }
        let pre = self.table.space.pre_index(state.phase, &state.buffer)?;
        let (mut c, v) = greedy_choice(&self.model, &self.table.u, pre, state.channel, price);
        if let Some(prev) = self.pending.take() {
            self.table.blend(prev, v);
        }
        let s = pre * zc + state.channel;
        self.visits[s] += 1;
        let eps = 1.0 / (1.0 + self.visits[s] as f64 / self.tau);
        if self.rng.gen::<f64>() < eps {
            let all: Vec<Choice> = self.model.choices(pre).collect();
            c = all[self.rng.gen_range(0..all.len())];
        }
        self.pending = Some(self.model.pd_of(pre, c) * zc + state.channel);
        Ok(self.model.action_of(pre, c))
    }

    /// Replaces the last chosen action (e.g. after scaling) so the next
    /// update lands on the post-decision state actually reached.
    pub fn override_last(&mut self, state: &UserState, action: &ScheduleAction) -> Result<()> {
        if self.pending.is_some() {
            self.pending = Some(self.table.index(&to_pds(state, action)?)?);
        }
        Ok(())
    }

    /// Forgets the pending post-decision state (e.g. at an episode reset).
    pub fn reset(&mut self) {
        self.pending = None;
    }

    /// Greedy choice of every `(traffic state, channel)` against fixed
    /// per-channel prices.
    pub fn policy(&self, price: &[f64]) -> Vec<Choice> {
        let zc = self.table.exo_count();
        (0..self.model.state_count())
            .map(|i| greedy_choice(&self.model, &self.table.u, i / zc, i % zc, price[i % zc]).0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningCurveRow {
    pub slot: usize,
    pub user: usize,
    /// Mean payoff over the recent window.
    pub payoff: f64,
    pub gap: Option<f64>,
}

/// Learning-curve CSV: `slot,user,payoff,gap`.
pub fn write_learning_curve<W: Write>(rows: &[LearningCurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "user", "payoff", "gap"])?;
    for r in rows {
        w.write_record([
            r.slot.to_string(),
            r.user.to_string(),
            format!("{:.9}", r.payoff),
            r.gap.map(|g| format!("{g:.9}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
