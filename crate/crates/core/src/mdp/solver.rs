//! Priced single-user MDP: value iteration in post-decision form, greedy
//! decisions, and policy evaluation.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;

use super::space::TrafficSpace;
use crate::error::{Error, Result};
use crate::model::channel::sample_row;
use crate::model::{energy, ChannelModel, JointChannel, ScheduleAction, UserConfig, UserState};

/// Relative margin an objective must exceed the incumbent by to replace it.
pub(crate) const TIE_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn beats(val: f64, best: f64) -> bool {
    best == f64::NEG_INFINITY || val > best + TIE_EPS * (1.0 + best.abs())
}

/// Exogenous Markov chain seen by one user: either its own channel or the
/// joint channel state. Each state carries the user's channel index and the
/// per-packet price it plans against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoChain {
    pub transition: Vec<Vec<f64>>,
    pub channel: Vec<usize>,
    pub price: Vec<f64>,
}

impl ExoChain {
    pub fn own(channel: &ChannelModel, price: Vec<f64>) -> Self {
        ExoChain {
            transition: channel.transition().to_vec(),
            channel: (0..channel.len()).collect(),
            price,
        }
    }

    pub fn joint(joint: &JointChannel, user: usize, price: Vec<f64>) -> Self {
        ExoChain {
            transition: joint.transition().to_vec(),
            channel: (0..joint.count()).map(|s| joint.component(s, user)).collect(),
            price,
        }
    }

    pub fn len(&self) -> usize {
        self.channel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channel.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, z: usize, rng: &mut R) -> usize {
        sample_row(&self.transition[z], rng)
    }

    fn validate(&self) -> Result<()> {
        for (z, row) in self.transition.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if row.len() != self.len() || (s - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!("exo.transition[{z}]"), format!("row sums to {s}")));
            }
        }
        if self.price.len() != self.len() {
            return Err(Error::validation("exo.price", "one price per exogenous state"));
        }
        if let Some(p) = self.price.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::validation("exo.price", format!("price {p} is negative")));
        }
        Ok(())
    }
}

/// One user's foresighted problem with the bandwidth constraint replaced by
/// a per-packet price.
#[derive(Debug, Clone)]
pub struct PricedUserModel {
    pub space: Arc<TrafficSpace>,
    pub chain: ExoChain,
    pub beta: f64,
    pub min_quality: f64,
    pub delta: f64,
    /// `energy[z][n]`.
    energy: Vec<Vec<f64>>,
}

impl PricedUserModel {
    pub fn new(user: &UserConfig, space: Arc<TrafficSpace>, chain: ExoChain, delta: f64) -> Result<Self> {
        chain.validate()?;
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::validation("discount", format!("{delta} not in [0,1)")));
        }
        let max_n = space.max_send();
        let energy = chain
            .channel
            .iter()
            .map(|&h| (0..=max_n).map(|n| energy(user.channel.gain_to_noise(h), n)).collect())
            .collect();
        Ok(PricedUserModel {
            space,
            chain,
            beta: user.tradeoff,
            min_quality: user.min_quality,
            delta,
            energy,
        })
    }

    /// Same model with different per-state prices.
    pub fn with_prices(&self, price: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.chain.price = price;
        m.chain.validate()?;
        Ok(m)
    }

    pub fn exo_count(&self) -> usize {
        self.chain.len()
    }

    pub fn state_count(&self) -> usize {
        self.space.pre_count() * self.exo_count()
    }

    #[inline]
    pub(crate) fn energy_of(&self, z: usize, n: u32) -> f64 {
        self.energy[z][n as usize]
    }

    pub(crate) fn floor(&self, pre: usize) -> f64 {
        self.min_quality.min(self.space.pre[pre].max_gain).max(0.0)
    }

    /// Unpriced payoff of `choice` in `(pre, z)`.
    pub fn payoff_of(&self, pre: usize, z: usize, choice: Choice) -> f64 {
        let info = &self.space.pre[pre];
        let opt = info.options[choice.option as usize];
        let n = opt.sent + choice.expiring;
        opt.gain + info.greedy[choice.expiring as usize] - self.beta * self.energy_of(z, n)
    }

    pub fn packets_of(&self, pre: usize, choice: Choice) -> u32 {
        self.space.pre[pre].options[choice.option as usize].sent + choice.expiring
    }

    /// Post-decision key reached by `choice`.
    pub fn pd_of(&self, pre: usize, choice: Choice) -> usize {
        self.space.pre[pre].options[choice.option as usize].pd as usize
    }

    /// Concrete send vector of `choice` in traffic state `pre`.
    pub fn action_of(&self, pre: usize, choice: Choice) -> ScheduleAction {
        let info = &self.space.pre[pre];
        let phase_info = &self.space.phases[info.phase as usize];
        let opt = info.options[choice.option as usize];
        let mut sends = vec![0u32; info.buffer.len()];
        // recover the carried sends from the post-decision key
        let mut rest = opt.pd as usize - phase_info.pd_offset;
        for (j, &pos) in phase_info.carried.iter().enumerate() {
            let r = phase_info.radix[j] as usize;
            let left = (rest % r) as u32;
            rest /= r;
            sends[pos] = info.buffer[pos] - left;
        }
        let mut t = choice.expiring;
        for &pos in &info.fill {
            let k = t.min(info.buffer[pos]);
            sends[pos] = k;
            t -= k;
        }
        ScheduleAction::new(sends)
    }

    /// Every choice in traffic state `pre` that meets the quality floor.
    pub fn choices(&self, pre: usize) -> impl Iterator<Item = Choice> + '_ {
        let info = &self.space.pre[pre];
        let floor = self.floor(pre) - 1e-9;
        info.options.iter().enumerate().flat_map(move |(o, opt)| {
            info.greedy
                .iter()
                .enumerate()
                .filter(move |(_, g)| opt.gain + **g >= floor)
                .map(move |(te, _)| Choice { option: o as u32, expiring: te as u32 })
        })
    }

    /// Choice that realizes `action`, if the action sends expiring packets
    /// in fill order (every action produced by this module does).
    pub fn choice_of(&self, pre: usize, action: &ScheduleAction) -> Option<Choice> {
        let info = &self.space.pre[pre];
        let phase = info.phase;
        let mut post = info.buffer.clone();
        for (p, y) in post.iter_mut().zip(&action.sends) {
            *p = p.checked_sub(*y)?;
        }
        let pd = self.space.pd_index(phase, &post).ok()?;
        let option = info.options.iter().position(|o| o.pd as usize == pd)? as u32;
        let te: u32 = self.space.phases[phase as usize]
            .expiring
            .iter()
            .map(|&i| action.sends[i])
            .sum();
        let c = Choice { option, expiring: te };
        (self.action_of(pre, c) == *action).then_some(c)
    }
}

/// Greedy decision: carried option index and number of expiring packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Choice {
    pub option: u32,
    pub expiring: u32,
}

#[derive(Debug, Clone)]
pub struct ValueTable {
    /// `value[pre * Z + z]`.
    pub value: Vec<f64>,
    /// Post-decision values `post[pd * Z + z]`, the expected next value.
    pub post: Vec<f64>,
    pub policy: Vec<Choice>,
    pub iterations: usize,
    pub residual: f64,
}

impl ValueTable {
    pub fn zeros(model: &PricedUserModel) -> Self {
        let z = model.exo_count();
        ValueTable {
            value: vec![0.0; model.space.pre_count() * z],
            post: vec![0.0; model.space.pd_count() * z],
            policy: vec![Choice { option: 0, expiring: 0 }; model.space.pre_count() * z],
            iterations: 0,
            residual: f64::INFINITY,
        }
    }

    pub fn value_at(&self, model: &PricedUserModel, pre: usize, z: usize) -> f64 {
        self.value[pre * model.exo_count() + z]
    }

    pub fn post_at(&self, model: &PricedUserModel, pd: usize, z: usize) -> f64 {
        self.post[pd * model.exo_count() + z]
    }

    pub fn choice(&self, model: &PricedUserModel, pre: usize, z: usize) -> Choice {
        self.policy[pre * model.exo_count() + z]
    }

    pub fn action(&self, model: &PricedUserModel, pre: usize, z: usize) -> ScheduleAction {
        model.action_of(pre, self.choice(model, pre, z))
    }

    /// Value averaged over a uniform initial state.
    pub fn mean_value(&self) -> f64 {
        self.value.iter().sum::<f64>() / self.value.len() as f64
    }
}

/// Expected next-slot value of every post-decision state.
pub fn post_values(model: &PricedUserModel, value: &[f64]) -> Vec<f64> {
    let sp = &model.space;
    let zc = model.exo_count();
    let mut post = vec![0.0; sp.pd_count() * zc];
    let mut mixed = vec![0.0; zc];
    for (p, info) in sp.phases.iter().enumerate() {
        let next = &sp.phases[sp.template().next_phase(p as u32) as usize];
        let m_count = info.combos.len();
        for k in 0..info.pd_count {
            let base = next.pre_offset + k * m_count;
            mixed.iter_mut().for_each(|x| *x = 0.0);
            for (m, (_, pm)) in info.combos.iter().enumerate() {
                let row = &value[(base + m) * zc..(base + m + 1) * zc];
                for (acc, v) in mixed.iter_mut().zip(row) {
                    *acc += pm * v;
                }
            }
            let pd = info.pd_offset + k;
            for z in 0..zc {
                post[pd * zc + z] = model.chain.transition[z]
                    .iter()
                    .zip(&mixed)
                    .map(|(pz, v)| pz * v)
                    .sum();
            }
        }
    }
    post
}

/// Best choice in `(pre, z)` against continuation values `post`, with the
/// immediate term priced at `price`. Returns the choice and its objective
/// `(1 - delta) [u - price * n] + delta * post`.
pub fn greedy_choice(model: &PricedUserModel, post: &[f64], pre: usize, z: usize, price: f64) -> (Choice, f64) {
    greedy_choice_capped(model, post, pre, z, price, u32::MAX)
}

/// As [`greedy_choice`] over choices sending at most `cap` packets. When no
/// such choice meets the quality floor the objective is `-inf`.
pub fn greedy_choice_capped(
    model: &PricedUserModel,
    post: &[f64],
    pre: usize,
    z: usize,
    price: f64,
    cap: u32,
) -> (Choice, f64) {
    let info = &model.space.pre[pre];
    let zc = model.exo_count();
    let floor = model.floor(pre) - 1e-9;
    let d = model.delta;
    let mut best = f64::NEG_INFINITY;
    let mut choice = Choice { option: 0, expiring: 0 };
    for (o, opt) in info.options.iter().enumerate() {
        let cont = if d > 0.0 { d * post[opt.pd as usize * zc + z] } else { 0.0 };
        for (te, g) in info.greedy.iter().enumerate() {
            let gain = opt.gain + g;
            if gain < floor {
                continue;
            }
            let n = opt.sent + te as u32;
            if n > cap {
                break;
            }
            let val = (1.0 - d) * (gain - model.beta * model.energy_of(z, n) - price * n as f64) + cont;
            if beats(val, best) {
                best = val;
                choice = Choice {
                    option: o as u32,
                    expiring: te as u32,
                };
            }
        }
    }
    (choice, best)
}

/// One synchronous priced Bellman backup of `value`.
pub fn bellman_backup(model: &PricedUserModel, value: &[f64]) -> ValueTable {
    let post = post_values(model, value);
    let zc = model.exo_count();
    let n = model.state_count();
    let mut out = vec![0.0; n];
    let mut policy = Vec::with_capacity(n);
    for pre in 0..model.space.pre_count() {
        for z in 0..zc {
            let (c, v) = greedy_choice(model, &post, pre, z, model.chain.price[z]);
            out[pre * zc + z] = v;
            policy.push(c);
        }
    }
    let residual = out
        .iter()
        .zip(value)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ValueTable {
        value: out,
        post,
        policy,
        iterations: 1,
        residual,
    }
}

/// Iteration cap of the value iteration loop.
pub const MAX_ITERATIONS: usize = 200_000;

/// Value iteration until the sup-norm change drops below
/// `tol (1 - delta) / delta`.
pub fn solve_priced_mdp(model: &PricedUserModel, tol: f64) -> Result<ValueTable> {
    solve_priced_mdp_from(model, tol, None)
}

/// As [`solve_priced_mdp`], starting from `warm` when given.
pub fn solve_priced_mdp_from(model: &PricedUserModel, tol: f64, warm: Option<&ValueTable>) -> Result<ValueTable> {
    if !(tol > 0.0) {
        return Err(Error::validation("tol", "must be > 0"));
    }
    let threshold = if model.delta == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - model.delta) / model.delta
    };
    let mut value = match warm {
        Some(w) if w.value.len() == model.state_count() => w.value.clone(),
        _ => vec![0.0; model.state_count()],
    };
    for it in 1..=MAX_ITERATIONS {
        let mut t = bellman_backup(model, &value);
        if t.residual < threshold {
            t.iterations = it;
            // post values consistent with the returned value function
            t.post = post_values(model, &t.value);
            return Ok(t);
        }
        value = t.value;
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        detail: "priced value iteration".into(),
    })
}

/// Runs `horizon` backups from zero: the optimal value of the problem that
/// stops after `horizon` slots.
pub fn solve_finite_horizon(model: &PricedUserModel, horizon: usize) -> ValueTable {
    let mut t = ValueTable::zeros(model);
    for _ in 0..horizon {
        t = bellman_backup(model, &t.value);
    }
    t
}

/// Decision for a concrete user state, with the immediate term priced at
/// the currently announced `price`.
pub fn decide(
    model: &PricedUserModel,
    table: &ValueTable,
    state: &UserState,
    z: usize,
    price: f64,
) -> Result<ScheduleAction> {
    let pre = model.space.pre_index(state.phase, &state.buffer)?;
    let (c, _) = greedy_choice(model, &table.post, pre, z, price);
    Ok(model.action_of(pre, c))
}

/// Successors of `(pre, z)` under `choice`: `(pre', z', probability)`.
pub fn transitions(model: &PricedUserModel, pre: usize, z: usize, choice: Choice) -> Vec<(usize, usize, f64)> {
    let pd = model.pd_of(pre, choice);
    let phase = model.space.pre_phase(pre);
    let mut out = Vec::new();
    for (m, (_, pm)) in model.space.combos(phase).iter().enumerate() {
        let nxt = model.space.successor(pd, m);
        for (z2, pz) in model.chain.transition[z].iter().enumerate() {
            if *pz > 0.0 {
                out.push((nxt, z2, pm * pz));
            }
        }
    }
    out
}

/// Iterative evaluation of a fixed policy of unpriced payoffs, to `tol` in
/// sup norm.
pub fn policy_values(model: &PricedUserModel, policy: &[Choice], tol: f64) -> Vec<f64> {
    let zc = model.exo_count();
    let n = model.state_count();
    let u: Vec<f64> = (0..n).map(|i| model.payoff_of(i / zc, i % zc, policy[i])).collect();
    let d = model.delta;
    let mut v = vec![0.0; n];
    loop {
        let post = post_values(model, &v);
        let mut diff: f64 = 0.0;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let pd = model.pd_of(i / zc, policy[i]);
                let x = (1.0 - d) * u[i] + d * post[pd * zc + i % zc];
                diff = diff.max((x - v[i]).abs());
                x
            })
            .collect();
        v = next;
        if d == 0.0 || diff < tol * (1.0 - d) / d.max(1e-300) {
            return v;
        }
    }
}

/// Monte Carlo estimate of `(1 - delta) E[sum delta^t u_t]` under a uniform
/// initial state.
pub fn evaluate_policy<R: Rng + ?Sized>(
    model: &PricedUserModel,
    policy: &[Choice],
    episodes: usize,
    horizon: usize,
    rng: &mut R,
) -> f64 {
    let zc = model.exo_count();
    let n = model.state_count();
    let mut total = 0.0;
    for _ in 0..episodes {
        let start = rng.gen_range(0..n);
        let (mut pre, mut z) = (start / zc, start % zc);
        let mut disc = 1.0;
        let mut acc = 0.0;
        for _ in 0..horizon {
            let c = policy[pre * zc + z];
            acc += disc * model.payoff_of(pre, z, c);
            disc *= model.delta;
            let pd = model.pd_of(pre, c);
            let phase = model.space.pre_phase(pre);
            let combos = model.space.combos(phase);
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            let mut m = combos.len() - 1;
            for (i, (_, p)) in combos.iter().enumerate() {
                cum += p;
                if u < cum {
                    m = i;
                    break;
                }
            }
            pre = model.space.successor(pd, m);
            z = model.chain.sample(z, rng);
        }
        total += (1.0 - model.delta) * acc;
    }
    total / episodes as f64
}

/// Writes `state_id,value,action` rows; the state id is
/// `phase;buffer;exogenous index`.
pub fn write_value_csv<W: Write>(model: &PricedUserModel, table: &ValueTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state_id", "value", "action"])?;
    let zc = model.exo_count();
    for pre in 0..model.space.pre_count() {
        for z in 0..zc {
            let buf: Vec<String> = model.space.pre_buffer(pre).iter().map(|x| x.to_string()).collect();
            let act: Vec<String> = table.action(model, pre, z).sends.iter().map(|x| x.to_string()).collect();
            w.write_record([
                format!("{};{};{}", model.space.pre_phase(pre), buf.join(" "), z),
                format!("{:.9}", table.value_at(model, pre, z)),
                act.join(" "),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
