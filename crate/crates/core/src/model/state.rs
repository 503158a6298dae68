//! Per-user states, scheduling actions and the instantaneous payoff,
//! energy and bandwidth functions.

use std::cmp::Ordering;

use rand::Rng;

use super::channel::ChannelModel;
use super::template::{Context, GopTemplate};
use crate::error::{Error, Result};

/// State of one user at the start of a slot: context phase, remaining
/// packets of each context entry, and channel index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UserState {
    pub phase: u32,
    /// Aligned with `template.context(phase).entries`.
    pub buffer: Vec<u32>,
    pub channel: usize,
}

impl UserState {
    pub fn context<'a>(&self, template: &'a GopTemplate) -> &'a Context {
        template.context(self.phase as u64)
    }

    pub fn total_packets(&self) -> u32 {
        self.buffer.iter().sum()
    }

    /// State at phase `phase` with every active DU at its largest size.
    pub fn full(template: &GopTemplate, phase: u32, channel: usize) -> Self {
        let n = template.context(phase as u64).len();
        UserState {
            phase,
            buffer: (0..n).map(|pos| template.cap(phase, pos)).collect(),
            channel,
        }
    }

    /// State at `phase` with sizes drawn from the DU size PMFs.
    pub fn sampled<R: Rng + ?Sized>(template: &GopTemplate, phase: u32, channel: usize, rng: &mut R) -> Self {
        let ctx = template.context(phase as u64);
        UserState {
            phase,
            buffer: ctx
                .entries
                .iter()
                .map(|e| template.du(e.du).size_pmf.sample(rng))
                .collect(),
            channel,
        }
    }
}

/// Packets sent from each context entry in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ScheduleAction {
    pub sends: Vec<u32>,
}

impl ScheduleAction {
    pub fn zero(len: usize) -> Self {
        ScheduleAction { sends: vec![0; len] }
    }

    pub fn new(sends: Vec<u32>) -> Self {
        ScheduleAction { sends }
    }

    /// `||a||_1`, the number of packets transmitted.
    pub fn total(&self) -> u32 {
        self.sends.iter().sum()
    }

    pub fn is_feasible_for(&self, state: &UserState) -> bool {
        self.sends.len() == state.buffer.len() && self.sends.iter().zip(&state.buffer).all(|(y, x)| y <= x)
    }

    pub fn check(&self, state: &UserState) -> Result<()> {
        if self.is_feasible_for(state) {
            Ok(())
        } else {
            Err(Error::InfeasibleAction(format!(
                "sends {:?} against buffer {:?}",
                self.sends, state.buffer
            )))
        }
    }
}

/// Tie-break order for actions: coordinates are compared starting from the
/// last context entry (latest deadline), so among equally good actions the
/// one holding back later-deadline packets wins.
pub fn colex_cmp(a: &[u32], b: &[u32]) -> Ordering {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Enumerates all vectors `0 <= y <= bound` in ascending colex order.
#[derive(Debug, Clone)]
pub struct BoxIter {
    bound: Vec<u32>,
    cur: Option<Vec<u32>>,
}

impl BoxIter {
    pub fn new(bound: &[u32]) -> Self {
        BoxIter {
            bound: bound.to_vec(),
            cur: Some(vec![0; bound.len()]),
        }
    }
}

impl Iterator for BoxIter {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.cur.clone()?;
        let mut next = out.clone();
        let mut i = 0;
        loop {
            if i == next.len() {
                self.cur = None;
                break;
            }
            if next[i] < self.bound[i] {
                next[i] += 1;
                self.cur = Some(next);
                break;
            }
            next[i] = 0;
            i += 1;
        }
        Some(out)
    }
}

/// Quality floor actually enforced in `state`: the configured floor,
/// clamped to the best reduction the buffer allows.
pub fn effective_min_quality(template: &GopTemplate, state: &UserState, min_quality: f64) -> f64 {
    let best: f64 = state
        .buffer
        .iter()
        .enumerate()
        .map(|(pos, &x)| template.impact(state.phase, pos) * x as f64)
        .sum();
    min_quality.min(best).max(0.0)
}

/// Weighted sum without feasibility checks.
pub(crate) fn weighted_sends(template: &GopTemplate, phase: u32, sends: &[u32]) -> f64 {
    sends
        .iter()
        .enumerate()
        .map(|(pos, &y)| template.impact(phase, pos) * y as f64)
        .sum()
}

/// Feasible actions in `state` that meet the (clamped) quality floor,
/// in ascending colex order.
pub fn action_set(template: &GopTemplate, state: &UserState, min_quality: f64) -> Vec<ScheduleAction> {
    let floor = effective_min_quality(template, state, min_quality);
    BoxIter::new(&state.buffer)
        .filter(|y| weighted_sends(template, state.phase, y) >= floor - 1e-9)
        .map(ScheduleAction::new)
        .collect()
}

/// `sum_DU q_DU * y_DU` over the current context.
pub fn distortion_reduction(template: &GopTemplate, state: &UserState, action: &ScheduleAction) -> Result<f64> {
    action.check(state)?;
    Ok(weighted_sends(template, state.phase, &action.sends))
}

/// Transmission energy `sigma^2 (2^n - 1) / |h|^2`.
pub fn energy(gain_to_noise: f64, packets: u32) -> f64 {
    ((packets as f64).exp2() - 1.0) / gain_to_noise
}

/// Instantaneous payoff: distortion reduction minus `beta` times energy.
pub fn payoff(
    template: &GopTemplate,
    channel: &ChannelModel,
    state: &UserState,
    action: &ScheduleAction,
    beta: f64,
) -> Result<f64> {
    let d = distortion_reduction(template, state, action)?;
    Ok(d - beta * energy(channel.gain_to_noise(state.channel), action.total()))
}

/// Bandwidth `n * b / r` needed to send `packets` at `rate` bits per slot.
pub fn bandwidth_of(packets: u32, bits_per_packet: f64, rate: f64) -> f64 {
    packets as f64 * bits_per_packet / rate
}

/// Total bandwidth `sum_i ||a_i|| b / r_i(h_i)` of one slot.
pub fn bandwidth_usage(totals: &[u32], rates: &[f64], bits_per_packet: f64) -> f64 {
    totals
        .iter()
        .zip(rates)
        .map(|(&n, &r)| bandwidth_of(n, bits_per_packet, r))
        .sum()
}

/// Largest packet count that fits into `share` of the bandwidth.
pub fn packet_capacity(share: f64, bits_per_packet: f64, rate: f64) -> u32 {
    let c = share * rate / bits_per_packet;
    // Guard against 0.9999999 style rounding of exact shares.
    (c + 1e-9).floor().max(0.0) as u32
}

/// Packet-level bookkeeping of one slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficStep {
    pub next: Vec<u32>,
    /// `(du id, packets)` dropped because their deadline passed.
    pub lost: Vec<(usize, u32)>,
    /// `(du id, packets)` that entered the window.
    pub arrived: Vec<(usize, u32)>,
}

/// Applies `action`, drops expiring DUs and inserts new arrivals drawn from
/// the size PMFs. The channel component of the returned state is unchanged.
pub fn advance_traffic<R: Rng + ?Sized>(
    template: &GopTemplate,
    state: &UserState,
    action: &ScheduleAction,
    rng: &mut R,
) -> Result<(UserState, TrafficStep)> {
    let next_phase = template.next_phase(state.phase);
    let next_ctx = template.context(next_phase as u64);
    let arrivals: Vec<u32> = template
        .fresh(state.phase)
        .iter()
        .map(|&pos| template.du(next_ctx.entries[pos].du).size_pmf.sample(rng))
        .collect();
    advance_with_arrivals(template, state, action, &arrivals)
}

/// Deterministic variant of [`advance_traffic`]; `arrivals` lists the sizes
/// of the fresh entries of the next context in order.
pub fn advance_with_arrivals(
    template: &GopTemplate,
    state: &UserState,
    action: &ScheduleAction,
    arrivals: &[u32],
) -> Result<(UserState, TrafficStep)> {
    action.check(state)?;
    let fresh = template.fresh(state.phase);
    if arrivals.len() != fresh.len() {
        return Err(Error::Usage(format!(
            "expected {} arrival sizes, got {}",
            fresh.len(),
            arrivals.len()
        )));
    }
    let ctx = template.context(state.phase as u64);
    let next_phase = template.next_phase(state.phase);
    let next_ctx = template.context(next_phase as u64);
    let mut next = vec![0u32; next_ctx.len()];
    let mut step = TrafficStep::default();
    for (pos, target) in template.carry(state.phase).iter().enumerate() {
        let left = state.buffer[pos] - action.sends[pos];
        match target {
            Some(t) => next[*t] = left,
            None => {
                if left > 0 {
                    step.lost.push((ctx.entries[pos].du, left));
                }
            }
        }
    }
    for (&pos, &size) in fresh.iter().zip(arrivals) {
        next[pos] = size;
        step.arrived.push((next_ctx.entries[pos].du, size));
    }
    step.next = next.clone();
    Ok((
        UserState {
            phase: next_phase,
            buffer: next,
            channel: state.channel,
        },
        step,
    ))
}

/// Positions of `state`'s context ordered by scheduling priority: higher
/// distortion impact first, then earlier deadline, then position.
pub fn priority_order(template: &GopTemplate, phase: u32) -> Vec<usize> {
    let ctx = template.context(phase as u64);
    let mut order: Vec<usize> = (0..ctx.len()).collect();
    order.sort_by(|&a, &b| {
        let qa = template.impact(phase, a);
        let qb = template.impact(phase, b);
        qb.partial_cmp(&qa)
            .unwrap_or(Ordering::Equal)
            .then(ctx.entries[a].remaining.cmp(&ctx.entries[b].remaining))
            .then(a.cmp(&b))
    });
    order
}

/// Cuts `action` down to at most `capacity` packets, keeping the highest
/// priority packets.
pub fn truncate_to(template: &GopTemplate, state: &UserState, action: &ScheduleAction, capacity: u32) -> ScheduleAction {
    if action.total() <= capacity {
        return action.clone();
    }
    let mut out = ScheduleAction::zero(action.sends.len());
    let mut left = capacity;
    for pos in priority_order(template, state.phase) {
        let take = action.sends[pos].min(left);
        out.sends[pos] = take;
        left -= take;
    }
    out
}

/// Extends `action` with further buffered packets, in priority order, until
/// it uses `capacity` packets or the buffer is empty. Shrinks it when it is
/// already above `capacity`.
pub fn fill_to(template: &GopTemplate, state: &UserState, action: &ScheduleAction, capacity: u32) -> ScheduleAction {
    let mut out = truncate_to(template, state, action, capacity);
    let mut left = capacity - out.total();
    for pos in priority_order(template, state.phase) {
        if left == 0 {
            break;
        }
        let extra = (state.buffer[pos] - out.sends[pos]).min(left);
        out.sends[pos] += extra;
        left -= extra;
    }
    out
}
