//! Enumeration of one user's reachable traffic states.
//!
//! A pre-decision traffic state of phase `p` is fully described by the
//! post-decision key of phase `p - 1` (what was carried over) and the sizes
//! of the DUs that arrived. Post-decision keys only hold the entries that
//! survive the slot; expiring entries are dropped before lookup.

use crate::error::{Error, Result, SizingReport};
use crate::model::{GopTemplate, UserState};

/// Default cap on tabular state counts.
pub const DEFAULT_STATE_BUDGET: u128 = 5_000_000;

#[derive(Debug, Clone)]
pub(crate) struct PhaseInfo {
    /// Positions of this phase's context that carry into the next phase.
    pub carried: Vec<usize>,
    /// Positions that expire at the end of the slot.
    pub expiring: Vec<usize>,
    pub radix: Vec<u32>,
    pub stride: Vec<usize>,
    pub pd_offset: usize,
    pub pd_count: usize,
    /// Arrival combinations for the next phase's fresh entries: sizes in
    /// `fresh(p)` order, and probability. The first fresh entry varies fastest.
    pub combos: Vec<(Vec<u32>, f64)>,
    /// Support of each fresh entry, for reverse lookup.
    pub fresh_support: Vec<Vec<u32>>,
    /// Offset of the pre-decision states of phase `p`.
    pub pre_offset: usize,
    pub pre_count: usize,
}

/// Carried part of one decision: which post-decision key it leads to, how
/// many carried packets it sends and their distortion reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CarryOption {
    pub pd: u32,
    pub sent: u32,
    pub gain: f64,
}

/// Decision structure of one pre-decision state.
#[derive(Debug, Clone)]
pub(crate) struct PreInfo {
    pub phase: u32,
    pub buffer: Vec<u32>,
    /// Carried send vectors in ascending colex order.
    pub options: Vec<CarryOption>,
    /// `greedy[t]`: best distortion reduction from `t` expiring packets.
    pub greedy: Vec<f64>,
    /// Expiring positions in fill order.
    pub fill: Vec<usize>,
    pub max_gain: f64,
}

#[derive(Debug, Clone)]
pub struct TrafficSpace {
    template: GopTemplate,
    pub(crate) phases: Vec<PhaseInfo>,
    pub(crate) pre: Vec<PreInfo>,
    pd_count: usize,
    max_send: u32,
}

impl TrafficSpace {
    pub fn new(template: &GopTemplate) -> Result<Self> {
        Self::with_budget(template, 1, DEFAULT_STATE_BUDGET)
    }

    /// Builds the space, refusing it when `states * exo` exceeds `budget`.
    pub fn with_budget(template: &GopTemplate, exo: usize, budget: u128) -> Result<Self> {
        let report = Self::sizing(template, exo, budget);
        if report.states > budget {
            return Err(Error::Sizing(report));
        }
        let t = template.period() as usize;
        let mut phases = Vec::with_capacity(t);
        let mut pd_offset = 0;
        for p in 0..t as u32 {
            let ctx = template.context(p as u64);
            let carry = template.carry(p);
            let carried: Vec<usize> = (0..ctx.len()).filter(|&i| carry[i].is_some()).collect();
            let expiring: Vec<usize> = (0..ctx.len()).filter(|&i| carry[i].is_none()).collect();
            let radix: Vec<u32> = carried.iter().map(|&i| template.cap(p, i) + 1).collect();
            let mut stride = Vec::with_capacity(radix.len());
            let mut acc = 1usize;
            for r in &radix {
                stride.push(acc);
                acc *= *r as usize;
            }
            let next = template.next_phase(p);
            let next_ctx = template.context(next as u64);
            let supports: Vec<Vec<(u32, f64)>> = template
                .fresh(p)
                .iter()
                .map(|&pos| template.du(next_ctx.entries[pos].du).size_pmf.support().to_vec())
                .collect();
            let mut combos = vec![(Vec::new(), 1.0)];
            for sup in &supports {
                let mut out = Vec::with_capacity(combos.len() * sup.len());
                for &(n, pn) in sup {
                    for (c, pc) in &combos {
                        let mut v: Vec<u32> = c.clone();
                        v.push(n);
                        out.push((v, pc * pn));
                    }
                }
                combos = out;
            }
            // reorder so that the first fresh entry varies fastest
            combos.sort_by(|a, b| {
                let ka = combo_rank(&a.0, &supports);
                let kb = combo_rank(&b.0, &supports);
                ka.cmp(&kb)
            });
            phases.push(PhaseInfo {
                carried,
                expiring,
                radix,
                stride,
                pd_offset,
                pd_count: acc,
                combos,
                fresh_support: supports.iter().map(|s| s.iter().map(|(n, _)| *n).collect()).collect(),
                pre_offset: 0,
                pre_count: 0,
            });
            pd_offset += acc;
        }
        let pd_count = pd_offset;

        let mut pre_offset = 0;
        for q in 0..t {
            let p = (q + t - 1) % t;
            let count = phases[p].pd_count * phases[p].combos.len();
            phases[q].pre_offset = pre_offset;
            phases[q].pre_count = count;
            pre_offset += count;
        }

        let mut space = TrafficSpace {
            template: template.clone(),
            phases,
            pre: Vec::with_capacity(pre_offset),
            pd_count,
            max_send: 0,
        };
        for q in 0..t as u32 {
            let p = (q + t as u32 - 1) % t as u32;
            let prev = &space.phases[p as usize];
            let carry = template.carry(p);
            let fresh = template.fresh(p);
            let n_ctx = template.context(q as u64).len();
            let mut infos = Vec::with_capacity(space.phases[q as usize].pre_count);
            for k in 0..prev.pd_count {
                let mut buf = vec![0u32; n_ctx];
                let mut rest = k;
                for (j, &pos) in prev.carried.iter().enumerate() {
                    let r = prev.radix[j] as usize;
                    buf[carry[pos].expect("carried")] = (rest % r) as u32;
                    rest /= r;
                }
                for (sizes, _) in &prev.combos {
                    let mut b = buf.clone();
                    for (&pos, &n) in fresh.iter().zip(sizes) {
                        b[pos] = n;
                    }
                    infos.push(space.pre_info(q, b));
                }
            }
            space.pre.extend(infos);
        }
        space.max_send = space.pre.iter().map(|s| s.buffer.iter().sum::<u32>()).max().unwrap_or(0);
        Ok(space)
    }

    /// Counts states without building anything.
    pub fn sizing(template: &GopTemplate, exo: usize, budget: u128) -> SizingReport {
        let t = template.period();
        let mut total: u128 = 0;
        let mut breakdown = Vec::new();
        for p in 0..t {
            let ctx = template.context(p as u64);
            let carry = template.carry(p);
            let mut pd: u128 = 1;
            for (i, c) in carry.iter().enumerate() {
                if c.is_some() {
                    pd = pd.saturating_mul(template.cap(p, i) as u128 + 1);
                }
            }
            let next_ctx = template.context(template.next_phase(p) as u64);
            let mut combos: u128 = 1;
            for &pos in template.fresh(p) {
                let n = template.du(next_ctx.entries[pos].du).size_pmf.support().len() as u128;
                combos = combos.saturating_mul(n);
            }
            let count = pd.saturating_mul(combos).saturating_mul(exo as u128);
            breakdown.push((format!("phase {}", template.next_phase(p)), count));
            total = total.saturating_add(count);
            let _ = ctx;
        }
        SizingReport {
            what: "user traffic space".into(),
            states: total,
            budget,
            breakdown,
        }
    }

    fn pre_info(&self, phase: u32, buffer: Vec<u32>) -> PreInfo {
        let t = &self.template;
        let info = &self.phases[phase as usize];
        let xc: Vec<u32> = info.carried.iter().map(|&i| buffer[i]).collect();
        let mut options = Vec::new();
        for yc in crate::model::BoxIter::new(&xc) {
            let mut pd = info.pd_offset;
            let mut sent = 0;
            let mut gain = 0.0;
            for (j, &pos) in info.carried.iter().enumerate() {
                pd += (xc[j] - yc[j]) as usize * info.stride[j];
                sent += yc[j];
                gain += t.impact(phase, pos) * yc[j] as f64;
            }
            options.push(CarryOption { pd: pd as u32, sent, gain });
        }
        let mut fill = info.expiring.clone();
        fill.sort_by(|&a, &b| {
            t.impact(phase, b)
                .partial_cmp(&t.impact(phase, a))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut greedy = vec![0.0];
        for &pos in &fill {
            let q = t.impact(phase, pos);
            for _ in 0..buffer[pos] {
                let last = *greedy.last().unwrap();
                greedy.push(last + q);
            }
        }
        let max_gain = buffer
            .iter()
            .enumerate()
            .map(|(i, &x)| t.impact(phase, i) * x as f64)
            .sum();
        PreInfo {
            phase,
            buffer,
            options,
            greedy,
            fill,
            max_gain,
        }
    }

    pub fn template(&self) -> &GopTemplate {
        &self.template
    }

    pub fn pre_count(&self) -> usize {
        self.pre.len()
    }

    pub fn pd_count(&self) -> usize {
        self.pd_count
    }

    pub fn period(&self) -> u32 {
        self.template.period()
    }

    /// Largest number of packets any state can send in one slot.
    pub fn max_send(&self) -> u32 {
        self.max_send
    }

    pub fn pre_phase(&self, s: usize) -> u32 {
        self.pre[s].phase
    }

    pub fn pre_buffer(&self, s: usize) -> &[u32] {
        &self.pre[s].buffer
    }

    pub fn pre_state(&self, s: usize, channel: usize) -> UserState {
        UserState {
            phase: self.pre[s].phase,
            buffer: self.pre[s].buffer.clone(),
            channel,
        }
    }

    /// Phase that post-decision key `pd` belongs to.
    pub fn pd_phase(&self, pd: usize) -> u32 {
        self.phases
            .iter()
            .position(|i| pd >= i.pd_offset && pd < i.pd_offset + i.pd_count)
            .expect("pd in range") as u32
    }

    /// Carried buffer values (in carried-position order) of key `pd`.
    pub fn pd_values(&self, pd: usize) -> Vec<u32> {
        let info = &self.phases[self.pd_phase(pd) as usize];
        let mut rest = pd - info.pd_offset;
        info.radix
            .iter()
            .map(|&r| {
                let v = rest % r as usize;
                rest /= r as usize;
                v as u32
            })
            .collect()
    }

    /// Index of the post-decision key reached from `phase` when `post`
    /// (aligned with the phase's context) remains after sending.
    pub fn pd_index(&self, phase: u32, post: &[u32]) -> Result<usize> {
        let info = &self.phases[phase as usize];
        let mut pd = info.pd_offset;
        for (j, &pos) in info.carried.iter().enumerate() {
            let v = post[pos];
            if v >= info.radix[j] {
                return Err(Error::InfeasibleAction(format!(
                    "entry {pos} holds {v} packets, above the template cap"
                )));
            }
            pd += v as usize * info.stride[j];
        }
        Ok(pd)
    }

    /// Pre-decision index of phase `phase` reached from `pd` with arrival combo `m`.
    pub(crate) fn successor(&self, pd: usize, m: usize) -> usize {
        let p = self.pd_phase(pd) as usize;
        let info = &self.phases[p];
        let next = &self.phases[self.template.next_phase(p as u32) as usize];
        next.pre_offset + (pd - info.pd_offset) * info.combos.len() + m
    }

    /// Index of a pre-decision traffic state.
    pub fn pre_index(&self, phase: u32, buffer: &[u32]) -> Result<usize> {
        let t = &self.template;
        let period = t.period();
        if phase >= period || buffer.len() != t.context(phase as u64).len() {
            return Err(Error::InfeasibleAction(format!("state ({phase}, {buffer:?}) has the wrong shape")));
        }
        let p = (phase + period - 1) % period;
        let prev = &self.phases[p as usize];
        let carry = t.carry(p);
        let mut k = 0usize;
        for (j, &pos) in prev.carried.iter().enumerate() {
            let v = buffer[carry[pos].expect("carried")];
            if v >= prev.radix[j] {
                return Err(Error::InfeasibleAction(format!("buffer {buffer:?} exceeds the template caps")));
            }
            k += v as usize * prev.stride[j];
        }
        let mut m = 0usize;
        let mut mult = 1usize;
        for (f, &pos) in t.fresh(p).iter().enumerate() {
            let sup = &prev.fresh_support[f];
            let idx = sup.iter().position(|&n| n == buffer[pos]).ok_or_else(|| {
                Error::InfeasibleAction(format!(
                    "entry {pos} of buffer {buffer:?} is not a possible arrival size"
                ))
            })?;
            m += idx * mult;
            mult *= sup.len();
        }
        Ok(self.phases[phase as usize].pre_offset + k * prev.combos.len() + m)
    }

    /// Probability of arrival combination `m` after post-decision key phase `p`.
    pub(crate) fn combos(&self, p: u32) -> &[(Vec<u32>, f64)] {
        &self.phases[p as usize].combos
    }
}

fn combo_rank(sizes: &[u32], supports: &[Vec<(u32, f64)>]) -> usize {
    let mut rank = 0;
    let mut mult = 1;
    for (n, sup) in sizes.iter().zip(supports) {
        let idx = sup.iter().position(|(m, _)| m == n).unwrap();
        rank += idx * mult;
        mult *= sup.len();
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scenario;

    #[test]
    fn illustration_space_is_small() {
        let s = Scenario::preset("illustration-2user").unwrap();
        let sp = TrafficSpace::new(&s.users[0].template).unwrap();
        // phase 0: carried I' in 0..=40; phase 1: carried P,B in 0..=10
        assert_eq!(sp.pre_count(), 41 + 121);
        for i in 0..sp.pre_count() {
            let ph = sp.pre_phase(i);
            assert_eq!(sp.pre_index(ph, sp.pre_buffer(i)).unwrap(), i);
        }
        let sp2 = TrafficSpace::new(&s.users[1].template).unwrap();
        for i in 0..sp2.pre_count() {
            assert_eq!(sp2.pre_index(sp2.pre_phase(i), sp2.pre_buffer(i)).unwrap(), i);
        }
    }

    #[test]
    fn sizing_rejects_large_templates() {
        let s = Scenario::preset("illustration-2user").unwrap();
        let err = TrafficSpace::with_budget(&s.users[0].template, 4, 100).unwrap_err();
        match err {
            Error::Sizing(r) => {
                assert_eq!(r.states, 4 * 162);
                assert_eq!(r.breakdown.len(), 2);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn successor_round_trip() {
        let s = Scenario::preset("gop16-default").unwrap();
        let sp = TrafficSpace::new(&s.users[0].template).unwrap();
        for pd in 0..sp.pd_count() {
            let p = sp.pd_phase(pd);
            for (m, (sizes, _)) in sp.combos(p).iter().enumerate() {
                let nxt = sp.successor(pd, m);
                let q = sp.template().next_phase(p);
                assert_eq!(sp.pre_phase(nxt), q);
                for (&pos, &n) in sp.template().fresh(p).iter().zip(sizes) {
                    assert_eq!(sp.pre_buffer(nxt)[pos], n);
                }
            }
        }
    }
}
