//! GOP templates, data units and the per-phase transmission contexts.

use rand::Rng;

use crate::error::{Error, Result};

/// Probability mass function over non-negative packet counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SizePmf {
    support: Vec<(u32, f64)>,
}

impl SizePmf {
    /// Builds a PMF from `(packets, probability)` pairs. Zero-probability
    /// entries are dropped and duplicate counts merged.
    pub fn new(pairs: impl IntoIterator<Item = (u32, f64)>) -> std::result::Result<Self, String> {
        let mut support: Vec<(u32, f64)> = Vec::new();
        for (n, p) in pairs {
            if !p.is_finite() || p < 0.0 {
                return Err(format!("probability of {n} packets is {p}"));
            }
            if p == 0.0 {
                continue;
            }
            match support.iter_mut().find(|(m, _)| *m == n) {
                Some(e) => e.1 += p,
                None => support.push((n, p)),
            }
        }
        if support.is_empty() {
            return Err("empty support".into());
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("probabilities sum to {total}"));
        }
        support.sort_by_key(|(n, _)| *n);
        Ok(SizePmf { support })
    }

    /// Deterministic size.
    pub fn point(n: u32) -> Self {
        SizePmf {
            support: vec![(n, 1.0)],
        }
    }

    pub fn support(&self) -> &[(u32, f64)] {
        &self.support
    }

    pub fn max(&self) -> u32 {
        self.support.last().map(|(n, _)| *n).unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|(n, p)| *n as f64 * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(n, p) in &self.support {
            acc += p;
            if u < acc {
                return n;
            }
        }
        self.max()
    }
}

/// One data unit (frame) of the periodic GOP.
#[derive(Debug, Clone, PartialEq)]
pub struct DataUnitSpec {
    /// Index of this DU inside its template.
    pub id: usize,
    /// Frame-type label used for loss accounting ("I", "P", "B", ...).
    pub label: String,
    /// Distortion reduction per delivered packet.
    pub distortion_impact: f64,
    /// Deadline in slots from the start of the GOP.
    pub deadline_offset: u32,
    pub size_pmf: SizePmf,
    /// DUs this one depends on.
    pub parents: Vec<usize>,
}

/// A DU instance that is eligible for transmission in some phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextEntry {
    /// Template index of the DU.
    pub du: usize,
    /// GOP of this instance relative to the GOP containing the current slot.
    pub gop_offset: i64,
    /// Slots left after the current one before the deadline passes; 0 means
    /// this is the last slot in which the DU can be sent.
    pub remaining: u32,
}

/// The set of DUs whose deadlines fall in `[t, t + W)` together with the
/// dependency edges among them. Entries are ordered by deadline, then DU id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub phase: u32,
    pub entries: Vec<ContextEntry>,
    /// `(parent position, child position)` pairs, positions index `entries`.
    pub edges: Vec<(usize, usize)>,
}

impl Context {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parent positions of the entry at `pos`.
    pub fn parents_of(&self, pos: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(_, c)| *c == pos)
            .map(|(p, _)| *p)
    }

    /// DU ids and edges expressed in DU ids, ignoring GOP offsets.
    pub fn signature(&self) -> (Vec<usize>, Vec<(usize, usize)>) {
        let ids = self.entries.iter().map(|e| e.du).collect();
        let edges = self
            .edges
            .iter()
            .map(|&(p, c)| (self.entries[p].du, self.entries[c].du))
            .collect();
        (ids, edges)
    }
}

/// Periodic GOP structure of one user's video.
#[derive(Debug, Clone, PartialEq)]
pub struct GopTemplate {
    dus: Vec<DataUnitSpec>,
    period: u32,
    window: u32,
    contexts: Vec<Context>,
    /// For each phase, where each entry lands in the next phase's context.
    carry: Vec<Vec<Option<usize>>>,
    /// For each phase, the positions of the *next* context that are new arrivals.
    fresh: Vec<Vec<usize>>,
}

impl GopTemplate {
    /// Validates the template and precomputes one context per phase.
    pub fn new(dus: Vec<DataUnitSpec>, period: u32, window: u32) -> Result<Self> {
        validate(&dus, period, window)?;
        let contexts: Vec<Context> = (0..period as u64)
            .map(|p| compute_context(&dus, period, window, p))
            .collect();

        let mut carry = Vec::with_capacity(period as usize);
        let mut fresh = Vec::with_capacity(period as usize);
        for p in 0..period as usize {
            let next_phase = (p + 1) % period as usize;
            let wrap = next_phase == 0;
            let next = &contexts[next_phase];
            let mut targeted = vec![false; next.entries.len()];
            let c: Vec<Option<usize>> = contexts[p]
                .entries
                .iter()
                .map(|e| {
                    if e.remaining == 0 {
                        return None;
                    }
                    let k = if wrap { e.gop_offset - 1 } else { e.gop_offset };
                    let pos = next
                        .entries
                        .iter()
                        .position(|n| n.du == e.du && n.gop_offset == k)
                        .expect("carried DU must be active in the next phase");
                    targeted[pos] = true;
                    Some(pos)
                })
                .collect();
            carry.push(c);
            fresh.push((0..next.entries.len()).filter(|&i| !targeted[i]).collect());
        }

        let template = GopTemplate {
            dus,
            period,
            window,
            contexts,
            carry,
            fresh,
        };
        template.check_window()?;
        Ok(template)
    }

    pub fn dus(&self) -> &[DataUnitSpec] {
        &self.dus
    }

    pub fn du(&self, id: usize) -> &DataUnitSpec {
        &self.dus[id]
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// Context of the phase containing absolute slot `slot`.
    pub fn context(&self, slot: u64) -> &Context {
        &self.contexts[(slot % self.period as u64) as usize]
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    /// Recomputes the context for `slot` from the DU list, bypassing the
    /// per-phase cache.
    pub fn build_context(&self, slot: u64) -> Context {
        compute_context(&self.dus, self.period, self.window, slot)
    }

    /// For each entry of phase `phase`, its position in the following
    /// phase's context, or `None` if it expires at the end of this slot.
    pub fn carry(&self, phase: u32) -> &[Option<usize>] {
        &self.carry[phase as usize]
    }

    /// Positions in the next phase's context filled by new arrivals.
    pub fn fresh(&self, phase: u32) -> &[usize] {
        &self.fresh[phase as usize]
    }

    pub fn next_phase(&self, phase: u32) -> u32 {
        (phase + 1) % self.period
    }

    /// Largest packet count the entry at `pos` of `phase` can hold.
    pub fn cap(&self, phase: u32, pos: usize) -> u32 {
        let du = self.contexts[phase as usize].entries[pos].du;
        self.dus[du].size_pmf.max()
    }

    /// Distortion impact of the entry at `pos` of `phase`.
    pub fn impact(&self, phase: u32, pos: usize) -> f64 {
        let du = self.contexts[phase as usize].entries[pos].du;
        self.dus[du].distortion_impact
    }

    /// Sum of `q * E[size]` over one GOP.
    pub fn gop_impact(&self) -> f64 {
        self.dus
            .iter()
            .map(|d| d.distortion_impact * d.size_pmf.mean())
            .sum()
    }

    /// Copy of this template with every distortion impact set to zero.
    pub fn distortion_blind(&self) -> GopTemplate {
        let mut t = self.clone();
        for d in &mut t.dus {
            d.distortion_impact = 0.0;
        }
        t
    }

    /// Copy of this template with the distortion impacts replaced, in DU
    /// order.
    pub fn with_impacts(&self, impacts: &[f64]) -> GopTemplate {
        let mut t = self.clone();
        for (d, q) in t.dus.iter_mut().zip(impacts) {
            d.distortion_impact = *q;
        }
        t
    }

    fn check_window(&self) -> Result<()> {
        for child in &self.dus {
            for &parent in &child.parents {
                let co_occur = self.contexts.iter().any(|c| {
                    c.edges.iter().any(|&(p, ch)| {
                        c.entries[p].du == parent && c.entries[ch].du == child.id
                    })
                });
                if !co_occur {
                    return Err(Error::validation(
                        "window",
                        format!(
                            "DU {} and its parent DU {} never share a context with W={}",
                            child.id, parent, self.window
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn compute_context(dus: &[DataUnitSpec], period: u32, window: u32, slot: u64) -> Context {
    let t = period as i64;
    let p = (slot % period as u64) as i64;
    let w = window as i64;
    let mut entries = Vec::new();
    for du in dus {
        let d = du.deadline_offset as i64;
        let k_lo = (p - d).div_euclid(t) + i64::from((p - d).rem_euclid(t) != 0);
        let k_hi = (p + w - 1 - d).div_euclid(t);
        for k in k_lo..=k_hi {
            let abs = k * t + d - p;
            debug_assert!((0..w).contains(&abs));
            entries.push(ContextEntry {
                du: du.id,
                gop_offset: k,
                remaining: abs as u32,
            });
        }
    }
    entries.sort_by_key(|e| (e.remaining, e.du, e.gop_offset));

    let mut edges = Vec::new();
    for (ci, child) in entries.iter().enumerate() {
        for &parent in &dus[child.du].parents {
            if let Some(pi) = entries
                .iter()
                .position(|e| e.du == parent && e.gop_offset == child.gop_offset)
            {
                edges.push((pi, ci));
            }
        }
    }
    edges.sort_unstable();
    Context {
        phase: p as u32,
        entries,
        edges,
    }
}

fn validate(dus: &[DataUnitSpec], period: u32, window: u32) -> Result<()> {
    if period == 0 {
        return Err(Error::validation("period", "must be at least 1"));
    }
    if window == 0 {
        return Err(Error::validation("window", "must be at least 1"));
    }
    if dus.is_empty() {
        return Err(Error::validation("dus", "template has no data units"));
    }
    for (i, du) in dus.iter().enumerate() {
        let field = |f: &str| format!("dus[{i}].{f}");
        if du.id != i {
            return Err(Error::validation(field("id"), format!("expected {i}, got {}", du.id)));
        }
        if !(du.distortion_impact >= 0.0 && du.distortion_impact.is_finite()) {
            return Err(Error::validation(field("distortion_impact"), "must be finite and >= 0"));
        }
        if du.deadline_offset > period {
            return Err(Error::validation(
                field("deadline_offset"),
                format!("{} exceeds the period {period}", du.deadline_offset),
            ));
        }
        let total: f64 = du.size_pmf.support().iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(field("size_pmf"), format!("sums to {total}")));
        }
        for &m in &du.parents {
            if m >= dus.len() || m == i {
                return Err(Error::validation(field("parents"), format!("bad parent id {m}")));
            }
            let parent = &dus[m];
            if du.deadline_offset < parent.deadline_offset {
                return Err(Error::validation(
                    field("deadline_offset"),
                    format!("earlier than the deadline of parent DU {m}"),
                ));
            }
            if du.distortion_impact > parent.distortion_impact {
                return Err(Error::validation(
                    field("distortion_impact"),
                    format!("exceeds the impact of parent DU {m}"),
                ));
            }
        }
    }
    if let Some(cycle) = find_cycle(dus) {
        let path: Vec<String> = cycle.iter().map(|i| i.to_string()).collect();
        return Err(Error::validation(
            "dus.parents",
            format!("dependency cycle {}", path.join(" -> ")),
        ));
    }
    Ok(())
}

/// Returns one dependency cycle (as DU ids, first id repeated at the end).
fn find_cycle(dus: &[DataUnitSpec]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(v: usize, dus: &[DataUnitSpec], mark: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        mark[v] = Mark::Active;
        stack.push(v);
        for &p in &dus[v].parents {
            if p >= dus.len() {
                continue;
            }
            match mark[p] {
                Mark::Active => {
                    let start = stack.iter().position(|&x| x == p).unwrap_or(0);
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(p);
                    return Some(cycle);
                }
                Mark::New => {
                    if let Some(c) = visit(p, dus, mark, stack) {
                        return Some(c);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        mark[v] = Mark::Done;
        None
    }
    let mut mark = vec![Mark::New; dus.len()];
    let mut stack = Vec::new();
    for v in 0..dus.len() {
        if mark[v] == Mark::New {
            if let Some(c) = visit(v, dus, &mut mark, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn du(id: usize, label: &str, q: f64, d: u32, size: u32, parents: &[usize]) -> DataUnitSpec {
        DataUnitSpec {
            id,
            label: label.into(),
            distortion_impact: q,
            deadline_offset: d,
            size_pmf: SizePmf::point(size),
            parents: parents.to_vec(),
        }
    }

    /// Five-DU GOP spanning three slots, laid out so that W=2 yields the
    /// context sequence of the classic illustration.
    fn five_du() -> GopTemplate {
        GopTemplate::new(
            vec![
                du(0, "I", 5.0, 0, 4, &[]),
                du(1, "P", 4.0, 1, 2, &[0]),
                du(2, "B", 3.0, 1, 2, &[0]),
                du(3, "P", 2.0, 2, 2, &[1]),
                du(4, "B", 1.0, 2, 2, &[1]),
            ],
            3,
            2,
        )
        .unwrap()
    }

    #[test]
    fn five_du_contexts_follow_the_window() {
        let t = five_du();
        let ids = |slot| t.context(slot).signature().0;
        assert_eq!(ids(0), vec![0, 1, 2]);
        assert_eq!(ids(1), vec![1, 2, 3, 4]);
        assert_eq!(ids(2), vec![3, 4, 0]);
        assert_eq!(ids(3), vec![0, 1, 2]);
        // DU1 of the next GOP in phase 2
        assert_eq!(t.context(2).entries[2].gop_offset, 1);
    }

    #[test]
    fn window_of_one_holds_only_the_expiring_du() {
        let t = GopTemplate::new(
            vec![du(0, "I", 2.0, 0, 3, &[]), du(1, "P", 1.0, 1, 3, &[0])],
            2,
            1,
        );
        // P depends on I but they never co-occur with W=1
        assert!(matches!(t, Err(Error::Validation { .. })));

        let t = GopTemplate::new(vec![du(0, "I", 2.0, 0, 3, &[]), du(1, "P", 1.0, 1, 3, &[])], 2, 1).unwrap();
        for slot in 0..6 {
            let c = t.context(slot);
            assert_eq!(c.len(), 1);
            assert_eq!(c.entries[0].remaining, 0);
            assert_eq!(c.entries[0].du as u64, slot % 2);
        }
    }

    #[test]
    fn contexts_are_periodic() {
        let t = five_du();
        for p in 0..3u64 {
            assert_eq!(t.build_context(p).signature(), t.build_context(p + 3).signature());
            assert_eq!(t.build_context(p), *t.context(p + 30));
        }
    }

    #[test]
    fn carry_and_fresh_partition_the_next_context() {
        let t = five_du();
        for p in 0..3 {
            let next = t.context(t.next_phase(p) as u64);
            let mut hit = vec![0; next.len()];
            for c in t.carry(p).iter().flatten() {
                hit[*c] += 1;
            }
            for f in t.fresh(p) {
                hit[*f] += 1;
            }
            assert!(hit.iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn rejects_cycles_and_ordering_violations() {
        let err = GopTemplate::new(vec![du(0, "I", 1.0, 0, 1, &[1]), du(1, "P", 1.0, 0, 1, &[0])], 1, 1)
            .unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");

        let err = GopTemplate::new(vec![du(0, "I", 1.0, 0, 1, &[]), du(1, "P", 2.0, 0, 1, &[0])], 1, 1)
            .unwrap_err();
        assert!(err.to_string().contains("distortion_impact"), "{err}");

        let err = GopTemplate::new(vec![du(0, "I", 1.0, 1, 1, &[]), du(1, "P", 0.5, 0, 1, &[0])], 2, 2)
            .unwrap_err();
        assert!(err.to_string().contains("deadline"), "{err}");
    }

    #[test]
    fn pmf_validation() {
        assert!(SizePmf::new([(1, 0.5), (2, 0.6)]).is_err());
        assert!(SizePmf::new([(1, -0.1), (2, 1.1)]).is_err());
        let p = SizePmf::new([(3, 0.25), (1, 0.75), (5, 0.0)]).unwrap();
        assert_eq!(p.max(), 3);
        assert!((p.mean() - 1.5).abs() < 1e-12);
    }
}
