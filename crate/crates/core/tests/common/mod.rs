#![allow(dead_code)]

use foresight::model::{ChannelModel, ChannelState, DataUnitSpec, GopTemplate, SizePmf, UserConfig};

pub fn du(id: usize, label: &str, q: f64, d: u32, pmf: &[(u32, f64)], parents: &[usize]) -> DataUnitSpec {
    DataUnitSpec {
        id,
        label: label.into(),
        distortion_impact: q,
        deadline_offset: d,
        size_pmf: SizePmf::new(pmf.iter().copied()).unwrap(),
        parents: parents.to_vec(),
    }
}

pub fn channel(states: &[(f64, f64)], p: &[&[f64]]) -> ChannelModel {
    ChannelModel::new(
        states
            .iter()
            .enumerate()
            .map(|(i, &(g, r))| ChannelState { name: format!("h{i}"), gain_to_noise: g, rate: r })
            .collect(),
        p.iter().map(|r| r.to_vec()).collect(),
    )
    .unwrap()
}

pub fn user(template: GopTemplate, channel: ChannelModel, beta: f64, d: f64) -> UserConfig {
    UserConfig { name: "u".into(), template, channel, min_quality: d, tradeoff: beta }
}

/// Two DUs with a dependency, window of two slots, random sizes.
pub fn two_du_user(beta: f64, d: f64) -> UserConfig {
    let t = GopTemplate::new(
        vec![du(0, "I", 1.0, 0, &[(1, 0.5), (2, 0.5)], &[]), du(1, "P", 0.6, 1, &[(0, 0.3), (2, 0.7)], &[0])],
        2,
        2,
    )
    .unwrap();
    user(t, channel(&[(1.4, 4.0), (0.7, 2.0)], &[&[0.7, 0.3], &[0.4, 0.6]]), beta, d)
}

/// Random valid templates: up to three DUs with deadlines ascending and
/// impacts descending by id, so any earlier DU may be a parent.
pub fn arb_template() -> impl proptest::strategy::Strategy<Value = GopTemplate> {
    use proptest::prelude::*;
    (1u32..=3, 1usize..=3)
        .prop_flat_map(|(period, n)| {
            (
                Just(period),
                1u32..=period + 1,
                proptest::collection::vec(0u32..=period, n),
                proptest::collection::vec(0.1f64..2.0, n),
                proptest::collection::vec((0u32..=2, 1u32..=3, 0.0f64..1.0), n),
                proptest::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter_map("window too short for a dependency", |(period, window, mut d, mut q, sizes, link)| {
            d.sort_unstable();
            q.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let dus = (0..d.len())
                .map(|i| {
                    let (lo, hi, p) = sizes[i];
                    let pmf: Vec<(u32, f64)> = if lo == hi { vec![(lo, 1.0)] } else { vec![(lo, p), (hi, 1.0 - p)] };
                    let parents = if i > 0 && link[i] { vec![i - 1] } else { vec![] };
                    du(i, if i == 0 { "I" } else { "P" }, q[i], d[i], &pmf, &parents)
                })
                .collect();
            GopTemplate::new(dus, period, window).ok()
        })
}

/// A template, a phase and a buffer within the DU size caps.
pub fn arb_state() -> impl proptest::strategy::Strategy<Value = (GopTemplate, foresight::model::UserState)> {
    use proptest::prelude::*;
    arb_template().prop_flat_map(|t| {
        let period = t.period();
        (Just(t), 0..period).prop_flat_map(|(t, phase)| {
            let caps: Vec<u32> = (0..t.context(phase as u64).len()).map(|p| t.cap(phase, p)).collect();
            let buf = caps.iter().map(|&c| 0..=c).collect::<Vec<_>>();
            (Just(t), Just(phase), buf)
        })
    })
    .prop_map(|(t, phase, buffer)| (t, foresight::model::UserState { phase, buffer, channel: 0 }))
}

/// All DUs share one slot; DU `i` depends on DU `i - 1` when `links[i]`.
/// Impacts are sorted in descending order so every link is valid.
pub fn flat_template(q: &[f64], sizes: &[u32], links: &[bool]) -> GopTemplate {
    let mut q = q.to_vec();
    q.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let dus = (0..q.len())
        .map(|i| {
            let parents = if i > 0 && links[i] { vec![i - 1] } else { vec![] };
            du(i, "F", q[i], 0, &[(sizes[i], 1.0)], &parents)
        })
        .collect();
    GopTemplate::new(dus, 1, 1).unwrap()
}

/// `sum (q - price) y - beta rho(n)`, the one-slot objective.
pub fn slot_objective(
    t: &GopTemplate,
    s: &foresight::model::UserState,
    y: &[u32],
    price: f64,
    beta: f64,
    g: f64,
) -> f64 {
    let gain: f64 = y.iter().enumerate().map(|(p, &k)| (t.impact(s.phase, p) - price) * k as f64).sum();
    gain - beta * foresight::model::energy(g, y.iter().sum())
}

/// Exhaustive maximum of [`slot_objective`] over the buffer box.
pub fn brute_slot_optimum(t: &GopTemplate, s: &foresight::model::UserState, price: f64, beta: f64, g: f64) -> f64 {
    foresight::model::BoxIter::new(&s.buffer)
        .map(|y| slot_objective(t, s, &y, price, beta, g))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The drift decision is the greedy post-decision decision of a
/// distortion-blind user weighing payoff and drift equally.
pub fn drift_greedy(
    t: &GopTemplate,
    s: &foresight::model::UserState,
    budget: foresight::baselines::LyapunovBudget,
    beta: f64,
    g: f64,
) -> foresight::model::ScheduleAction {
    use foresight::baselines::{DriftValue, LyapunovBudget};
    use foresight::pds::{pds_greedy_capped, GreedyParams};
    let blind = t.distortion_blind();
    let v = DriftValue::for_state(t, s);
    let (price, cap) = match budget {
        LyapunovBudget::Price(p) => (p, u32::MAX),
        LyapunovBudget::Capacity(c) => (0.0, c),
    };
    let p = GreedyParams { price, beta, gain_to_noise: g, delta: 0.5, min_quality: 0.0 };
    pds_greedy_capped(&blind, s, &v, &p, cap).0
}
