mod common;

use common::*;
use foresight::mdp::ExoChain;
use foresight::model::*;
use foresight::sched::*;

fn ipb() -> GopTemplate {
    GopTemplate::new(
        vec![
            du(0, "I", 4.0, 0, &[(40, 1.0)], &[]),
            du(1, "P", 2.0, 1, &[(10, 1.0)], &[0]),
            du(2, "B", 1.0, 1, &[(10, 1.0)], &[0, 1]),
        ],
        2,
        2,
    )
    .unwrap()
}

fn params(price: f64, delta: f64) -> RoundParams {
    RoundParams {
        price,
        rounds: RoundPrice::Current,
        beta: 0.0,
        gain_to_noise: 1.4,
        delta,
        min_quality: 0.0,
    }
}

#[test]
fn edf_reproduces_the_myopic_table() {
    let t = ipb();
    let s0 = UserState { phase: 0, buffer: vec![40, 10, 10], channel: 0 };
    assert_eq!(edf_schedule(&t, &s0, 30).sends, vec![30, 0, 0]);
    // phase 1 context is P, B, next I
    let s1 = UserState { phase: 1, buffer: vec![10, 10, 40], channel: 0 };
    assert_eq!(edf_schedule(&t, &s1, 20).sends, vec![10, 10, 0]);
    assert_eq!(edf_schedule(&t, &s1, 0).total(), 0);
}

#[test]
fn hdf_and_fifo_orders() {
    let t = ipb();
    let s0 = UserState { phase: 0, buffer: vec![40, 10, 10], channel: 0 };
    assert_eq!(hdf_schedule(&t, &s0, 45).sends, vec![40, 5, 0]);
    let flat = GopTemplate::new(
        vec![du(0, "I", 1.0, 0, &[(3, 1.0)], &[]), du(1, "P", 1.0, 1, &[(3, 1.0)], &[])],
        2,
        2,
    )
    .unwrap();
    // equal impact falls back to deadline order
    let s = UserState { phase: 1, buffer: vec![3, 3], channel: 0 };
    assert_eq!(hdf_schedule(&flat, &s, 4).sends, edf_schedule(&flat, &s, 4).sends);
    let one = GopTemplate::new(vec![du(0, "I", 1.0, 0, &[(5, 1.0)], &[])], 1, 1).unwrap();
    let s = UserState { phase: 0, buffer: vec![5], channel: 0 };
    assert_eq!(fifo_schedule(&one, &s, 3), edf_schedule(&one, &s, 3));
}

#[test]
fn empty_context_gives_empty_action() {
    let t = GopTemplate::new(vec![du(0, "I", 1.0, 0, &[(2, 1.0)], &[])], 2, 1).unwrap();
    let s = UserState { phase: 1, buffer: vec![], channel: 0 };
    let out = decomposed_schedule(&t, &s, 0, &params(0.0, 0.0), &NoContinuation);
    assert!(out.action.sends.is_empty());
    assert!(out.order.is_empty());
}

#[test]
fn single_du_sends_everything_with_positive_margin() {
    let t = GopTemplate::new(vec![du(0, "I", 10.0, 0, &[(4, 1.0)], &[])], 1, 1).unwrap();
    let s = UserState { phase: 0, buffer: vec![4], channel: 0 };
    let out = decomposed_schedule(&t, &s, 0, &params(3.0, 0.0), &NoContinuation);
    assert_eq!(out.action.sends, vec![4]);
}

#[test]
fn two_independent_dus_match_brute_force() {
    let t = GopTemplate::new(
        vec![du(0, "A", 3.0, 0, &[(4, 1.0)], &[]), du(1, "B", 2.0, 0, &[(5, 1.0)], &[])],
        1,
        1,
    )
    .unwrap();
    let s = UserState { phase: 0, buffer: vec![4, 5], channel: 0 };
    let p = RoundParams { beta: 0.4, ..params(0.5, 0.0) };
    let out = decomposed_schedule(&t, &s, 0, &p, &NoContinuation);
    let obj = |a: &ScheduleAction| {
        let q = [3.0, 2.0];
        let g: f64 = a.sends.iter().zip(q).map(|(y, q)| (q - 0.5) * *y as f64).sum();
        g - 0.4 * energy(1.4, a.total())
    };
    let best = BoxIter::new(&s.buffer).map(|y| obj(&ScheduleAction::new(y))).fold(f64::MIN, f64::max);
    assert!((obj(&out.action) - best).abs() < 1e-9);
    assert_eq!(out.order.len(), 2);
}

#[test]
fn du_tables_match_the_last_slot_objective() {
    let u = two_du_user(0.5, 0.0);
    let chain = ExoChain::own(&u.channel, vec![0.1, 0.2]);
    let tables = DuTables::build(&u, &chain, 0.9);
    // with no slots left only the immediate term counts
    let q = u.template.du(0).distortion_impact;
    let want = (0..=2u32)
        .map(|y| 0.1 * ((q - 0.1) * y as f64 - 0.5 * energy(1.4, y)))
        .fold(f64::MIN, f64::max);
    assert!((tables.value(0, 0, 2, 0) - want).abs() < 1e-12);
    assert_eq!(tables.continuation(0, 0, 2, 0), 0.0);
}

#[test]
fn quality_floor_is_enforced_after_rounds() {
    let t = ipb();
    let s0 = UserState { phase: 0, buffer: vec![40, 10, 10], channel: 0 };
    let p = RoundParams { min_quality: 30.0, ..params(100.0, 0.0) };
    let out = decomposed_schedule(&t, &s0, 0, &p, &NoContinuation);
    let got: f64 = out.action.sends.iter().zip([4.0, 2.0, 1.0]).map(|(y, q)| *y as f64 * q).sum();
    assert!(got >= 30.0);
    assert_eq!(out.action.sends, vec![8, 0, 0]);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_flat() -> impl Strategy<Value = (GopTemplate, UserState)> {
        (1usize..=3)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.0f64..3.0, n),
                    proptest::collection::vec(0u32..=6, n),
                    proptest::collection::vec(any::<bool>(), n),
                )
            })
            .prop_map(|(q, sizes, links)| {
                let t = flat_template(&q, &sizes, &links);
                let s = UserState { phase: 0, buffer: sizes, channel: 0 };
                (t, s)
            })
    }

    fn flat_params(price: f64, beta: f64, g: f64) -> RoundParams {
        RoundParams { beta, gain_to_noise: g, ..params(price, 0.0) }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1500))]

        #[test]
        fn processing_order_is_topological((t, s) in arb_state(), price in 0.0f64..2.0) {
            let out = decomposed_schedule(&t, &s, 0, &params(price, 0.0), &NoContinuation);
            let ctx = s.context(&t);
            prop_assert!(dependency_order_check(&ctx.edges, &out.order));
        }

        #[test]
        fn one_round_per_context_entry((t, s) in arb_state(), price in 0.0f64..2.0) {
            let out = decomposed_schedule(&t, &s, 0, &params(price, 0.0), &NoContinuation);
            let mut seen = out.order.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..s.buffer.len()).collect::<Vec<_>>());
            prop_assert!(out.action.is_feasible_for(&s));
        }

        #[test]
        fn decomposition_matches_exhaustive_search(
            (t, s) in arb_flat(),
            price in 0.0f64..2.0,
            beta in 0.0f64..1.0,
            g in 0.3f64..3.0,
        ) {
            let out = decomposed_schedule(&t, &s, 0, &flat_params(price, beta, g), &NoContinuation);
            let got = slot_objective(&t, &s, &out.action.sends, price, beta, g);
            let best = brute_slot_optimum(&t, &s, price, beta, g);
            prop_assert!((got - best).abs() <= 1e-9 * (1.0 + best.abs()), "{} vs {}", got, best);
        }

        #[test]
        fn simple_schedulers_respect_capacity((t, s) in arb_state(), cap in 0u32..12) {
            for sched in [SimpleScheduler::Edf, SimpleScheduler::Fifo, SimpleScheduler::Hdf] {
                let a = sched.schedule(&t, &s, cap);
                prop_assert!(a.is_feasible_for(&s));
                prop_assert_eq!(a.total(), cap.min(s.total_packets()));
            }
        }
    }
}
