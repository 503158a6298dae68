mod common;

use common::*;
use foresight::baselines::{lyapunov_action, LyapunovBudget};
use foresight::mdp::*;
use foresight::model::*;
use foresight::pds::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn learning_single() -> Scenario {
    Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/learning-single.json")).unwrap()
}

/// Runs the learner online at zero price for `slots` slots.
fn train(l: &mut PdsLearner, u: &UserConfig, slots: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = UserState::sampled(&u.template, 0, 0, &mut rng);
    for _ in 0..slots {
        let a = l.step(&st, 0.0).unwrap();
        let (mut next, _) = advance_traffic(&u.template, &st, &a, &mut rng).unwrap();
        next.channel = u.channel.sample(st.channel, &mut rng);
        st = next;
    }
}

#[test]
fn learned_values_approach_planning_values() {
    let s = learning_single();
    let u = &s.users[0];
    let mut l = PdsLearner::new(u, s.discount, 11).unwrap();
    train(&mut l, u, 100_000, 5);
    let m = PricedUserModel::for_user(u, ExoChain::own(&u.channel, vec![0.0; u.channel.len()]), s.discount).unwrap();
    let plan = solve_priced_mdp(&m, 1e-10).unwrap();
    let (gap, range) = l.table.sup_gap(&plan.post);
    assert!(gap <= 0.05 * range, "gap {gap} range {range}");
    let learned = policy_values(&m, &l.policy(&[0.0; 2]), 1e-12);
    let mean = learned.iter().sum::<f64>() / learned.len() as f64;
    let best = plan.mean_value();
    assert!(mean >= best * 0.98, "{mean} vs {best}");
}

#[test]
fn zero_values_give_the_myopic_action() {
    let u = two_du_user(0.3, 0.0);
    let l = PdsLearner::new(&u, 0.9, 1).unwrap();
    let m = PricedUserModel::for_user(&u, ExoChain::own(&u.channel, vec![0.2; 2]), 0.0).unwrap();
    let myopic = solve_priced_mdp(&m, 1e-9).unwrap();
    for pre in 0..m.space.pre_count() {
        for z in 0..2 {
            let s = m.space.pre_state(pre, z);
            let a = l.greedy(&s, 0.2).unwrap();
            let p = GreedyParams { price: 0.2, beta: 0.3, gain_to_noise: u.channel.gain_to_noise(z), delta: 0.9, min_quality: 0.0 };
            assert_eq!(a, pds_greedy_action(&u.template, &s, &ZeroValue, &p));
            let got = payoff(&u.template, &u.channel, &s, &a, 0.3).unwrap() - 0.2 * a.total() as f64;
            assert!((got - myopic.value_at(&m, pre, z)).abs() < 1e-9);
        }
    }
}

#[test]
fn updates_only_use_realized_samples() {
    // same support, different probabilities: identical sample paths must
    // give identical tables
    let a = two_du_user(0.3, 0.0);
    let mut b = a.clone();
    let t = GopTemplate::new(
        vec![du(0, "I", 1.0, 0, &[(1, 0.9), (2, 0.1)], &[]), du(1, "P", 0.6, 1, &[(0, 0.5), (2, 0.5)], &[0])],
        2,
        2,
    )
    .unwrap();
    b.template = t;
    b.channel = channel(&[(1.4, 4.0), (0.7, 2.0)], &[&[0.1, 0.9], &[0.9, 0.1]]);
    let mut la = PdsLearner::new(&a, 0.8, 3).unwrap();
    let mut lb = PdsLearner::new(&b, 0.8, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut st = UserState::sampled(&a.template, 0, 0, &mut rng);
    for _ in 0..5000 {
        let x = la.step(&st, 0.1).unwrap();
        let y = lb.step(&st, 0.1).unwrap();
        assert_eq!(x, y);
        let (mut next, _) = advance_traffic(&a.template, &st, &x, &mut rng).unwrap();
        next.channel = rng.gen_range(0..2);
        st = next;
    }
    assert_eq!(la.table.u, lb.table.u);
}

#[test]
fn update_blends_the_greedy_next_value() {
    let u = two_du_user(0.0, 0.0);
    let l = PdsLearner::new(&u, 0.5, 1).unwrap();
    let mut table = l.table.clone();
    let s = UserState { phase: 0, buffer: vec![2, 2], channel: 0 };
    let a = ScheduleAction::new(vec![1, 0]);
    let next = UserState { phase: 1, buffer: vec![2, 1], channel: 1 };
    let v = pds_update(&mut table, &l.model, &s, &a, &next, 0.0).unwrap();
    // empty table: the greedy value is half the best immediate payoff
    assert!((v - 0.5 * (2.0 * 0.6 + 1.0)).abs() < 1e-12);
    assert_eq!(table.get(&to_pds(&s, &a).unwrap()).unwrap(), v);
}

#[test]
fn learning_curve_csv() {
    let rows = [
        LearningCurveRow { slot: 100, user: 0, payoff: 0.5, gap: Some(0.1) },
        LearningCurveRow { slot: 200, user: 0, payoff: 0.6, gap: None },
    ];
    let mut buf = Vec::new();
    write_learning_curve(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("slot,user,payoff,gap"));
    assert!(text.lines().nth(2).unwrap().ends_with(','));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn kth_blend_weighs_one_over_k(vals in proptest::collection::vec(-5.0f64..5.0, 1..50)) {
        let u = two_du_user(0.0, 0.0);
        let mut table = PdsLearner::new(&u, 0.5, 1).unwrap().table;
        for (k, &v) in vals.iter().enumerate() {
            let before = table.u[0];
            table.blend(0, v);
            prop_assert_eq!(table.counts[0], k as u64 + 1);
            prop_assert!((table.u[0] - (before + (v - before) / (k as f64 + 1.0))).abs() < 1e-12);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        prop_assert!((table.u[0] - mean).abs() < 1e-9);
    }

    #[test]
    fn drift_scheduling_is_a_special_case(
        (t, s) in arb_state(),
        price in 0.0f64..3.0,
        cap in 0u32..10,
        use_cap in any::<bool>(),
        beta in 0.0f64..1.0,
        g in 0.3f64..3.0,
    ) {
        let budget = if use_cap { LyapunovBudget::Capacity(cap) } else { LyapunovBudget::Price(price) };
        prop_assert_eq!(lyapunov_action(&t, &s, budget, beta, g), drift_greedy(&t, &s, budget, beta, g));
    }

    #[test]
    fn greedy_actions_are_feasible((t, s) in arb_state(), price in 0.0f64..2.0, floor in 0.0f64..3.0) {
        let p = GreedyParams { price, beta: 0.1, gain_to_noise: 1.0, delta: 0.7, min_quality: floor };
        let a = pds_greedy_action(&t, &s, &ZeroValue, &p);
        prop_assert!(a.is_feasible_for(&s));
        let eff = effective_min_quality(&t, &s, floor);
        prop_assert!(distortion_reduction(&t, &s, &a).unwrap() >= eff - 1e-9);
    }
}

#[test]
fn explores_then_settles() {
    let s = learning_single();
    let u = &s.users[0];
    let mut l = PdsLearner::new(u, s.discount, 4).unwrap();
    train(&mut l, u, 20_000, 8);
    let visited = l.table.counts.iter().filter(|&&c| c > 0).count();
    assert!(visited > l.table.counts.len() / 2, "{visited} of {}", l.table.counts.len());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let st = UserState::sampled(&u.template, 0, 0, &mut rng);
    assert!(l.greedy(&st, 0.0).unwrap().is_feasible_for(&st));
}
