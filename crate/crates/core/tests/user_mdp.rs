mod common;

use common::*;
use foresight::mdp::*;
use foresight::model::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(u: &UserConfig, price: Vec<f64>, delta: f64) -> PricedUserModel {
    PricedUserModel::for_user(u, ExoChain::own(&u.channel, price), delta).unwrap()
}

fn brute_myopic(u: &UserConfig, s: &UserState, price: f64) -> f64 {
    action_set(&u.template, s, u.min_quality)
        .iter()
        .map(|a| payoff(&u.template, &u.channel, s, a, u.tradeoff).unwrap() - price * a.total() as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn zero_discount_is_the_myopic_argmax() {
    let u = two_du_user(0.3, 0.8);
    let m = model(&u, vec![0.2, 0.5], 0.0);
    let t = solve_priced_mdp(&m, 1e-9).unwrap();
    for pre in 0..m.space.pre_count() {
        for z in 0..m.exo_count() {
            let s = m.space.pre_state(pre, z);
            let want = brute_myopic(&u, &s, m.chain.price[z]);
            assert!((t.value_at(&m, pre, z) - want).abs() < 1e-12, "{s:?}");
        }
    }
}

#[test]
fn huge_price_sends_nothing() {
    let u = two_du_user(0.0, 0.0);
    let m = model(&u, vec![1e6, 1e6], 0.9);
    let t = solve_priced_mdp(&m, 1e-8).unwrap();
    for pre in 0..m.space.pre_count() {
        for z in 0..2 {
            assert_eq!(t.action(&m, pre, z).total(), 0);
        }
    }
}

#[test]
fn single_forced_action_has_value_u() {
    // the floor leaves only "send everything"
    let t = GopTemplate::new(vec![du(0, "I", 2.0, 0, &[(3, 1.0)], &[])], 1, 1).unwrap();
    let u = user(t, channel(&[(1.4, 10.0)], &[&[1.0]]), 0.5, 100.0);
    let m = model(&u, vec![0.0], 0.9);
    let v = solve_priced_mdp(&m, 1e-10).unwrap();
    let want = 6.0 - 0.5 * energy(1.4, 3);
    assert_eq!(m.state_count(), 1);
    assert!((v.value[0] - want).abs() < 1e-9);
}

#[test]
fn two_state_chain_matches_closed_form() {
    // one packet per slot, no foresight: V = (1-d)(I - dP)^-1 u
    let t = GopTemplate::new(vec![du(0, "I", 1.0, 0, &[(1, 1.0)], &[])], 1, 1).unwrap();
    let ch = channel(&[(2.0, 4.0), (0.5, 2.0)], &[&[0.8, 0.2], &[0.3, 0.7]]);
    let u = user(t, ch, 1.0, 0.0);
    let d = 0.9;
    let m = model(&u, vec![0.0, 0.0], d);
    let v = solve_priced_mdp(&m, 1e-12).unwrap();
    let u0 = 1.0 - 1.0 / 2.0; // send in the good state
    let u1 = 0.0; // 1 - 1/0.5 < 0, hold
    let (a, b, c, e) = (1.0 - d * 0.8, -d * 0.2, -d * 0.3, 1.0 - d * 0.7);
    let det = a * e - b * c;
    let v0 = (1.0 - d) * (e * u0 - b * u1) / det;
    let v1 = (1.0 - d) * (-c * u0 + a * u1) / det;
    assert!((v.value[0] - v0).abs() < 1e-9, "{} vs {v0}", v.value[0]);
    assert!((v.value[1] - v1).abs() < 1e-9);
}

fn brute_finite(u: &UserConfig, m: &PricedUserModel, s: &UserState, z: usize, steps: usize) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    let t = &u.template;
    let d = m.delta;
    let mut best = f64::NEG_INFINITY;
    for a in action_set(t, s, u.min_quality) {
        let imm = payoff(t, &u.channel, s, &a, u.tradeoff).unwrap() - m.chain.price[z] * a.total() as f64;
        let next_ctx = t.context(t.next_phase(s.phase) as u64);
        let sup: Vec<Vec<(u32, f64)>> = t
            .fresh(s.phase)
            .iter()
            .map(|&pos| t.du(next_ctx.entries[pos].du).size_pmf.support().to_vec())
            .collect();
        let mut combos = vec![(vec![], 1.0)];
        for sp in &sup {
            combos = combos
                .iter()
                .flat_map(|(c, p): &(Vec<u32>, f64)| {
                    sp.iter().map(move |&(n, q)| {
                        let mut v = c.clone();
                        v.push(n);
                        (v, p * q)
                    })
                })
                .collect();
        }
        let mut cont = 0.0;
        for (arr, pa) in &combos {
            let (ns, _) = advance_with_arrivals(t, s, &a, arr).unwrap();
            for z2 in 0..m.exo_count() {
                let pz = m.chain.transition[z][z2];
                if pz > 0.0 {
                    let mut n2 = ns.clone();
                    n2.channel = z2;
                    cont += pa * pz * brute_finite(u, m, &n2, z2, steps - 1);
                }
            }
        }
        best = best.max((1.0 - d) * imm + d * cont);
    }
    best
}

#[test]
fn finite_horizon_matches_backward_induction() {
    let u = two_du_user(0.4, 0.5);
    let m = model(&u, vec![0.1, 0.3], 0.8);
    let t = solve_finite_horizon(&m, 3);
    for pre in 0..m.space.pre_count() {
        for z in 0..2 {
            let s = m.space.pre_state(pre, z);
            let want = brute_finite(&u, &m, &s, z, 3);
            assert!((t.value_at(&m, pre, z) - want).abs() < 1e-10, "{s:?}: {} vs {want}", t.value_at(&m, pre, z));
        }
    }
}

#[test]
fn zero_price_single_user_is_unconstrained_optimum() {
    let u = two_du_user(0.2, 0.0);
    let priced = solve_priced_mdp(&model(&u, vec![0.0, 0.0], 0.9), 1e-9).unwrap();
    let m = model(&u, vec![0.0, 0.0], 0.9);
    let own = policy_values(&m, &priced.policy, 1e-10);
    for (a, b) in own.iter().zip(&priced.value) {
        assert!((a - b).abs() < 1e-7);
    }
}

#[test]
fn kernel_rows_are_stochastic() {
    let u = two_du_user(0.2, 0.0);
    let m = model(&u, vec![0.1, 0.2], 0.9);
    let t = solve_priced_mdp(&m, 1e-8).unwrap();
    for pre in 0..m.space.pre_count() {
        for z in 0..2 {
            let row = transitions(&m, pre, z, t.choice(&m, pre, z));
            let s: f64 = row.iter().map(|r| r.2).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn monte_carlo_agrees_with_exact_evaluation() {
    let u = two_du_user(0.3, 0.0);
    let m = model(&u, vec![0.1, 0.2], 0.8);
    let t = solve_priced_mdp(&m, 1e-9).unwrap();
    let exact = policy_values(&m, &t.policy, 1e-12);
    let mean = exact.iter().sum::<f64>() / exact.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let runs: Vec<f64> = (0..40).map(|_| evaluate_policy(&m, &t.policy, 500, 80, &mut rng)).collect();
    let avg = runs.iter().sum::<f64>() / runs.len() as f64;
    let var = runs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (runs.len() - 1) as f64;
    let se = (var / runs.len() as f64).sqrt();
    assert!((avg - mean).abs() < 3.0 * se + 1e-4, "{avg} vs {mean} (se {se})");
}

#[test]
fn linear_system_matches_value_iteration() {
    use nalgebra::{DMatrix, DVector};
    let u = two_du_user(0.3, 0.4);
    let m = model(&u, vec![0.05, 0.3], 0.9);
    let t = solve_priced_mdp(&m, 1e-10).unwrap();
    let n = m.state_count();
    assert!(n <= 200);
    let zc = m.exo_count();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        let (pre, z) = (i / zc, i % zc);
        let c = t.policy[i];
        // priced payoff, so the fixed point is the priced value
        b[i] = (1.0 - m.delta) * (m.payoff_of(pre, z, c) - m.chain.price[z] * m.packets_of(pre, c) as f64);
        for (p2, z2, p) in transitions(&m, pre, z, c) {
            a[(i, p2 * zc + z2)] -= m.delta * p;
        }
    }
    let x = a.lu().solve(&b).unwrap();
    for i in 0..n {
        assert!((x[i] - t.value[i]).abs() < 1e-6, "{i}: {} vs {}", x[i], t.value[i]);
    }
}

#[test]
fn csv_dump_has_one_row_per_state() {
    let u = two_du_user(0.3, 0.0);
    let m = model(&u, vec![0.0, 0.0], 0.5);
    let t = solve_priced_mdp(&m, 1e-8).unwrap();
    let mut buf = Vec::new();
    write_value_csv(&m, &t, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), m.state_count() + 1);
    assert!(text.starts_with("state_id,value,action"));
}

#[test]
fn illustration_solve_is_fast_enough() {
    let s = Scenario::preset("illustration-2user").unwrap();
    let u = &s.users[0];
    let m = PricedUserModel::for_user(u, ExoChain::own(&u.channel, vec![0.001, 0.002]), 0.95).unwrap();
    let t = solve_priced_mdp(&m, 1e-6).unwrap();
    assert!(t.iterations > 10);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_user() -> impl Strategy<Value = UserConfig> {
        (arb_template(), 0.05f64..0.95, 0.05f64..0.95, 0.0f64..0.5, 0.0f64..3.0).prop_map(|(t, p, q, beta, d)| {
            let ch = channel(&[(1.5, 8.0), (0.6, 3.0)], &[&[1.0 - p, p], &[q, 1.0 - q]]);
            user(t, ch, beta, d)
        })
    }

    fn arb_model() -> impl Strategy<Value = (UserConfig, PricedUserModel)> {
        (arb_user(), 0.0f64..0.95, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(u, delta, p0, p1)| {
            let m = model(&u, vec![p0, p1], delta);
            (u, m)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn backup_is_a_contraction((_u, m) in arb_model(), seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = m.state_count();
            let v1: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v2: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let t1 = bellman_backup(&m, &v1);
            let t2 = bellman_backup(&m, &v2);
            prop_assert!(gap(&t1.value, &t2.value) <= m.delta * gap(&v1, &v2) + 1e-9);
        }

        #[test]
        fn greedy_total_falls_with_price((_u, m) in arb_model(), seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let value: Vec<f64> = (0..m.state_count()).map(|_| rng.gen_range(0.0..3.0)).collect();
            let post = post_values(&m, &value);
            for pre in 0..m.space.pre_count() {
                for z in 0..m.exo_count() {
                    let mut last = u32::MAX;
                    for k in 0..25 {
                        let price = k as f64 * 0.1;
                        let (c, _) = greedy_choice(&m, &post, pre, z, price);
                        let n = m.packets_of(pre, c);
                        prop_assert!(n <= last, "pre {} z {} price {}: {} after {}", pre, z, price, n, last);
                        last = n;
                    }
                }
            }
        }

        #[test]
        fn solved_actions_meet_the_floor((u, m) in arb_model()) {
            let t = solve_priced_mdp(&m, 1e-6).unwrap();
            for pre in 0..m.space.pre_count() {
                for z in 0..m.exo_count() {
                    let s = m.space.pre_state(pre, z);
                    let a = t.action(&m, pre, z);
                    let eff = effective_min_quality(&u.template, &s, u.min_quality);
                    prop_assert!(distortion_reduction(&u.template, &s, &a).unwrap() >= eff - 1e-9);
                }
            }
        }

        #[test]
        fn value_iteration_matches_policy_evaluation((_u, m) in arb_model()) {
            // policy evaluation scores unpriced payoffs
            let m = m.with_prices(vec![0.0; m.exo_count()]).unwrap();
            let t = solve_priced_mdp(&m, 1e-10).unwrap();
            let exact = policy_values(&m, &t.policy, 1e-13);
            for (a, b) in t.value.iter().zip(&exact) {
                prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
            }
        }
    }
}
