//! Learns post-decision values online on a single-user fixture and prints
//! a learning curve as CSV, with the sup-norm gap to the planned values.

use foresight::mdp::{solve_priced_mdp, ExoChain, PricedUserModel};
use foresight::model::{advance_traffic, payoff, Scenario, UserState};
use foresight::pds::{write_learning_curve, LearningCurveRow, PdsLearner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> foresight::Result<()> {
    let s = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/learning-single.json"))?;
    let u = &s.users[0];
    let zero = vec![0.0; u.channel.len()];
    let m = PricedUserModel::for_user(u, ExoChain::own(&u.channel, zero), s.discount)?;
    let plan = solve_priced_mdp(&m, 1e-10)?;

    let mut learner = PdsLearner::new(u, s.discount, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut st = UserState::sampled(&u.template, 0, 0, &mut rng);
    let (mut rows, mut window) = (Vec::new(), 0.0);
    for slot in 1..=100_000 {
        let a = learner.step(&st, 0.0)?;
        window += payoff(&u.template, &u.channel, &st, &a, u.tradeoff)?;
        let (mut next, _) = advance_traffic(&u.template, &st, &a, &mut rng)?;
        next.channel = u.channel.sample(st.channel, &mut rng);
        st = next;
        if slot % 10_000 == 0 {
            let (gap, range) = learner.table.sup_gap(&plan.post);
            rows.push(LearningCurveRow { slot, user: 0, payoff: window / 10_000.0, gap: Some(gap / range) });
            window = 0.0;
        }
    }
    write_learning_curve(&rows, std::io::stdout())
}
