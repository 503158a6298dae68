//! Schedules one slot of an I-P-B group round by round and compares the
//! result with the fixed-order schedulers at the same packet count.

use foresight::mdp::ExoChain;
use foresight::model::{distortion_reduction, Scenario, UserState};
use foresight::sched::{decomposed_schedule, dependency_order_check, DuTables, RoundParams, RoundPrice, SimpleScheduler};

fn main() -> foresight::Result<()> {
    let s = Scenario::preset("illustration-2user")?;
    let u = &s.users[0];
    let t = &u.template;
    let state = UserState::full(t, 0, 0);
    let ctx = state.context(t);
    let labels: Vec<&str> = ctx.entries.iter().map(|e| t.du(e.du).label.as_str()).collect();
    println!("context {labels:?}, buffer {:?}, edges {:?}", state.buffer, ctx.edges);

    let tables = DuTables::build(u, &ExoChain::own(&u.channel, vec![0.004, 0.004]), s.discount);
    for price in [0.0, 0.004, 0.05] {
        let p = RoundParams {
            price,
            rounds: RoundPrice::Current,
            beta: u.tradeoff,
            gain_to_noise: u.channel.gain_to_noise(0),
            delta: s.discount,
            min_quality: u.min_quality,
        };
        let out = decomposed_schedule(t, &state, 0, &p, &tables);
        assert!(dependency_order_check(&ctx.edges, &out.order));
        let order: Vec<&str> = out.order.iter().map(|&i| labels[i]).collect();
        let cap = out.action.total();
        print!("price {price:<6} order {order:?} sends {:?} gain {:.3}", out.action.sends, distortion_reduction(t, &state, &out.action)?);
        for sched in [SimpleScheduler::Edf, SimpleScheduler::Hdf] {
            let a = sched.schedule(t, &state, cap);
            print!(" | {} {:.3}", sched.name(), distortion_reduction(t, &state, &a)?);
        }
        println!();
    }
    Ok(())
}
