//! Replays the two-user illustration (good, bad, bad, bad, good) for the
//! myopic and priced solutions and prints the slot table.

use foresight::model::Scenario;
use foresight::sim::report::replay_table;
use foresight::sim::{prepare, run_episode, EpisodeConfig, PrepareConfig, Replay, Solution};

fn main() -> foresight::Result<()> {
    let s = Scenario::preset("illustration-2user")?;
    let replay = Replay::illustration(&s)?;
    let pc = PrepareConfig::for_scenario(&s);
    let mut traces = Vec::new();
    for sol in [Solution::MYOPIC, Solution::PROPOSED, Solution::LYAPUNOV] {
        let p = prepare(&s, sol, &pc)?;
        let cfg = EpisodeConfig { slots: replay.slots(), seed: s.seed, replay: Some(replay.clone()) };
        traces.push(run_episode(&s, &p, &cfg)?);
    }
    print!("{}", replay_table(&s, &traces));
    Ok(())
}
