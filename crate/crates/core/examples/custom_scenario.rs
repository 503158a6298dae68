//! Builds a scenario from JSON, shows how validation reports a bad field,
//! then solves one user's priced MDP at a few prices.

use foresight::mdp::{solve_priced_mdp, ExoChain, PricedUserModel};
use foresight::model::Scenario;

const SCENARIO: &str = r#"{
  "name": "one-user",
  "discount": 0.9,
  "users": [{
    "name": "cam",
    "tradeoff": 0.1,
    "gop": {
      "period": 2, "window": 2,
      "dus": [
        {"label": "I", "distortion_impact": 1.0, "deadline_offset": 0, "size_pmf": [[2, 0.5], [3, 0.5]]},
        {"label": "P", "distortion_impact": 0.4, "deadline_offset": 1, "size_pmf": [[1, 1.0]], "parents": [0]}
      ]
    },
    "channel": {
      "states": [{"name": "good", "gain_to_noise": 2.0, "rate": 4}, {"name": "bad", "gain_to_noise": 0.5, "rate": 2}],
      "transition": [[0.8, 0.2], [0.4, 0.6]]
    }
  }]
}"#;

fn main() -> foresight::Result<()> {
    let broken = SCENARIO.replace("[[1, 1.0]]", "[[1, 0.7]]");
    match Scenario::from_json_str(&broken) {
        Err(e) => println!("rejected (exit code {}): {e}", e.exit_code()),
        Ok(_) => unreachable!(),
    }

    let s = Scenario::from_json_str(SCENARIO)?;
    let u = &s.users[0];
    for price in [0.0, 0.2, 0.5] {
        let m = PricedUserModel::for_user(u, ExoChain::own(&u.channel, vec![price; 2]), s.discount)?;
        let v = solve_priced_mdp(&m, 1e-9)?;
        println!("price {price:.1}: {} states, mean value {:.4}", m.state_count(), v.mean_value());
    }
    Ok(())
}
