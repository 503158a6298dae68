//! A fixture where bandwidth is scarce only when both channels are bad:
//! one price for all states over-charges the others.

use foresight::model::Scenario;
use foresight::sim::{prepare, run_seeds, PrepareConfig, Solution};

fn main() -> foresight::Result<()> {
    let s = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tiny-bad-state.json"))?;
    let pc = PrepareConfig::for_scenario(&s);
    let seeds: Vec<u64> = (0..100).map(|k| s.seed + k).collect();
    let labels = s.channels();
    let joint = s.joint_channel();
    let mut means = Vec::new();
    for sol in [Solution::PROPOSED, Solution::MU_MDP] {
        let p = prepare(&s, sol, &pc)?;
        let prices = p.prices.as_ref().expect("priced solution");
        let shown: Vec<String> = (0..joint.count())
            .map(|k| format!("{}={:.4}", joint.label(k, &labels), prices.get(k)))
            .collect();
        let rs = run_seeds(&s, &p, &seeds, s.horizon)?;
        let m = rs.iter().map(|r| r.network_discounted()).sum::<f64>() / rs.len() as f64;
        println!("{:<9} {m:.6}  prices {}", sol.to_string(), shown.join(" "));
        means.push(m);
    }
    println!("per-state pricing gains {:.2}%", 100.0 * (means[0] / means[1] - 1.0));
    Ok(())
}
