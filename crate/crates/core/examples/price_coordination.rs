//! Runs the per-state price loop on a small fixture and prints the
//! converged prices with their slackness residuals.

use foresight::coord::{run_coordination, CoordinationConfig};
use foresight::model::Scenario;

fn main() -> foresight::Result<()> {
    let s = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tiny-bad-state.json"))?;
    let r = run_coordination(&s, &CoordinationConfig::for_scenario(&s))?;
    r.require_converged()?;
    println!("{} updates, {} re-solves", r.iterations, r.resolves);
    let labels = s.channels();
    let joint = s.joint_channel();
    for s0 in 0..joint.count() {
        let usage = r.expected_usage[s0].map_or("-".into(), |u| format!("{u:.4}"));
        let res = r.residuals[s0].map_or("-".into(), |u| format!("{u:.2e}"));
        println!("{:<12} lambda {:.5}  E[usage] {usage}  residual {res}", joint.label(s0, &labels), r.prices.get(s0));
    }
    // last few rows of the price trace
    let mut buf = Vec::new();
    r.write_price_trace(&mut buf)?;
    let text = String::from_utf8_lossy(&buf);
    let lines: Vec<&str> = text.lines().collect();
    println!("{}", lines[0]);
    for l in &lines[lines.len().saturating_sub(4)..] {
        println!("{l}");
    }
    Ok(())
}
