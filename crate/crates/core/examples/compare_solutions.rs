//! Mean discounted utility of every solution on the illustration over a
//! handful of seeds. Pass a seed count to change it.

use foresight::model::Scenario;
use foresight::sim::{prepare, run_seeds, Allocation, PrepareConfig, Solution};

fn main() -> foresight::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let s = Scenario::preset("illustration-2user")?;
    let seeds: Vec<u64> = (0..n).map(|k| s.seed + k).collect();
    let pc = PrepareConfig::for_scenario(&s);
    // one coordination run serves every scheduler on the priced allocation
    let priced = prepare(&s, Solution::PROPOSED, &pc)?;
    let names = ["proposed", "lyapunov", "proposed+edf", "proposed+hdf", "mu-mdp", "myopic", "myopic+hdf", "myopic+fifo"];
    for name in names {
        let sol: Solution = name.parse()?;
        let p = if sol.allocation == Allocation::Proposed {
            let mut p = priced.clone();
            p.solution = sol;
            p
        } else {
            prepare(&s, sol, &pc)?
        };
        let rs = run_seeds(&s, &p, &seeds, s.horizon)?;
        let u: Vec<f64> = rs.iter().map(|r| r.network_discounted()).collect();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        let lost: u64 = rs.iter().map(|r| r.i_loss_after_first()).sum();
        println!("{name:<14} {mean:.4}   I packets lost after slot 1: {lost}");
    }
    Ok(())
}
