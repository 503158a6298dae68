//! Compares the decentralized priced solution with the centralized
//! constrained MDP on a fixture small enough to solve jointly.

use foresight::coord::{run_coordination, CoordinationConfig};
use foresight::model::Scenario;
use foresight::sim::{centralized_oracle, compare_with_oracle, OracleConfig};

fn main() -> foresight::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tiny-asymmetric.json").into());
    let s = Scenario::resolve(&path)?;
    let oracle = centralized_oracle(&s, &OracleConfig::default())?;
    let r = run_coordination(&s, &CoordinationConfig::for_scenario(&s))?;
    r.require_converged()?;
    let cmp = compare_with_oracle(&s, &oracle, &r.policies, r.prices.prices(), 1e-9)?;
    println!("{} joint states, {} sweeps", oracle.space.state_count(), oracle.iterations);
    println!("oracle        {:.6}", cmp.oracle_value);
    println!("priced users  {:.6}  (gap {:.2e})", cmp.decentralized_value, cmp.relative_gap);
    println!("dual bound    {:.6}  (gap {:.2e})", cmp.dual_value, cmp.duality_gap);
    Ok(())
}
