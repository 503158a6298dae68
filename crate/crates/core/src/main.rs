use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use foresight::coord::run_coordination;
use foresight::model::Scenario;
use foresight::sim::report::{emit_report, replay_table};
use foresight::sim::{
    centralized_oracle, compare_with_oracle, prepare, run_episode, run_seeds, EpisodeConfig, MetricsReport, OracleConfig,
    PrepareConfig, Replay, Solution,
};
use foresight::Result;

#[derive(Parser)]
#[command(name = "foresight", about = "Multi-user video scheduling with per-channel-state prices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one solution and write traces and metrics.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "proposed")]
        solution: String,
        #[arg(long)]
        slots: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate several solutions on the same seeds and print their metrics.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_value = "proposed,mu-mdp,lyapunov,myopic")]
        solutions: Vec<String>,
        #[arg(long)]
        slots: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the joint problem centrally and compare with the priced users.
    Oracle {
        #[arg(long)]
        scenario: String,
    },
    /// Replay a pinned channel sequence and print the slot table.
    Replay {
        #[arg(long, default_value = "illustration-2user")]
        fixture: String,
        #[arg(long, value_delimiter = ',', default_value = "proposed")]
        solution: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse_solutions(names: &[String]) -> Result<Vec<Solution>> {
    names.iter().map(|n| n.trim().parse()).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            scenario,
            solution,
            slots,
            seed,
            out,
        } => {
            let s = Scenario::resolve(&scenario)?;
            let sol: Solution = solution.parse()?;
            let prepared = prepare(&s, sol, &PrepareConfig::for_scenario(&s))?;
            let cfg = EpisodeConfig {
                slots: slots.unwrap_or(s.horizon),
                seed: seed.unwrap_or(s.seed),
                replay: None,
            };
            let trace = run_episode(&s, &prepared, &cfg)?;
            let report = MetricsReport::from_trace(&s, &trace);
            emit_report(&out, &s, std::slice::from_ref(&trace), std::slice::from_ref(&report))?;
            if let Some(c) = &prepared.coordination {
                let p = out.join("prices.csv");
                let f = std::fs::File::create(&p).map_err(|e| foresight::Error::Usage(format!("{}: {e}", p.display())))?;
                c.write_price_trace(f)?;
            }
            println!(
                "{} on {}: discounted {:.6}, mean payoff {:.6}, I loss after slot 1: {}",
                report.solution,
                report.scenario,
                report.network_discounted(),
                report.network_mean_payoff(),
                report.i_loss_after_first()
            );
        }
        Cmd::Compare {
            scenario,
            solutions,
            slots,
            seeds,
            out,
        } => {
            let s = Scenario::resolve(&scenario)?;
            let pc = PrepareConfig::for_scenario(&s);
            let mut reports = Vec::new();
            let mut traces = Vec::new();
            let slots = slots.unwrap_or(s.horizon);
            let seed_list: Vec<u64> = (0..seeds).map(|k| s.seed + k).collect();
            for sol in parse_solutions(&solutions)? {
                let prepared = prepare(&s, sol, &pc)?;
                let rs = run_seeds(&s, &prepared, &seed_list, slots)?;
                let mean = rs.iter().map(|r| r.network_discounted()).sum::<f64>() / rs.len().max(1) as f64;
                println!("{:<24} mean discounted utility {:.6}", sol.to_string(), mean);
                if out.is_some() {
                    let cfg = EpisodeConfig {
                        slots,
                        seed: s.seed,
                        replay: None,
                    };
                    traces.push(run_episode(&s, &prepared, &cfg)?);
                }
                reports.extend(rs);
            }
            if let Some(dir) = out {
                emit_report(&dir, &s, &traces, &reports)?;
            }
        }
        Cmd::Oracle { scenario } => {
            let s = Scenario::resolve(&scenario)?;
            let oracle = centralized_oracle(&s, &OracleConfig::default())?;
            let coord = run_coordination(&s, &foresight::coord::CoordinationConfig::for_scenario(&s))?;
            coord.require_converged()?;
            let cmp = compare_with_oracle(&s, &oracle, &coord.policies, coord.prices.prices(), 1e-9)?;
            println!("joint states          {}", oracle.space.state_count());
            println!("oracle utility        {:.9}", cmp.oracle_value);
            println!("decentralized utility {:.9}", cmp.decentralized_value);
            println!("relative gap          {:.3e}", cmp.relative_gap);
            println!("dual bound            {:.9}", cmp.dual_value);
            println!("duality gap           {:.3e}", cmp.duality_gap);
            println!("decomposition resid.  {:.3e}", cmp.decomposition_residual);
            println!("max price residual    {:.3e}", coord.max_residual());
        }
        Cmd::Replay { fixture, solution, out } => {
            let s = Scenario::resolve(&fixture)?;
            let replay = Replay::illustration(&s)?;
            let pc = PrepareConfig::for_scenario(&s);
            let mut traces = Vec::new();
            let mut reports = Vec::new();
            for sol in parse_solutions(&solution)? {
                let prepared = prepare(&s, sol, &pc)?;
                let cfg = EpisodeConfig {
                    slots: replay.slots(),
                    seed: s.seed,
                    replay: Some(replay.clone()),
                };
                let trace = run_episode(&s, &prepared, &cfg)?;
                reports.push(MetricsReport::from_trace(&s, &trace));
                traces.push(trace);
            }
            print!("{}", replay_table(&s, &traces));
            if let Some(dir) = out {
                emit_report(&dir, &s, &traces, &reports)?;
            }
        }
    }
    Ok(())
}
