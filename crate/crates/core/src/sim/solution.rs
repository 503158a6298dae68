//! Named solutions: a resource allocation paired with a packet scheduler.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{myopic_policy, static_shares, uniform_price_solve, MyopicPolicy, UniformConfig, UniformPriceSolution};
use crate::coord::{
    fit_to_budget, run_coordination, update_prices, usages, user_price, view_prices, CoordinationConfig,
    CoordinationReport, PriceTable,
};
use crate::error::{Error, Result};
use crate::mdp::ExoChain;
use crate::model::{advance_traffic, Scenario};
use crate::pds::PdsLearner;
use crate::sched::{DuTables, SimpleScheduler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Allocation {
    /// Per-joint-channel-state prices.
    Proposed,
    /// Static shares by distortion impact.
    Myopic,
    /// One price for every channel state, scaled up to the full bandwidth.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheduling {
    /// Each user's solved priced MDP.
    Optimal,
    /// Round-by-round DU scheduling with single-DU value tables.
    Decomposed,
    /// Post-decision values learned online.
    Learning,
    /// Quadratic backlog drift within the allocated capacity.
    Lyapunov,
    Simple(SimpleScheduler),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Solution {
    pub allocation: Allocation,
    pub scheduling: Scheduling,
}

impl Solution {
    pub const PROPOSED: Solution = Solution {
        allocation: Allocation::Proposed,
        scheduling: Scheduling::Optimal,
    };
    pub const MYOPIC: Solution = Solution {
        allocation: Allocation::Myopic,
        scheduling: Scheduling::Simple(SimpleScheduler::Edf),
    };
    pub const LYAPUNOV: Solution = Solution {
        allocation: Allocation::Proposed,
        scheduling: Scheduling::Lyapunov,
    };
    pub const MU_MDP: Solution = Solution {
        allocation: Allocation::Uniform,
        scheduling: Scheduling::Optimal,
    };

    /// Whether users exchange a price and a request every slot.
    pub fn is_priced(&self) -> bool {
        self.allocation != Allocation::Myopic
    }
}

impl FromStr for Solution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let named = match s {
            "proposed" => Some(Solution::PROPOSED),
            "proposed-dag" => Some(Solution {
                allocation: Allocation::Proposed,
                scheduling: Scheduling::Decomposed,
            }),
            "proposed-learning" => Some(Solution {
                allocation: Allocation::Proposed,
                scheduling: Scheduling::Learning,
            }),
            "myopic" => Some(Solution::MYOPIC),
            "lyapunov" => Some(Solution::LYAPUNOV),
            "mu-mdp" | "uniform" => Some(Solution::MU_MDP),
            _ => None,
        };
        if let Some(n) = named {
            return Ok(n);
        }
        let bad = || Error::validation("solution", format!("unknown solution {s:?}"));
        let (a, b) = s.split_once('+').ok_or_else(bad)?;
        let allocation = match a {
            "proposed" => Allocation::Proposed,
            "myopic" => Allocation::Myopic,
            "uniform" | "mu-mdp" => Allocation::Uniform,
            _ => return Err(bad()),
        };
        let scheduling = match b {
            "optimal" => Scheduling::Optimal,
            "dag" => Scheduling::Decomposed,
            "learning" => Scheduling::Learning,
            "lyapunov" => Scheduling::Lyapunov,
            "edf" => Scheduling::Simple(SimpleScheduler::Edf),
            "fifo" => Scheduling::Simple(SimpleScheduler::Fifo),
            "hdf" => Scheduling::Simple(SimpleScheduler::Hdf),
            _ => return Err(bad()),
        };
        let sol = Solution { allocation, scheduling };
        let supported = match allocation {
            Allocation::Proposed => true,
            Allocation::Myopic => matches!(scheduling, Scheduling::Simple(_) | Scheduling::Lyapunov),
            Allocation::Uniform => scheduling == Scheduling::Optimal,
        };
        if !supported {
            return Err(Error::validation("solution", format!("{s:?} pairs an allocation with a scheduler it cannot drive")));
        }
        Ok(sol)
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let named = match *self {
            Solution::PROPOSED => Some("proposed"),
            Solution::MYOPIC => Some("myopic"),
            Solution::LYAPUNOV => Some("lyapunov"),
            Solution::MU_MDP => Some("mu-mdp"),
            _ => None,
        };
        if let Some(n) = named {
            return f.write_str(n);
        }
        let a = match self.allocation {
            Allocation::Proposed => "proposed",
            Allocation::Myopic => "myopic",
            Allocation::Uniform => "uniform",
        };
        let b = match self.scheduling {
            Scheduling::Optimal => "optimal",
            Scheduling::Decomposed => "dag",
            Scheduling::Learning => "learning",
            Scheduling::Lyapunov => "lyapunov",
            Scheduling::Simple(s) => s.name(),
        };
        if self.allocation == Allocation::Proposed && matches!(self.scheduling, Scheduling::Decomposed | Scheduling::Learning) {
            return write!(f, "proposed-{}", if b == "dag" { "dag" } else { b });
        }
        write!(f, "{a}+{b}")
    }
}

/// Options of the solve step.
#[derive(Debug, Clone)]
pub struct PrepareConfig {
    pub coordination: CoordinationConfig,
    pub uniform: UniformConfig,
    /// Online training slots of the learning variant.
    pub train_slots: usize,
}

impl PrepareConfig {
    pub fn for_scenario(s: &Scenario) -> Self {
        PrepareConfig {
            coordination: CoordinationConfig::for_scenario(s),
            uniform: UniformConfig::for_scenario(s),
            train_slots: 50_000,
        }
    }
}

/// Everything a solution needs before the episode starts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub solution: Solution,
    pub coordination: Option<CoordinationReport>,
    pub uniform: Option<UniformPriceSolution>,
    pub myopic: Option<MyopicPolicy>,
    pub du_tables: Option<Vec<DuTables>>,
    pub learners: Option<Vec<PdsLearner>>,
    /// Prices announced by the coordinator, per joint channel state.
    pub prices: Option<PriceTable>,
}

/// Solves or trains whatever `solution` needs on `scenario`.
pub fn prepare(scenario: &Scenario, solution: Solution, cfg: &PrepareConfig) -> Result<Prepared> {
    let mut p = Prepared {
        solution,
        coordination: None,
        uniform: None,
        myopic: None,
        du_tables: None,
        learners: None,
        prices: None,
    };
    match solution.allocation {
        Allocation::Myopic => {
            let mut m = myopic_policy(scenario);
            if let Scheduling::Simple(s) = solution.scheduling {
                m.scheduler = s;
            }
            p.myopic = Some(m);
        }
        Allocation::Uniform => {
            let u = uniform_price_solve(scenario, &cfg.uniform)?;
            p.prices = Some(PriceTable::fixed(vec![u.lambda; scenario.joint_channel().count()]));
            p.uniform = Some(u);
        }
        Allocation::Proposed if solution.scheduling == Scheduling::Learning => {
            let (prices, learners) = train_learners(scenario, cfg)?;
            p.prices = Some(prices);
            p.learners = Some(learners);
        }
        Allocation::Proposed => {
            let r = run_coordination(scenario, &cfg.coordination)?;
            r.require_converged()?;
            p.prices = Some(PriceTable::fixed(r.prices.prices().to_vec()));
            if solution.scheduling == Scheduling::Decomposed {
                let joint = scenario.joint_channel();
                let tables = scenario
                    .users
                    .iter()
                    .enumerate()
                    .map(|(i, u)| {
                        let price = view_prices(scenario, &joint, r.prices.prices(), i, crate::model::PriceView::Expected);
                        DuTables::build(u, &ExoChain::own(&u.channel, price), scenario.discount)
                    })
                    .collect();
                p.du_tables = Some(tables);
            }
            p.coordination = Some(r);
        }
    }
    Ok(p)
}

/// Online prices and post-decision values learned together: every slot the
/// users act on their learned values at the announced prices and the
/// coordinator updates the visited state's price from the requests.
fn train_learners(scenario: &Scenario, cfg: &PrepareConfig) -> Result<(PriceTable, Vec<PdsLearner>)> {
    let joint = scenario.joint_channel();
    let mut prices = PriceTable::new(joint.count());
    let mut learners = scenario
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| PdsLearner::new(u, scenario.discount, cfg.coordination.seed.wrapping_add(i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.coordination.seed ^ 0x1ea5);
    let mut plant = crate::coord::run::Plant::start(scenario, &mut rng);
    for _ in 0..cfg.train_slots {
        let s0 = plant.s0(scenario);
        let lam = prices.get(s0);
        let mut requests = Vec::with_capacity(learners.len());
        for (i, l) in learners.iter_mut().enumerate() {
            let st = &plant.states[i];
            let price = user_price(lam, scenario.users[i].channel.rate(st.channel), scenario.bits_per_packet);
            requests.push(l.step(st, price)?);
        }
        let bw = usages(scenario, &joint, s0, &requests);
        update_prices(&mut prices, s0, &bw, scenario.bandwidth);
        let sent = fit_to_budget(scenario, &joint, s0, &plant.states, &requests);
        for (i, u) in scenario.users.iter().enumerate() {
            learners[i].override_last(&plant.states[i], &sent[i])?;
            let (mut next, _) = advance_traffic(&u.template, &plant.states[i], &sent[i], &mut rng)?;
            next.channel = u.channel.sample(plant.states[i].channel, &mut rng);
            plant.states[i] = next;
        }
    }
    Ok((PriceTable::fixed(prices.prices().to_vec()), learners))
}

/// Bandwidth shares implied by priced requests: proportional to the
/// requests and summing to one, or the static shares when nobody asks.
pub fn normalized_shares(scenario: &Scenario, requested: &[f64]) -> Vec<f64> {
    let total: f64 = requested.iter().sum();
    if total > 0.0 {
        requested.iter().map(|r| r / total).collect()
    } else {
        static_shares(scenario)
    }
}
