use crate::mdp::solver::beats;
use crate::model::{energy, GopTemplate, ScheduleAction, UserConfig, UserState};
use crate::sched::{decomposed_schedule, DecomposedOutcome, DuContinuation, RoundParams};

/// Learned single-DU post-decision values `U_n(r, x~, h)`: the expected
/// value of a DU with `r` slots left after the current one and `x~`
/// packets left, seen from channel `h`.
#[derive(Debug, Clone)]
pub struct DuPdsTables {
    /// `u[du][r][left][h]`, `r >= 1`; row 0 stays zero.
    u: Vec<Vec<Vec<Vec<f64>>>>,
    counts: Vec<Vec<Vec<Vec<u64>>>>,
    impact: Vec<f64>,
    beta: f64,
    gain: Vec<f64>,
    delta: f64,
}

impl DuPdsTables {
    pub fn new(user: &UserConfig, delta: f64) -> Self {
        let t = &user.template;
        let zc = user.channel.len();
        let w = t.window() as usize;
        let shape = |cap: u32| vec![vec![vec![0.0; zc]; cap as usize + 1]; w];
        let u: Vec<_> = t.dus().iter().map(|d| shape(d.size_pmf.max())).collect();
        let counts = t
            .dus()
            .iter()
            .map(|d| vec![vec![vec![0u64; zc]; d.size_pmf.max() as usize + 1]; w])
            .collect();
        DuPdsTables {
            u,
            counts,
            impact: t.dus().iter().map(|d| d.distortion_impact).collect(),
            beta: user.tradeoff,
            gain: (0..zc).map(|h| user.channel.gain_to_noise(h)).collect(),
            delta,
        }
    }

    pub fn value(&self, du: usize, remaining: u32, left: u32, h: usize) -> f64 {
        self.u[du][remaining as usize][left as usize][h]
    }

    pub fn visits(&self, du: usize, remaining: u32, left: u32, h: usize) -> u64 {
        self.counts[du][remaining as usize][left as usize][h]
    }

    /// Best single-DU value with `r` slots left after the current one.
    fn greedy_value(&self, du: usize, r: u32, x: u32, h: usize, price: f64) -> f64 {
        let d = self.delta;
        let q = self.impact[du];
        let mut best = f64::NEG_INFINITY;
        for y in 0..=x {
            let imm = (q - price) * y as f64 - self.beta * energy(self.gain[h], y);
            let cont = if r == 0 { 0.0 } else { self.value(du, r, x - y, h) };
            let v = (1.0 - d) * imm + d * cont;
            if beats(v, best) {
                best = v;
            }
        }
        best
    }

    /// Updates every carried DU of the slot just played from the realized
    /// next channel and the per-packet price announced there.
    pub fn observe(
        &mut self,
        template: &GopTemplate,
        state: &UserState,
        action: &ScheduleAction,
        next_channel: usize,
        price_next: f64,
    ) {
        let ctx = state.context(template);
        for (pos, e) in ctx.entries.iter().enumerate() {
            if e.remaining == 0 {
                continue;
            }
            let left = state.buffer[pos] - action.sends[pos];
            let v = self.greedy_value(e.du, e.remaining - 1, left, next_channel, price_next);
            let cell = &mut self.counts[e.du][e.remaining as usize][left as usize][state.channel];
            *cell += 1;
            let k = *cell as f64;
            let u = &mut self.u[e.du][e.remaining as usize][left as usize][state.channel];
            *u += (v - *u) / k;
        }
    }
}

impl DuContinuation for DuPdsTables {
    fn continuation(&self, du: usize, remaining: u32, left: u32, z: usize) -> f64 {
        if remaining == 0 {
            0.0
        } else {
            self.value(du, remaining, left, z)
        }
    }
}

/// Round-by-round scheduling with learned per-DU values in place of the
/// planned ones.
pub fn pds_decomposed_schedule(
    template: &GopTemplate,
    state: &UserState,
    params: &RoundParams,
    tables: &DuPdsTables,
) -> DecomposedOutcome {
    decomposed_schedule(template, state, state.channel, params, tables)
}
