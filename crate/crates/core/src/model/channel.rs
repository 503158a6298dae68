//! Finite-state Markov channel and the joint channel state seen by the
//! coordinator.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub name: String,
    /// `|h|^2 / sigma^2`, dimensionless.
    pub gain_to_noise: f64,
    /// Data rate at full bandwidth, bits per slot.
    pub rate: f64,
}

/// Finite-state Markov chain over channel conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    states: Vec<ChannelState>,
    transition: Vec<Vec<f64>>,
}

impl ChannelModel {
    pub fn new(states: Vec<ChannelState>, transition: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::validation("states", "channel has no states"));
        }
        for (i, s) in states.iter().enumerate() {
            if !(s.rate > 0.0 && s.rate.is_finite()) {
                return Err(Error::validation(format!("states[{i}].rate"), "must be > 0"));
            }
            if !(s.gain_to_noise > 0.0 && s.gain_to_noise.is_finite()) {
                return Err(Error::validation(format!("states[{i}].gain_to_noise"), "must be > 0"));
            }
        }
        if transition.len() != states.len() {
            return Err(Error::validation(
                "transition",
                format!("{} rows for {} states", transition.len(), states.len()),
            ));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != states.len() {
                return Err(Error::validation(format!("transition[{i}]"), "wrong row length"));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::validation(format!("transition[{i}]"), "entries must lie in [0,1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!("transition[{i}]"), format!("row sums to {sum}")));
            }
        }
        Ok(ChannelModel { states, transition })
    }

    /// Channel that never leaves its single state.
    pub fn constant(gain_to_noise: f64, rate: f64) -> Result<Self> {
        Self::new(
            vec![ChannelState {
                name: "fixed".into(),
                gain_to_noise,
                rate,
            }],
            vec![vec![1.0]],
        )
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ChannelState] {
        &self.states
    }

    pub fn state(&self, h: usize) -> &ChannelState {
        &self.states[h]
    }

    pub fn rate(&self, h: usize) -> f64 {
        self.states[h].rate
    }

    pub fn gain_to_noise(&self, h: usize) -> f64 {
        self.states[h].gain_to_noise
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from][to]
    }

    /// Draws the next channel state from row `h`.
    pub fn sample<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> usize {
        sample_row(&self.transition[h], rng)
    }

    /// Stationary distribution by power iteration on the lazy chain
    /// `(I + P) / 2`, which converges for every finite chain.
    pub fn stationary(&self) -> Vec<f64> {
        stationary(&self.transition)
    }
}

pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

pub(crate) fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += pi[i] * 0.5 * (p[i][j] + if i == j { 1.0 } else { 0.0 });
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter().map(|x| x / s).collect()
}

/// Product of the users' independent channel chains. A joint state `s0` is
/// encoded mixed-radix with user 0 as the least significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointChannel {
    radices: Vec<usize>,
    transition: Vec<Vec<f64>>,
}

impl JointChannel {
    pub fn new(channels: &[&ChannelModel]) -> Self {
        let radices: Vec<usize> = channels.iter().map(|c| c.len()).collect();
        let count: usize = radices.iter().product();
        let mut transition = vec![vec![0.0; count]; count];
        for (from, row) in transition.iter_mut().enumerate() {
            let hs = decode(&radices, from);
            for (to, cell) in row.iter_mut().enumerate() {
                let gs = decode(&radices, to);
                *cell = channels
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.prob(hs[i], gs[i]))
                    .product();
            }
        }
        JointChannel { radices, transition }
    }

    pub fn count(&self) -> usize {
        self.transition.len()
    }

    pub fn users(&self) -> usize {
        self.radices.len()
    }

    pub fn encode(&self, hs: &[usize]) -> usize {
        hs.iter()
            .zip(&self.radices)
            .rev()
            .fold(0, |acc, (h, r)| acc * r + h)
    }

    pub fn decode(&self, s0: usize) -> Vec<usize> {
        decode(&self.radices, s0)
    }

    /// Channel index of `user` inside joint state `s0`.
    pub fn component(&self, s0: usize, user: usize) -> usize {
        let below: usize = self.radices[..user].iter().product();
        (s0 / below) % self.radices[user]
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> Vec<f64> {
        stationary(&self.transition)
    }

    /// Human readable label such as `good|bad`.
    pub fn label(&self, s0: usize, channels: &[&ChannelModel]) -> String {
        self.decode(s0)
            .iter()
            .zip(channels)
            .map(|(h, c)| c.state(*h).name.clone())
            .collect::<Vec<_>>()
            .join("|")
    }
}

fn decode(radices: &[usize], mut idx: usize) -> Vec<usize> {
    radices
        .iter()
        .map(|r| {
            let d = idx % r;
            idx /= r;
            d
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn two_state(p: [[f64; 2]; 2]) -> ChannelModel {
        ChannelModel::new(
            vec![
                ChannelState { name: "good".into(), gain_to_noise: 1.4, rate: 60.0 },
                ChannelState { name: "bad".into(), gain_to_noise: 1.4, rate: 40.0 },
            ],
            p.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_chain_never_moves() {
        let c = two_state([[1.0, 0.0], [0.0, 1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for h in 0..2 {
            for _ in 0..100 {
                assert_eq!(c.sample(h, &mut rng), h);
            }
        }
    }

    #[test]
    fn empirical_row_frequency() {
        let c = two_state([[0.7, 0.3], [0.4, 0.6]]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let good = (0..n).filter(|_| c.sample(0, &mut rng) == 0).count();
        let freq = good as f64 / n as f64;
        assert!((freq - 0.7).abs() < 0.02, "{freq}");
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = ChannelModel::new(
            vec![
                ChannelState { name: "a".into(), gain_to_noise: 1.0, rate: 1.0 },
                ChannelState { name: "b".into(), gain_to_noise: 1.0, rate: 1.0 },
            ],
            vec![vec![0.5, 0.6], vec![0.5, 0.5]],
        )
        .unwrap_err();
        assert!(err.to_string().contains("transition[0]"), "{err}");
    }

    #[test]
    fn joint_chain_is_product() {
        let a = two_state([[0.7, 0.3], [0.4, 0.6]]);
        let b = two_state([[0.9, 0.1], [0.2, 0.8]]);
        let j = JointChannel::new(&[&a, &b]);
        assert_eq!(j.count(), 4);
        let s = j.encode(&[1, 0]);
        assert_eq!(j.decode(s), vec![1, 0]);
        assert_eq!(j.component(s, 0), 1);
        assert_eq!(j.component(s, 1), 0);
        let t = j.encode(&[0, 1]);
        assert!((j.transition()[s][t] - 0.4 * 0.1).abs() < 1e-12);
        let pi = j.stationary();
        let pa = a.stationary();
        let pb = b.stationary();
        assert!((pi[s] - pa[1] * pb[0]).abs() < 1e-9);
        assert!((pa[0] - 4.0 / 7.0).abs() < 1e-9);
    }
}
