//! Per-joint-channel-state bandwidth prices.

use std::collections::VecDeque;

/// One price update, kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    pub iteration: u64,
    pub s0: usize,
    pub usage: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    lambda0: Vec<f64>,
    counts: Vec<u64>,
    history: VecDeque<PriceRecord>,
    history_cap: usize,
    iteration: u64,
}

impl PriceTable {
    pub fn new(joint_states: usize) -> Self {
        Self::with_history(joint_states, 4096)
    }

    pub fn with_history(joint_states: usize, history_cap: usize) -> Self {
        PriceTable {
            lambda0: vec![0.0; joint_states],
            counts: vec![0; joint_states],
            history: VecDeque::with_capacity(history_cap.min(4096)),
            history_cap,
            iteration: 0,
        }
    }

    /// Table with fixed prices and no update history.
    pub fn fixed(lambda0: Vec<f64>) -> Self {
        let n = lambda0.len();
        PriceTable {
            lambda0,
            counts: vec![0; n],
            history: VecDeque::new(),
            history_cap: 0,
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.lambda0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda0.is_empty()
    }

    pub fn get(&self, s0: usize) -> f64 {
        self.lambda0[s0]
    }

    pub fn prices(&self) -> &[f64] {
        &self.lambda0
    }

    /// Number of updates applied to `s0` so far.
    pub fn count(&self, s0: usize) -> u64 {
        self.counts[s0]
    }

    pub fn visited(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn history(&self) -> impl Iterator<Item = &PriceRecord> {
        self.history.iter()
    }
}

/// Per-packet price of a user: `lambda0 * b / r`.
pub fn user_price(lambda0: f64, rate: f64, bits_per_packet: f64) -> f64 {
    lambda0 * bits_per_packet / rate
}

/// Projected subgradient step on the visited state's price:
/// `lambda <- max(0, lambda + (sum(requests) - B) / (k + 1))`, with `k` the
/// number of earlier updates of that state. Returns the price change.
pub fn update_prices(table: &mut PriceTable, s0: usize, requests: &[f64], bandwidth: f64) -> f64 {
    let usage: f64 = requests.iter().sum();
    let k = table.counts[s0];
    let step = 1.0 / (k as f64 + 1.0);
    let old = table.lambda0[s0];
    let new = (old + step * (usage - bandwidth)).max(0.0);
    table.lambda0[s0] = new;
    table.counts[s0] = k + 1;
    table.iteration += 1;
    if table.history_cap > 0 {
        if table.history.len() == table.history_cap {
            table.history.pop_front();
        }
        table.history.push_back(PriceRecord {
            iteration: table.iteration,
            s0,
            usage,
            lambda: new,
        });
    }
    new - old
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn user_price_examples() {
        assert_eq!(user_price(0.0, 60.0, 1.0), 0.0);
        assert!((user_price(0.5, 60.0, 1.0) - 0.008333).abs() < 1e-6);
        let r = user_price(1.3, 60.0, 1.0) / user_price(1.3, 40.0, 1.0);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn update_examples() {
        let mut t = PriceTable::new(2);
        assert!((update_prices(&mut t, 0, &[0.7, 0.5], 1.0) - 0.2).abs() < 1e-12);
        assert!((t.get(0) - 0.2).abs() < 1e-12);
        assert_eq!(t.get(1), 0.0);
        let before = t.get(0);
        update_prices(&mut t, 0, &[0.5, 0.5], 1.0);
        assert_eq!(t.get(0), before);

        let mut t = PriceTable::fixed(vec![0.02]);
        update_prices(&mut t, 0, &[0.5], 1.0);
        assert_eq!(t.get(0), 0.0);
    }

    #[test]
    fn history_is_bounded() {
        let mut t = PriceTable::with_history(1, 3);
        for _ in 0..10 {
            update_prices(&mut t, 0, &[2.0], 1.0);
        }
        assert_eq!(t.history().count(), 3);
        assert_eq!(t.count(0), 10);
    }
}
